"""Command-line surface: simulate | fit | map-kld | baseline | experiment.

Batch-oriented: each verb reads/writes files and exits.  Exit codes:
0 success, 2 argument errors, 3 ingestion errors, 4 numerical failures.
Reports are JSON plus CSV curve files; every output embeds the inputs
needed to reproduce it.  File formats are documented in docs/formats.md.
"""

from __future__ import annotations

import json
import os
import sys
from importlib import resources
from pathlib import Path

import click
import numpy as np

from tvfgn import __version__, baselines, evalharness, inference, lgm, mixture
from tvfgn.config import InferenceConfig
from tvfgn.series import IngestError, SeriesData, read_series_csv, write_series_csv

EXIT_INGEST = 3
EXIT_NUMERIC = 4

CONFIG_ENV = "TVFGN_CONFIG"


def _load_inference_config(path: str | None) -> InferenceConfig:
    if path is None:
        path = os.environ.get(CONFIG_ENV)
    if path is None:
        return InferenceConfig()
    return InferenceConfig.from_file(path)


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


@click.group()
@click.version_option(version=__version__)
def main():
    """Early-warning analysis of rising memory in long-range dependent series."""


# ---------------------------------------------------------------------------


@main.command()
@click.option("--h1", type=float, required=True, help="Hurst exponent at the start.")
@click.option("--h2", type=float, required=True, help="Hurst exponent at the end.")
@click.option("--n", type=int, default=None, help="Series length (unit spacing).")
@click.option("--times", type=click.Path(exists=True, dir_okay=False), default=None,
              help="CSV with observation timestamps (first column).")
@click.option("--tau", type=float, default=1.0, show_default=True,
              help="Marginal precision.")
@click.option("--beta", type=float, default=None,
              help="Amplitude slope; enables the logistic time-varying sd.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True,
              help="Output CSV (time,value); a .json sidecar echoes the spec.")
def simulate(h1, h2, n, times, tau, beta, seed, out):
    """Simulate the two-fGn mixture component."""
    if (n is None) == (times is None):
        raise click.UsageError("provide exactly one of --n or --times")
    try:
        if times is not None:
            t = read_series_csv(times).timestamps
        else:
            t = np.arange(1.0, n + 1.0)
        spec = mixture.MixtureSpec(h1=h1, h2=h2, timestamps=t, tau=tau, beta=beta)
    except IngestError as exc:
        _fail(EXIT_INGEST, str(exc))
    except ValueError as exc:
        raise click.UsageError(str(exc))
    values = mixture.simulate_mixture(spec, seed)
    write_series_csv(out, t, values)
    sidecar = dict(
        command="simulate", h1=h1, h2=h2, tau=tau, beta=beta, seed=seed,
        n=int(t.size), source_times=times, version=__version__,
    )
    Path(str(out) + ".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    click.echo(f"wrote {t.size} rows to {out}")


# ---------------------------------------------------------------------------


@main.command()
@click.argument("input_csv", type=click.Path(exists=True, dir_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help=f"Inference config (default: ${CONFIG_ENV}).")
@click.option("--trend/--no-trend", default=False, show_default=True,
              help="Include the smooth random-walk trend component.")
@click.option("--beta/--no-beta", "with_beta", default=False, show_default=True,
              help="Estimate the logistic time-varying standard deviation.")
@click.option("--grid-step", type=float, default=None,
              help="Latent grid step for irregular sampling (default: half the mean gap).")
@click.option("--map-points", type=int, default=21, show_default=True,
              help="Points of the weight-to-Hurst mapped curve.")
@click.option("--out", type=click.Path(dir_okay=False), required=True,
              help="Output JSON report; CSV curves are written alongside.")
def fit(input_csv, config_path, trend, with_beta, grid_step, map_points, out):
    """Fit the time-varying memory model to a series and report the
    early-warning statistic."""
    cfg = _load_inference_config(config_path)
    try:
        raw = read_series_csv(input_csv)
    except IngestError as exc:
        _fail(EXIT_INGEST, str(exc))
    if raw.n < 50:
        _fail(EXIT_INGEST, "need at least 50 observations")
    if raw.n < 200:
        click.echo(
            "warning: series shorter than 200; memory estimates of this kind "
            "are strongly biased at such lengths", err=True,
        )
    series = raw.standardized()
    try:
        spec = lgm.LatentModelSpec(
            timestamps=series.timestamps, trend=trend, intercept=trend,
            grid_step=grid_step,
        )
        post = inference.explore_posterior(spec, series.values, cfg, with_beta=with_beta)
        summaries = inference.marginal_summaries(post)
        pi = inference.prob_increase(post, b=cfg.b_samples, seed=cfg.seed)
    except (inference.InferenceError, lgm.NumericalError) as exc:
        _fail(EXIT_NUMERIC, str(exc))

    mode = post.mode
    h_curve_w = np.linspace(0.0, 1.0, map_points)
    h_curve = [
        mixture.kld_map_weight_to_hurst(w, mode.h1, mode.h2, min(series.n, 512))
        for w in h_curve_w
    ]
    out_path = Path(out)
    stem = out_path.with_suffix("")
    report = dict(
        command="fit",
        input=str(input_csv),
        version=__version__,
        n=series.n,
        standardization=dict(mean=series.mean, sd=series.sd),
        config=vars(cfg).copy(),
        model=dict(trend=trend, beta=with_beta, grid_step=grid_step),
        posterior={
            name: dict(mean=s.mean, sd=s.sd, ci95=[s.ci_low, s.ci_high])
            for name, s in summaries.items()
        },
        p_increase=pi.p_hat,
        h2_minus_h1_ci95=[pi.ci_low, pi.ci_high],
        b_samples=pi.b,
        warnings=list(pi.warnings),
        mode=dict(tau=mode.tau, h1=mode.h1, h2=mode.h2, beta=mode.beta,
                  log_prec_trend=mode.log_prec_trend),
        decision=dict(
            alpha=cfg.threshold_alpha,
            signal=bool(pi.p_hat > 1.0 - cfg.threshold_alpha),
        ),
        curves={},
    )

    curves = {}
    curves["hurst_map"] = _write_curve(
        f"{stem}_hurst_map.csv", ["weight", "hurst"],
        np.column_stack([h_curve_w, h_curve]),
    )
    for name, s in summaries.items():
        curves[f"density_{name}"] = _write_curve(
            f"{stem}_density_{name}.csv", [name, "density"],
            np.column_stack([s.grid, s.density]),
        )
    cond = post.conditional()
    if trend:
        tm = cond.component_mean("trend")
        tv = cond.component_variances("trend")
        icept = cond.component_mean("intercept")[0]
        level = series.destandardize(tm + icept)
        band = 1.96 * np.sqrt(tv) * series.sd
        curves["trend"] = _write_curve(
            f"{stem}_trend.csv", ["time", "mean", "lower", "upper"],
            np.column_stack([spec.grid, level, level - band, level + band]),
        )
    fitted = series.destandardize(cond.predictor_mean())
    curves["fitted"] = _write_curve(
        f"{stem}_fitted.csv", ["time", "fitted", "observed"],
        np.column_stack([series.timestamps, fitted, raw.values]),
    )
    report["curves"] = curves
    out_path.write_text(json.dumps(report, indent=2, sort_keys=True, default=float) + "\n")
    click.echo(
        f"p(H2>H1 | data) = {pi.p_hat:.4f}; "
        f"H1 = {summaries['h1'].mean:.3f}, H2 = {summaries['h2'].mean:.3f}; "
        f"report: {out_path}"
    )


def _write_curve(path, header, rows) -> str:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in np.atleast_2d(rows):
            fh.write(",".join(repr(float(x)) for x in row) + "\n")
    return str(path)


# ---------------------------------------------------------------------------


@main.command("map-kld")
@click.option("--h1", type=float, required=True)
@click.option("--h2", type=float, required=True)
@click.option("--n", type=int, default=512, show_default=True,
              help="Series length defining the covariance size.")
@click.option("--points", type=int, default=21, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def map_kld(h1, h2, n, points, out):
    """Tabulate the KLD mapping from mixture weight to local Hurst exponent."""
    try:
        ws = np.linspace(0.0, 1.0, points)
        hs = [mixture.kld_map_weight_to_hurst(w, h1, h2, n) for w in ws]
    except ValueError as exc:
        raise click.UsageError(str(exc))
    _write_curve(out, ["weight", "hurst"], np.column_stack([ws, hs]))
    click.echo(f"wrote {points} mapping points to {out}")


# ---------------------------------------------------------------------------


@main.command()
@click.argument("input_csv", type=click.Path(exists=True, dir_okay=False))
@click.option("--window", default="n/4", show_default=True,
              help="Window length: integer or 'n/<k>'.")
@click.option("--null-reps", type=int, default=0, show_default=True,
              help="Monte Carlo replicates for the tau_K null quantile "
                   "(0 skips the quantile).")
@click.option("--null-h0", type=float, default=0.75, show_default=True)
@click.option("--level", type=float, default=0.95, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True,
              help="Output JSON report; the window-estimate curve goes alongside.")
def baseline(input_csv, window, null_reps, null_h0, level, seed, out):
    """Sliding-window Hurst estimates, tau_K, its null quantile, and DFA."""
    try:
        series = read_series_csv(input_csv)
    except IngestError as exc:
        _fail(EXIT_INGEST, str(exc))
    n = series.n
    if window.startswith("n/"):
        w = n // int(window[2:])
    else:
        w = int(window)
    try:
        est = baselines.window_hurst(series.values, w)
        tau_k = baselines.kendall_tau(est.valid())
        dfa = baselines.dfa_hurst(series.values) if n >= 200 else None
    except ValueError as exc:
        _fail(EXIT_NUMERIC, str(exc))
    quantile = None
    if null_reps:
        quantile = baselines.tau_null_quantile(
            n, w, h0=null_h0, level=level, reps=null_reps, seed=seed
        )
    out_path = Path(out)
    stem = out_path.with_suffix("")
    curve = _write_curve(
        f"{stem}_window_hurst.csv", ["center", "hurst"],
        np.column_stack([est.centers, est.estimates]),
    )
    report = dict(
        command="baseline", input=str(input_csv), version=__version__,
        n=n, window=int(w), tau_k=tau_k,
        tau_null_quantile=quantile, null_h0=null_h0, level=level,
        null_reps=null_reps, seed=seed,
        dfa_hurst=dfa,
        signal=bool(quantile is not None and tau_k > quantile),
        curves=dict(window_hurst=curve),
    )
    out_path.write_text(json.dumps(report, indent=2, sort_keys=True, default=float) + "\n")
    msg = f"tau_K = {tau_k:.3f}"
    if quantile is not None:
        msg += f" (null {level:.0%} quantile {quantile:.3f})"
    if dfa is not None:
        msg += f"; DFA H = {dfa:.3f}"
    click.echo(msg + f"; report: {out_path}")


# ---------------------------------------------------------------------------


@main.command()
@click.argument("config_name")
@click.option("--outdir", type=click.Path(file_okay=False), required=True)
@click.option("--study", type=click.Choice(["estimation", "classification"]),
              default=None, help="Override the study kind in the config.")
def experiment(config_name, outdir, study):
    """Run a simulation study from a config file or a bundled config name.

    Bundled configs: table1_small, roc_small.
    """
    path = Path(config_name)
    if not path.exists():
        packaged = resources.files("tvfgn.configs").joinpath(f"{config_name}.cfg")
        if not packaged.is_file():
            raise click.UsageError(
                f"no config file {config_name!r} and no bundled config of that name"
            )
        import tempfile

        tmp = tempfile.NamedTemporaryFile("w", suffix=".cfg", delete=False)
        tmp.write(packaged.read_text())
        tmp.close()
        path = Path(tmp.name)
        if study is None:
            study = "estimation" if "table1" in config_name else "classification"
    cfg = evalharness.ExperimentConfig.from_file(path)
    if study is None:
        study = "estimation" if cfg.combos else "classification"
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    try:
        if study == "estimation":
            report = evalharness.run_estimation_study(cfg, outdir=outdir)
            nrows = len(report["rows"])
            click.echo(f"estimation study: {nrows} combinations -> {outdir}")
        else:
            result = evalharness.run_classification_study(cfg, outdir=outdir)
            for n, rep in result["reports"].items():
                click.echo(
                    f"n={n}: AUC p={rep.auc_posterior:.3f} "
                    f"tau={rep.auc_kendall:.3f} -> {outdir}"
                )
    except (inference.InferenceError, lgm.NumericalError) as exc:
        _fail(EXIT_NUMERIC, str(exc))


if __name__ == "__main__":
    main()
