"""Simulation studies: estimation accuracy, classification metrics, ROC/AUC.

Reproduces the estimation-accuracy table (posterior means, RMSE and the
proportion of replicates with rising estimates), the random-pair
classification experiment comparing the posterior statistic against the
sliding-window Kendall baseline, and the ROC/AUC curves, at configurable
replicate counts.  All randomness derives from one master seed and
results are reduced in replicate order, so reports are reproducible
byte for byte.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from tvfgn import baselines, inference, lgm, mixture
from tvfgn.config import InferenceConfig, parse_config_file


@dataclass
class ExperimentConfig:
    """Scale and seeds for one study run."""

    lengths: tuple = (200, 500, 1000)
    combos: tuple = ()  # (h1, h2) pairs; empty means random draws
    n_replicates: int = 50
    master_seed: int = 20240801
    alpha: float = 0.05
    tau: float = 1.0
    b_samples: int = 20_000
    window_divisor: int = 4
    null_h0: float = 0.75
    null_reps: int = 1000
    null_level: float = 0.95
    m: int = 4
    inference: InferenceConfig = field(default_factory=InferenceConfig)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        raw = parse_config_file(path)
        kwargs = {}
        if "lengths" in raw:
            kwargs["lengths"] = tuple(int(x) for x in raw["lengths"].split(","))
        if "combos" in raw:
            pairs = []
            for tok in raw["combos"].split(","):
                a, b = tok.split(":")
                pairs.append((float(a), float(b)))
            kwargs["combos"] = tuple(pairs)
        for key, cast in [
            ("n_replicates", int), ("master_seed", int), ("alpha", float),
            ("tau", float), ("b_samples", int), ("window_divisor", int),
            ("null_h0", float), ("null_reps", int), ("null_level", float),
            ("m", int),
        ]:
            if key in raw:
                kwargs[key] = cast(raw[key])
        cfg = cls(**kwargs)
        cfg.inference = InferenceConfig.from_dict(raw)
        return cfg


def _fit_series(y: np.ndarray, n: int, cfg: ExperimentConfig, sample_seed: int):
    """Standardize, explore the posterior, and return (h1 mean, h2 mean, p_hat)."""
    y = (y - y.mean()) / y.std()
    spec = _spec_cache(n, cfg.m)
    post = inference.explore_posterior(spec, y, cfg.inference)
    summ = inference.marginal_summaries(post)
    pi = inference.prob_increase(post, b=cfg.b_samples, seed=sample_seed)
    return summ["h1"].mean, summ["h2"].mean, pi.p_hat


_SPEC_CACHE: dict = {}


def _spec_cache(n: int, m: int) -> lgm.LatentModelSpec:
    if (n, m) not in _SPEC_CACHE:
        _SPEC_CACHE[(n, m)] = lgm.LatentModelSpec(
            timestamps=np.arange(1.0, n + 1.0), m=m
        )
    return _SPEC_CACHE[(n, m)]


# ---------------------------------------------------------------------------
# estimation study


def run_estimation_study(cfg: ExperimentConfig, outdir=None) -> dict:
    """Posterior-mean accuracy per (length, H1, H2) combination.

    Returns a dict with one row per combination: mean posterior means,
    frequentist RMSEs and the proportion of replicates with hat_H2 >
    hat_H1.  Failed replicates are recorded and excluded.
    """
    if not cfg.combos:
        raise ValueError("estimation study needs explicit (h1, h2) combinations")
    rows = []
    records = []
    for n in cfg.lengths:
        for h1, h2 in cfg.combos:
            est1, est2, fails = [], [], 0
            for rep in range(cfg.n_replicates):
                ss = np.random.SeedSequence(
                    [cfg.master_seed, int(n), int(round(1000 * h1)),
                     int(round(1000 * h2)), rep]
                )
                sim_seed, fit_seed = ss.spawn(2)
                mspec = mixture.MixtureSpec(
                    h1=h1, h2=h2, timestamps=np.arange(1.0, n + 1.0),
                    tau=cfg.tau, m=cfg.m,
                )
                y = mixture.simulate_mixture(mspec, sim_seed)
                try:
                    m1, m2, p_hat = _fit_series(
                        y, n, cfg, sample_seed=fit_seed.entropy
                    )
                except (inference.InferenceError, lgm.NumericalError) as exc:
                    fails += 1
                    records.append(dict(n=n, h1=h1, h2=h2, rep=rep,
                                        error=str(exc)))
                    continue
                est1.append(m1)
                est2.append(m2)
                records.append(dict(n=n, h1=h1, h2=h2, rep=rep,
                                    hat_h1=m1, hat_h2=m2, p_hat=p_hat))
            est1 = np.asarray(est1)
            est2 = np.asarray(est2)
            rows.append(dict(
                n=int(n), h1=h1, h2=h2,
                hat_h1=float(est1.mean()) if est1.size else np.nan,
                hat_h2=float(est2.mean()) if est2.size else np.nan,
                rmse1=float(np.sqrt(np.mean((est1 - h1) ** 2))) if est1.size else np.nan,
                rmse2=float(np.sqrt(np.mean((est2 - h2) ** 2))) if est2.size else np.nan,
                prop_increase=float(np.mean(est2 > est1)) if est1.size else np.nan,
                n_ok=int(est1.size), n_failed=fails,
            ))
    report = dict(kind="estimation", config=_config_echo(cfg), rows=rows)
    if outdir is not None:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        _write_csv(outdir / "estimation.csv", rows)
        _write_csv(outdir / "estimation_records.csv", records)
        _write_json(outdir / "estimation_summary.json", report)
    return report


# ---------------------------------------------------------------------------
# classification study


@dataclass(frozen=True)
class ClassificationReport:
    """Threshold metrics and ROC/AUC for both statistics at one length."""

    n: int
    tau_threshold: float
    metrics_posterior: dict
    metrics_kendall: dict
    auc_posterior: float
    auc_kendall: float
    roc_posterior: tuple
    roc_kendall: tuple
    records: tuple


def _threshold_metrics(scores, labels, threshold) -> dict:
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=bool)
    pred = scores > threshold
    tp = int(np.sum(pred & labels))
    fp = int(np.sum(pred & ~labels))
    fn = int(np.sum(~pred & labels))
    tn = int(np.sum(~pred & ~labels))

    def ratio(num, den):
        return float(num / den) if den else float("nan")

    return dict(
        threshold=float(threshold),
        tpr=ratio(tp, tp + fn), fpr=ratio(fp, fp + tn),
        ppv=ratio(tp, tp + fp), npv=ratio(tn, tn + fn),
        tp=tp, fp=fp, fn=fn, tn=tn,
    )


def roc_curve(scores, labels):
    """ROC sweep over the unique score thresholds plus the trapezoid AUC.

    Equal scores collapse into a single threshold step.  Returns
    (fpr, tpr, thresholds, auc); needs both classes present.
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=bool)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError("scores and labels must be equal-length vectors")
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("both classes must be present")
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    lab = labels[order]
    # one step per distinct score value
    distinct = np.flatnonzero(np.diff(s)) if s.size > 1 else np.array([], int)
    ends = np.concatenate([distinct, [s.size - 1]])
    tp = np.cumsum(lab)[ends]
    fp = np.cumsum(~lab)[ends]
    tpr = np.concatenate([[0.0], tp / n_pos])
    fpr = np.concatenate([[0.0], fp / n_neg])
    thresholds = np.concatenate([[np.inf], s[ends]])
    auc = float(np.trapz(tpr, fpr))
    return fpr, tpr, thresholds, auc


def run_classification_study(
    cfg: ExperimentConfig,
    null_quantiles: dict[int, float] | None = None,
    outdir=None,
) -> dict:
    """Random-(H1, H2) classification comparing p-hat and tau_K.

    Draws the two Hurst exponents independently and uniformly from the
    supported range, simulates the mixture, fits both the model and the
    sliding-window baseline, thresholds (p-hat at 1 - alpha, tau_K at its
    Monte Carlo null quantile) and computes ROC/AUC for both statistics.
    """
    reports = {}
    quantiles = dict(null_quantiles or {})
    for n in cfg.lengths:
        w = max(10, n // cfg.window_divisor)
        if n not in quantiles:
            quantiles[n] = baselines.tau_null_quantile(
                n, w, h0=cfg.null_h0, level=cfg.null_level,
                reps=cfg.null_reps,
                seed=np.random.SeedSequence([cfg.master_seed, n, 7]).entropy % (2**31),
            )
        records = []
        for rep in range(cfg.n_replicates):
            ss = np.random.SeedSequence([cfg.master_seed, int(n), 1, rep])
            draw_seed, sim_seed, fit_seed = ss.spawn(3)
            rng = np.random.default_rng(draw_seed)
            h1, h2 = rng.uniform(0.50, 0.99, size=2)
            mspec = mixture.MixtureSpec(
                h1=h1, h2=h2, timestamps=np.arange(1.0, n + 1.0),
                tau=cfg.tau, m=cfg.m,
            )
            y = mixture.simulate_mixture(mspec, sim_seed)
            rec = dict(n=int(n), rep=rep, h1=float(h1), h2=float(h2),
                       label=bool(h2 > h1))
            try:
                _, _, p_hat = _fit_series(y, n, cfg, sample_seed=fit_seed.entropy)
                rec["p_hat"] = float(p_hat)
            except (inference.InferenceError, lgm.NumericalError) as exc:
                rec["error"] = str(exc)
            est = baselines.window_hurst(y, w)
            rec["tau_k"] = baselines.kendall_tau(est.valid())
            records.append(rec)
        ok = [r for r in records if "p_hat" in r]
        labels = np.array([r["label"] for r in ok])
        p_scores = np.array([r["p_hat"] for r in ok])
        t_scores = np.array([r["tau_k"] for r in ok])
        fpr_p, tpr_p, thr_p, auc_p = roc_curve(p_scores, labels)
        fpr_t, tpr_t, thr_t, auc_t = roc_curve(t_scores, labels)
        reports[int(n)] = ClassificationReport(
            n=int(n),
            tau_threshold=float(quantiles[n]),
            metrics_posterior=_threshold_metrics(p_scores, labels, 1.0 - cfg.alpha),
            metrics_kendall=_threshold_metrics(t_scores, labels, quantiles[n]),
            auc_posterior=auc_p,
            auc_kendall=auc_t,
            roc_posterior=(fpr_p.tolist(), tpr_p.tolist(), thr_p.tolist()),
            roc_kendall=(fpr_t.tolist(), tpr_t.tolist(), thr_t.tolist()),
            records=tuple(records),
        )
    summary = dict(
        kind="classification",
        config=_config_echo(cfg),
        null_quantiles={str(k): float(v) for k, v in quantiles.items()},
        results={
            str(n): dict(
                tau_threshold=r.tau_threshold,
                metrics_posterior=r.metrics_posterior,
                metrics_kendall=r.metrics_kendall,
                auc_posterior=r.auc_posterior,
                auc_kendall=r.auc_kendall,
            )
            for n, r in reports.items()
        },
    )
    if outdir is not None:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        metric_rows = []
        for n, r in reports.items():
            for method, metr, auc in [
                ("posterior", r.metrics_posterior, r.auc_posterior),
                ("kendall", r.metrics_kendall, r.auc_kendall),
            ]:
                metric_rows.append(dict(n=n, method=method, auc=auc, **metr))
            for method, roc in [("phat", r.roc_posterior), ("tauk", r.roc_kendall)]:
                rows = [
                    dict(fpr=f, tpr=t, threshold=th)
                    for f, t, th in zip(*roc)
                ]
                _write_csv(outdir / f"roc_{method}_n{n}.csv", rows)
            _write_csv(outdir / f"classification_records_n{n}.csv", list(r.records))
        _write_csv(outdir / "classification_metrics.csv", metric_rows)
        _write_json(outdir / "classification_summary.json", summary)
    return dict(summary=summary, reports=reports)


# ---------------------------------------------------------------------------
# output helpers


def _config_echo(cfg: ExperimentConfig) -> dict:
    echo = asdict(cfg)
    echo["lengths"] = list(cfg.lengths)
    echo["combos"] = [list(c) for c in cfg.combos]
    return echo


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path, rows: list[dict]) -> None:
    keys: list[str] = []
    for row in rows:
        for k in row:
            if k not in keys:
                keys.append(k)
    with open(path, "w") as fh:
        fh.write(",".join(keys) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(row.get(k, "")) for k in keys) + "\n")


def _write_json(path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")
