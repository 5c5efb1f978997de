"""Plain key = value configuration files for inference and experiments."""

from __future__ import annotations

from dataclasses import dataclass, fields


def parse_config_file(path) -> dict[str, str]:
    """Parse `key = value` lines; '#' starts a comment; blank lines ignored."""
    out: dict[str, str] = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
            key, val = line.split("=", 1)
            out[key.strip()] = val.strip()
    return out


@dataclass
class InferenceConfig:
    """Priors, exploration layout and sampling controls for one fit."""

    # PC prior for both Hurst exponents: P(H > hurst_u) = hurst_alpha at the
    # reference length
    hurst_u: float = 0.9
    hurst_alpha: float = 0.1
    hurst_n_ref: int = 100
    # PC prior for the mixture precision: P(sigma > prec_u) = prec_alpha
    prec_u: float = 1.0
    prec_alpha: float = 0.01
    # PC prior for the trend precision (when a trend component is used)
    trend_u: float = 1.0
    trend_alpha: float = 0.01
    # posterior exploration
    strategy: str = "grid"  # grid | ccd
    grid_delta: float = 1.2
    grid_drop: float = 4.5
    ccd_f0: float = 1.1
    cap_scale: float | str = "auto"
    max_opt_iter: int = 100
    # decision statistic
    b_samples: int = 100_000
    threshold_alpha: float = 0.05
    seed: int = 0

    @classmethod
    def from_file(cls, path) -> "InferenceConfig":
        return cls.from_dict(parse_config_file(path))

    @classmethod
    def from_dict(cls, raw: dict[str, str]) -> "InferenceConfig":
        kwargs = {}
        known = {f.name: f.type for f in fields(cls)}
        for key, val in raw.items():
            if key not in known:
                continue
            if key == "strategy":
                kwargs[key] = val
            elif key == "cap_scale":
                kwargs[key] = val if val == "auto" else float(val)
            elif key in ("hurst_n_ref", "max_opt_iter", "b_samples", "seed"):
                kwargs[key] = int(val)
            else:
                kwargs[key] = float(val)
        return cls(**kwargs)

    def validate(self) -> "InferenceConfig":
        if self.strategy not in ("grid", "ccd"):
            raise ValueError(f"unknown exploration strategy {self.strategy!r}")
        if not 0 < self.threshold_alpha < 1:
            raise ValueError("threshold_alpha must lie in (0, 1)")
        if self.b_samples < 10_000:
            raise ValueError("b_samples must be at least 10000")
        return self
