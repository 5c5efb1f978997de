"""Time series container and CSV ingestion shared by the CLI and the engine."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np


class IngestError(ValueError):
    """Raised when an input series file cannot be parsed or validated."""


@dataclass(frozen=True)
class SeriesData:
    """Timestamps plus values with standardization metadata.

    ``mean`` and ``sd`` record the transform already applied to ``values``
    (zeros/ones when raw), so model outputs can be mapped back to the
    original scale.
    """

    timestamps: np.ndarray
    values: np.ndarray
    mean: float = 0.0
    sd: float = 1.0
    source: str = ""
    _validated: bool = field(default=False, repr=False, compare=False)

    def __post_init__(self):
        t = np.asarray(self.timestamps, dtype=float)
        y = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or y.ndim != 1 or t.size != y.size:
            raise IngestError("timestamps and values must be 1-d and equally long")
        if t.size < 2:
            raise IngestError("series needs at least two observations")
        if not np.all(np.isfinite(y)):
            bad = int(np.flatnonzero(~np.isfinite(y))[0])
            raise IngestError(f"non-finite value at row {bad + 1}")
        if not np.all(np.isfinite(t)):
            bad = int(np.flatnonzero(~np.isfinite(t))[0])
            raise IngestError(f"non-finite timestamp at row {bad + 1}")
        dt = np.diff(t)
        if np.any(dt <= 0):
            bad = int(np.flatnonzero(dt <= 0)[0])
            raise IngestError(
                f"timestamps must be strictly increasing (violated at row {bad + 2})"
            )
        object.__setattr__(self, "timestamps", t)
        object.__setattr__(self, "values", y)
        object.__setattr__(self, "_validated", True)

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def is_regular(self) -> bool:
        dt = np.diff(self.timestamps)
        return bool(np.allclose(dt, dt[0], rtol=1e-9, atol=1e-12))

    def standardized(self) -> "SeriesData":
        """Center and scale to unit variance, recording the transform."""
        mu = float(self.values.mean())
        sd = float(self.values.std(ddof=0))
        if sd <= 0:
            raise IngestError("series is constant; cannot standardize")
        return replace(
            self,
            values=(self.values - mu) / sd,
            mean=self.mean + self.sd * mu,
            sd=self.sd * sd,
        )

    def destandardize(self, values: np.ndarray) -> np.ndarray:
        """Map model-scale values back to the original data scale."""
        return self.mean + self.sd * np.asarray(values, dtype=float)


def read_series_csv(path) -> SeriesData:
    """Read a (time, value) or single-column CSV; header row optional.

    A single column implies unit spacing.  Parse failures report the
    offending row number.
    """
    times: list[float] = []
    values: list[float] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for idx, row in enumerate(reader, start=1):
            row = [c.strip() for c in row if c.strip() != ""]
            if not row:
                continue
            try:
                fields = [float(c) for c in row]
            except ValueError:
                if idx == 1:
                    continue  # header
                raise IngestError(f"row {idx}: cannot parse {row!r}") from None
            if len(fields) == 1:
                values.append(fields[0])
            elif len(fields) == 2:
                times.append(fields[0])
                values.append(fields[1])
            else:
                raise IngestError(f"row {idx}: expected 1 or 2 columns, got {len(fields)}")
    if not values:
        raise IngestError("no data rows found")
    if times and len(times) != len(values):
        raise IngestError("mixed 1- and 2-column rows")
    t = np.asarray(times) if times else np.arange(1.0, len(values) + 1.0)
    return SeriesData(timestamps=t, values=np.asarray(values), source=str(path))


def write_series_csv(path, timestamps, values, header=("time", "value")) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if header:
            writer.writerow(header)
        for t, y in zip(timestamps, values):
            writer.writerow([repr(float(t)), repr(float(y))])
