"""Time-dependent boundary forcing: tidal elevation and uniform wind.

File formats (whitespace separated, `#` comments, strictly increasing t):

    tide:  t eta          two columns
    wind:  t v1 v2        three columns

Values are interpolated linearly in time; requests outside the sampled
range are a fault, never extrapolated.
"""
from __future__ import annotations

import numpy as np


class ForcingError(ValueError):
    """Malformed forcing file or time outside the sampled range."""


class TimeSeries:
    """Piecewise-linear series of one or more columns over time."""

    def __init__(self, times, values, name="series"):
        self.times = np.asarray(times, dtype=float)
        self.values = np.asarray(values, dtype=float)
        self.name = name
        if self.values.ndim == 1:
            self.values = self.values[:, None]
        if self.times.ndim != 1 or self.times.shape[0] != self.values.shape[0]:
            raise ForcingError(f"{name}: times/values length mismatch")
        if self.times.size == 0:
            raise ForcingError(f"{name}: empty series")
        if self.times.size > 1 and np.any(np.diff(self.times) <= 0.0):
            raise ForcingError(f"{name}: times must be strictly increasing")
        self.constant = self.times.size == 1

    @classmethod
    def constant_value(cls, values, name="constant"):
        return cls([0.0], [np.atleast_1d(values)], name=name)

    def at(self, t: float) -> np.ndarray:
        if self.constant:
            return self.values[0]
        if not (self.times[0] <= t <= self.times[-1]):
            raise ForcingError(
                f"{self.name}: t={t:g} s outside sampled range "
                f"[{self.times[0]:g}, {self.times[-1]:g}]")
        k = int(np.searchsorted(self.times, t, side="right")) - 1
        k = min(max(k, 0), self.times.size - 2)
        t0, t1 = self.times[k], self.times[k + 1]
        w = (t - t0) / (t1 - t0)
        return (1.0 - w) * self.values[k] + w * self.values[k + 1]


def _load_columns(path, ncols, name):
    rows = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            toks = line.split()
            if len(toks) != ncols:
                raise ForcingError(f"{path}:{lineno}: expected {ncols} columns")
            try:
                rows.append([float(tok) for tok in toks])
            except ValueError:
                raise ForcingError(f"{path}:{lineno}: bad number") from None
    if not rows:
        raise ForcingError(f"{path}: no samples")
    data = np.array(rows)
    return TimeSeries(data[:, 0], data[:, 1:], name=name)


def load_tide(path) -> TimeSeries:
    """Two-column `t eta` series for the open boundary."""
    return _load_columns(path, 2, f"tide {path}")


def load_wind(path) -> TimeSeries:
    """Three-column `t v1 v2` spatially uniform wind velocity."""
    return _load_columns(path, 3, f"wind {path}")


class Forcings:
    """Bundle of optional tide/wind series with quiet-zero defaults."""

    def __init__(self, tide: TimeSeries | None = None, wind: TimeSeries | None = None):
        self.tide = tide if tide is not None else TimeSeries.constant_value(0.0, "tide=0")
        self.wind = wind if wind is not None else TimeSeries.constant_value((0.0, 0.0), "wind=0")

    def tide_at(self, t) -> float:
        return float(self.tide.at(t)[0])

    def wind_at(self, t):
        v = self.wind.at(t)
        return float(v[0]), float(v[1])
