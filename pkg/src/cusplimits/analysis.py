"""Moment accumulators, kernel density curves and Kolmogorov-Smirnov distances."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import TooFewSamples

__all__ = [
    "MomentAccumulator",
    "DensityCurve",
    "silverman_bandwidth",
    "kde",
    "ks_distance",
    "paired_variance_difference",
]

BANDWIDTH_FLOOR = 1e-6


@dataclass
class MomentAccumulator:
    """Running count, mean and central moment sums up to order four.

    ``merge`` uses the pairwise update formulas of Pébay (2008), so batches can
    be combined in any grouping.  ``m3`` is carried only because the fourth
    moment update needs it.
    """

    count: int = 0
    mean: float = 0.0
    m2: float = 0.0
    m3: float = 0.0
    m4: float = 0.0

    @classmethod
    def from_samples(cls, x) -> "MomentAccumulator":
        x = np.asarray(x, dtype=float).ravel()
        n = x.size
        if n == 0:
            return cls()
        mu = float(np.mean(x))
        d = x - mu
        d2 = d * d
        return cls(n, mu, float(d2.sum()), float((d2 * d).sum()), float((d2 * d2).sum()))

    def merge(self, other: "MomentAccumulator") -> "MomentAccumulator":
        na, nb = self.count, other.count
        if na == 0:
            return MomentAccumulator(**vars(other))
        if nb == 0:
            return MomentAccumulator(**vars(self))
        n = na + nb
        delta = other.mean - self.mean
        d_n = delta / n
        mean = self.mean + nb * d_n
        m2 = self.m2 + other.m2 + delta * d_n * na * nb
        m3 = (
            self.m3
            + other.m3
            + delta * d_n * d_n * na * nb * (na - nb)
            + 3.0 * d_n * (na * other.m2 - nb * self.m2)
        )
        m4 = (
            self.m4
            + other.m4
            + delta * d_n**3 * na * nb * (na * na - na * nb + nb * nb)
            + 6.0 * d_n * d_n * (na * na * other.m2 + nb * nb * self.m2)
            + 4.0 * d_n * (na * other.m3 - nb * self.m3)
        )
        return MomentAccumulator(n, mean, m2, m3, m4)

    def __add__(self, other):
        return self.merge(other)

    @property
    def variance(self) -> float:
        return self.m2 / (self.count - 1) if self.count > 1 else math.nan

    @property
    def se_variance(self) -> float:
        """Standard error of the sample variance, sqrt((mu4 - var^2) / n)."""
        if self.count < 2:
            return math.nan
        var = self.variance
        return math.sqrt(max(self.m4 / self.count - var * var, 0.0) / self.count)

    @property
    def se_mean(self) -> float:
        return math.sqrt(self.variance / self.count) if self.count > 1 else math.nan


@dataclass
class DensityCurve:
    x: np.ndarray
    density: np.ndarray
    bandwidth: float
    degenerate: bool = False

    def integral(self) -> float:
        return float(self.cdf()[-1])

    def cdf(self) -> np.ndarray:
        """Cumulative trapezoidal integral of the curve, starting at 0."""
        inc = 0.5 * (self.density[1:] + self.density[:-1]) * np.diff(self.x)
        return np.concatenate([[0.0], np.cumsum(inc)])


def silverman_bandwidth(x) -> float:
    x = np.asarray(x, dtype=float)
    sd = float(np.std(x, ddof=1))
    q75, q25 = np.percentile(x, [75, 25])
    iqr = float(q75 - q25)
    spread = min(sd, iqr / 1.34) if iqr > 0 else sd
    return 1.06 * spread * x.size ** (-0.2)


def kde(samples, n_grid: int = 1024, chunk: int = 256) -> DensityCurve:
    """Gaussian kernel density estimate with Silverman's bandwidth.

    The curve is evaluated on ``n_grid`` equispaced points covering the sample
    range padded by three bandwidths on each side.  A zero bandwidth (constant
    input) is replaced by ``BANDWIDTH_FLOOR`` and the curve is flagged
    ``degenerate``.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 100:
        raise TooFewSamples(f"kde needs at least 100 samples, got {x.size}")
    h = silverman_bandwidth(x)
    degenerate = not h > 0
    if degenerate:
        h = BANDWIDTH_FLOOR
    grid = np.linspace(x.min() - 3 * h, x.max() + 3 * h, n_grid)
    dens = np.empty(n_grid)
    norm = 1.0 / (x.size * h * math.sqrt(2 * math.pi))
    for lo in range(0, n_grid, chunk):
        z = (grid[lo:lo + chunk, None] - x[None, :]) / h
        dens[lo:lo + chunk] = np.exp(-0.5 * z * z).sum(axis=1) * norm
    return DensityCurve(grid, dens, h, degenerate)


def ks_distance(a, b: np.ndarray | Callable[[np.ndarray], np.ndarray]) -> float:
    """Sup-distance between the empirical CDF of ``a`` and ``b``.

    ``b`` is either a second sample or a vectorised CDF callable.
    """
    a = np.sort(np.asarray(a, dtype=float).ravel())
    if a.size == 0:
        raise TooFewSamples("ks_distance needs a nonempty sample")
    n = a.size
    if callable(b):
        f = np.asarray(b(a), dtype=float)
        i = np.arange(1, n + 1)
        return float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))
    b = np.sort(np.asarray(b, dtype=float).ravel())
    if b.size == 0:
        raise TooFewSamples("ks_distance needs a nonempty sample")
    pts = np.concatenate([a, b])
    fa = np.searchsorted(a, pts, side="right") / n
    fb = np.searchsorted(b, pts, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def paired_variance_difference(x, y) -> tuple[float, float]:
    """Var(x) - Var(y) for paired samples and its standard error.

    The error treats each pair's squared deviations as one observation, which
    keeps the correlation of common-random-number samples.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = (x - x.mean()) ** 2 - (y - y.mean()) ** 2
    n = d.size
    return float(d.sum() / (n - 1)), float(d.std(ddof=1) / math.sqrt(n))
