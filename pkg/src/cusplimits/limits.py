"""Monte Carlo for the Bayesian and maximum-likelihood limit laws.

For a discretised fBm path ``W`` the two limit variables are approximated by

* ``zeta_hat``: the ``u``-mean of ``exp(W_u - |u|^{2H}/2)`` with trapezoidal
  weights on ``[-T, T]``;
* ``xi_hat``: the grid node maximising ``W_u - |u|^{2H}/2``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import integrate, special, stats

from .analysis import MomentAccumulator
from .errors import ConfigError, DegenerateDenominator, NumericalError, ReplicateError
from .fgn import FbmGrid, GridSpec, check_hurst, two_sided_fbm
from .numerics import RngStream, ordered_map, resolve_threads

__all__ = [
    "LimitSample",
    "McSummary",
    "LimitsRun",
    "zeta_hat",
    "xi_hat",
    "limit_sample",
    "run_limits_mc",
    "yao_tail_cdf",
    "yao_abs_cdf",
    "yao_moment",
    "h1_reference_law",
    "default_grid",
    "MIN_HURST",
    "VALIDATED_HURST",
    "CHUNK",
]

MIN_HURST = 0.05
VALIDATED_HURST = 0.3
CHUNK = 64


class UnvalidatedRegime(UserWarning):
    pass


@dataclass
class LimitSample:
    zeta_hat: float
    xi_hat: float
    max_exponent: float
    argmax_index: int


@dataclass
class McSummary:
    H: float
    N: int
    grid: GridSpec
    var_zeta: float
    se_var_zeta: float
    var_xi: float
    se_var_xi: float
    mean_zeta: float
    mean_xi: float

    @classmethod
    def from_moments(cls, H, grid, zeta: MomentAccumulator, xi: MomentAccumulator):
        return cls(H, zeta.count, grid, zeta.variance, zeta.se_variance,
                   xi.variance, xi.se_variance, zeta.mean, xi.mean)

    @property
    def var_ratio(self) -> float:
        return self.var_xi / self.var_zeta


@dataclass
class LimitsRun:
    summary: McSummary
    zeta: np.ndarray | None
    xi: np.ndarray | None


def default_grid(H: float) -> GridSpec:
    """Desk-scale grid: wider and finer for ``H < 1/2`` where the laws spread out."""
    if H >= 0.5:
        return GridSpec(2**16, 1000.0)
    return GridSpec(2**18, 1.0e4)


@lru_cache(maxsize=8)
def _grid_terms(H: float, m: int, T: float):
    spec = GridSpec(m, T)
    u = spec.nodes()
    drift = 0.5 * np.abs(u) ** (2 * H)
    w = np.full(u.size, spec.delta)
    w[0] = w[-1] = 0.5 * spec.delta
    for a in (u, drift, w):
        a.setflags(write=False)
    return u, drift, w


def _exponent(path: FbmGrid, H: float):
    u, drift, w = _grid_terms(float(H), path.spec.m, float(path.spec.T))
    return u, path.values - drift, w


def _zeta_from_exponent(u, e, w, shift):
    z = np.exp(e - shift) * w
    den = z.sum()
    if not den > 0:
        raise DegenerateDenominator("stabilised denominator vanished")
    return float(np.dot(u, z) / den)


def zeta_hat(path: FbmGrid, H: float, stabilise: bool = True) -> float:
    """Trapezoidal posterior-mean functional of one path.

    ``exp(max exponent)`` is divided out of both sums; ``stabilise=False``
    skips that and can overflow for long spans.
    """
    u, e, w = _exponent(path, H)
    return _zeta_from_exponent(u, e, w, float(e.max()) if stabilise else 0.0)


def _argmax_tiebreak(e, m):
    j = int(np.argmax(e))
    top = e[j]
    ties = np.flatnonzero(e == top)
    if ties.size > 1:
        # smallest |u|, then the negative side
        j = int(min(ties, key=lambda i: (abs(i - m), i)))
    return j


def xi_hat(path: FbmGrid, H: float) -> float:
    """Grid argmax of ``W_u - |u|^{2H}/2``.

    Exact ties (a discretisation artefact) go to the node with the smallest
    ``|u|``, then to the negative side.
    """
    u, e, _ = _exponent(path, H)
    return float(u[_argmax_tiebreak(e, path.spec.m)])


def limit_sample(path: FbmGrid, H: float) -> LimitSample:
    u, e, w = _exponent(path, H)
    top = float(e.max())
    j = _argmax_tiebreak(e, path.spec.m)
    return LimitSample(_zeta_from_exponent(u, e, w, top), float(u[j]), top, j - path.spec.m)


def _check_limits_hurst(H):
    H = check_hurst(H)
    if H < MIN_HURST:
        raise ConfigError(f"H must be >= {MIN_HURST} for limit simulations, got {H}")
    if H < VALIDATED_HURST:
        warnings.warn(f"H={H} < {VALIDATED_HURST}: unvalidated regime", UnvalidatedRegime)
    return H


def run_limits_mc(
    H: float,
    spec: GridSpec,
    N: int,
    master_seed: int,
    threads: int | None = None,
    keep_samples: bool = True,
    on_chunk: Callable[[int, np.ndarray, np.ndarray], None] | None = None,
) -> LimitsRun:
    """Simulate ``N`` replicates of ``(zeta_hat, xi_hat)``.

    Replicate ``i`` draws from stream ``(master_seed, i)``.  Work is cut into
    fixed chunks of :data:`CHUNK` replicates whose moment accumulators are
    merged in chunk order, so the summary does not depend on ``threads``.
    ``on_chunk(start, zeta, xi)`` is called in replicate order, which lets
    callers stream raw samples to disk.
    """
    H = _check_limits_hurst(H)
    if N < 2:
        raise ConfigError("N must be >= 2")
    threads = resolve_threads(threads)

    def work(start):
        stop = min(start + CHUNK, N)
        zs = np.empty(stop - start)
        xs = np.empty(stop - start)
        for k, i in enumerate(range(start, stop)):
            try:
                s = limit_sample(two_sided_fbm(H, spec, RngStream(master_seed, i)), H)
            except NumericalError as exc:
                raise ReplicateError(i, exc) from exc
            zs[k], xs[k] = s.zeta_hat, s.xi_hat
        return start, zs, xs

    acc_z, acc_x = MomentAccumulator(), MomentAccumulator()
    kept_z, kept_x = [], []
    for start, zs, xs in ordered_map(work, range(0, N, CHUNK), threads):
        acc_z = acc_z.merge(MomentAccumulator.from_samples(zs))
        acc_x = acc_x.merge(MomentAccumulator.from_samples(xs))
        if on_chunk is not None:
            on_chunk(start, zs, xs)
        if keep_samples:
            kept_z.append(zs)
            kept_x.append(xs)
    summary = McSummary.from_moments(H, spec, acc_z, acc_x)
    if keep_samples:
        return LimitsRun(summary, np.concatenate(kept_z), np.concatenate(kept_x))
    return LimitsRun(summary, None, None)


_SQRT2 = math.sqrt(2.0)


def yao_tail_cdf(t):
    """``P(|xi_{1/2}| > t)`` for the argmax of two-sided BM with drift ``-|u|/2``.

    Both normal tails are written as ``erfcx(x) * exp(-x^2)`` so that the
    ``e^t`` factor on the last term cancels analytically; a common
    ``exp(-t/8)`` is pulled out front.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ConfigError("yao_tail_cdf needs t >= 0")
    rt = np.sqrt(t)
    inner = (
        0.5 * (t + 5.0) * special.erfcx(rt / (2 * _SQRT2))
        - np.sqrt(2.0 * t / math.pi)
        - 1.5 * special.erfcx(3.0 * rt / (2 * _SQRT2))
    )
    p = np.clip(np.exp(-t / 8.0) * inner, 0.0, 1.0)
    return float(p) if p.ndim == 0 else p


def yao_abs_cdf(t):
    """CDF of ``|xi_{1/2}|``; zero for negative arguments."""
    t = np.asarray(t, dtype=float)
    out = np.where(t > 0, 1.0 - yao_tail_cdf(np.maximum(t, 0.0)), 0.0)
    return float(out) if out.ndim == 0 else out


def yao_moment(k: int = 2) -> float:
    """``E|xi_{1/2}|^k = int_0^inf k t^{k-1} P(|xi| > t) dt`` by quadrature."""
    f = lambda t: k * t ** (k - 1) * yao_tail_cdf(t)
    total = 0.0
    for lo, hi in ((0.0, 1.0), (1.0, 20.0), (20.0, 200.0), (200.0, np.inf)):
        v, _ = integrate.quad(f, lo, hi, epsabs=1e-13, epsrel=1e-12, limit=200)
        total += v
    return total


def h1_reference_law():
    """Common law of both limit variables at ``H = 1``: the standard normal."""
    return stats.norm(loc=0.0, scale=1.0)
