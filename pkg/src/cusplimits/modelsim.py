"""Cusp location estimation in the signal-plus-white-noise model.

Observations ``dX_t = S(t, theta) dt + eps dw_t`` on ``[0, T_obs]`` are
discretised on midpoint cells.  The log-likelihood ratio

    l(u) = eps^-2 sum S(t_i, u) dX_i - (2 eps^2)^-1 sum S(t_i, u)^2 dt

is evaluated on an equispaced grid of candidate locations.  The MLE refines
the grid argmax by golden-section search; the Pitman estimator is the
trapezoidal posterior mean under a flat prior.  Errors are reported on the
natural scale ``phi_eps = (eps / Gamma_alpha)^(1/H)``.

When the parameter grid sits on time-cell boundaries (the default
configuration does) ``sum q(t_i - u_k) dX_i`` for all ``k`` is a
cross-correlation and costs two FFTs per path.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Callable

import numpy as np
import scipy.fft

from .analysis import MomentAccumulator
from .cusp import CuspParams, gamma_alpha, q_alpha
from .errors import ConfigError, DegenerateDenominator, NumericalError, ReplicateError
from .numerics import RngStream, gaussian_block, next_power_of_two, ordered_map, resolve_threads

__all__ = [
    "ModelConfig",
    "ObservationPath",
    "EstimateResult",
    "ModelSummary",
    "ModelRun",
    "signal_value",
    "simulate_path",
    "log_likelihood",
    "log_likelihood_grid",
    "golden_section_max",
    "mle_estimate",
    "pitman_estimate",
    "estimate",
    "run_model_mc",
    "nlrp_drift",
    "rate_slope",
]

SmoothTerm = Callable[[np.ndarray, np.ndarray], np.ndarray]

DENSE_CAP = 2**23
CHUNK = 32


class UnderResolved(UserWarning):
    pass


@dataclass(frozen=True)
class ModelConfig:
    """One signal-plus-white-noise experiment.

    ``n_t`` midpoint time cells cover ``[0, t_obs]``; ``n_u`` cells (so
    ``n_u + 1`` nodes) cover the parameter interval ``[theta1, theta2]``.
    ``smooth`` is an optional nuisance ``h(t, theta)`` that must broadcast
    over numpy arrays.  ``eps = 0`` is accepted for noiseless paths only.
    """

    cusp: CuspParams
    theta: float
    theta1: float
    theta2: float
    t_obs: float
    eps: float
    n_t: int = 2**14
    n_u: int = 2**12
    smooth: SmoothTerm | None = None

    def __post_init__(self):
        if not 0 < self.theta1 < self.theta2 < self.t_obs:
            raise ConfigError("0 < θ₁ < θ₂ < T_obs violated")
        if not self.theta1 < self.theta < self.theta2:
            raise ConfigError("θ_true ∈ (θ₁, θ₂) violated")
        if not self.eps >= 0:
            raise ConfigError("ε ≥ 0 violated")
        if self.n_t < 2 or self.n_u < 2:
            raise ConfigError("n_t ≥ 2 and n_u ≥ 2 violated")

    @property
    def H(self) -> float:
        return self.cusp.H

    @property
    def dt(self) -> float:
        return self.t_obs / self.n_t

    @property
    def du(self) -> float:
        return (self.theta2 - self.theta1) / self.n_u

    @cached_property
    def gamma_alpha(self) -> float:
        return gamma_alpha(self.cusp)

    @property
    def phi_eps(self) -> float:
        return (self.eps / self.gamma_alpha) ** (1.0 / self.H)

    def midpoints(self) -> np.ndarray:
        return (np.arange(self.n_t) + 0.5) * self.dt

    def u_nodes(self) -> np.ndarray:
        return self.theta1 + np.arange(self.n_u + 1) * self.du

    def resolution_warning(self) -> str | None:
        if self.eps > 0 and self.dt > self.phi_eps / 10:
            return (f"time step {self.dt:.3g} exceeds phi_eps/10 = {self.phi_eps / 10:.3g}; "
                    "the cusp is under-resolved at the estimation scale")
        return None


@dataclass
class ObservationPath:
    increments: np.ndarray


@dataclass
class EstimateResult:
    mle: float
    pitman: float
    normalized_mle: float
    normalized_pitman: float
    phi_eps: float


@dataclass
class ModelSummary:
    H: float
    N: int
    eps: float
    n_t: int
    n_u: int
    var_pitman: float
    se_var_pitman: float
    var_mle: float
    se_var_mle: float
    mean_pitman: float
    mean_mle: float


@dataclass
class ModelRun:
    config: ModelConfig
    summary: ModelSummary
    mle: np.ndarray
    pitman: np.ndarray
    normalized_mle: np.ndarray
    normalized_pitman: np.ndarray


def _smooth(cfg: ModelConfig, t, u):
    return np.broadcast_to(cfg.smooth(t, u), np.broadcast(t, u).shape)


def signal_value(cfg: ModelConfig, t, theta):
    """``S(t, theta) = q_alpha(t - theta) + h(t, theta)``."""
    t = np.asarray(t, dtype=float)
    s = q_alpha(cfg.cusp, t - theta)
    if cfg.smooth is not None:
        s = s + _smooth(cfg, t, np.asarray(theta, dtype=float))
    return s


class _Design:
    """Path-independent pieces of the likelihood for one configuration."""

    def __init__(self, cfg: ModelConfig):
        self.t = cfg.midpoints()
        self.u = cfg.u_nodes()
        dt = cfg.dt
        r = cfg.du / dt
        j0 = cfg.theta1 / dt
        self.aligned = abs(r - round(r)) < 1e-9 and abs(j0 - round(j0)) < 1e-9
        n = cfg.n_t
        if self.aligned:
            self.lags = int(round(j0)) + int(round(r)) * np.arange(cfg.n_u + 1)
            d = np.arange(-n, n)
            g = q_alpha(cfg.cusp, (d + 0.5) * dt)[::-1]
            self.nfft = next_power_of_two(2 * n)
            self.g_hat = scipy.fft.rfft(g, self.nfft)
            qsq = self._correlate(np.ones(n), scipy.fft.rfft(g * g, self.nfft)) * dt
            self.qmat = None
        else:
            self.qmat = self._dense(lambda t, u: q_alpha(cfg.cusp, t - u), cfg)
            qsq = self._rowsum(lambda t, u: q_alpha(cfg.cusp, t - u) ** 2, cfg) * dt
        if cfg.smooth is None:
            self.hmat = None
            self.sq = qsq
        else:
            self.hmat = self._dense(lambda t, u: _smooth(cfg, t, u), cfg)
            cross = self._rowsum(
                lambda t, u: 2 * q_alpha(cfg.cusp, t - u) * _smooth(cfg, t, u)
                + _smooth(cfg, t, u) ** 2, cfg)
            self.sq = qsq + cross * dt
        self.cfg = cfg

    def _correlate(self, x, kernel_hat):
        n = x.size
        full = scipy.fft.irfft(scipy.fft.rfft(x, self.nfft) * kernel_hat, self.nfft)
        return full[n - 1 + self.lags]

    def _blocks(self, cfg):
        step = max(1, DENSE_CAP // (4 * cfg.n_t))
        for lo in range(0, self.u.size, step):
            yield lo, self.u[lo:lo + step, None]

    def _dense(self, fn, cfg):
        if self.u.size * cfg.n_t > DENSE_CAP:
            return None
        return np.ascontiguousarray(fn(self.t[None, :], self.u[:, None]))

    def _rowsum(self, fn, cfg):
        out = np.empty(self.u.size)
        for lo, ub in self._blocks(cfg):
            out[lo:lo + ub.shape[0]] = fn(self.t[None, :], ub).sum(axis=1)
        return out

    def _matvec(self, mat, fn, x):
        if mat is not None:
            return mat @ x
        out = np.empty(self.u.size)
        for lo, ub in self._blocks(self.cfg):
            out[lo:lo + ub.shape[0]] = fn(self.t[None, :], ub) @ x
        return out

    def signal_dot(self, x):
        """``sum_i S(t_i, u_k) x_i`` for every parameter node ``u_k``."""
        cfg = self.cfg
        if self.aligned:
            out = self._correlate(x, self.g_hat)
        else:
            out = self._matvec(self.qmat, lambda t, u: q_alpha(cfg.cusp, t - u), x)
        if cfg.smooth is not None:
            out = out + self._matvec(self.hmat, lambda t, u: _smooth(cfg, t, u), x)
        return out


@lru_cache(maxsize=8)
def _design(key) -> _Design:
    return _Design(key)


def _design_for(cfg: ModelConfig) -> _Design:
    # eps and theta do not enter the design; share it across them
    key = ModelConfig(cfg.cusp, cfg.theta1 + 0.5 * (cfg.theta2 - cfg.theta1), cfg.theta1,
                      cfg.theta2, cfg.t_obs, 0.0, cfg.n_t, cfg.n_u, cfg.smooth)
    return _design(key)


@lru_cache(maxsize=8)
def _drift(cfg: ModelConfig) -> np.ndarray:
    d = signal_value(cfg, cfg.midpoints(), cfg.theta) * cfg.dt
    d.setflags(write=False)
    return d


def simulate_path(cfg: ModelConfig, stream: RngStream) -> ObservationPath:
    """Euler-Maruyama increments ``S(t_i, theta) dt + eps sqrt(dt) Z_i``."""
    incr = _drift(cfg).copy()
    if cfg.eps > 0:
        incr += cfg.eps * math.sqrt(cfg.dt) * gaussian_block(stream, cfg.n_t)
    return ObservationPath(incr)


def _require_noise(cfg):
    if not cfg.eps > 0:
        raise ConfigError("likelihood needs ε > 0")


def log_likelihood(cfg: ModelConfig, path: ObservationPath, u: float) -> float:
    """Discretised log-likelihood ratio at a single candidate ``u``."""
    _require_noise(cfg)
    s = signal_value(cfg, cfg.midpoints(), u)
    e2 = cfg.eps**2
    return float(np.dot(s, path.increments) / e2 - np.dot(s, s) * cfg.dt / (2 * e2))


def log_likelihood_grid(cfg: ModelConfig, path: ObservationPath) -> tuple[np.ndarray, np.ndarray]:
    """Nodes ``u_k`` and ``l(u_k)`` over the whole parameter grid."""
    _require_noise(cfg)
    des = _design_for(cfg)
    e2 = cfg.eps**2
    return des.u, des.signal_dot(path.increments) / e2 - des.sq / (2 * e2)


_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section_max(f, a: float, b: float, tol: float):
    """Golden-section search for a maximum of ``f`` on ``[a, b]``.

    Stops once the bracket is narrower than ``tol`` and returns the best
    ``(x, f(x))`` seen, which assumes ``f`` is unimodal on the bracket.
    """
    best = (None, -math.inf)

    def ev(x):
        nonlocal best
        y = f(x)
        if y > best[1]:
            best = (x, y)
        return y

    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = ev(c), ev(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = ev(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = ev(d)
    return best


def mle_estimate(cfg: ModelConfig, path: ObservationPath, grid=None) -> float:
    """Grid argmax of the likelihood refined between its two neighbour nodes.

    Coarse ties resolve toward ``theta1``.  The refinement runs down to
    ``phi_eps / 100`` and keeps the coarse node if nothing beats it.
    """
    u, ell = grid if grid is not None else log_likelihood_grid(cfg, path)
    k = int(np.argmax(ell))
    lo, hi = u[max(k - 1, 0)], u[min(k + 1, u.size - 1)]
    x, y = golden_section_max(lambda v: log_likelihood(cfg, path, v), lo, hi, cfg.phi_eps / 100)
    return float(x) if y > ell[k] else float(u[k])


def pitman_estimate(cfg: ModelConfig, path: ObservationPath, grid=None) -> float:
    """Posterior mean under a flat prior, trapezoidal over the parameter grid."""
    u, ell = grid if grid is not None else log_likelihood_grid(cfg, path)
    w = np.exp(ell - ell.max())
    w[0] *= 0.5
    w[-1] *= 0.5
    den = w.sum()
    if not den > 0:
        raise DegenerateDenominator("posterior weights vanished")
    return float(np.clip(np.dot(u, w) / den, cfg.theta1, cfg.theta2))


def estimate(cfg: ModelConfig, path: ObservationPath) -> EstimateResult:
    grid = log_likelihood_grid(cfg, path)
    mle = mle_estimate(cfg, path, grid)
    pit = pitman_estimate(cfg, path, grid)
    phi = cfg.phi_eps
    return EstimateResult(mle, pit, (mle - cfg.theta) / phi, (pit - cfg.theta) / phi, phi)


def run_model_mc(cfg: ModelConfig, N: int, master_seed: int, threads: int | None = None,
                 on_chunk=None) -> ModelRun:
    """``N`` replicates of both estimators driven by the same noise (stream ``i``).

    A single replicate is allowed (smoke runs); its variances are NaN.
    """
    if N < 1:
        raise ConfigError("N must be >= 1")
    _require_noise(cfg)
    threads = resolve_threads(threads)
    msg = cfg.resolution_warning()
    if msg:
        warnings.warn(msg, UnderResolved)
    _design_for(cfg)

    def work(start):
        stop = min(start + CHUNK, N)
        out = np.empty((stop - start, 2))
        for k, i in enumerate(range(start, stop)):
            try:
                res = estimate(cfg, simulate_path(cfg, RngStream(master_seed, i)))
            except NumericalError as exc:
                raise ReplicateError(i, exc) from exc
            out[k] = res.mle, res.pitman
        return start, out

    phi = cfg.phi_eps
    acc_m, acc_p = MomentAccumulator(), MomentAccumulator()
    parts = []
    for start, out in ordered_map(work, range(0, N, CHUNK), threads):
        acc_m = acc_m.merge(MomentAccumulator.from_samples((out[:, 0] - cfg.theta) / phi))
        acc_p = acc_p.merge(MomentAccumulator.from_samples((out[:, 1] - cfg.theta) / phi))
        if on_chunk is not None:
            on_chunk(start, out, phi)
        parts.append(out)
    est = np.vstack(parts)
    summary = ModelSummary(cfg.H, N, cfg.eps, cfg.n_t, cfg.n_u,
                           acc_p.variance, acc_p.se_variance, acc_m.variance, acc_m.se_variance,
                           acc_p.mean, acc_m.mean)
    return ModelRun(cfg, summary, est[:, 0], est[:, 1],
                    (est[:, 0] - cfg.theta) / phi, (est[:, 1] - cfg.theta) / phi)


def nlrp_drift(cfg: ModelConfig, u: float) -> float:
    """Deterministic part of the normalised log-likelihood ratio at ``u``.

    ``(2 eps^2)^-1 sum (S(t_i, theta - phi u) - S(t_i, theta))^2 dt``; tends
    to ``|u|^{2H} / 2`` as ``eps -> 0``.
    """
    _require_noise(cfg)
    t = cfg.midpoints()
    diff = signal_value(cfg, t, cfg.theta - cfg.phi_eps * u) - signal_value(cfg, t, cfg.theta)
    return float(np.dot(diff, diff) * cfg.dt / (2 * cfg.eps**2))


def rate_slope(eps_values, spreads) -> float:
    """Least-squares slope of ``log spread`` on ``log eps``."""
    x = np.log(np.asarray(eps_values, dtype=float))
    y = np.log(np.asarray(spreads, dtype=float))
    return float(np.polyfit(x, y, 1)[0])
