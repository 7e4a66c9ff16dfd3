"""Cusp functions, their squared shift norm, and fBm built from cusp kernels."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate

from .errors import ConfigError, NonPositive, QuadratureFailure, SingularHit, SingularPoint
from .numerics import RngStream, gamma_fn, gaussian_block, ordered_map

__all__ = [
    "CuspParams",
    "q_alpha",
    "gamma_alpha_sq_closed",
    "gamma_alpha_sq_quad",
    "gamma_alpha",
    "shift_norm_sq",
    "theorem1_kernel",
    "theorem1_path",
    "theorem1_paths",
]

QUAD_TOL = 1e-9


@dataclass(frozen=True)
class CuspParams:
    """Shape ``(a*1{x>=0} + b*1{x<0}) * |x|**alpha`` of a cusp singularity."""

    alpha: float
    a: float = 1.0
    b: float = 1.0

    def __post_init__(self):
        if not -0.5 < self.alpha < 0.5:
            raise ConfigError(f"alpha must lie in (-1/2, 1/2), got {self.alpha}")
        if self.a < 0 or self.b < 0:
            raise ConfigError("cusp amplitudes a, b must be >= 0")
        if self.a + self.b == 0:
            raise ConfigError("cusp amplitudes a, b must not both be zero")

    @property
    def H(self) -> float:
        return self.alpha + 0.5

    @property
    def one_sided(self) -> bool:
        return self.a * self.b == 0

    @property
    def degenerate(self) -> bool:
        """Symmetric step: constant signal, no location information."""
        return self.alpha == 0 and self.a == self.b


def q_alpha(p: CuspParams, x):
    """Evaluate the cusp at ``x`` (scalar or array).

    The indicator convention puts ``x = 0`` on the ``a`` side, so the step
    (``alpha = 0``) returns ``a`` there.  For ``alpha < 0`` the centre is a
    pole and raises :class:`SingularPoint`.
    """
    xa = np.asarray(x, dtype=float)
    if p.alpha < 0 and np.any(xa == 0):
        raise SingularPoint("cusp with alpha < 0 evaluated at its centre")
    out = np.where(xa >= 0, p.a, p.b) * np.abs(xa) ** p.alpha
    return float(out) if out.ndim == 0 else out


def gamma_alpha_sq_closed(p: CuspParams) -> float:
    r"""Closed form of :math:`\int (q(y - 1) - q(y))^2 dy` via Gamma functions.

    The symmetric step (``alpha = 0``, ``a = b``) evaluates to exactly 0 and is
    returned as such; callers decide how to report it.
    """
    al = p.alpha
    coef = math.sqrt(math.pi) * gamma_fn(1 + al) / (2 ** (2 * al + 1) * gamma_fn(1.5 + al))
    if p.degenerate:
        return 0.0
    # (a^2+b^2)/cos(pi a) - 2ab rewritten without cancellation near alpha = 0
    excess = 2.0 * math.sin(0.5 * math.pi * al) ** 2 / math.cos(math.pi * al)
    value = coef * ((p.a - p.b) ** 2 + (p.a**2 + p.b**2) * excess)
    if not value >= 0:  # 0.0 only by underflow, which is correctly rounded
        raise NonPositive(f"closed form for {p} evaluated to {value}")
    return value


def _quad(f, lo, hi, **kw):
    return integrate.quad(f, lo, hi, epsabs=1e-14, epsrel=1e-12, limit=400, **kw)


def _alg(f, lo, hi, left, right):
    """Integrate ``f(y) * (y-lo)**left * (hi-y)**right`` with QUADPACK's QAWS rule."""
    return _quad(f, lo, hi, weight="alg", wvar=(left, right))


def _tail_integral(al):
    r""":math:`\int_0^\infty ((s+1)^\alpha - s^\alpha)^2 ds`.

    ``[1, inf)`` is mapped to ``(0, 1]`` by ``s = 1/t`` so no truncation is
    needed; the integrand becomes ``t^(-2a-2) * expm1(a*log1p(t))^2``, which
    behaves like ``t^(-2a)`` at 0 and is carried by the algebraic weight.
    """
    if al == 0:
        return 0.0, 0.0
    ratio = lambda t: (np.expm1(al * np.log1p(t)) / t) ** 2 if t > 0 else al * al
    v1, e1 = _alg(ratio, 0.0, 1.0, -2 * al, 0.0)
    # (1+s)^(2a) + s^(2a) - 2 s^a (1+s)^a on [0, 1]
    v2, e2 = _quad(lambda s_: (1 + s_) ** (2 * al), 0.0, 1.0)
    v3, e3 = _alg(lambda s_: 1.0, 0.0, 1.0, 2 * al, 0.0)
    v4, e4 = _alg(lambda s_: -2.0 * (1 + s_) ** al, 0.0, 1.0, al, 0.0)
    return v1 + v2 + v3 + v4, e1 + e2 + e3 + e4


def _middle_integral(p):
    r""":math:`\int_0^1 (b(1-y)^\alpha - a y^\alpha)^2 dy` with the square expanded."""
    al, a, b = p.alpha, p.a, p.b
    if al == 0:
        return _quad(lambda y: (b - a) ** 2, 0.0, 1.0)
    parts = [
        _alg(lambda y: b * b, 0.0, 1.0, 0.0, 2 * al),
        _alg(lambda y: a * a, 0.0, 1.0, 2 * al, 0.0),
        _alg(lambda y: -2.0 * a * b, 0.0, 1.0, al, al),
    ]
    return sum(v for v, _ in parts), sum(e for _, e in parts)


@lru_cache(maxsize=64)
def _gamma_sq_quad(p: CuspParams) -> float:
    tail, et = _tail_integral(p.alpha)
    mid, em = _middle_integral(p)
    err = (p.a**2 + p.b**2) * et + em
    if not err < QUAD_TOL:
        raise QuadratureFailure(f"quadrature error estimate {err:.2e} for {p}")
    return (p.a**2 + p.b**2) * tail + mid


def gamma_alpha_sq_quad(p: CuspParams) -> float:
    r"""Quadrature of :math:`\int (q(y - 1) - q(y))^2 dy` over the real line.

    The line is cut at 0 and 1.  On ``y > 1`` and ``y < 0`` the integrand is
    ``a^2`` resp. ``b^2`` times the same tail, which is integrated after
    inversion rather than truncated.  Every endpoint power ``|y|^(2 alpha)``
    or ``|y|^alpha`` (poles when ``alpha < 0``) is passed to QUADPACK as an
    algebraic weight so only smooth factors are sampled.
    """
    return _gamma_sq_quad(p)


def gamma_alpha(p: CuspParams) -> float:
    """Normalising constant: square root of the quadrature value."""
    g2 = gamma_alpha_sq_quad(p)
    if not g2 > 0:
        raise NonPositive(f"{p} carries no location information (Gamma_alpha = 0)")
    return math.sqrt(g2)


def shift_norm_sq(p: CuspParams, u: float, s: float = 0.0) -> float:
    r""":math:`\int (q(y-u) - q(y-s))^2 dy = \Gamma_\alpha^2 |u-s|^{2H}`."""
    return gamma_alpha_sq_quad(p) * abs(u - s) ** (2 * p.H)


@dataclass(frozen=True)
class _Cells:
    y_span: float
    n_y: int

    @property
    def dy(self):
        return self.y_span / self.n_y

    def midpoints(self):
        return -0.5 * self.y_span + (np.arange(self.n_y) + 0.5) * self.dy


def theorem1_kernel(p: CuspParams, u_grid, y_span: float, n_y: int) -> np.ndarray:
    """Matrix ``K[k, j] = (q(y_j - u_k) - q(y_j)) / Gamma_alpha`` on cell midpoints.

    Cells tile ``[-y_span/2, y_span/2]``.  Putting every ``u`` on a cell
    boundary keeps midpoints off the poles; a midpoint landing within
    ``1e-9`` cells of a singularity raises :class:`SingularHit`.
    """
    if n_y < 2:
        raise ConfigError("n_y must be >= 2")
    u = np.atleast_1d(np.asarray(u_grid, dtype=float))
    if np.max(np.abs(u)) >= 0.5 * y_span:
        raise ConfigError("y_span must cover max|u| with margin")
    cells = _Cells(float(y_span), int(n_y))
    y = cells.midpoints()
    if p.alpha < 0:
        for c in np.append(u, 0.0):
            off = (c + 0.5 * y_span) / cells.dy - 0.5
            if abs(off - round(off)) < 1e-9:
                raise SingularHit(f"cell midpoint coincides with singularity at y={c}")
    base = q_alpha(p, y)
    kern = np.empty((u.size, y.size))
    for k, uk in enumerate(u):
        kern[k] = q_alpha(p, y - uk) - base if uk != 0 else 0.0
    kern /= gamma_alpha(p)
    return kern


def theorem1_path(p: CuspParams, u_grid, y_span: float, n_y: int, stream: RngStream) -> np.ndarray:
    """One draw of the cusp-kernel stochastic integral at each ``u``.

    Midpoint rule with i.i.d. ``N(0, dy)`` cell increments.  By the
    representation theorem the result is a two-sided fBm with
    ``H = alpha + 1/2``, up to discretisation and truncation.
    """
    kern = theorem1_kernel(p, u_grid, y_span, n_y)
    return kern @ gaussian_block(stream, n_y) * math.sqrt(y_span / n_y)


def theorem1_paths(p: CuspParams, u_grid, y_span: float, n_y: int, n_paths: int,
                   master_seed: int, threads: int = 1) -> np.ndarray:
    """``n_paths`` replicates (rows) of :func:`theorem1_path`; row ``i`` uses stream ``i``."""
    kern = theorem1_kernel(p, u_grid, y_span, n_y)
    scale = math.sqrt(y_span / n_y)

    def one(i):
        return kern @ gaussian_block(RngStream(master_seed, i), n_y) * scale

    return np.vstack(list(ordered_map(one, range(n_paths), threads)))
