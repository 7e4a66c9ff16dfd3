"""Two-sided fractional Brownian motion on an equispaced grid.

Paths are built from one run of fractional Gaussian noise sampled exactly by
circulant embedding (Davies-Harte / Wood-Chan), cumulated and re-pinned at
the centre node.  Doing it this way keeps the dependence between the two
halves; gluing two independent one-sided paths would only be right at
``H = 1/2``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft
import scipy.linalg

from .errors import CirculantNotPSD, ConfigError, CovarianceNotPD
from .numerics import RngStream, gaussian_block, next_power_of_two

__all__ = [
    "GridSpec",
    "FbmGrid",
    "check_hurst",
    "fgn_autocovariance",
    "circulant_eigenvalues",
    "fgn_sample",
    "two_sided_fbm",
    "fbm_covariance",
    "cholesky_fbm_oracle",
    "write_path_csv",
]

EIG_TOL = 1e-9
CHOLESKY_MAX_NODES = 512
CHOLESKY_JITTER = 1e-12


def check_hurst(H: float) -> float:
    H = float(H)
    if not 0.0 < H <= 1.0:
        raise ConfigError(f"Hurst parameter must lie in (0, 1], got {H}")
    return H


@dataclass(frozen=True)
class GridSpec:
    """Grid ``u_j = j*T/m`` for ``j = -m..m``."""

    m: int
    T: float

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise ConfigError(f"m must be a positive integer, got {self.m}")
        if not self.T > 0:
            raise ConfigError(f"span T must be > 0, got {self.T}")

    @property
    def delta(self) -> float:
        return self.T / self.m

    @property
    def size(self) -> int:
        return 2 * self.m + 1

    @property
    def center(self) -> int:
        return self.m

    def nodes(self) -> np.ndarray:
        return np.arange(-self.m, self.m + 1) * self.T / self.m


@dataclass
class FbmGrid:
    spec: GridSpec
    H: float
    values: np.ndarray

    @property
    def nodes(self) -> np.ndarray:
        return self.spec.nodes()


def fgn_autocovariance(H, delta, k):
    """Autocovariance of fGn increments of spacing ``delta`` at lag ``k``."""
    k = np.abs(np.asarray(k, dtype=float))
    h2 = 2.0 * H
    g = 0.5 * (np.abs(k + 1) ** h2 - 2 * k ** h2 + np.abs(k - 1) ** h2) * delta ** h2
    return float(g) if g.ndim == 0 else g


@lru_cache(maxsize=16)
def _unit_eigenvalues(H: float, n: int) -> np.ndarray:
    size = next_power_of_two(2 * n)
    half = size // 2
    row = fgn_autocovariance(H, 1.0, np.arange(half + 1))
    circ = np.concatenate([row, row[-2:0:-1]])
    lam = np.fft.rfft(circ).real
    top = lam.max()
    if lam.min() < -EIG_TOL * top:
        raise CirculantNotPSD(
            f"circulant embedding of fGn(H={H}, n={n}) has eigenvalue {lam.min():.3e}"
        )
    lam = np.clip(lam, 0.0, None)
    lam.setflags(write=False)
    return lam


def circulant_eigenvalues(H: float, n: int, delta: float = 1.0) -> np.ndarray:
    """Eigenvalues ``lambda_0..lambda_{M/2}`` of the minimal fGn embedding.

    ``M`` is the first power of two that is at least ``2n``; the remaining
    eigenvalues follow by symmetry.  Values in ``[-1e-9 * max, 0)`` are
    clamped to zero and anything below raises :class:`CirculantNotPSD`.
    """
    return _unit_eigenvalues(check_hurst(H), int(n)) * delta ** (2 * H)


def _spectral_amplitudes(H, n):
    lam = _unit_eigenvalues(H, n)
    size = 2 * (lam.size - 1)
    # sqrt(M) from the irfft normalisation folded in
    amp = np.sqrt(lam * size)
    amp[1:-1] *= np.sqrt(0.5)
    return amp, size


def fgn_sample(H: float, n: int, delta: float, stream: RngStream) -> np.ndarray:
    """``n`` exact fGn variates with spacing ``delta``.

    Uses ``M`` normals from ``stream``: the real parts of the Hermitian
    spectrum take the first half, the imaginary parts the rest.
    """
    H = check_hurst(H)
    if n < 1:
        raise ConfigError("n must be >= 1")
    amp, size = _spectral_amplitudes(H, int(n))
    half = size // 2
    z = gaussian_block(stream, size)
    spec = np.empty(half + 1, dtype=complex)
    spec.real[0] = z[0]
    spec.real[half] = z[1]
    spec.imag[0] = spec.imag[half] = 0.0
    spec.real[1:half] = z[2:half + 1]
    spec.imag[1:half] = z[half + 1:]
    spec *= amp
    x = scipy.fft.irfft(spec, n=size)[:n]
    return x * delta ** H


def two_sided_fbm(H: float, spec: GridSpec, stream: RngStream) -> FbmGrid:
    """fBm on ``spec``'s grid with ``W(0) = 0`` exactly."""
    m = spec.m
    incr = fgn_sample(H, 2 * m, spec.delta, stream)
    b = np.empty(2 * m + 1)
    b[0] = 0.0
    np.cumsum(incr, out=b[1:])
    w = b - b[m]
    w[m] = 0.0
    return FbmGrid(spec, float(H), w)


def fbm_covariance(H, u, s):
    u = np.asarray(u, dtype=float)
    s = np.asarray(s, dtype=float)
    h2 = 2.0 * H
    return 0.5 * (np.abs(u) ** h2 + np.abs(s) ** h2 - np.abs(u - s) ** h2)


@lru_cache(maxsize=8)
def _cholesky_factor(H: float, m: int, T: float) -> np.ndarray:
    u = GridSpec(m, T).nodes()
    u = np.delete(u, m)
    cov = fbm_covariance(H, u[:, None], u[None, :])
    try:
        return scipy.linalg.cholesky(cov, lower=True)
    except np.linalg.LinAlgError:
        pass
    jitter = CHOLESKY_JITTER * float(np.max(np.diag(cov)))
    try:
        return scipy.linalg.cholesky(cov + jitter * np.eye(u.size), lower=True)
    except np.linalg.LinAlgError as exc:
        raise CovarianceNotPD(f"fBm covariance (H={H}, m={m}) not positive definite") from exc


def cholesky_fbm_oracle(H: float, spec: GridSpec, stream: RngStream) -> FbmGrid:
    """Reference fBm draw from the Cholesky factor of the grid covariance."""
    H = check_hurst(H)
    if spec.size > CHOLESKY_MAX_NODES:
        raise ConfigError(f"Cholesky oracle limited to {CHOLESKY_MAX_NODES} nodes")
    factor = _cholesky_factor(H, spec.m, float(spec.T))
    inner = factor @ gaussian_block(stream, 2 * spec.m)
    w = np.insert(inner, spec.m, 0.0)
    return FbmGrid(spec, H, w)


def write_path_csv(path: FbmGrid, fh) -> None:
    fh.write("u,w\n")
    for u, w in zip(path.nodes, path.values):
        fh.write(f"{u:.17g},{w:.17g}\n")
