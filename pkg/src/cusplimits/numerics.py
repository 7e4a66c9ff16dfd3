"""Random streams, special functions and the FFT contract.

Every Monte Carlo replicate draws from its own :class:`RngStream`, keyed by
``(master_seed, stream_index)``.  The stream is expanded through
:class:`numpy.random.SeedSequence`, which hashes the pair into the PCG64
state, so replicate ``i`` sees the same variates no matter which worker runs
it or in which order.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, TypeVar

import numpy as np
from scipy import special

from .errors import ConfigError

__all__ = [
    "RngStream",
    "gaussian_block",
    "fft_forward",
    "fft_inverse",
    "real_fft_roundtrip",
    "is_power_of_two",
    "next_power_of_two",
    "std_normal_cdf",
    "gamma_fn",
    "ZETA3",
    "resolve_threads",
    "ordered_map",
]

_U64 = 1 << 64

ZETA3 = 1.2020569031595943
THREADS_ENV = "CUSP_LIMITS_THREADS"

T = TypeVar("T")
R = TypeVar("R")


@dataclass(frozen=True)
class RngStream:
    """Value-like handle on one deterministic normal stream."""

    master_seed: int
    stream_index: int = 0

    def __post_init__(self):
        for name in ("master_seed", "stream_index"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or not 0 <= v < _U64:
                raise ConfigError(f"{name} must be an unsigned 64-bit integer, got {v!r}")

    def generator(self) -> np.random.Generator:
        """Fresh generator positioned at the start of this stream."""
        seq = np.random.SeedSequence(int(self.master_seed), spawn_key=(int(self.stream_index),))
        return np.random.Generator(np.random.PCG64(seq))


def gaussian_block(stream: RngStream, n: int) -> np.ndarray:
    """First ``n`` standard normals of ``stream``."""
    if n < 1:
        raise ConfigError("n must be >= 1")
    return stream.generator().standard_normal(int(n))


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def next_power_of_two(n: int) -> int:
    return 1 << max(0, int(n - 1).bit_length())


def _check_pow2(n):
    if not is_power_of_two(n):
        raise ConfigError(f"transform length must be a power of two, got {n}")


def fft_forward(x) -> np.ndarray:
    """Unnormalised forward DFT of a power-of-two length sequence."""
    x = np.asarray(x)
    _check_pow2(x.shape[-1])
    return np.fft.fft(x)


def fft_inverse(X) -> np.ndarray:
    X = np.asarray(X)
    _check_pow2(X.shape[-1])
    return np.fft.ifft(X)


def real_fft_roundtrip(x) -> np.ndarray:
    """Forward then inverse real transform; returns ``x`` up to rounding."""
    x = np.asarray(x, dtype=float)
    _check_pow2(x.shape[-1])
    return np.fft.irfft(np.fft.rfft(x), n=x.shape[-1])


def std_normal_cdf(t):
    """Standard normal CDF, scalar or array."""
    if np.ndim(t) == 0:
        return 0.5 * math.erfc(-float(t) / math.sqrt(2.0))
    return special.ndtr(np.asarray(t, dtype=float))


def gamma_fn(x):
    if np.ndim(x) == 0:
        return math.gamma(float(x))
    return special.gamma(np.asarray(x, dtype=float))


def resolve_threads(threads: int | None = None) -> int:
    """Worker count from the argument, else ``$CUSP_LIMITS_THREADS``, else 1."""
    if threads is None:
        env = os.environ.get(THREADS_ENV)
        if env:
            try:
                threads = int(env)
            except ValueError:
                raise ConfigError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
        else:
            threads = 1
    if threads < 1:
        raise ConfigError("thread count must be >= 1")
    return threads


def ordered_map(fn: Callable[[T], R], items: Iterable[T], threads: int = 1) -> Iterator[R]:
    """Map ``fn`` over ``items`` on ``threads`` workers, yielding in input order.

    Results are consumed in order, so anything folded over them is independent
    of the worker count.  numpy releases the GIL inside FFTs, ufuncs and the
    normal fill loops, which is where replicate time is spent.
    """
    if threads <= 1:
        for item in items:
            yield fn(item)
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        yield from pool.map(fn, items)
