"""Limit laws of Bayesian and maximum-likelihood estimators for cusp-type signals.

Submodules
----------
numerics   seeded replicate streams, power-of-two FFTs, thread plumbing
fgn        exact two-sided fBm on equispaced grids (circulant embedding)
cusp       cusp functions, Gamma_alpha, fBm from cusp kernels
limits     Monte Carlo of the two limit variables; exact H = 1/2 and H = 1 laws
modelsim   end-to-end signal-plus-white-noise estimation experiment
analysis   moment accumulators, KDE, KS distances
io, cli    CSV formats and the ``cusp-limits`` command
"""

from .analysis import MomentAccumulator, kde, ks_distance
from .cusp import CuspParams, gamma_alpha, gamma_alpha_sq_closed, gamma_alpha_sq_quad
from .errors import (
    ConfigError,
    CuspLimitsError,
    NumericalError,
    ReplicateError,
)
from .fgn import GridSpec, two_sided_fbm
from .limits import run_limits_mc, yao_tail_cdf
from .modelsim import ModelConfig, run_model_mc
from .numerics import RngStream

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "CuspLimitsError",
    "CuspParams",
    "GridSpec",
    "ModelConfig",
    "MomentAccumulator",
    "NumericalError",
    "ReplicateError",
    "RngStream",
    "gamma_alpha",
    "gamma_alpha_sq_closed",
    "gamma_alpha_sq_quad",
    "kde",
    "ks_distance",
    "run_limits_mc",
    "run_model_mc",
    "two_sided_fbm",
    "yao_tail_cdf",
]
