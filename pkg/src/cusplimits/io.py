"""Fixed-header CSV outputs and flat ``key = value`` run configs.

Reals are written with 17 significant digits so files round-trip doubles
exactly and reruns can be compared byte for byte.
"""

from __future__ import annotations

import math
import os
from typing import Iterable, Mapping

from .analysis import DensityCurve
from .errors import ConfigError
from .limits import McSummary
from .modelsim import ModelSummary

LIMITS_SUMMARY_HEADER = "H,N,m,T,var_zeta,se_var_zeta,var_xi,se_var_xi,mean_zeta,mean_xi"
LIMITS_RAW_HEADER = "replicate,zeta_hat,xi_hat"
MODEL_SUMMARY_HEADER = ("H,N,eps,n_t,n_u,var_pitman,se_var_pitman,var_mle,se_var_mle,"
                        "mean_pitman,mean_mle")
MODEL_RAW_HEADER = "replicate,mle,pitman,normalized_mle,normalized_pitman"
DENSITY_HEADER = "x,density"
FIG1A_HEADER = "H,log_var_zeta"
FIG1B_HEADER = "H,var_ratio"


def fmt(x) -> str:
    if isinstance(x, (int,)) and not isinstance(x, bool):
        return str(x)
    return format(float(x), ".17g")


def row(*values) -> str:
    return ",".join(fmt(v) for v in values) + "\n"


def limits_summary_row(s: McSummary) -> str:
    return row(s.H, s.N, s.grid.m, s.grid.T, s.var_zeta, s.se_var_zeta,
               s.var_xi, s.se_var_xi, s.mean_zeta, s.mean_xi)


def write_limits_summary(path, summaries: Iterable[McSummary]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(LIMITS_SUMMARY_HEADER + "\n")
        for s in summaries:
            fh.write(limits_summary_row(s))


def write_model_summary(path, s: ModelSummary) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(MODEL_SUMMARY_HEADER + "\n")
        fh.write(row(s.H, s.N, s.eps, s.n_t, s.n_u, s.var_pitman, s.se_var_pitman,
                     s.var_mle, s.se_var_mle, s.mean_pitman, s.mean_mle))


def write_density(path, curve: DensityCurve) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(DENSITY_HEADER + "\n")
        for x, y in zip(curve.x, curve.density):
            fh.write(row(x, y))


def write_pairs(path, header: str, pairs) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(header + "\n")
        for a, b in pairs:
            fh.write(row(a, b))


def write_fig1(out_dir, summaries: Iterable[McSummary]) -> None:
    summaries = list(summaries)
    write_pairs(os.path.join(out_dir, "fig1a.csv"), FIG1A_HEADER,
                [(s.H, math.log(s.var_zeta)) for s in summaries])
    write_pairs(os.path.join(out_dir, "fig1b.csv"), FIG1B_HEADER,
                [(s.H, s.var_ratio) for s in summaries])


def read_limits_raw(path):
    """Columns ``zeta_hat`` and ``xi_hat`` of a raw limits CSV."""
    import numpy as np

    with open(path) as fh:
        header = fh.readline().strip()
        if header != LIMITS_RAW_HEADER:
            raise ConfigError(f"{path}: expected header {LIMITS_RAW_HEADER!r}, got {header!r}")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    return data[:, 1], data[:, 2]


def parse_config_text(text: str, allowed: Iterable[str]) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment.  Unknown keys are an error."""
    allowed = set(allowed)
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected 'key = value'")
        key, value = (p.strip() for p in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in allowed:
            raise ConfigError(f"config line {lineno}: unknown key {key!r}")
        out[key] = value
    return out


def write_run_config(path, resolved: Mapping[str, object]) -> None:
    """Echo resolved settings; the file can be fed back through ``--config``.

    Floats use the shortest repr that round-trips, so the file reads back to
    the same doubles.
    """
    with open(path, "w", newline="") as fh:
        for key in sorted(resolved):
            value = resolved[key]
            if isinstance(value, bool):
                value = str(value).lower()
            elif isinstance(value, float):
                value = repr(value)
            elif isinstance(value, (list, tuple)):
                value = ",".join(repr(v) if isinstance(v, float) else str(v) for v in value)
            fh.write(f"{key} = {value}\n")
