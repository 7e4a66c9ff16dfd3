import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cusplimits.analysis import ks_distance, paired_variance_difference
from cusplimits.errors import ConfigError
from cusplimits.fgn import FbmGrid, GridSpec, two_sided_fbm
from cusplimits.limits import (
    UnvalidatedRegime,
    default_grid,
    h1_reference_law,
    limit_sample,
    run_limits_mc,
    xi_hat,
    yao_abs_cdf,
    yao_moment,
    yao_tail_cdf,
    zeta_hat,
)
from cusplimits.numerics import ZETA3, RngStream


def _yao_mp(t):
    """Tail probability of |xi_1/2| from the original three-term formula."""
    with mpmath.workdps(40):
        t = mpmath.mpf(t)
        r = mpmath.sqrt(t)
        val = ((t + 5) * mpmath.ncdf(-r / 2) - mpmath.sqrt(2 * t / mpmath.pi) * mpmath.exp(-t / 8)
               - 3 * mpmath.exp(t) * mpmath.ncdf(-3 * r / 2))
        return float(val)


def _zero_path(H, m=64, T=4.0):
    spec = GridSpec(m, T)
    return FbmGrid(spec, H, np.zeros(spec.size))


@pytest.mark.parametrize("H", [0.3, 0.5, 0.75, 1.0])
def test_zero_path(H):
    w = _zero_path(H)
    assert abs(zeta_hat(w, H)) < 1e-14
    assert xi_hat(w, H) == 0.0


def test_stabilisation_is_exact():
    spec = GridSpec(512, 10.0)
    for i in range(20):
        w = two_sided_fbm(0.6, spec, RngStream(3, i))
        a, b = zeta_hat(w, 0.6), zeta_hat(w, 0.6, stabilise=False)
        assert abs(a - b) <= 1e-12 * max(abs(b), 1e-300)


def test_unstabilised_overflows_where_stabilised_does_not():
    spec = GridSpec(64, 4.0)
    w = FbmGrid(spec, 0.5, np.full(spec.size, 800.0))
    w.values[64] = 0.0
    assert math.isfinite(zeta_hat(w, 0.5))
    with np.errstate(over="ignore", invalid="ignore"):
        assert not math.isfinite(zeta_hat(w, 0.5, stabilise=False))


def test_argmax_tiebreak():
    # H = 1/2 on a unit grid keeps every drift value exactly representable
    spec = GridSpec(8, 8.0)
    u = spec.nodes()
    v = 0.5 * np.abs(u)
    for j in (8 - 5, 8 - 2, 8 + 2, 8 + 5):
        v[j] += 1.0
    v[8] = 0.0
    w = FbmGrid(spec, 0.5, v)
    assert xi_hat(w, 0.5) == -2.0
    s = limit_sample(w, 0.5)
    assert s.argmax_index == -2 and s.max_exponent == 1.0


def test_limit_sample_consistent():
    w = two_sided_fbm(0.7, GridSpec(256, 10.0), RngStream(2, 5))
    s = limit_sample(w, 0.7)
    assert s.zeta_hat == zeta_hat(w, 0.7) and s.xi_hat == xi_hat(w, 0.7)


def test_hurst_range():
    spec = GridSpec(16, 1.0)
    with pytest.raises(ConfigError):
        run_limits_mc(0.04, spec, 10, 1)
    with pytest.raises(ConfigError):
        run_limits_mc(0.5, spec, 1, 1)
    with pytest.warns(UnvalidatedRegime):
        run_limits_mc(0.2, spec, 4, 1)


def test_default_grid():
    assert default_grid(0.5) == GridSpec(2**16, 1000.0)
    assert default_grid(0.99) == GridSpec(2**16, 1000.0)
    assert default_grid(0.3) == GridSpec(2**18, 1.0e4)


def test_threads_and_streaming_do_not_change_results():
    spec = GridSpec(1024, 30.0)
    seen = []
    a = run_limits_mc(0.8, spec, 150, 11, threads=1,
                      on_chunk=lambda start, z, x: seen.append((start, z.copy(), x.copy())))
    b = run_limits_mc(0.8, spec, 150, 11, threads=3, keep_samples=False)
    assert a.summary == b.summary and b.zeta is None
    assert [s for s, _, _ in seen] == [0, 64, 128]
    assert np.array_equal(np.concatenate([z for _, z, _ in seen]), a.zeta)
    assert math.isclose(a.summary.var_zeta, np.var(a.zeta, ddof=1), rel_tol=1e-10)
    assert math.isclose(a.summary.var_xi, np.var(a.xi, ddof=1), rel_tol=1e-10)


def test_replicate_matches_direct_draw():
    spec = GridSpec(512, 20.0)
    run = run_limits_mc(0.7, spec, 5, 4)
    for i in range(5):
        s = limit_sample(two_sided_fbm(0.7, spec, RngStream(4, i)), 0.7)
        assert run.zeta[i] == s.zeta_hat and run.xi[i] == s.xi_hat


def test_yao_values():
    assert yao_tail_cdf(0.0) == 1.0
    assert abs(yao_tail_cdf(1.0) - 0.602291) < 1e-5
    t = np.array([0.01, 0.5, 1.0, 4.0, 20.0, 80.0, 300.0])
    oracle = np.array([_yao_mp(v) for v in t])
    assert np.allclose(yao_tail_cdf(t), oracle, rtol=1e-12, atol=1e-300)


@settings(max_examples=50)
@given(st.floats(0.0, 500.0), st.floats(0.0, 500.0))
def test_yao_tail_monotone(s, t):
    lo, hi = min(s, t), max(s, t)
    assert 0.0 <= yao_tail_cdf(hi) <= yao_tail_cdf(lo) <= 1.0


def test_yao_moments():
    assert abs(yao_moment(2) / 26.0 - 1) < 1e-4
    # first absolute moment, for the record
    assert abs(yao_moment(1) - 3.0) < 1e-8


def test_yao_abs_cdf():
    assert yao_abs_cdf(-1.0) == 0.0
    assert yao_abs_cdf(0.0) == 0.0
    assert yao_abs_cdf(1.0) == pytest.approx(1 - 0.6022921752, abs=1e-9)
    with pytest.raises(ConfigError):
        yao_tail_cdf(-0.5)


def test_h1_law_is_standard_normal():
    law = h1_reference_law()
    assert law.mean() == 0.0 and law.var() == 1.0
    run = run_limits_mc(1.0, GridSpec(4096, 20.0), 2000, 3)
    assert ks_distance(run.xi, law.cdf) < 0.04
    assert ks_distance(run.zeta, law.cdf) < 0.04
    assert np.allclose(run.zeta, run.xi, atol=0.01)


@pytest.mark.slow
def test_h099_mean_zero():
    s = run_limits_mc(0.99, default_grid(0.99), 1000, 5).summary
    assert abs(s.mean_zeta) < 4 * math.sqrt(s.var_zeta / s.N)
    assert abs(s.mean_xi) < 4 * math.sqrt(s.var_xi / s.N)


@pytest.mark.slow
def test_h099_large_sample_zeta_variance():
    # near H = 1 the laws are almost standard normal, so a +-50 span is ample
    s = run_limits_mc(0.99, GridSpec(4096, 50.0), 10**5, 13).summary
    assert abs(s.var_zeta / 1.03 - 1) <= 0.10


@pytest.mark.slow
def test_half_variances(limits):
    s = limits(0.5).summary
    assert abs(s.var_zeta / (16 * ZETA3) - 1) <= 0.10
    assert abs(s.var_xi / 26.0 - 1) <= 0.10
    assert abs(s.var_ratio / (26.0 / 19.23) - 1) <= 0.10


@pytest.mark.slow
def test_table_examples(limits):
    assert abs(limits(0.7).summary.var_xi / 4.08 - 1) <= 0.10
    s = limits(0.9).summary
    assert abs(s.var_zeta / 1.32 - 1) <= 0.10
    assert abs(s.var_xi / 1.54 - 1) <= 0.10


def _ratio_se(zeta, xi):
    """Delta-method SE of Var(xi) / Var(zeta) for paired samples."""
    vz, vx = zeta.var(ddof=1), xi.var(ddof=1)
    r = vx / vz
    infl = ((xi - xi.mean()) ** 2 - vx) / vz - r * ((zeta - zeta.mean()) ** 2 - vz) / vz
    return r, infl.std(ddof=1) / math.sqrt(zeta.size)


@pytest.mark.slow
def test_ordering_and_monotone_ratio(limits):
    hs = (0.5, 0.6, 0.7, 0.8, 0.9, 0.99)
    ratios = []
    for H in hs:
        run = limits(H)
        diff, se = paired_variance_difference(run.xi, run.zeta)
        assert diff > 0
        if H <= 0.9:
            assert diff > 3 * se
        ratios.append(_ratio_se(run.zeta, run.xi))
    for (r1, s1), (r2, s2) in zip(ratios, ratios[1:]):
        assert r2 <= r1 + 2 * math.hypot(s1, s2)
