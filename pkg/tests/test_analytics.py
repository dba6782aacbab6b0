import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from greencell import analytics as A
from greencell.analytics import NetworkScenario
from greencell.channel import AssociationScheme, ChannelModel, rho, zeta
from greencell.quadrature import gauss_hermite

NEAREST = AssociationScheme.nearest()
MRP = AssociationScheme.max_power()
CH = ChannelModel(3.76)

# references from 20-30 digit mpmath evaluations
P_VOID_2 = 0.205574263019977997863492329038
E_M2 = 0.135335283236612691893999494972
UPPER_Z100 = 0.138032967197745650265829458746
MEAN_USERS_2 = 3.16900835787111896093254287607
COV_V2_A4 = 0.61578610232260406877222021784
ELL_376_S1 = 0.902219810817937012125970857829
ELL_SHADOW = 2.32791236645045906686445091436  # alpha 3.76, sigma 1, s=2, phi=0.5
TC_NEAREST_V2 = 454.33201458409408214937  # lambda_u 370, v 2
RATE_NEAREST_V2 = 2.2081077951417922287731
TC_MRP_V2 = 560.71355058940041937113
TC_NEAREST_V05 = 1260.0907686039986102412


def test_scenario():
    s = NetworkScenario(370.0, 185.0)
    assert s.v == 2.0
    assert NetworkScenario.from_load(370, 0.5).lambda_b == 740.0
    with pytest.raises(ValueError):
        NetworkScenario(0.0, 1.0)
    vm = A.VoidModel.of(CH, MRP)
    assert vm.rho == pytest.approx(3.5 * vm.zeta)
    assert vm.rho_hat == 3.5


def test_void_prob_examples():
    assert A.void_prob(0.0, 3.5) == 1.0
    assert A.void_prob(2.0, 3.5) == pytest.approx(P_VOID_2, rel=1e-14)
    assert A.void_prob(2.0, math.inf) == pytest.approx(E_M2, rel=1e-14)
    with pytest.raises(ValueError):
        A.void_prob(-1.0, 3.5)


def test_void_bounds_examples():
    assert A.void_prob_bounds(0.0, 1.0) == (1.0, 1.0)
    lo, hi = A.void_prob_bounds(2.0, 1.0)
    assert lo == pytest.approx(E_M2) and hi == pytest.approx(1 / 3)
    lo, hi = A.void_prob_bounds(2.0, 100.0)
    assert hi == pytest.approx(UPPER_Z100, rel=1e-12)
    assert hi / lo - 1 < 0.025
    with pytest.raises(ValueError):
        A.void_prob_bounds(2.0, 0.5)


@given(st.floats(0, 200), st.floats(1, 50))
def test_void_ordering(v, z):
    lo, hi = A.void_prob_bounds(v, z)
    mid = A.void_prob(v, 3.5 * z)
    assert lo <= mid * (1 + 1e-12) and mid <= hi * (1 + 1e-12)


def test_void_ordering_dense_grid():
    v = np.linspace(0, 50, 2001)
    for z in (1.0, 1.68, 4.39, 20.0):
        lo, hi = A.void_prob_bounds(v, z)
        mid = A.void_prob(v, 3.5 * z)
        assert np.all(lo <= mid * (1 + 1e-12)) and np.all(mid <= hi * (1 + 1e-12))


@given(st.floats(0.01, 50), st.floats(0.01, 5), st.floats(3.5, 100))
def test_void_decreasing(v, dv, r):
    assert A.void_prob(v + dv, r) < A.void_prob(v, r)
    assert A.void_prob(v, r * 1.5) < A.void_prob(v, r)


def test_user_count_pmf_examples():
    assert A.user_count_pmf(0, 2.0) == pytest.approx(P_VOID_2, rel=1e-12)
    n = np.arange(501)
    p = A.user_count_pmf(n, 2.0)
    assert abs(p.sum() - 1) < 1e-9
    assert abs((n * p).sum() - 2) < 1e-6
    assert A.user_count_pmf(0, 0.0) == 1.0
    with pytest.raises(ValueError):
        A.user_count_pmf(-1, 2.0)


def test_user_count_pmf_matches_scipy_nbinom():
    n = np.arange(40)
    r, v = 3.5, 2.7
    np.testing.assert_allclose(A.user_count_pmf(n, v, r), stats.nbinom.pmf(n, r, r / (r + v)), rtol=1e-12)


@pytest.mark.parametrize("v", [0.3, 2.0, 10.0])
def test_user_count_pmf_is_gamma_mixed_poisson(v):
    # Poisson(v x) counts over a Gamma(3.5, rate 3.5) cell size x
    r = 3.5
    for n in (0, 1, 5, 20):
        def f(x):
            return stats.poisson.pmf(n, v * x) * stats.gamma.pdf(x, r, scale=1 / r)
        ref, _ = integrate.quad(f, 0, np.inf, epsabs=1e-13, epsrel=1e-12, limit=200)
        assert abs(A.user_count_pmf(n, v, r) - ref) < 1e-8


def test_nonvoid_pmf_normalised():
    n = np.arange(1, 2001)
    for v in (0.5, 2.0, 8.0):
        assert abs(A.nonvoid_user_count_pmf(n, v, 3.5).sum() - 1) < 1e-8
    with pytest.raises(ValueError):
        A.nonvoid_user_count_pmf(0, 2.0, 3.5)


def test_mean_users_nonvoid():
    assert A.mean_users_nonvoid(2.0, 3.5) == pytest.approx(MEAN_USERS_2, rel=1e-13)
    assert A.mean_users_nonvoid(200.0, 3.5) == pytest.approx(200.0, rel=1e-5)
    with pytest.raises(ValueError):
        A.mean_users_nonvoid(0.0, 3.5)


# -------------------------------------------------------------- ell


def test_ell_examples():
    ch4 = ChannelModel(4.0)
    assert A.ell(1.0, 1.0, ch4) == pytest.approx(math.pi / 4, rel=1e-12)
    assert A.ell(1.0, 0.0, ch4) == pytest.approx(math.pi / 2, rel=1e-12)
    for s in (0.1, 3.0, 40.0):
        assert A.ell(s, 1.0, ch4) == pytest.approx(math.sqrt(s) * math.atan(math.sqrt(s)), rel=1e-12)
    assert A.ell(1e-12, 1.0, ch4) < 1e-11
    assert A.ell(1.0, 1.0, CH) == pytest.approx(ELL_376_S1, rel=1e-12)
    assert A.ell(2.0, 0.5, ChannelModel(3.76, 0, 1.0)) == pytest.approx(ELL_SHADOW, rel=1e-9)
    with pytest.raises(ValueError):
        A.ell(0.0, 1.0, ch4)
    with pytest.raises(ValueError):
        A.ell(1.0, -1.0, ch4)


def test_ell_full_term_equals_gamma_moment():
    # phi = 0 leaves E[H^d] Gamma(1-d) s^d
    from scipy.special import gamma
    from greencell.channel import frac_moment_H
    ch = ChannelModel(3.5, 0.0, 1.2)
    d = ch.delta
    for s in (0.3, 2.0):
        assert A.ell(s, 0.0, ch) == pytest.approx(frac_moment_H(ch, d) * gamma(1 - d) * s ** d, rel=1e-9)


@given(st.floats(2.2, 6.0), st.floats(1e-3, 1e3), st.floats(0.0, 50.0))
def test_ell_against_direct_quadrature(alpha, s, phi):
    ch = ChannelModel(alpha)
    sd = s ** ch.delta
    ref, _ = integrate.quad(lambda t: 1 / (1 + t ** (alpha / 2)), phi / sd, np.inf, epsabs=1e-13, epsrel=1e-11,
                            limit=200)
    assert A.ell(s, phi, ch) == pytest.approx(sd * ref, rel=1e-7, abs=1e-12)


# ---------------------------------------------------------------- coverage


def test_coverage_examples():
    ch4 = ChannelModel(4.0)
    dense = NetworkScenario.from_load(370, 1e4)
    assert A.coverage_prob(1.0, dense, ch4, NEAREST) == pytest.approx(1 / (1 + math.pi / 4), rel=1e-9)
    assert A.coverage_prob(1.0, NetworkScenario.from_load(370, 2.0), ch4, NEAREST) == pytest.approx(
        COV_V2_A4, rel=1e-12)
    assert A.coverage_prob(1e-10, dense, ch4, NEAREST) == pytest.approx(1.0, abs=1e-4)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 50), st.floats(0.01, 20), st.floats(1.01, 5), st.floats(0.0, 2.0))
def test_coverage_bound_monotone(s, v, ratio, sigma):
    ch = ChannelModel(3.76, 0, sigma)
    sc = NetworkScenario.from_load(100, v)
    c = A.coverage_prob(s, sc, ch, MRP)
    assert A.coverage_prob(s * ratio, sc, ch, MRP) <= c + 1e-12
    # more load means fewer void BSs, so more interference
    assert A.coverage_prob(s, NetworkScenario.from_load(100, v * ratio), ch, MRP) <= c + 1e-12


@pytest.mark.parametrize("sigma", [0.0, 0.92, 1.84])
def test_exact_coverage_below_bound(sigma):
    ch = ChannelModel(3.76, 0, sigma)
    sc = NetworkScenario.from_load(370, 2.0)
    for s in (0.1, 1.0, 10.0):
        assert A.coverage_prob(s, sc, ch, MRP, exact=True) <= A.coverage_prob(s, sc, ch, MRP) + 1e-9


def test_exact_coverage_equals_bound_for_nearest():
    sc = NetworkScenario.from_load(370, 2.0)
    assert A.coverage_prob(1.0, sc, CH, NEAREST, exact=True) == A.coverage_prob(1.0, sc, CH, NEAREST)


def test_exact_coverage_weighted_runs():
    sc = NetworkScenario.from_load(370, 2.0)
    w = AssociationScheme.lognormal_weight(0.0, 0.5)
    c = A.coverage_prob(1.0, sc, CH, w, exact=True)
    assert 0 < c <= A.coverage_prob(1.0, sc, CH, w) + 0.01


# -------------------------------------------------------------- throughput


def test_cell_throughput_oracles():
    assert A.avg_cell_throughput(NetworkScenario.from_load(370, 2), CH, NEAREST) == pytest.approx(
        TC_NEAREST_V2, rel=1e-9)
    assert A.avg_cell_throughput(NetworkScenario.from_load(370, 2), CH, MRP) == pytest.approx(TC_MRP_V2, rel=1e-9)
    assert A.avg_cell_throughput(NetworkScenario.from_load(370, 0.5), CH, NEAREST) == pytest.approx(
        TC_NEAREST_V05, rel=1e-9)
    assert A.mean_link_rate(NetworkScenario.from_load(370, 2), CH, NEAREST) == pytest.approx(
        RATE_NEAREST_V2, rel=1e-9)


def test_cell_throughput_factorisation():
    sc = NetworkScenario.from_load(370, 2)
    r = rho(CH, NEAREST)
    tc = A.avg_cell_throughput(sc, CH, NEAREST)
    assert tc == pytest.approx(A.mean_link_rate(sc, CH, NEAREST) * A.mean_inverse_cell_area(sc, r), rel=1e-12)


def test_shadowed_rate_integral_converges_in_order():
    ch = ChannelModel(3.76, 0, 1.0)
    z = zeta(ch, MRP)
    vals = [A.rate_integral(0.2, ch, z, gauss_hermite(n)) for n in (6, 12, 24)]
    assert vals[1] == pytest.approx(vals[2], rel=1e-6)
    assert vals[0] == pytest.approx(vals[2], rel=1e-3)


def test_quad_order_floor():
    with pytest.raises(ValueError):
        A.avg_cell_throughput(NetworkScenario(370, 185), CH, NEAREST, gauss_hermite(3))


@settings(max_examples=25, deadline=None)
@given(st.floats(10, 1000), st.floats(0.05, 20), st.floats(0, 2), st.sampled_from([NEAREST, MRP]))
def test_user_throughput_identity(lu, v, sigma, scheme):
    ch = ChannelModel(3.76, 0, sigma)
    sc = NetworkScenario.from_load(lu, v)
    r = rho(ch, scheme)
    p = A.void_prob(v, r)
    tc = A.avg_cell_throughput(sc, ch, scheme)
    tu = A.avg_user_throughput(sc, ch, scheme)
    assert tu == pytest.approx((r - 1) * (1 - p) * tc / (r * lu), rel=1e-10)
    assert A.avg_user_throughput_direct(sc, ch, scheme) == pytest.approx(tu, rel=1e-10)


def test_cell_throughput_decreasing_in_load():
    v = np.geomspace(0.05, 50, 30)
    tc = [A.avg_cell_throughput(NetworkScenario.from_load(370, x), CH, NEAREST) for x in v]
    assert np.all(np.diff(tc) < 0)


def test_user_throughput_single_interior_peak():
    v = np.geomspace(0.01, 100, 60)
    tu = np.array([A.avg_user_throughput(NetworkScenario.from_load(370, x), CH, NEAREST) for x in v])
    sign = np.sign(np.diff(tu))
    assert sign[0] > 0 and sign[-1] < 0
    assert np.count_nonzero(np.diff(sign)) == 1


def test_scaling_heavy_load():
    base = NetworkScenario(370 * 100, 370)
    twice = NetworkScenario(370 * 100, 740)
    r = A.avg_cell_throughput(twice, CH, NEAREST) / A.avg_cell_throughput(base, CH, NEAREST)
    assert 1.9 <= r <= 2.1


def test_user_throughput_limits():
    small = A.avg_user_throughput(NetworkScenario.from_load(370, 1e-3), CH, NEAREST)
    smaller = A.avg_user_throughput(NetworkScenario.from_load(370, 5e-4), CH, NEAREST)
    big = A.avg_user_throughput(NetworkScenario.from_load(370, 1e3), CH, NEAREST)
    peak = A.avg_user_throughput(NetworkScenario.from_load(370, 0.7), CH, NEAREST)
    assert small < 0.05 * peak and big < 0.05 * peak
    assert smaller < small
