import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import gamma

from greencell.channel import (
    STD_DB,
    VAR_DB,
    AssociationScheme,
    ChannelModel,
    DivergentMomentError,
    frac_moment_H,
    rho,
    sample_gain,
    sample_gains,
    sample_weights,
    shadow_db_to_natural,
    shadow_natural,
    wh_moment,
    zeta,
)

NEAREST = AssociationScheme.nearest()
MRP = AssociationScheme.max_power()

# 30-digit references computed with mpmath
LN10_8DB = 1.84206807439523654721439316375
LN10_4DB = 0.921034037197618273607196581874
ZETA_376 = 1.67949465483668932276423488966
RHO_376 = 5.8782312919284126296748221138


def test_shadow_db_to_natural():
    assert shadow_db_to_natural(0) == 0
    assert shadow_db_to_natural(8) == pytest.approx(LN10_8DB, rel=1e-14)
    assert shadow_db_to_natural(4) == pytest.approx(LN10_4DB, rel=1e-14)
    with pytest.raises(ValueError):
        shadow_db_to_natural(-1)


def test_shadow_conventions():
    assert shadow_natural(8, STD_DB) == pytest.approx(LN10_8DB)
    assert shadow_natural(64, VAR_DB) == pytest.approx(LN10_8DB)
    with pytest.raises(ValueError):
        shadow_natural(8, "dB")
    with pytest.raises(ValueError):
        shadow_natural(-4, VAR_DB)


def test_channel_validation():
    with pytest.raises(ValueError):
        ChannelModel(2.0)
    with pytest.raises(ValueError):
        ChannelModel(4.0, 0.0, -0.1)
    assert ChannelModel(4.0).delta == 0.5


def test_frac_moment_examples():
    ch = ChannelModel(4.0)
    assert frac_moment_H(ch, 0.0) == 1.0
    assert frac_moment_H(ch, 0.5) == pytest.approx(0.886226925452758, rel=1e-14)
    assert frac_moment_H(ch, 0.5) * frac_moment_H(ch, -0.5) == pytest.approx(math.pi / 2, rel=1e-14)
    with pytest.raises(DivergentMomentError):
        frac_moment_H(ch, -1.0)


def test_zeta_rho_examples():
    assert zeta(ChannelModel(3.76, 0, 2.0), NEAREST) == 1.0
    assert rho(ChannelModel(3.76), NEAREST) == 3.5
    assert zeta(ChannelModel(4.0), MRP) == pytest.approx(math.pi / 2, rel=1e-13)
    assert rho(ChannelModel(4.0), MRP) == pytest.approx(7 * math.pi / 4, rel=1e-13)
    assert zeta(ChannelModel(3.76), MRP) == pytest.approx(ZETA_376, rel=1e-13)
    assert rho(ChannelModel(3.76), MRP) == pytest.approx(RHO_376, rel=1e-13)


def test_zeta_closed_form_with_shadowing():
    a, s = 3.76, LN10_8DB
    expect = 2 * math.pi / (a * math.sin(2 * math.pi / a)) * math.exp(4 * s * s / a ** 2)
    assert zeta(ChannelModel(a, 0.3, s), MRP) == pytest.approx(expect, rel=1e-12)


def test_bias_cancels_in_zeta():
    ch = ChannelModel(3.76, 0, 1.0)
    assert zeta(ch, AssociationScheme.max_power(bias=7.0)) == pytest.approx(zeta(ch, MRP), rel=1e-14)


def test_scheme_validation():
    with pytest.raises(ValueError):
        AssociationScheme("closest")
    with pytest.raises(ValueError):
        AssociationScheme("weighted")
    with pytest.raises(ValueError):
        AssociationScheme.nearest(bias=0)


def test_weighted_zeta_is_product_of_moments():
    ch = ChannelModel(4.0, 0, 0.5)
    sc = AssociationScheme.lognormal_weight(0.2, 0.7)
    d = 0.5
    expect = (math.exp(0.2 * d + 0.5 * (0.7 * d) ** 2) * math.exp(-0.2 * d + 0.5 * (0.7 * d) ** 2)
              * frac_moment_H(ch, d) * frac_moment_H(ch, -d))
    assert zeta(ch, sc) == pytest.approx(expect, rel=1e-13)
    assert wh_moment(ch, sc, 0.0) == pytest.approx(1.0)


def test_gain_samples():
    rng = np.random.default_rng(1)
    h = sample_gains(ChannelModel(4.0), rng, 10 ** 6)
    assert 0.997 <= h.mean() <= 1.003
    w = sample_weights(NEAREST, h[:1000], rng)
    np.testing.assert_allclose(w * h[:1000], 1.0, rtol=1e-15)
    g = sample_gain(ChannelModel(4.0, 0, 1.0), MRP, rng)
    assert g.h > 0 and g.w > 0


@pytest.mark.parametrize("t", [-0.6, -0.3, 0.3, 0.6])
def test_empirical_fractional_moments(t):
    ch = ChannelModel(3.76, 0.1, 0.9)
    h = sample_gains(ch, np.random.default_rng(7), 10 ** 6)
    x = h ** t
    se = x.std() / math.sqrt(len(x))
    assert abs(x.mean() - frac_moment_H(ch, t)) < 4 * se


@given(st.floats(2.1, 6.0))
def test_gamma_reflection(alpha):
    d = 2.0 / alpha
    lhs = gamma(1 + d) * gamma(1 - d)
    assert lhs == pytest.approx((2 * math.pi / alpha) / math.sin(2 * math.pi / alpha), rel=1e-12)


def test_gamma_reflection_grid():
    for alpha in np.linspace(2.1, 6.0, 50):
        d = 2.0 / alpha
        assert gamma(1 + d) * gamma(1 - d) == pytest.approx(
            (2 * math.pi / alpha) / math.sin(2 * math.pi / alpha), rel=1e-12)


@given(st.floats(2.1, 6.0), st.floats(-2.0, 2.0), st.floats(0.0, 3.0),
       st.sampled_from(["nearest", "max_power", "weighted"]))
def test_zeta_at_least_one(alpha, mu, sigma, kind):
    ch = ChannelModel(alpha, mu, sigma)
    sc = {"nearest": NEAREST, "max_power": MRP,
          "weighted": AssociationScheme.lognormal_weight(0.3, 0.5)}[kind]
    z = zeta(ch, sc)
    assert z >= 1.0 - 1e-12
    assert rho(ch, sc) >= 3.5 * (1 - 1e-12)


@given(st.floats(2.1, 6.0), st.floats(-0.9, 3.0).filter(lambda t: abs(t) > 1e-3),
       st.floats(0.0, 2.0), st.floats(0.01, 1.0))
def test_frac_moment_increases_with_shadowing(alpha, t, sigma, bump):
    lo = frac_moment_H(ChannelModel(alpha, 0, sigma), t)
    hi = frac_moment_H(ChannelModel(alpha, 0, sigma + bump), t)
    assert hi > lo
