import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from pmmh.params import ParameterVector, free_log_prior, log_prior, pack, unpack
from pmmh.priors import (
    ConfigurationError,
    HalfNormal,
    InverseGamma,
    Normal,
    PointMass,
    TruncNormal,
    Uniform,
    prior_from_spec,
    prior_to_spec,
)


def test_normal_logpdf_at_mean():
    assert float(Normal(0.0, 10.0).logpdf(0.0)) == pytest.approx(math.log(1.0 / (10.0 * math.sqrt(2 * math.pi))))


def test_truncnormal_outside_support_is_minus_inf():
    phi = TruncNormal(0.9, 0.1, 0.0, 1.0)
    assert phi.logpdf(1.5) == -np.inf
    assert phi.logpdf(-0.1) == -np.inf


def test_truncnormal_matches_scipy():
    d = TruncNormal(0.9, 0.1, 0.0, 1.0)
    ref = stats.truncnorm(-9.0, 1.0, loc=0.9, scale=0.1)
    x = np.linspace(0.05, 0.95, 7)
    np.testing.assert_allclose(d.logpdf(x), ref.logpdf(x), rtol=1e-10)


def test_truncnormal_far_tail_normalises():
    # almost all mass of the parent normal lies outside the interval
    d = TruncNormal(0.0, 0.1, 2.0, 3.0)
    mass, _ = integrate.quad(lambda x: math.exp(float(d.logpdf(x))), 2.0, 3.0)
    assert mass == pytest.approx(1.0, rel=1e-8)


def test_wide_truncnormal_variance_is_uniform_variance():
    # a huge scale on (-1, 1) is flat; scipy's variance is inaccurate here
    assert TruncNormal(0.0, 1e6, -1.0, 1.0).variance == pytest.approx(1.0 / 3.0, rel=1e-6)


def test_inverse_gamma_textbook_density():
    a, b, x = 2.5, 1.5, 0.7
    expected = a * math.log(b) - math.lgamma(a) - (a + 1) * math.log(x) - b / x
    assert float(InverseGamma(a, b).logpdf(x)) == pytest.approx(expected, rel=1e-12)
    assert float(InverseGamma(a, b).logpdf(x)) == pytest.approx(stats.invgamma(a, scale=b).logpdf(x), rel=1e-12)
    assert InverseGamma(a, b).logpdf(-1.0) == -np.inf


def test_inverse_gamma_moments():
    d = InverseGamma(3.0, 2.0)
    assert d.mode == pytest.approx(0.5)
    assert d.variance == pytest.approx(stats.invgamma(3.0, scale=2.0).var())
    assert InverseGamma(0.01, 0.01).variance == math.inf


def test_halfnormal_and_uniform():
    assert float(HalfNormal(2.0).logpdf(1.0)) == pytest.approx(stats.halfnorm(scale=2.0).logpdf(1.0))
    assert HalfNormal(2.0).logpdf(-1e-9) == -np.inf
    u = Uniform(-1.0, 1.0)
    assert float(u.logpdf(1.0)) == pytest.approx(-math.log(2.0))
    assert u.logpdf(1.0001) == -np.inf


@pytest.mark.parametrize(
    "dist",
    [Normal(1.0, 2.0), TruncNormal(0.9, 0.1, 0.0, 1.0), InverseGamma(3.0, 2.0), HalfNormal(1.5), Uniform(-2.0, 3.0)],
)
def test_samples_match_density(dist, rng):
    x = dist.sample(rng, 20_000)
    assert np.all(np.isfinite(dist.logpdf(x)))
    cdf = lambda v: [integrate.quad(lambda s: math.exp(float(dist.logpdf(s))), lo, t)[0] for t in np.atleast_1d(v)]
    lo = {Normal: -np.inf, TruncNormal: 0.0, InverseGamma: 0.0, HalfNormal: 0.0, Uniform: -2.0}[type(dist)]
    qs = np.quantile(x, [0.1, 0.5, 0.9])
    np.testing.assert_allclose(cdf(qs), [0.1, 0.5, 0.9], atol=0.015)


def test_invalid_priors_rejected():
    with pytest.raises(ConfigurationError):
        Normal(0.0, 0.0)
    with pytest.raises(ConfigurationError):
        TruncNormal(0.0, 1.0, 1.0, 0.0)
    with pytest.raises(ConfigurationError):
        InverseGamma(-1.0, 1.0)
    with pytest.raises(ConfigurationError):
        prior_from_spec({"cauchy": [0, 1]})
    with pytest.raises(ConfigurationError):
        prior_from_spec({"normal": [0, 1], "uniform": [0, 1]})


def test_prior_spec_round_trip():
    for d in (Normal(0.0, 10.0), TruncNormal(0.9, 0.1, 0.0, 1.0), InverseGamma(0.01, 0.01), PointMass(0.0)):
        assert prior_from_spec(prior_to_spec(d)) == d
    assert prior_from_spec({"normal": {"mean": 1, "sd": 2}}) == Normal(1.0, 2.0)


# -- parameter vectors ------------------------------------------------------


def _sv_template():
    return ParameterVector.from_dict({"mu": -0.5, "phi": 0.95, "sigma2_eta": 0.04, "rho": 0.0}, fixed=("rho",))


def test_pack_skips_fixed_entries():
    t = _sv_template()
    np.testing.assert_array_equal(pack(t), [-0.5, 0.95, 0.04])
    assert t.free_names == ("mu", "phi", "sigma2_eta")
    back = unpack([0.1, 0.2, 0.3], t)
    assert back.as_dict() == {"mu": 0.1, "phi": 0.2, "sigma2_eta": 0.3, "rho": 0.0}


@given(st.lists(st.floats(-1e6, 1e6), min_size=3, max_size=3))
def test_pack_unpack_round_trip(values):
    t = _sv_template()
    np.testing.assert_array_equal(unpack(values, t).pack(), values)


def test_unpack_wrong_length():
    with pytest.raises(ValueError):
        _sv_template().unpack([1.0, 2.0])


def test_duplicate_and_unknown_fixed_names():
    with pytest.raises(ConfigurationError):
        ParameterVector.from_dict({"a": 1.0}, fixed=("b",))


def test_joint_log_prior():
    t = _sv_template()
    prior = {
        "mu": Normal(0.0, 10.0),
        "phi": TruncNormal(0.9, 0.1, 0.0, 1.0),
        "sigma2_eta": InverseGamma(0.01, 0.01),
        "rho": PointMass(0.0),
    }
    expected = sum(float(prior[k].logpdf(v)) for k, v in t.as_dict().items() if k != "rho")
    assert log_prior(t, prior) == pytest.approx(expected)
    assert log_prior(t.with_values(phi=1.5), prior) == -np.inf
    assert log_prior(t.with_values(rho=0.3), prior) == -np.inf
    with pytest.raises(ConfigurationError):
        log_prior(t, {k: v for k, v in prior.items() if k != "mu"})
    f = free_log_prior(prior, t)
    assert f(t.pack())[0] == pytest.approx(expected)
