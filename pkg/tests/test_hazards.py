import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from crcop import hazards
from crcop.exceptions import DomainError, ParameterError
from crcop.hazards import MarginalHazardSpec


def test_exponential_hazard_values():
    spec = MarginalHazardSpec.exponential(1.0, 1.0)
    assert hazards.hazard(spec, 0.7, 0.0) == pytest.approx(1.0)
    assert hazards.hazard(spec, 3.0, 1.0) == pytest.approx(np.e)


def test_weibull_hazard_value():
    spec = MarginalHazardSpec.weibull(1.0, 2.0, 0.0)
    assert hazards.hazard(spec, 0.5, 0.3) == pytest.approx(1.0)


def test_survival_and_inverse():
    spec = MarginalHazardSpec.exponential(1.0, 0.0)
    assert hazards.survival(spec, np.log(2.0), 0.0) == pytest.approx(0.5)
    assert hazards.inverse_survival(spec, 0.5, 0.0) == pytest.approx(np.log(2.0))


def test_cumulative_hazard_example():
    spec = MarginalHazardSpec.exponential(1.0, 2.0)
    assert hazards.cumulative_hazard(spec, 1.0, 0.5) == pytest.approx(np.e)


@pytest.mark.parametrize(
    "spec",
    [
        MarginalHazardSpec.exponential(0.7, 1.3),
        MarginalHazardSpec.weibull(1.5, 0.6, -0.4),
        MarginalHazardSpec.weibull(0.3, 2.5, 2.0),
    ],
)
@pytest.mark.parametrize("z", [-1.2, 0.0, 0.8])
def test_cumulative_hazard_matches_quadrature(spec, z):
    for t in (0.05, 0.5, 2.0, 7.0):
        num, _ = quad(lambda s: hazards.hazard(spec, s, z), 0.0, t, epsabs=0, epsrel=1e-12)
        assert hazards.cumulative_hazard(spec, t, z) == pytest.approx(num, rel=1e-8)


def test_random_specs_against_quadrature():
    rng = np.random.default_rng(4)
    for _ in range(20):
        spec = MarginalHazardSpec.weibull(rng.uniform(0.2, 3), rng.uniform(0.5, 3), rng.normal())
        z, t = rng.normal(), rng.uniform(0.1, 3)
        num, _ = quad(lambda s: hazards.hazard(spec, s, z), 0.0, t, epsabs=0, epsrel=1e-12)
        assert hazards.cumulative_hazard(spec, t, z) == pytest.approx(num, rel=1e-8)


def test_survival_inverse_round_trip_grid():
    s = np.linspace(0.001, 0.999, 200)
    for spec in (MarginalHazardSpec.exponential(2.0, 0.5), MarginalHazardSpec.weibull(0.4, 1.7, -1.0)):
        t = hazards.inverse_survival(spec, s, 0.9)
        np.testing.assert_allclose(hazards.survival(spec, t, 0.9), s, atol=1e-12)


@settings(max_examples=200, deadline=None)
@given(h=st.floats(1e-8, 1e3), rate=st.floats(0.05, 20), shape=st.floats(0.3, 5), z=st.floats(-3, 3))
def test_inverse_cumulative_hazard_property(h, rate, shape, z):
    spec = MarginalHazardSpec.weibull(rate, shape, 0.7)
    t = hazards.inverse_cumulative_hazard(spec, h, z)
    assert hazards.cumulative_hazard(spec, t, z) == pytest.approx(h, rel=1e-10)


def test_risk_proportional_baselines():
    t = np.linspace(0.01, 10, 100)
    shape, varsigma = 1.8, 0.35
    m1 = MarginalHazardSpec.weibull(1.0, shape, 0.0)
    m2 = MarginalHazardSpec.weibull(np.exp(varsigma / shape), shape, 0.0)
    ratio = hazards.baseline_cumulative_hazard(m2, t) / hazards.baseline_cumulative_hazard(m1, t)
    np.testing.assert_allclose(ratio, np.exp(varsigma), rtol=1e-12)


def test_vector_covariates():
    spec = MarginalHazardSpec.exponential(1.0, [0.5, -1.0])
    z = np.array([[1.0, 2.0], [0.0, 0.0]])
    np.testing.assert_allclose(hazards.covariate_function(spec, z), np.exp([-1.5, 0.0]))


def test_log_cumulative_hazard_stays_finite():
    spec = MarginalHazardSpec.exponential(1.0, 50.0)
    assert np.isfinite(hazards.log_cumulative_hazard(spec, 1.0, 30.0))


@pytest.mark.parametrize("t", [0.0, -1.0, np.nan])
def test_domain_errors(t):
    spec = MarginalHazardSpec.exponential(1.0, 1.0)
    with pytest.raises(DomainError):
        hazards.hazard(spec, t, 0.0)
    with pytest.raises(DomainError):
        hazards.cumulative_hazard(spec, t, 0.0)


@pytest.mark.parametrize("s", [0.0, 1.0, 1.5])
def test_inverse_survival_domain(s):
    with pytest.raises(DomainError):
        hazards.inverse_survival(MarginalHazardSpec.exponential(1.0, 1.0), s, 0.0)


def test_invalid_specs():
    with pytest.raises(ParameterError):
        MarginalHazardSpec.exponential(0.0, 1.0)
    with pytest.raises(ParameterError):
        MarginalHazardSpec.weibull(1.0, -2.0, 1.0)
    with pytest.raises(ParameterError):
        MarginalHazardSpec("gompertz", 1.0, 1.0, 0.0)
    with pytest.raises(ParameterError):
        MarginalHazardSpec.exponential(1.0, np.inf)
