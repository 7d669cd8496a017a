import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from crnsense.sensing import SensingModel, prob_detection, prob_false_alarm

# Gaussian tails at 0.05*sqrt(2000) and (1.05/1.1 - 1)*sqrt(2000), mpmath quadrature
PF_105 = 0.012673659338734132
PD_105 = 0.97896308108754165

UNIT = SensingModel(sigma_w2=1.0, sigma_p2=0.1, g=1.0, N_s=2000)


def test_false_alarm_at_noise_floor_is_half():
    assert prob_false_alarm(UNIT, 1.0) == pytest.approx(0.5, abs=1e-15)


def test_false_alarm_vanishes_for_large_threshold():
    assert prob_false_alarm(UNIT, 50.0) < 1e-300


def test_false_alarm_oracle():
    assert prob_false_alarm(UNIT, 1.05) == pytest.approx(PF_105, abs=1e-12)


def test_detection_at_busy_power_is_half():
    assert prob_detection(UNIT, UNIT.busy_power) == pytest.approx(0.5, abs=1e-12)


def test_detection_oracle():
    assert prob_detection(UNIT, 1.05) == pytest.approx(PD_105, abs=1e-12)


def test_zero_gain_makes_detection_equal_false_alarm():
    m = SensingModel(sigma_w2=2e-9, sigma_p2=1e-9, g=0.0, N_s=500)
    eps = np.linspace(0, 4e-9, 200)
    assert np.array_equal(prob_detection(m, eps), prob_false_alarm(m, eps))


def test_negative_threshold_rejected():
    with pytest.raises(ValueError):
        prob_false_alarm(UNIT, -0.1)
    with pytest.raises(ValueError):
        prob_detection(UNIT, -1e-3)


def test_invalid_model_fields():
    with pytest.raises(ValueError):
        SensingModel(sigma_w2=0.0, sigma_p2=1.0, g=1.0, N_s=10)
    with pytest.raises(ValueError):
        SensingModel(sigma_w2=1.0, sigma_p2=1.0, g=-1.0, N_s=10)
    with pytest.raises(ValueError):
        SensingModel(sigma_w2=1.0, sigma_p2=1.0, g=1.0, N_s=0)


models = st.builds(
    SensingModel,
    sigma_w2=st.floats(1e-12, 1.0),
    sigma_p2=st.floats(1e-13, 1.0),
    g=st.floats(1e-3, 10.0),
    N_s=st.integers(1, 5000),
)


@given(models)
def test_monotone_decreasing_away_from_saturation(m):
    eps = np.linspace(0.0, 3.0 * m.busy_power, 2001)
    for fn in (prob_false_alarm, prob_detection):
        v = fn(m, eps)
        d = np.diff(v)
        assert np.all(d <= 0)
        live = (v[:-1] > 1e-12) & (v[:-1] < 1 - 1e-12)
        assert np.all(d[live & (v[1:] > 1e-12)] < 0)


@given(models)
def test_detection_dominates_false_alarm(m):
    eps = np.linspace(0.0, 3.0 * m.busy_power, 1001)
    assert np.all(prob_detection(m, eps) >= prob_false_alarm(m, eps) - 1e-12)


def test_more_samples_sharpen_the_decision():
    eps = np.concatenate([np.linspace(0.5, 0.99, 50), np.linspace(1.01, 1.5, 50)])
    step = (eps < 1.0).astype(float)
    errs = []
    for n in (100, 1000, 10000):
        m = SensingModel(sigma_w2=1.0, sigma_p2=0.1, g=1.0, N_s=n)
        errs.append(np.abs(prob_false_alarm(m, eps) - step))
    assert np.all(errs[1] <= errs[0])
    assert np.all(errs[2] <= errs[1])
    assert np.all(errs[2] < errs[0])
