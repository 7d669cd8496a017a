import math
import warnings

import pytest
from hypothesis import given
from hypothesis import strategies as st

from crnsense.config import load_config
from crnsense.core import (
    ParameterError,
    SystemParams,
    check_battery_reachable,
    parse_quantity,
    q_function,
    validate_params,
)

# Gaussian upper tail at 1.6449, integrated with mpmath at 40 digits
Q_16449 = 0.04999521746834630271


def test_q_at_zero_is_half():
    assert q_function(0.0) == 0.5


def test_q_far_tail_underflows():
    assert 0.0 <= q_function(38.0) <= 1e-300


def test_q_matches_quadrature_oracle():
    assert q_function(1.6449) == pytest.approx(Q_16449, abs=1e-10)


def test_q_rejects_non_finite():
    with pytest.raises(ValueError):
        q_function(float("nan"))
    with pytest.raises(ValueError):
        q_function(float("inf"))


def test_q_vectorised():
    out = q_function([0.0, 1.6449])
    assert out.shape == (2,)
    assert out[1] == pytest.approx(Q_16449, abs=1e-10)


@given(st.floats(min_value=-40, max_value=40, allow_nan=False))
def test_q_symmetry(x):
    assert q_function(x) + q_function(-x) == pytest.approx(1.0, abs=1e-12)


# below -5 the value sits within float spacing of 1
@given(st.floats(min_value=-5, max_value=8), st.floats(min_value=1e-3, max_value=1.0))
def test_q_strictly_decreasing(x, dx):
    assert q_function(x + dx) < q_function(x)


def test_parse_quantity_units():
    assert parse_quantity("2ms") == pytest.approx(2e-3)
    assert parse_quantity("110 mW") == pytest.approx(0.11)
    assert parse_quantity("1MHz") == pytest.approx(1e6)
    assert parse_quantity("59mJ") == pytest.approx(0.059)
    assert parse_quantity(3) == 3.0
    with pytest.raises(ValueError):
        parse_quantity("3 furlongs")
    with pytest.raises(ValueError):
        parse_quantity("abc")


def test_db_conversion_of_efficiency():
    assert parse_quantity("-5.65dB") == pytest.approx(0.2722701308, rel=1e-9)
    assert parse_quantity("-5.65dB") == pytest.approx(0.2723, abs=5e-5)


def test_table2_sensing_energy(table2):
    assert table2.params.e_s == pytest.approx(0.22e-3, rel=1e-12)


def test_table2_derived_energies(table2):
    p = table2.params
    assert p.T_s + p.T_t == p.T_slot
    assert p.T_slot == pytest.approx(0.1)
    # 98 ms * (50 mW / 0.2723 + 115.9 mW)
    assert p.e_t == pytest.approx(0.098 * (0.05 / 10 ** -0.565 + 0.1159), rel=1e-12)
    assert p.xi == pytest.approx(0.2 * 1.0 * 0.098)
    assert p.capacity == pytest.approx(1e6 * math.log2(11.0))


def _raw(**over):
    raw = dict(W="1MHz", T_slot="100ms", T_s="2ms", T_t="98ms", P_s="110mW", P_t="50mW",
               P_nc="115.9mW", eta="-5.65dB", phi=0.2, pu_snr="-10dB", P_bar_c=0.1,
               sigma_w2=1e-9, P_p="1W", g=1, N_s=2000, snr_su="10dB")
    raw.update(over)
    return raw


def test_zero_sensing_time_is_rejected_naming_field():
    with pytest.raises(ParameterError) as exc:
        validate_params(_raw(T_s=0))
    assert exc.value.field == "T_s"


@pytest.mark.parametrize("field,value", [("P_s", -1), ("eta", 1.5), ("phi", 0), ("P_bar_c", 1.0),
                                         ("sigma_w2", 0), ("N_s", 2.5), ("g", -0.1)])
def test_invalid_fields_are_named(field, value):
    with pytest.raises(ParameterError) as exc:
        validate_params(_raw(**{field: value}))
    assert exc.value.field == field


def test_inconsistent_slot_length_rejected():
    with pytest.raises(ParameterError) as exc:
        validate_params(_raw(T_slot="10ms"))
    assert exc.value.field == "T_slot"


def test_transmit_time_derived_from_slot():
    raw = _raw()
    del raw["T_t"]
    p = validate_params(raw)
    assert p.T_t == pytest.approx(0.098)


def test_missing_required_parameter():
    raw = _raw()
    del raw["W"]
    with pytest.raises(ParameterError) as exc:
        validate_params(raw)
    assert exc.value.field == "W"


def test_snr_from_link_gain():
    p = validate_params(_raw(snr_su=None, g_su=2e-7))
    assert p.snr_su == pytest.approx(0.05 * 2e-7 / 1e-9)


def test_default_battery_capacity_holds_slot_and_harvest(table2):
    p = table2.params
    assert p.B_max >= 2 * (p.e_s + p.e_t)
    assert p.B_max >= p.e_s + p.e_t + p.harvest_energy


def test_replace_recomputes_default_battery(table2):
    p = table2.params
    q = p.replace(P_t=0.2)
    assert q.e_t > p.e_t
    assert q.B_max == pytest.approx(max(2 * (q.e_s + q.e_t), q.e_s + q.e_t + q.harvest_energy))


def test_small_battery_preset_warns():
    with pytest.warns(RuntimeWarning, match="never become active"):
        cfg = load_config("paper-table2")
    assert cfg.params.B_max == pytest.approx(1e-3)


def test_reachable_battery_is_silent(table2):
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        check_battery_reachable(table2.params)


@given(
    T_s=st.floats(1e-4, 1e-2), T_t=st.floats(1e-3, 0.5), P_s=st.floats(1e-3, 1),
    P_t=st.floats(1e-3, 1), P_nc=st.floats(1e-3, 1), eta=st.floats(0.01, 1),
    phi=st.floats(0.01, 1), g=st.floats(0, 5), P_p=st.floats(1e-3, 10),
)
def test_derived_energies_positive(T_s, T_t, P_s, P_t, P_nc, eta, phi, g, P_p):
    p = SystemParams(W=1e6, T_s=T_s, T_t=T_t, P_s=P_s, P_t=P_t, P_nc=P_nc, P_p=P_p, eta=eta,
                     phi=phi, sigma_w2=1e-9, sigma_p2=1e-10, g=g, P_bar_c=0.1, snr_su=10.0)
    assert p.e_s > 0 and p.e_t > 0 and p.xi >= 0
    assert p.T_s + p.T_t == p.T_slot
    assert p.e_s == T_s * P_s
    assert p.e_t == T_t * (P_t / eta + P_nc)
