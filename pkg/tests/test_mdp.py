import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from crnsense.core import NumericalError, SystemParams
from crnsense.dutycycle import EPS_INF, ChannelPair
from crnsense.mdp import (
    AssumptionError,
    build_transition_matrix,
    check_assumptions,
    closed_form_pi,
    gamma2,
    objective_mdp,
    prob_active_mdp,
    quantize,
    steady_state_closed_form,
    steady_state_numeric,
    transition_matrix,
)
from crnsense.sensing import SensingModel


def _small(P_p=0.1, B_max=10e-3):
    # e_s = 0.1 mJ, e_t = 1.9 mJ, harvest = P_p * 10 ms
    return SystemParams(W=1e6, T_s=1e-3, T_t=0.01, P_s=0.1, P_t=0.1, P_nc=0.09, P_p=P_p, eta=1.0,
                        phi=1.0, sigma_w2=1e-9, sigma_p2=1e-10, g=1.0, P_bar_c=0.1, snr_su=10.0,
                        B_max=B_max)


def test_quantize_arithmetic():
    q = quantize(_small(), 4)
    assert q.e_q == pytest.approx(0.5e-3)
    assert q.N_b == 20
    assert q.n_kappa == 2
    assert all(q.checks.values())


def test_harvest_equal_to_slot_energy_gives_equal_quanta():
    q = quantize(_small(P_p=0.2), 7)
    assert q.n_kappa == q.n_tau == 7


def test_harvest_below_quantum_rejected():
    with pytest.raises(AssumptionError) as exc:
        quantize(_small(P_p=0.001), 4)
    assert exc.value.failed == ["n_kappa"]


def test_small_battery_fails_named_conditions():
    with pytest.raises(AssumptionError) as exc:
        quantize(_small(B_max=2.5e-3), 4)
    assert set(exc.value.failed) <= {"a", "b", "c", "d"}
    assert exc.value.failed


def test_two_state_matrix():
    U = transition_matrix(2, 1, 1, 0.5, 0.5)
    assert np.array_equal(U, [[0.5, 0.5], [0.5, 0.5]])


def test_idle_harvest_channel_makes_harvest_states_absorbing(t2):
    p, _, s = t2
    q = quantize(p, 16)
    U = build_transition_matrix(q, ChannelPair(1.0, 0.8), s, 1.05e-9).U
    assert np.array_equal(np.diag(U)[:16], np.ones(16))


def test_matrix_sparsity_pattern():
    U = transition_matrix(30, 8, 5, 0.3, 0.6)
    for i in range(30):
        nz = set(np.flatnonzero(U[i]))
        if i < 8:
            assert nz == {i, i + 5}
        else:
            assert nz == {i, i - 8}


def test_harvest_jumps_clip_at_top():
    U = transition_matrix(6, 4, 5, 0.5, 0.5)
    assert U[3, 5] == 0.5


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 64), st.integers(1, 80), st.integers(0, 40),
       st.floats(0, 1), st.floats(0, 1))
def test_rows_sum_to_one(n_tau, n_kappa, extra, kappa, tau):
    N_b = n_tau + n_kappa + extra
    U = transition_matrix(N_b, n_tau, n_kappa, kappa, tau)
    assert np.abs(U.sum(axis=1) - 1).max() <= 1e-12
    assert U.min() >= 0 and U.max() <= 1


def test_symmetric_chain_is_uniform_on_support():
    pi = closed_form_pi(20, 5, 5, 0.3, 0.3)
    assert np.allclose(pi[:10], 0.1, atol=1e-15)
    assert np.all(pi[10:] == 0)


def test_closed_form_rejects_degenerate_chain():
    with pytest.raises(NumericalError):
        closed_form_pi(10, 3, 2, 0.0, 0.5)
    with pytest.raises(NumericalError):
        closed_form_pi(10, 3, 2, 0.5, 0.0)


@st.composite
def coprime_chains(draw):
    n_tau = draw(st.integers(2, 64))
    n_kappa = draw(st.integers(1, 64))
    assume(math.gcd(n_tau, n_kappa) == 1)
    N_b = n_tau + n_kappa + draw(st.integers(0, 20))
    kappa = draw(st.floats(0.05, 0.999))
    tau = draw(st.floats(0.05, 0.999))
    assume(all(check_assumptions(N_b, n_tau, n_kappa).values()))
    return N_b, n_tau, n_kappa, kappa, tau


@settings(max_examples=150, deadline=None)
@given(coprime_chains())
def test_closed_form_is_stationary(chain):
    N_b, n_tau, n_kappa, kappa, tau = chain
    pi = closed_form_pi(*chain)
    U = transition_matrix(*chain)
    assert pi.min() >= 0
    assert abs(pi.sum() - 1) <= 1e-12
    assert np.abs(pi @ U - pi).sum() < 1e-12
    num = steady_state_numeric(U).pi
    assert np.abs(num - pi).max() <= 1e-9


def test_period_two_chain_does_not_converge():
    U = np.array([[0.0, 1.0], [1.0, 0.0]])
    with pytest.raises(NumericalError, match="did not converge"):
        steady_state_numeric(U, start=np.array([0.9, 0.1]))


def test_doubly_stochastic_two_state():
    pi = steady_state_numeric(np.full((2, 2), 0.5)).pi
    assert np.allclose(pi, 0.5)


def test_random_dense_chain_residual():
    rng = np.random.default_rng(7)
    U = rng.random((20, 20))
    U /= U.sum(axis=1, keepdims=True)
    ss = steady_state_numeric(U)
    assert ss.residual(U) < 1e-9
    assert abs(ss.pi.sum() - 1) < 1e-12


def test_numeric_rejects_non_stochastic():
    with pytest.raises(ValueError):
        steady_state_numeric(np.array([[0.5, 0.6], [0.5, 0.5]]))


def test_chain_occupancy_matches_closed_form():
    N_b, n_tau, n_kappa, kappa, tau = 12, 5, 3, 0.4, 0.6
    pi = closed_form_pi(N_b, n_tau, n_kappa, kappa, tau)
    rng = np.random.default_rng(3)
    u = rng.random(1_000_000).tolist()
    counts = [0] * N_b
    i = N_b - 1
    for x in u:
        if i < n_tau:
            if x < kappa:
                i = min(i + n_kappa, N_b - 1)
        elif x < tau:
            i -= n_tau
        counts[i] += 1
    occ = np.asarray(counts) / len(u)
    assert np.abs(occ - pi).sum() < 0.01


def test_table2_closed_form_and_numeric_agree(t2):
    p, pair, s = t2
    q = quantize(p, 64)
    eps = 1.05 * p.sigma_w2
    U = build_transition_matrix(q, pair, s, eps)
    cf = steady_state_closed_form(q, pair, s, eps).pi
    assert cf @ U.U == pytest.approx(cf, abs=1e-14)
    # gcd(n_tau, n_kappa) > 1 here, so start inside the closed form's class
    num = steady_state_numeric(U, start=cf + 0.0).pi
    assert np.abs(num - cf).max() <= 1e-9


def test_activity_at_large_threshold(t2):
    p, pair, s = t2
    q = quantize(p, 64)
    big = EPS_INF * p.sigma_w2
    # transmission on every active slot: tau = 1
    kappa = pair.p_o_h
    expect = q.n_kappa * kappa / (q.n_kappa * kappa + q.n_tau)
    assert prob_active_mdp(q, pair, s, big) == pytest.approx(expect, abs=1e-12)
    assert prob_active_mdp(q, pair, s, big, continuous=True) == pytest.approx(gamma2(p, pair), abs=1e-6)


def test_activity_equals_active_state_mass(t2):
    p, pair, s = t2
    q = quantize(p, 64)
    eps = 1.03 * p.sigma_w2
    pi = steady_state_closed_form(q, pair, s, eps).pi
    assert prob_active_mdp(q, pair, s, eps) == pytest.approx(pi[q.n_tau:].sum(), rel=1e-12)


def test_exact_and_continuous_close_for_fine_quantisation(t2):
    p, pair, s = t2
    eps = np.linspace(0.9, 1.3, 50) * p.sigma_w2
    for n_tau in (64, 128, 256):
        q = quantize(p, n_tau)
        a = prob_active_mdp(q, pair, s, eps)
        b = prob_active_mdp(q, pair, s, eps, continuous=True)
        assert np.all(np.abs(a - b) <= 0.02 * b)


def _sign_changes(v):
    d = np.diff(v)
    sgn = np.sign(d[np.abs(d) > 1e-15])
    return int(np.count_nonzero(sgn[1:] != sgn[:-1]))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_mdp_objective_rise_then_fall(seed):
    from conftest import random_config
    p, pair, s = random_config(np.random.default_rng(seed))
    q = quantize(p, 64)
    eps = np.linspace(1e-4, EPS_INF, 10_000) * p.sigma_w2
    for cont in (False, True):
        assert _sign_changes(objective_mdp(q, pair, s, eps, continuous=cont)) <= 1
    big = EPS_INF * p.sigma_w2
    assert abs(objective_mdp(q, pair, s, big, continuous=True) - gamma2(p, pair)) < 1e-6


def test_matrix_dump_round_trip(tmp_path, t2):
    p, pair, s = t2
    q = quantize(p, 8)
    U = build_transition_matrix(q, pair, s, 1.05e-9)
    U.dump(tmp_path / "u.csv")
    back = np.loadtxt(tmp_path / "u.csv", delimiter=",")
    assert np.array_equal(back, U.U)
