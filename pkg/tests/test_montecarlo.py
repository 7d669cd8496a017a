import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crnsense.dutycycle import ChannelPair, prob_active
from crnsense.montecarlo import (
    SWEEP_COLUMNS,
    SimConfig,
    actual_capacity_sweep,
    simulate,
    write_sweep_csv,
)
from crnsense.optimizer import optimize_threshold

from conftest import random_config


def _cfg(t2, **kw):
    p, pair, s = t2
    base = dict(N_t=20_000, seed=0, eps=1.05 * p.sigma_w2, params=p, pair=pair, sensing=s)
    base.update(kw)
    return SimConfig(**base)


def test_config_validation(t2):
    with pytest.raises(ValueError):
        _cfg(t2, N_t=0)
    with pytest.raises(ValueError):
        _cfg(t2, burst=1.0)
    with pytest.raises(ValueError):
        _cfg(t2, p_f=1.5)


def test_no_energy_no_activity(t2):
    r = simulate(_cfg(t2, pair=ChannelPair(1.0, 0.8)))
    assert r.active_fraction == 0.0
    assert r.actual_capacity == 0.0
    assert r.harvest_count == 0 and r.transmit_count == 0


def test_always_transmitting_user(t2):
    p, _, s = t2
    n = 1000
    need = p.e_s + p.e_t
    q = p.replace(B_max=need * (n + 1), B_0=need * (n + 1))
    r = simulate(_cfg((q, ChannelPair(0.5, 1.0), s), N_t=n, p_f=0.0, p_d=1.0))
    assert r.active_fraction == 1.0
    assert r.transmit_count == n
    assert r.actual_capacity == pytest.approx(q.T_t / q.T_slot * q.capacity, rel=1e-12)
    assert r.collision_rate == 0.0


def test_collisions_only_on_busy_transmit_slots(t2):
    p, _, s = t2
    q = p.replace(B_max=1.0, B_0=1.0)
    r = simulate(_cfg((q, ChannelPair(0.5, 0.0), s), N_t=500, p_f=0.0, p_d=0.0))
    # transmit channel always busy, detector always misses
    assert r.actual_capacity == 0.0
    assert r.collision_rate == pytest.approx(r.active_fraction)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.8, 1.5), st.integers(1, 3000), st.floats(0, 0.9))
def test_report_invariants(seed, x, n, burst):
    p, pair, s = random_config(np.random.default_rng(seed))
    r = simulate(SimConfig(n, seed, x * p.sigma_w2, p, pair, s, burst=burst))
    assert 0 <= r.active_fraction <= 1 and 0 <= r.collision_rate <= 1
    assert r.actual_capacity >= 0
    assert 0 <= r.transmit_count <= n and 0 <= r.harvest_count <= n
    assert 0 <= r.min_battery <= r.max_battery <= p.B_max
    assert 0 <= r.mean_battery <= p.B_max


def test_same_seed_same_report(t2):
    a = simulate(_cfg(t2, seed=42))
    b = simulate(_cfg(t2, seed=42))
    assert a == b
    assert simulate(_cfg(t2, seed=43)) != a


def test_burst_mode_keeps_marginals(t2):
    p, _, s = t2
    q = p.replace(B_max=1e3, B_0=1e3)
    pair = ChannelPair(0.5, 0.3)
    r = simulate(_cfg((q, pair, s), N_t=200_000, burst=0.8, p_f=0.0, p_d=1.0))
    assert r.busy_slots / r.N_t == pytest.approx(pair.p_o_t, abs=0.02)


def test_activity_tracks_model(t2):
    p, pair, s = t2
    eps = 1.05 * p.sigma_w2
    r = simulate(_cfg(t2, N_t=200_000, seed=5))
    assert abs(r.active_fraction - prob_active(p, pair, s, eps)) <= 3 * r.active_se


def test_standard_error_shrinks_with_run_length(t2):
    def spread(n):
        caps = [simulate(_cfg(t2, N_t=n, seed=1000 + k)).actual_capacity for k in range(30)]
        return np.std(caps, ddof=1)

    s1, s2, s4 = spread(20_000), spread(40_000), spread(80_000)
    assert s2 / s1 == pytest.approx(2 ** -0.5, abs=0.2)
    assert s4 / s1 == pytest.approx(0.5, abs=0.15)


def test_batch_standard_error_is_calibrated(t2):
    caps, ses = [], []
    for k in range(30):
        r = simulate(_cfg(t2, N_t=40_000, seed=2000 + k))
        caps.append(r.actual_capacity)
        ses.append(r.capacity_se)
    assert np.mean(ses) == pytest.approx(np.std(caps, ddof=1), rel=0.35)


def test_sweep_single_point_and_determinism(t2):
    one = actual_capacity_sweep([1.05e-9], _cfg(t2, N_t=2000))
    assert len(one) == 1 and one[0][0] == 1.05e-9
    grid = np.linspace(0.95, 1.2, 6) * 1e-9
    a = actual_capacity_sweep(grid, _cfg(t2, N_t=2000, seed=3))
    b = actual_capacity_sweep(grid, _cfg(t2, N_t=2000, seed=3))
    c = actual_capacity_sweep(grid, _cfg(t2, N_t=2000, seed=3), workers=2)
    assert a == b == c
    assert len({r.actual_capacity for _, r in a}) > 1
    with pytest.raises(ValueError):
        actual_capacity_sweep([], _cfg(t2))


@pytest.mark.slow
def test_simulated_argmax_near_model_optimum(t2):
    p, pair, s = t2
    eps_star, _, _ = optimize_threshold("duty-cycle", p, pair, s)
    grid = np.linspace(0.9, 1.3, 100) * p.sigma_w2
    rows = actual_capacity_sweep(grid, _cfg(t2, N_t=100_000, seed=0))
    best = grid[int(np.argmax([r.actual_capacity for _, r in rows]))]
    assert abs(best - eps_star) <= 2 * (grid[1] - grid[0]) + 1e-21


def test_sweep_csv(tmp_path, t2):
    rows = actual_capacity_sweep([1.0e-9, 1.1e-9], _cfg(t2, N_t=500))
    path = tmp_path / "sweep.csv"
    write_sweep_csv(rows, path, 1e-9)
    lines = path.read_text().splitlines()
    assert lines[0] == "# schema=v1"
    table = list(csv.reader(lines[1:]))
    assert tuple(table[0]) == SWEEP_COLUMNS
    assert float(table[1][0]) == pytest.approx(1.0) and float(table[2][0]) == pytest.approx(1.1)
