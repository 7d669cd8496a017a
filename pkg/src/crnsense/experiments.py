"""End-to-end experiment runners behind the command-line interface.

Every runner takes a :class:`~crnsense.config.Config` and a seed and returns
rows (lists of dicts) in a deterministic order; writing them is the CLI's job.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import replace

import numpy as np

from . import dutycycle as dc
from .clustering import (
    SubchannelProfile,
    clustering_accuracy,
    gibbs_fit,
    kmeans_fit,
    select_channels,
    vb_fit,
)
from .config import Config
from .dutycycle import EPS_INF, ChannelPair
from .mdp import (
    build_transition_matrix,
    gamma2,
    objective_mdp,
    prob_active_mdp,
    quantize,
    steady_state_closed_form,
    steady_state_numeric,
)
from .montecarlo import SimConfig, actual_capacity_sweep, simulate
from .optimizer import OptimizerConfig, optimize_threshold
from .sensing import SensingModel
from .traffic import build_subchannels, estimate_channel_stats, observation_set, profile_preset

METHODS = ("oracle", "gibbs", "vb", "kmeans")


def _seeds(seed, n: int) -> list[int]:
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(n)]


def cluster(method: str, X, n_classes: int, cfg: Config, seed, truth=None):
    """Hard labels for ``X`` by ``method``; ``oracle`` returns ``truth``."""
    s = cfg.settings
    if method == "oracle":
        if truth is None:
            raise ValueError("oracle clustering needs the true labels")
        return np.asarray(truth), {"K_plus": int(np.unique(truth).size), "elapsed_s": 0.0}
    if method == "gibbs":
        m = gibbs_fit(X, alpha=s.alpha, sweeps=s.sweeps, seed=seed)
    elif method == "vb":
        m, _ = vb_fit(X, alpha=s.alpha, K_T=s.K_T, max_iter=s.vb_max_iter, seed=seed)
    elif method == "kmeans":
        m = kmeans_fit(X, min(n_classes, len(X)), restarts=s.kmeans_restarts, seed=seed)
    else:
        raise ValueError(f"unknown clustering method {method!r}; expected one of {METHODS}")
    return m.z, {"K_plus": m.K_plus, "elapsed_s": m.info["elapsed_s"], **m.info}


# ---------------------------------------------------------------------------
# cluster-bench

def run_cluster_bench(cfg: Config, seed: int, methods=("gibbs", "vb", "kmeans")) -> list[dict]:
    """Accuracy, K+ and wall-clock per method and point count, averaged over seeds."""
    s = cfg.settings
    profiles = profile_preset(s.traffic)
    rows = []
    for n in s.point_counts:
        acc = {m: [] for m in methods}
        kp = {m: [] for m in methods}
        ms = {m: [] for m in methods}
        for rep_seed in _seeds([seed, n], s.bench_seeds):
            data_seed, fit_seed = _seeds(rep_seed, 2)
            traces = build_subchannels(profiles, s.subchannels_per_profile, s.trace_duration, data_seed)
            X, sub = observation_set(traces, n, s.warmup, data_seed)
            truth = sub // s.subchannels_per_profile
            for m in methods:
                z, info = cluster(m, X, len(profiles), cfg, fit_seed, truth)
                acc[m].append(clustering_accuracy(z, truth))
                kp[m].append(info["K_plus"])
                ms[m].append(1e3 * info["elapsed_s"])
        for m in methods:
            rows.append({"points": n, "method": m, "accuracy": float(np.mean(acc[m])),
                         "K_plus": float(np.mean(kp[m])), "elapsed_ms": float(np.mean(ms[m])),
                         "seeds": s.bench_seeds})
    return rows


# ---------------------------------------------------------------------------
# threshold and power sweeps

def _sensing(cfg: Config) -> SensingModel:
    return SensingModel.from_params(cfg.params)


def eps_grid(cfg: Config) -> np.ndarray:
    s = cfg.settings
    return np.linspace(s.eps_min, s.eps_max, s.eps_points) * cfg.params.sigma_w2


def run_threshold_sweep(cfg: Config, seed: int, opt: OptimizerConfig = OptimizerConfig()):
    """Model and simulated capacity over the threshold grid.

    Returns ``(rows, diagnostics)``; diagnostics hold one optimiser record
    per model.
    """
    p, pair, sm, s = cfg.params, cfg.pair, _sensing(cfg), cfg.settings
    grid = eps_grid(cfg)
    scale = p.T_t / p.T_slot * p.capacity * pair.p_i_t
    q = quantize(p, s.n_tau)
    dc_cap = np.asarray(dc.rate_capacity(p, pair, sm, grid))
    mdp_cap = scale * np.asarray(objective_mdp(q, pair, sm, grid))
    p_c = np.asarray(dc.collision_prob(p, pair, sm, grid))
    sims = actual_capacity_sweep(grid, SimConfig(s.N_t, seed, grid[0], p, pair, sm),
                                 workers=s.workers)
    rows = []
    for i, (eps, r) in enumerate(sims):
        rows.append({
            "eps": eps / p.sigma_w2, "capacity_bps": r.actual_capacity, "capacity_se": r.capacity_se,
            "active_frac": r.active_fraction, "collision_rate": r.collision_rate,
            "mean_battery_J": r.mean_battery, "dc_capacity_bps": float(dc_cap[i]),
            "mdp_capacity_bps": float(mdp_cap[i]), "model_collision": float(p_c[i]),
            "feasible": int(p_c[i] <= p.P_bar_c),
        })
    diags = []
    for model in ("duty-cycle", "mdp"):
        _, _, d = optimize_threshold(model, p, pair, sm, opt, n_tau=s.n_tau)
        diags.append(d)
    return rows, diags


def run_power_sweep(cfg: Config, seed: int, opt: OptimizerConfig = OptimizerConfig()):
    """Optimised capacity of both models, and its simulated value, per transmit power."""
    s = cfg.settings
    rows, diags = [], []
    for P_t, sim_seed in zip(s.P_t_grid, _seeds(seed, len(s.P_t_grid))):
        c = cfg.with_overrides(P_t=repr(float(P_t)))
        p, pair, sm = c.params, c.pair, _sensing(c)
        for model in ("duty-cycle", "mdp"):
            eps, eps_c, d = optimize_threshold(model, p, pair, sm, opt, n_tau=s.n_tau)
            scale = p.T_t / p.T_slot * p.capacity * pair.p_i_t
            sim = simulate(SimConfig(s.N_t, sim_seed, eps, p, pair, sm))
            rows.append({
                "P_t_W": float(P_t), "model": d.model, "eps_star": eps / p.sigma_w2,
                "eps_c": float("nan") if eps_c is None else eps_c / p.sigma_w2,
                "capacity_bps": scale * d.objective, "mc_capacity_bps": sim.actual_capacity,
                "mc_capacity_se": sim.capacity_se, "collision": d.collision, "branch": d.branch,
            })
            diags.append(d)
    return rows, diags


# ---------------------------------------------------------------------------
# mdp-check

def run_mdp_check(cfg: Config, seed: int, opt: OptimizerConfig = OptimizerConfig()):
    """Closed-form versus numerical steady state at the optimum and at the large-threshold limit.

    Returns ``(rows, matrices)`` where ``matrices`` maps a label to the
    transition matrix evaluated there.
    """
    p, pair, sm, s = cfg.params, cfg.pair, _sensing(cfg), cfg.settings
    q = quantize(p, s.n_tau)
    eps_star, _, _ = optimize_threshold("mdp", p, pair, sm, opt, n_tau=s.n_tau)
    rows, mats = [], {}
    for label, eps in (("eps_star", eps_star), ("eps_inf", EPS_INF * p.sigma_w2)):
        U = build_transition_matrix(q, pair, sm, eps)
        exact = steady_state_closed_form(q, pair, sm, eps)
        numeric = steady_state_numeric(U)
        rows.append({
            "point": label, "eps": eps / p.sigma_w2, "n_tau": q.n_tau, "n_kappa": q.n_kappa,
            "N_b": q.N_b, "gcd": int(np.gcd(q.n_tau, q.n_kappa)),
            "max_abs_err": float(np.abs(exact.pi - numeric.pi).max()),
            "residual": exact.residual(U),
            "P_a_mdp": float(prob_active_mdp(q, pair, sm, eps)),
            "P_a_mdp_cont": float(prob_active_mdp(q, pair, sm, eps, continuous=True)),
            "P_a_dc": float(dc.prob_active(p, pair, sm, eps)),
            "gamma1": dc.gamma1(p, pair), "gamma2": gamma2(p, pair),
        })
        mats[label] = U
    return rows, mats


# ---------------------------------------------------------------------------
# full pipeline

def subchannel_profiles(traces, profiles, slot: float) -> list[SubchannelProfile]:
    """Measured arrival rate and idle probability of every trace."""
    bitrate = {prof.name: prof.bitrate for prof in profiles}
    out = []
    for tr in traces:
        lam, p_i, _ = estimate_channel_stats(tr, slot, bitrate[tr.label])
        out.append(SubchannelProfile(tr.subchannel_id, lam, p_i, tr.label))
    return out


def believed_profiles(true_profiles, labels_by_sub: dict[int, int]) -> list[SubchannelProfile]:
    """Replace each subchannel's statistics by the average over its cluster."""
    groups: dict[int, list[SubchannelProfile]] = {}
    for prof in true_profiles:
        groups.setdefault(labels_by_sub[prof.subchannel_id], []).append(prof)
    out = []
    for prof in true_profiles:
        g = groups[labels_by_sub[prof.subchannel_id]]
        out.append(SubchannelProfile(prof.subchannel_id,
                                     float(np.mean([x.arrival_rate for x in g])),
                                     float(np.mean([x.p_i for x in g])),
                                     labels_by_sub[prof.subchannel_id]))
    return out


def majority_labels(z, sub_ids) -> dict[int, int]:
    out = {}
    for sid in np.unique(sub_ids):
        counts = Counter(int(v) for v in np.asarray(z)[sub_ids == sid])
        out[int(sid)] = min(counts, key=lambda k: (-counts[k], k))
    return out


def run_full_pipeline(cfg: Config, seed: int, opt: OptimizerConfig = OptimizerConfig(),
                      methods=None):
    """Traces, clustering, channel selection, threshold optimisation, simulation.

    Thresholds are optimised on the statistics the clustering *believes*
    (cluster averages) and evaluated by simulation on the selected
    subchannels' true statistics. For each method and model the simulated
    capacity is also reported at half and double the optimised threshold.
    """
    s = cfg.settings
    methods = tuple(methods or s.methods)
    p, sm = cfg.params, _sensing(cfg)
    profiles = profile_preset(s.traffic)
    rows, diags = [], []
    for rep, rep_seed in enumerate(_seeds(seed, s.pipeline_seeds)):
        data_seed, fit_seed, sim_seed = _seeds(rep_seed, 3)
        traces = build_subchannels(profiles, s.subchannels_per_profile, s.trace_duration, data_seed)
        true = subchannel_profiles(traces, profiles, p.T_slot)
        X, sub = observation_set(traces, s.points, s.warmup, data_seed)
        truth = sub // s.subchannels_per_profile
        for method in methods:
            z, info = cluster(method, X, len(profiles), cfg, fit_seed, truth)
            labels = majority_labels(z, sub)
            believed = believed_profiles(true, labels)
            c_h, c_t = select_channels(believed, seed=fit_seed)
            b_pair = ChannelPair(believed[c_h].p_i, believed[c_t].p_i)
            t_pair = ChannelPair(true[c_h].p_i, true[c_t].p_i)
            for model in ("duty-cycle", "mdp"):
                eps, _, d = optimize_threshold(model, p, b_pair, sm, opt, n_tau=s.n_tau)
                base = SimConfig(s.N_t, sim_seed, eps, p, t_pair, sm)
                caps = {f: simulate(replace(base, eps=f * eps)).actual_capacity
                        for f in (0.5, 1.0, 2.0)}
                rows.append({
                    "rep": rep, "method": method, "accuracy": clustering_accuracy(z, truth),
                    "K_plus": info["K_plus"], "c_h": c_h, "c_t": c_t,
                    "believed_p_i_h": b_pair.p_i_h, "believed_p_i_t": b_pair.p_i_t,
                    "true_p_i_h": t_pair.p_i_h, "true_p_i_t": t_pair.p_i_t,
                    "model": d.model, "eps_star": eps / p.sigma_w2,
                    "model_capacity_bps": float(dc.rate_capacity(p, t_pair, sm, eps))
                    if model == "duty-cycle" else
                    p.T_t / p.T_slot * p.capacity * t_pair.p_i_t
                    * float(objective_mdp(quantize(p, s.n_tau), t_pair, sm, eps)),
                    "mc_capacity_bps": caps[1.0], "mc_capacity_half_bps": caps[0.5],
                    "mc_capacity_double_bps": caps[2.0],
                })
                diags.append(d)
    return rows, diags
