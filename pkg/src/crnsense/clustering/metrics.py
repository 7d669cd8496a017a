"""Mixture-weight helpers, clustering accuracy and subchannel selection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment


def stick_breaking_weights(v) -> np.ndarray:
    """Weights ``v_k * prod_{j<k} (1 - v_j)``."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise ValueError("stick proportions must be a 1-D sequence")
    if np.any(v <= 0) or np.any(v >= 1):
        raise ValueError("stick proportions must lie strictly inside (0, 1)")
    remaining = np.concatenate([[1.0], np.cumprod(1.0 - v)[:-1]])
    return v * remaining


def crp_conditional(counts, alpha: float, n: int) -> np.ndarray:
    """Prior probability that point ``n`` joins each existing cluster or a new one.

    ``counts`` are the cluster sizes among the other ``n - 1`` points; the
    last entry of the result is the new-cluster probability.
    """
    m = np.asarray(counts, dtype=float).reshape(-1)
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if np.any(m < 0):
        raise ValueError("cluster counts must be >= 0")
    if m.sum() != n - 1:
        raise ValueError(f"cluster counts sum to {m.sum():g}, expected n - 1 = {n - 1}")
    if not alpha >= 0 or (alpha == 0 and n == 1):
        raise ValueError(f"alpha must be > 0, got {alpha}")
    return np.append(m, alpha) / (n - 1 + alpha)


def clustering_accuracy(z_hat, z_true) -> float:
    """Fraction of points correct under the best one-to-one label matching.

    Predicted clusters left without a partner count as errors.
    """
    z_hat = np.asarray(z_hat)
    z_true = np.asarray(z_true)
    if z_hat.shape != z_true.shape:
        raise ValueError(f"label vectors differ in length: {z_hat.size} vs {z_true.size}")
    if z_hat.size == 0:
        raise ValueError("empty label vectors")
    _, a = np.unique(z_hat, return_inverse=True)
    _, b = np.unique(z_true, return_inverse=True)
    conf = np.zeros((a.max() + 1, b.max() + 1), dtype=np.int64)
    np.add.at(conf, (a, b), 1)
    rows, cols = linear_sum_assignment(conf, maximize=True)
    return float(conf[rows, cols].sum()) / z_hat.size


@dataclass(frozen=True)
class SubchannelProfile:
    subchannel_id: int
    arrival_rate: float
    p_i: float
    label: int | str | None = None

    @property
    def p_o(self) -> float:
        return 1.0 - self.p_i


def select_channels(profiles, seed=None) -> tuple[int, int]:
    """``(c_h, c_t)``: busiest subchannel for harvesting, quietest for transmission.

    Ties go to the lowest id, except when every rate is equal: then both
    are drawn uniformly with ``seed``.
    """
    profiles = list(profiles)
    if not profiles:
        raise ValueError("select_channels needs at least one subchannel profile")
    ids = np.array([p.subchannel_id for p in profiles])
    lam = np.array([p.arrival_rate for p in profiles], dtype=float)
    order = np.argsort(ids, kind="stable")
    ids, lam = ids[order], lam[order]
    if len(profiles) > 1 and np.all(lam == lam[0]):
        rng = np.random.default_rng(seed)
        return int(rng.choice(ids)), int(rng.choice(ids))
    return int(ids[np.argmax(lam)]), int(ids[np.argmin(lam)])
