from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class ClusterModel:
    """Hard clustering with contiguous labels ``0..K_plus-1``."""

    z: np.ndarray
    K_plus: int
    means: np.ndarray
    scatters: np.ndarray
    members: dict[int, list[int]] = field(default_factory=dict)
    info: dict = field(default_factory=dict)

    @classmethod
    def from_assignments(cls, X: np.ndarray, z, subchannel_ids=None, info=None) -> "ClusterModel":
        """Relabel ``z`` by first appearance and summarise each cluster."""
        z = np.asarray(z)
        _, first, inv = np.unique(z, return_index=True, return_inverse=True)
        rank = np.empty(first.size, dtype=np.int64)
        rank[np.argsort(first)] = np.arange(first.size)
        labels = rank[inv]
        K = first.size
        d = X.shape[1]
        means = np.zeros((K, d))
        scatters = np.zeros((K, d, d))
        for k in range(K):
            xs = X[labels == k]
            means[k] = xs.mean(axis=0)
            c = xs - means[k]
            scatters[k] = c.T @ c
        members: dict[int, list[int]] = {}
        if subchannel_ids is not None:
            sub = np.asarray(subchannel_ids)
            for k in range(K):
                members[k] = sorted({int(s) for s in sub[labels == k]})
        return cls(labels, K, means, scatters, members, dict(info or {}))


def standardize(X) -> np.ndarray:
    """Zero mean, unit variance per column; constant columns are only centred."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("feature matrix must be a non-empty 2-D array")
    if not np.all(np.isfinite(X)):
        raise ValueError("feature matrix contains non-finite values")
    sd = X.std(axis=0)
    sd[sd == 0] = 1.0
    return (X - X.mean(axis=0)) / sd
