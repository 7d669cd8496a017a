"""K-means baseline (fixed K, best of several k-means++ restarts)."""

from __future__ import annotations

import time
import warnings

import numpy as np
from scipy.cluster.vq import kmeans2

from .model import ClusterModel, standardize


def wcss(X: np.ndarray, z: np.ndarray) -> float:
    total = 0.0
    for k in np.unique(z):
        xs = X[z == k]
        total += float(((xs - xs.mean(axis=0)) ** 2).sum())
    return total


def kmeans_fit(X, K: int, restarts: int = 10, seed=None, standardized: bool = False,
               subchannel_ids=None) -> ClusterModel:
    """Lowest within-cluster sum of squares over ``restarts`` Lloyd runs."""
    X = np.asarray(X, dtype=float)
    Z = X if standardized else standardize(X)
    N = Z.shape[0]
    if not 1 <= K <= N:
        raise ValueError(f"need 1 <= K <= N, got K={K}, N={N}")
    if restarts < 1:
        raise ValueError(f"restarts must be >= 1, got {restarts}")
    t0 = time.perf_counter()
    if K == N:
        best = np.arange(N)
    elif K == 1:
        best = np.zeros(N, dtype=np.int64)
    else:
        rng = np.random.default_rng(seed)
        best, best_cost = None, np.inf
        for _ in range(restarts):
            with warnings.catch_warnings():
                # an emptied cluster just makes this restart a worse candidate
                warnings.simplefilter("ignore")
                _, labels = kmeans2(Z, K, minit="++", seed=rng)
            cost = wcss(Z, labels)
            if cost < best_cost:
                best, best_cost = labels, cost
    elapsed = time.perf_counter() - t0
    return ClusterModel.from_assignments(
        X, best, subchannel_ids, info={"method": "kmeans", "wcss": wcss(Z, best), "elapsed_s": elapsed}
    )
