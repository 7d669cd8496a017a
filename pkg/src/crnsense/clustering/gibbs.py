"""Collapsed Gibbs sampling for a Dirichlet-process Gaussian mixture.

Cluster means and covariances are integrated out under the NIW prior, so each
point is reassigned with probability proportional to the CRP prior weight
times the Student-t predictive of its would-be cluster. Clusters that lose
their last point are dropped at once.
"""

from __future__ import annotations

import time

import numpy as np

from ..core import NumericalError
from .model import ClusterModel, standardize
from .niw import NiwPrior, SuffStats, predictive


class GibbsState:
    """Assignments plus cached per-cluster statistics and predictive terms.

    Predictive parameters are stacked so one point is scored against every
    cluster in a single vectorised call; only clusters whose membership
    changed are refreshed.
    """

    def __init__(self, X: np.ndarray, z, prior: NiwPrior, alpha: float):
        self.X = X
        self.prior = prior
        self.alpha = alpha
        n, d = X.shape
        self.z = np.full(n, -1, dtype=np.int64)
        self.stats: list[SuffStats] = []
        cap = 8
        self._loc = np.zeros((cap, d))
        self._prec = np.zeros((cap, d, d))
        self._const = np.zeros(cap)
        self._dof = np.ones(cap)
        self._dirty: set[int] = set()
        self._saved = None
        self._new_term = predictive(SuffStats.empty(d), prior)
        self._log_alpha = np.log(alpha)
        if z is not None:
            z = np.asarray(z)
            for lab in np.unique(z[z >= 0]):
                k = self._new_cluster()
                idx = np.flatnonzero(z == lab)
                self.z[idx] = k
                self.stats[k] = SuffStats.of(X[idx])

    @property
    def K_plus(self) -> int:
        return len(self.stats)

    @property
    def counts(self) -> np.ndarray:
        return np.array([s.n for s in self.stats])

    def _new_cluster(self) -> int:
        k = len(self.stats)
        if k == self._loc.shape[0]:
            self._loc = np.concatenate([self._loc, np.zeros_like(self._loc)])
            self._prec = np.concatenate([self._prec, np.zeros_like(self._prec)])
            self._const = np.concatenate([self._const, np.zeros_like(self._const)])
            self._dof = np.concatenate([self._dof, np.ones_like(self._dof)])
        self.stats.append(SuffStats.empty(self.X.shape[1]))
        self._dirty.add(k)
        return k

    def _refresh(self) -> None:
        for k in self._dirty:
            t = predictive(self.stats[k], self.prior, cluster_id=k)
            self._loc[k] = t.loc
            self._prec[k] = t.prec
            self._const[k] = t.log_norm + np.log(self.stats[k].n)
            self._dof[k] = t.dof
        self._dirty.clear()

    def remove(self, i: int) -> None:
        k = self.z[i]
        # most points return to their cluster; remember its clean cache row
        self._saved = None if k in self._dirty else (
            k, self._loc[k].copy(), self._prec[k].copy(), self._const[k], self._dof[k])
        self.stats[k].remove(self.X[i])
        self.z[i] = -1
        if self.stats[k].n == 0:
            # keep labels contiguous: move the last cluster into the hole
            last = len(self.stats) - 1
            if k != last:
                self.stats[k] = self.stats[last]
                self._loc[k] = self._loc[last]
                self._prec[k] = self._prec[last]
                self._const[k] = self._const[last]
                self._dof[k] = self._dof[last]
                self.z[self.z == last] = k
                if last in self._dirty:
                    self._dirty.discard(last)
                    self._dirty.add(k)
            else:
                self._dirty.discard(k)
            self.stats.pop()
            self._saved = None
        else:
            self._dirty.add(k)

    def add(self, i: int, k: int) -> None:
        if k == len(self.stats):
            self._new_cluster()
        self.stats[k].add(self.X[i])
        self.z[i] = k
        if self._saved is not None and self._saved[0] == k:
            _, self._loc[k], self._prec[k], self._const[k], self._dof[k] = self._saved
            self._dirty.discard(k)
        else:
            self._dirty.add(k)
        self._saved = None

    def log_weights(self, i: int) -> np.ndarray:
        """Unnormalised log probabilities over existing clusters and a new one."""
        self._refresh()
        x = self.X[i]
        K = len(self.stats)
        diff = x - self._loc[:K]
        maha = np.einsum("ki,kij,kj->k", diff, self._prec[:K], diff)
        dof = self._dof[:K]
        out = np.empty(K + 1)
        out[:K] = self._const[:K] - 0.5 * (dof + x.size) * np.log1p(maha / dof)
        out[K] = self._log_alpha + self._new_term.logpdf(x)
        return out

    def sample(self, i: int, rng: np.random.Generator) -> int:
        """Draw a new cluster for the (removed) point ``i``."""
        lw = self.log_weights(i)
        if not np.all(np.isfinite(lw)):
            raise NumericalError(f"point {i}: non-finite assignment weights")
        c = np.cumsum(np.exp(lw - lw.max()))
        return min(int(np.searchsorted(c, rng.random() * c[-1], side="right")), lw.size - 1)

    def consistency_error(self) -> float:
        """Largest deviation between cached and recomputed statistics."""
        err = 0.0
        for k, s in enumerate(self.stats):
            ref = SuffStats.of(self.X[self.z == k])
            err = max(err, abs(ref.n - s.n), np.abs(ref.s - s.s).max(), np.abs(ref.ss - s.ss).max())
        return float(err)


def gibbs_fit(X, prior: NiwPrior | None = None, alpha: float = 1.0, sweeps: int = 50,
              seed=None, init_clusters: int = 50,
              standardized: bool = False, subchannel_ids=None, on_sweep=None) -> ClusterModel:
    """Cluster ``X`` by collapsed Gibbs sampling; returns the last sweep's labels.

    Features are standardised first unless ``standardized`` is set. Points
    start spread uniformly at random over ``init_clusters`` groups: starting
    from many small groups lets well-separated classes sort themselves out,
    while a few large mixed groups tend to stay merged.
    ``on_sweep(sweep, state)`` is called after every sweep.
    """
    X = np.asarray(X, dtype=float)
    if sweeps < 1:
        raise ValueError(f"sweeps must be >= 1, got {sweeps}")
    if not alpha > 0:
        raise ValueError(f"alpha must be > 0, got {alpha}")
    Z = X if standardized else standardize(X)
    N, d = Z.shape
    prior = prior or NiwPrior.default(d)
    if prior.dim != d:
        raise ValueError(f"prior dimension {prior.dim} does not match features ({d})")
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    z0 = rng.integers(0, max(1, min(init_clusters, N)), size=N)
    state = GibbsState(Z, z0, prior, alpha)
    k_trace = []
    for sweep in range(sweeps):
        for i in rng.permutation(N):
            state.remove(i)
            try:
                k = state.sample(i, rng)
            except NumericalError as exc:
                raise NumericalError(f"sweep {sweep}, {exc}") from None
            state.add(i, k)
        k_trace.append(state.K_plus)
        if on_sweep is not None:
            on_sweep(sweep, state)
    elapsed = time.perf_counter() - t0
    return ClusterModel.from_assignments(
        X, state.z, subchannel_ids,
        info={"method": "gibbs", "k_trace": k_trace, "elapsed_s": elapsed},
    )
