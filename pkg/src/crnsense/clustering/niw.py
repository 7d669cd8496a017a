"""Normal-inverse-Wishart prior, conjugate updates and Student-t predictive."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from ..core import NumericalError


@dataclass(frozen=True)
class NiwPrior:
    mu0: np.ndarray
    kappa0: float
    nu0: float
    Lambda0: np.ndarray

    def __post_init__(self):
        mu0 = np.atleast_1d(np.asarray(self.mu0, dtype=float))
        L = np.atleast_2d(np.asarray(self.Lambda0, dtype=float))
        d = mu0.size
        if L.shape != (d, d):
            raise ValueError(f"Lambda0 must be {d}x{d}, got {L.shape}")
        if not np.allclose(L, L.T, atol=1e-12):
            raise ValueError("Lambda0 must be symmetric")
        if np.linalg.eigvalsh(L).min() <= 0:
            raise ValueError("Lambda0 must be positive definite")
        if not self.kappa0 > 0:
            raise ValueError(f"kappa0 must be > 0, got {self.kappa0}")
        if not self.nu0 > d - 1:
            raise ValueError(f"nu0 must exceed d - 1 = {d - 1}, got {self.nu0}")
        object.__setattr__(self, "mu0", mu0)
        object.__setattr__(self, "Lambda0", L)

    @property
    def dim(self) -> int:
        return self.mu0.size

    @classmethod
    def default(cls, d: int = 3) -> "NiwPrior":
        """Weak prior for standardised features."""
        return cls(np.zeros(d), 0.01, d + 2.0, np.eye(d))


@dataclass
class SuffStats:
    """Count, sum and sum of outer products of the points in one cluster."""

    n: int
    s: np.ndarray
    ss: np.ndarray

    @classmethod
    def empty(cls, d: int) -> "SuffStats":
        return cls(0, np.zeros(d), np.zeros((d, d)))

    @classmethod
    def of(cls, X: np.ndarray) -> "SuffStats":
        X = np.atleast_2d(X)
        return cls(X.shape[0], X.sum(axis=0), X.T @ X)

    def add(self, x: np.ndarray) -> None:
        self.n += 1
        self.s += x
        self.ss += x[:, None] * x[None, :]

    def remove(self, x: np.ndarray) -> None:
        self.n -= 1
        self.s -= x
        self.ss -= x[:, None] * x[None, :]


def posterior_params(stats: SuffStats, prior: NiwPrior):
    """``(mu_n, kappa_n, nu_n, Lambda_n)`` after absorbing ``stats``."""
    kn = prior.kappa0 + stats.n
    nn = prior.nu0 + stats.n
    mu = (prior.kappa0 * prior.mu0 + stats.s) / kn
    L = (prior.Lambda0 + stats.ss + prior.kappa0 * np.outer(prior.mu0, prior.mu0)
         - kn * np.outer(mu, mu))
    L = 0.5 * (L + L.T)
    return mu, kn, nn, L


@dataclass(frozen=True)
class StudentT:
    """Multivariate t with location ``loc``, precision ``prec`` (inverse scale)."""

    loc: np.ndarray
    prec: np.ndarray
    dof: float
    log_norm: float

    def logpdf(self, X) -> np.ndarray | float:
        X = np.asarray(X, dtype=float)
        diff = X - self.loc
        maha = np.einsum("...i,ij,...j->...", diff, self.prec, diff)
        d = self.loc.size
        out = self.log_norm - 0.5 * (self.dof + d) * np.log1p(maha / self.dof)
        return float(out) if np.ndim(out) == 0 else out


def predictive(stats: SuffStats, prior: NiwPrior, cluster_id=None) -> StudentT:
    """Posterior predictive of one more point in the cluster.

    Student-t with ``nu_n - d + 1`` degrees of freedom and scale
    ``Lambda_n (kappa_n + 1) / (kappa_n (nu_n - d + 1))``.
    """
    mu, kn, nn, L = posterior_params(stats, prior)
    d = prior.dim
    dof = nn - d + 1
    scale = L * (kn + 1) / (kn * dof)
    try:
        chol = np.linalg.cholesky(scale)
    except np.linalg.LinAlgError:
        where = "" if cluster_id is None else f" of cluster {cluster_id}"
        raise NumericalError(f"predictive scale matrix{where} is not positive definite") from None
    inv_chol = np.linalg.inv(chol)
    prec = inv_chol.T @ inv_chol
    logdet = 2.0 * np.log(np.diag(chol)).sum()
    log_norm = (gammaln((dof + d) / 2) - gammaln(dof / 2)
                - 0.5 * d * math.log(dof * math.pi) - 0.5 * logdet)
    return StudentT(mu, prec, dof, float(log_norm))


def posterior_predictive(x, stats: SuffStats | None, prior: NiwPrior, cluster_id=None) -> float:
    """Predictive density at ``x`` for a cluster with ``stats`` (``None`` = empty)."""
    if stats is None:
        stats = SuffStats.empty(prior.dim)
    return math.exp(predictive(stats, prior, cluster_id).logpdf(np.asarray(x, dtype=float)))
