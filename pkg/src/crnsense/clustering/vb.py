"""Mean-field variational Bayes for a truncated stick-breaking Gaussian mixture.

The variational family factorises into Beta factors for the stick
proportions, a Normal-Wishart factor per component and a categorical factor
per point. Coordinate ascent cycles through the global factors and the
responsibilities; the evidence lower bound is evaluated after each full cycle
and must not decrease.

Internally the NIW prior is handled in its Normal-Wishart form, whose Wishart
scale is the inverse of the NIW scale matrix.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.special import betaln, digamma, gammaln, logsumexp

from ..core import NumericalError
from .model import ClusterModel, standardize
from .niw import NiwPrior


class ElboDecreaseError(NumericalError):
    """The lower bound went down between iterations (an update is inconsistent)."""


@dataclass
class VbState:
    K_T: int
    zeta: np.ndarray            # (K_T - 1, 2) Beta parameters of the sticks
    beta: np.ndarray            # (K_T,) mean precision scaling
    m: np.ndarray               # (K_T, d) mean locations
    W: np.ndarray               # (K_T, d, d) Wishart scales
    nu: np.ndarray              # (K_T,) Wishart degrees of freedom
    resp: np.ndarray            # (N, K_T) responsibilities
    elbo_trace: list[float] = field(default_factory=list)

    @property
    def weights(self) -> np.ndarray:
        return self.resp.sum(axis=0)


def _log_wishart_norm(W_logdet: np.ndarray, nu: np.ndarray, d: int) -> np.ndarray:
    """log B(W, nu) of the Wishart density."""
    i = np.arange(1, d + 1)
    return (-0.5 * nu * W_logdet - 0.5 * nu * d * math.log(2.0)
            - 0.25 * d * (d - 1) * math.log(math.pi)
            - gammaln(0.5 * (nu[:, None] + 1 - i)).sum(axis=1))


class _Fitter:
    def __init__(self, X: np.ndarray, prior: NiwPrior, alpha: float, K_T: int):
        self.X = X
        self.N, self.d = X.shape
        self.alpha = alpha
        self.K = K_T
        self.m0 = prior.mu0
        self.beta0 = prior.kappa0
        self.nu0 = prior.nu0
        self.W0_inv = prior.Lambda0
        self.W0_logdet = -np.linalg.slogdet(prior.Lambda0)[1]
        self.XX = np.einsum("ni,nj->nij", X, X)

    # -- global factors -----------------------------------------------------
    def update_global(self, resp: np.ndarray):
        Nk = resp.sum(axis=0) + 1e-300
        xbar = (resp.T @ self.X) / Nk[:, None]
        # weighted scatter about each component mean
        S = np.einsum("nk,nij->kij", resp, self.XX) / Nk[:, None, None] - np.einsum("ki,kj->kij", xbar, xbar)
        beta = self.beta0 + Nk
        m = (self.beta0 * self.m0 + Nk[:, None] * xbar) / beta[:, None]
        dx = xbar - self.m0
        W_inv = (self.W0_inv + Nk[:, None, None] * S
                 + (self.beta0 * Nk / beta)[:, None, None] * np.einsum("ki,kj->kij", dx, dx))
        W_inv = 0.5 * (W_inv + np.transpose(W_inv, (0, 2, 1)))
        try:
            W = np.linalg.inv(W_inv)
            np.linalg.cholesky(W)
        except np.linalg.LinAlgError:
            raise NumericalError("variational Wishart scale is not positive definite") from None
        nu = self.nu0 + Nk
        tail = np.concatenate([np.cumsum(Nk[::-1])[::-1][1:], [0.0]])
        zeta = np.column_stack([1.0 + Nk[:-1], self.alpha + tail[:-1]])
        return zeta, beta, m, W, nu

    def expectations(self, zeta, beta, m, W, nu):
        d = self.d
        W_logdet = np.linalg.slogdet(W)[1]
        i = np.arange(1, d + 1)
        e_logdet = digamma(0.5 * (nu[:, None] + 1 - i)).sum(axis=1) + d * math.log(2.0) + W_logdet
        dg = digamma(zeta.sum(axis=1))
        e_log_v = digamma(zeta[:, 0]) - dg
        e_log_1mv = digamma(zeta[:, 1]) - dg
        e_log_pi = np.concatenate([e_log_v, [0.0]]) + np.concatenate([[0.0], np.cumsum(e_log_1mv)])
        return W_logdet, e_logdet, e_log_v, e_log_1mv, e_log_pi

    # -- local factors --------------------------------------------------------
    def update_resp(self, params):
        zeta, beta, m, W, nu = params
        _, e_logdet, _, _, e_log_pi = self.expectations(*params)
        diff = self.X[:, None, :] - m[None, :, :]
        maha = np.einsum("nki,kij,nkj->nk", diff, W, diff)
        e_quad = self.d / beta[None, :] + nu[None, :] * maha
        log_rho = e_log_pi + 0.5 * e_logdet - 0.5 * self.d * math.log(2 * math.pi) - 0.5 * e_quad
        resp = np.exp(log_rho - logsumexp(log_rho, axis=1, keepdims=True))
        return resp

    # -- bound ----------------------------------------------------------------
    def elbo(self, resp, params) -> float:
        zeta, beta, m, W, nu = params
        d = self.d
        W_logdet, e_logdet, e_log_v, e_log_1mv, e_log_pi = self.expectations(*params)
        Nk = resp.sum(axis=0)
        safe = np.maximum(Nk, 1e-300)
        xbar = (resp.T @ self.X) / safe[:, None]
        S = np.einsum("nk,nij->kij", resp, self.XX) / safe[:, None, None] - np.einsum("ki,kj->kij", xbar, xbar)
        dxm = xbar - m
        lik = 0.5 * np.sum(Nk * (
            e_logdet - d / beta - nu * np.einsum("kij,kji->k", S, W)
            - nu * np.einsum("ki,kij,kj->k", dxm, W, dxm) - d * math.log(2 * math.pi)))

        p_z = float(np.sum(resp * e_log_pi))
        p_v = float(np.sum(math.log(self.alpha) + (self.alpha - 1) * e_log_1mv))
        dm = m - self.m0
        log_b0 = _log_wishart_norm(np.full(self.K, self.W0_logdet), np.full(self.K, self.nu0), d)
        p_mu_lam = float(np.sum(
            0.5 * (d * np.log(self.beta0 / (2 * math.pi)) + e_logdet - d * self.beta0 / beta
                   - self.beta0 * nu * np.einsum("ki,kij,kj->k", dm, W, dm))
            + log_b0 + 0.5 * (self.nu0 - d - 1) * e_logdet
            - 0.5 * nu * np.einsum("ij,kji->k", self.W0_inv, W)))

        with np.errstate(divide="ignore", invalid="ignore"):
            q_z = float(np.sum(np.where(resp > 0, resp * np.log(resp), 0.0)))
        q_v = float(np.sum((zeta[:, 0] - 1) * e_log_v + (zeta[:, 1] - 1) * e_log_1mv
                           - betaln(zeta[:, 0], zeta[:, 1])))
        log_b = _log_wishart_norm(W_logdet, nu, d)
        entropy_w = -log_b - 0.5 * (nu - d - 1) * e_logdet + 0.5 * nu * d
        q_mu_lam = float(np.sum(0.5 * e_logdet + 0.5 * d * np.log(beta / (2 * math.pi))
                                - 0.5 * d - entropy_w))
        return lik + p_z + p_v + p_mu_lam - q_z - q_v - q_mu_lam


def vb_fit(X, prior: NiwPrior | None = None, alpha: float = 1.0, K_T: int = 20,
           max_iter: int = 500, tol: float = 1e-6, seed=None, standardized: bool = False,
           prune: float = 0.5, subchannel_ids=None, on_iter=None):
    """Fit by coordinate ascent; returns ``(ClusterModel, VbState)``.

    Responsibilities start from a random soft assignment. Iteration stops
    once the bound improves by less than ``tol`` (relative to the number of
    points). Components whose total responsibility is below ``prune`` are
    dropped from the reported clustering; each point takes its most
    responsible surviving component.
    """
    X = np.asarray(X, dtype=float)
    if max_iter < 1:
        raise ValueError(f"max_iter must be >= 1, got {max_iter}")
    if K_T < 1:
        raise ValueError(f"K_T must be >= 1, got {K_T}")
    if not alpha > 0:
        raise ValueError(f"alpha must be > 0, got {alpha}")
    Z = X if standardized else standardize(X)
    N, d = Z.shape
    prior = prior or NiwPrior.default(d)
    if prior.dim != d:
        raise ValueError(f"prior dimension {prior.dim} does not match features ({d})")
    K_T = max(1, K_T)
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()

    fit = _Fitter(Z, prior, alpha, K_T)
    resp = rng.dirichlet(np.ones(K_T), size=N)
    params = fit.update_global(resp)
    trace: list[float] = [fit.elbo(resp, params)]
    for it in range(max_iter):
        resp = fit.update_resp(params)
        params = fit.update_global(resp)
        value = fit.elbo(resp, params)
        if value < trace[-1] - 1e-6 * max(1.0, abs(trace[-1])):
            raise ElboDecreaseError(
                f"lower bound decreased at iteration {it + 1}: {trace[-1]:.10g} -> {value:.10g}"
            )
        trace.append(value)
        if on_iter is not None:
            on_iter(it, resp)
        if abs(trace[-1] - trace[-2]) < tol * N:
            break
    elapsed = time.perf_counter() - t0

    state = VbState(K_T, *params, resp=resp, elbo_trace=trace)
    keep = np.flatnonzero(resp.sum(axis=0) >= prune)
    if keep.size == 0:
        keep = np.array([int(np.argmax(resp.sum(axis=0)))])
    z = keep[np.argmax(resp[:, keep], axis=1)]
    model = ClusterModel.from_assignments(
        X, z, subchannel_ids,
        info={"method": "vb", "elbo_trace": trace, "iterations": len(trace) - 1,
              "elapsed_s": elapsed},
    )
    return model, state
