"""Quantised-battery Markov chain.

The battery is counted in energy quanta ``e_q = (e_s + e_t) / n_tau``. States
below ``n_tau`` cannot afford an active slot and harvest: they move up by
``n_kappa`` quanta when the harvest channel is busy. States at or above
``n_tau`` are active: a transmission (sensed idle) costs ``n_tau`` quanta,
otherwise the state is kept.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import NumericalError, SystemParams
from .dutycycle import ChannelPair, tx_probability
from .sensing import SensingModel, prob_detection, prob_false_alarm


class AssumptionError(ValueError):
    """Quantisation violates the conditions for the closed-form steady state."""

    def __init__(self, failed: list[str], detail: str):
        super().__init__(f"quantisation assumption(s) {', '.join(failed)} violated: {detail}")
        self.failed = failed


def _floor(x: float) -> int:
    # absorbs representation error so an exact ratio like 3.9999999999 counts as 4
    return math.floor(x + 1e-9 * max(1.0, abs(x)))


@dataclass(frozen=True)
class Quantization:
    N_b: int
    n_tau: int
    n_kappa: int
    e_q: float
    harvest_ratio: float  # per-slot harvested energy / (e_s + e_t)
    checks: dict = field(default_factory=dict, compare=False)


def check_assumptions(N_b: int, n_tau: int, harvest_quanta: float) -> dict[str, bool]:
    """Evaluate the four state-space conditions.

    ``harvest_quanta`` is the harvested energy of one busy slot in units of
    e_q (not floored). Condition (c) is stated in terms of an undefined
    symbol; it is evaluated with n_tau in its place, i.e. a harvest jump
    from the top harvest state must stay inside the state space.
    """
    n_kappa = _floor(harvest_quanta)
    return {
        "a": n_kappa + n_tau - 1 <= N_b - 1,
        "b": n_kappa <= N_b - n_tau,
        "c": harvest_quanta < N_b - n_tau + 1,
        "d": N_b > (harvest_quanta / n_tau + 1.0) * n_tau - 1,
    }


def quantize(params: SystemParams, n_tau: int) -> Quantization:
    """Discretise the battery of ``params`` with ``n_tau`` quanta per active slot."""
    if int(n_tau) != n_tau or n_tau < 1:
        raise ValueError(f"n_tau must be a positive integer, got {n_tau}")
    n_tau = int(n_tau)
    slot_energy = params.e_s + params.e_t
    e_q = slot_energy / n_tau
    N_b = _floor(params.B_max / e_q)
    ratio = params.harvest_energy / slot_energy
    quanta = ratio * n_tau
    n_kappa = _floor(quanta)
    if n_kappa < 1:
        raise AssumptionError(
            ["n_kappa"],
            f"one busy slot harvests {params.harvest_energy:.3g} J < e_q = {e_q:.3g} J; "
            "the chain cannot leave the harvest states",
        )
    checks = check_assumptions(N_b, n_tau, quanta)
    failed = [k for k, ok in checks.items() if not ok]
    if failed:
        raise AssumptionError(
            failed, f"N_b={N_b}, n_tau={n_tau}, n_kappa={n_kappa}; increase B_max"
        )
    return Quantization(N_b=N_b, n_tau=n_tau, n_kappa=n_kappa, e_q=e_q,
                        harvest_ratio=ratio, checks=checks)


# ---------------------------------------------------------------------------
# transition matrix

@dataclass(frozen=True)
class TransitionMatrix:
    U: np.ndarray

    def dump(self, path) -> None:
        """Write U row-major as CSV."""
        np.savetxt(path, self.U, delimiter=",", fmt="%.17g")


@dataclass(frozen=True)
class SteadyState:
    pi: np.ndarray

    def residual(self, U) -> float:
        U = U.U if isinstance(U, TransitionMatrix) else U
        return float(np.abs(self.pi @ U - self.pi).sum())


def _kappa_tau(q: Quantization, pair: ChannelPair, sensing: SensingModel, eps):
    p_f = prob_false_alarm(sensing, eps)
    p_d = prob_detection(sensing, eps)
    return pair.p_o_h, tx_probability(p_f, p_d, pair)


def transition_matrix(N_b: int, n_tau: int, n_kappa: int, kappa: float, tau: float) -> np.ndarray:
    """Row-stochastic N_b x N_b battery transition matrix.

    Harvest states jump up by ``n_kappa`` with probability ``kappa`` (clipped
    at the top state); active states drop by ``n_tau`` with probability ``tau``.
    """
    if not (0 < n_tau < N_b):
        raise ValueError(f"need 0 < n_tau < N_b, got n_tau={n_tau}, N_b={N_b}")
    U = np.zeros((N_b, N_b))
    for i in range(n_tau):
        if n_kappa >= 1:
            U[i, min(i + n_kappa, N_b - 1)] += kappa
            U[i, i] += 1.0 - kappa
        else:
            U[i, i] = 1.0
    for i in range(n_tau, N_b):
        U[i, i - n_tau] += tau
        U[i, i] += 1.0 - tau
    dev = np.abs(U.sum(axis=1) - 1.0).max()
    if dev > 1e-12:
        raise NumericalError(f"transition matrix rows deviate from 1 by {dev:.3g}")
    return U


def build_transition_matrix(q: Quantization, pair: ChannelPair, sensing: SensingModel,
                            eps: float) -> TransitionMatrix:
    kappa, tau = _kappa_tau(q, pair, sensing, eps)
    return TransitionMatrix(transition_matrix(q.N_b, q.n_tau, q.n_kappa, kappa, float(tau)))


# ---------------------------------------------------------------------------
# steady state

def closed_form_pi(N_b: int, n_tau: int, n_kappa: int, kappa: float, tau: float) -> np.ndarray:
    if n_kappa < 1:
        raise ValueError("closed form needs n_kappa >= 1")
    if kappa <= 0 or tau <= 0:
        raise NumericalError(
            f"degenerate chain (kappa={kappa:g}, tau={tau:g}): no unique stationary distribution"
        )
    if n_tau + n_kappa > N_b:
        raise ValueError(f"support n_tau + n_kappa = {n_tau + n_kappa} exceeds N_b = {N_b}")
    D = n_kappa * kappa + n_tau * tau
    pi = np.zeros(N_b)
    pi[:n_tau] = tau / D
    pi[n_tau:n_tau + n_kappa] = kappa / D
    return pi


def steady_state_closed_form(q: Quantization, pair: ChannelPair, sensing: SensingModel,
                             eps: float) -> SteadyState:
    """Stationary distribution: uniform over harvest states and over the first
    n_kappa active states, weighted tau : kappa.

    When gcd(n_tau, n_kappa) > 1 the chain splits into several closed classes;
    this vector is then one stationary distribution among many.
    """
    kappa, tau = _kappa_tau(q, pair, sensing, eps)
    return SteadyState(closed_form_pi(q.N_b, q.n_tau, q.n_kappa, kappa, float(tau)))


def steady_state_numeric(U, tol: float = 1e-12, max_iter: int = 64,
                         start: np.ndarray | None = None) -> SteadyState:
    """Power iteration with repeated squaring.

    Iterates ``v <- v P_k`` with ``P_{k+1} = P_k @ P_k``, so ``max_iter`` rounds
    cover up to 2**max_iter chain steps. Stops once successive iterates differ
    by less than ``tol`` (L1) and the one-step residual ``|vU - v|_1`` is below
    ``10 * tol``. Starts from the uniform vector unless ``start`` is given.
    """
    U = np.asarray(U.U if isinstance(U, TransitionMatrix) else U, dtype=float)
    n = U.shape[0]
    if U.shape != (n, n):
        raise ValueError("transition matrix must be square")
    if np.abs(U.sum(axis=1) - 1.0).max() > 1e-10 or U.min() < 0:
        raise ValueError("transition matrix must be row-stochastic")
    v = np.full(n, 1.0 / n) if start is None else np.asarray(start, dtype=float) / np.sum(start)
    P = U.copy()
    resid = np.inf
    for _ in range(max_iter):
        w = v @ P
        w /= w.sum()
        change = np.abs(w - v).sum()
        v = w
        resid = np.abs(v @ U - v).sum()
        if change < tol and resid < 10 * tol:
            return SteadyState(v)
        P = P @ P
        P /= P.sum(axis=1, keepdims=True)
    raise NumericalError(
        f"power iteration did not converge in {max_iter} squarings (residual {resid:.3g}); "
        "chain may be periodic or reducible"
    )


# ---------------------------------------------------------------------------
# activity probability

def prob_active_mdp(q: Quantization, pair: ChannelPair, sensing: SensingModel, eps,
                    continuous: bool = False):
    """Stationary probability of an active battery state.

    The exact form uses the integer quantum counts; ``continuous=True`` uses
    the large-n_tau limit where n_kappa / n_tau is replaced by the harvested
    to per-slot energy ratio. A harvest channel that is never busy leaves
    the chain stuck in its starting harvest state and raises
    :class:`NumericalError`.
    """
    kappa, tau = _kappa_tau(q, pair, sensing, eps)
    if kappa <= 0:
        raise NumericalError("degenerate chain: the harvest channel is never busy (kappa = 0)")
    ratio = q.harvest_ratio if continuous else q.n_kappa / q.n_tau
    out = ratio * kappa / (ratio * kappa + np.asarray(tau))
    return float(out) if np.ndim(out) == 0 else out


def objective_mdp(q: Quantization, pair: ChannelPair, sensing: SensingModel, eps,
                  continuous: bool = False):
    p_f = prob_false_alarm(sensing, eps)
    out = (1.0 - p_f) * prob_active_mdp(q, pair, sensing, eps, continuous=continuous)
    return float(out) if np.ndim(out) == 0 else out


def gamma2(params: SystemParams, pair: ChannelPair) -> float:
    """Large-threshold limit of the MDP activity probability (continuous form)."""
    h = params.harvest_energy * pair.p_o_h
    return h / (h + params.e_s + params.e_t)
