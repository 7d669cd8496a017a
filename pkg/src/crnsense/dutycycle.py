"""Duty-cycle capacity model.

The secondary user alternates between sleeping (harvesting from the busy
harvest channel) and being active (sensing, then transmitting when the
transmit channel looks idle). Equating harvested and consumed energy gives
the fraction of active slots, from which rate capacity, collision
probability and the optimisation objective follow. Every function accepts a
scalar threshold or a numpy array of thresholds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ParameterError, SystemParams
from .sensing import SensingModel, prob_detection, prob_false_alarm

# threshold standing in for "eps -> infinity", in units of sigma_w2
EPS_INF = 50.0


@dataclass(frozen=True)
class ChannelPair:
    """Idle/busy probabilities of the harvest (h) and transmit (t) subchannels."""

    p_i_h: float
    p_i_t: float

    def __post_init__(self):
        for name in ("p_i_h", "p_i_t"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ParameterError(name, f"probability must lie in [0, 1], got {v}")

    @property
    def p_o_h(self) -> float:
        return 1.0 - self.p_i_h

    @property
    def p_o_t(self) -> float:
        return 1.0 - self.p_i_t


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


def tx_probability(p_f, p_d, pair: ChannelPair):
    """Probability that an active slot ends in a transmission (sensed idle)."""
    return (1.0 - p_f) * pair.p_i_t + (1.0 - p_d) * pair.p_o_t


def harvest_rate(params: SystemParams, pair: ChannelPair) -> float:
    """Mean energy harvested per sleeping slot."""
    return params.g * params.xi * pair.p_o_h


def consume_rate(params: SystemParams, pair: ChannelPair, sensing: SensingModel, eps):
    """Mean energy spent per active slot: sensing always, transmission when sensed idle."""
    p_f = prob_false_alarm(sensing, eps)
    p_d = prob_detection(sensing, eps)
    return _scalar(params.e_s + tx_probability(p_f, p_d, pair) * params.e_t)


def prob_active(params: SystemParams, pair: ChannelPair, sensing: SensingModel, eps):
    rho_h = harvest_rate(params, pair)
    rho_c = np.asarray(consume_rate(params, pair, sensing, eps))
    denom = rho_h + rho_c
    if np.any(denom <= 0):
        raise ValueError("degenerate energy rates: harvesting and consumption are both zero")
    return _scalar(rho_h / denom)


def gamma1(params: SystemParams, pair: ChannelPair) -> float:
    """Large-threshold limit of the activity probability, collision and objective."""
    rho_h = harvest_rate(params, pair)
    return rho_h / (rho_h + params.e_s + params.e_t)


def objective(params: SystemParams, pair: ChannelPair, sensing: SensingModel, eps):
    """(1 - P_f) P_a: the threshold-dependent factor of the rate capacity."""
    p_f = prob_false_alarm(sensing, eps)
    return _scalar((1.0 - p_f) * prob_active(params, pair, sensing, eps))


def rate_capacity(params: SystemParams, pair: ChannelPair, sensing: SensingModel, eps):
    """Mean SU throughput in bit/s."""
    scale = params.T_t / params.T_slot * params.capacity * pair.p_i_t
    return _scalar(scale * np.asarray(objective(params, pair, sensing, eps)))


def collision_prob(params: SystemParams, pair: ChannelPair, sensing: SensingModel, eps):
    """Probability that the SU transmits in a slot where the transmit channel is busy."""
    p_d = prob_detection(sensing, eps)
    return _scalar((1.0 - p_d) * prob_active(params, pair, sensing, eps))
