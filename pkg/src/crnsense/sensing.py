"""Energy-detector false-alarm and detection probabilities."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ParameterError, SystemParams, q_function


@dataclass(frozen=True)
class SensingModel:
    """Energy detector with ``N_s`` complex Gaussian samples per decision."""

    sigma_w2: float
    sigma_p2: float
    g: float
    N_s: int

    def __post_init__(self):
        if not self.sigma_w2 > 0:
            raise ParameterError("sigma_w2", f"must be > 0, got {self.sigma_w2}")
        if not self.sigma_p2 >= 0:
            raise ParameterError("sigma_p2", f"must be >= 0, got {self.sigma_p2}")
        if not self.g >= 0:
            raise ParameterError("g", f"must be >= 0, got {self.g}")
        if int(self.N_s) != self.N_s or self.N_s < 1:
            raise ParameterError("N_s", f"must be a positive integer, got {self.N_s}")

    @classmethod
    def from_params(cls, p: SystemParams) -> "SensingModel":
        return cls(sigma_w2=p.sigma_w2, sigma_p2=p.sigma_p2, g=p.g, N_s=p.N_s)

    @property
    def busy_power(self) -> float:
        """Mean received energy per sample when the channel is busy."""
        return (self.g * self.sigma_p2 / self.sigma_w2 + 1.0) * self.sigma_w2


def _check_eps(eps):
    arr = np.asarray(eps, dtype=float)
    if np.any(arr < 0) or not np.all(np.isfinite(arr)):
        raise ValueError(f"detection threshold must be finite and >= 0, got {eps!r}")
    return arr


def prob_false_alarm(m: SensingModel, eps):
    """P_f(eps): probability of declaring busy on an idle channel."""
    arr = _check_eps(eps)
    return q_function((arr / m.sigma_w2 - 1.0) * math.sqrt(m.N_s))


def prob_detection(m: SensingModel, eps):
    """P_d(eps | g): probability of declaring busy on a busy channel."""
    arr = _check_eps(eps)
    return q_function((arr / m.busy_power - 1.0) * math.sqrt(m.N_s))
