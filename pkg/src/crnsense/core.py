"""System parameters, unit handling and shared numerics."""

from __future__ import annotations

import math
import re
import warnings
from dataclasses import MISSING, dataclass, field, fields, replace

import numpy as np
from scipy.special import erfc


class ParameterError(ValueError):
    """Raised when a parameter violates its invariant.

    The offending field name is kept on ``field`` so callers (the CLI in
    particular) can report it without parsing the message.
    """

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


class NumericalError(ArithmeticError):
    """A numerical routine failed (non-convergence, non-PD matrix, ...)."""


_SQRT2 = math.sqrt(2.0)


def q_function(x):
    """Upper-tail probability of the standard normal, Q(x) = P[N(0,1) > x].

    Accepts scalars or arrays. Evaluated through ``erfc`` so the far tails
    keep full relative precision instead of cancelling against 1.
    """
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("q_function: argument must be finite")
    out = 0.5 * erfc(arr / _SQRT2)
    if out.ndim == 0:
        return float(out)
    return out


# ---------------------------------------------------------------------------
# units

_SCALE = {
    "": 1.0,
    "s": 1.0,
    "ms": 1e-3,
    "us": 1e-6,
    "w": 1.0,
    "mw": 1e-3,
    "uw": 1e-6,
    "j": 1.0,
    "mj": 1e-3,
    "uj": 1e-6,
    "hz": 1.0,
    "khz": 1e3,
    "mhz": 1e6,
    "ghz": 1e9,
}

_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([A-Za-z]*)\s*$")


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def parse_quantity(text) -> float:
    """Parse ``"2ms"``, ``"110 mW"``, ``"-5.65dB"`` or a bare number into SI.

    ``dB`` values are converted to a linear ratio.
    """
    if isinstance(text, (int, float)) and not isinstance(text, bool):
        return float(text)
    m = _QUANTITY.match(str(text))
    if m is None:
        raise ValueError(f"cannot parse quantity {text!r}")
    value, unit = float(m.group(1)), m.group(2)
    if unit.lower() == "db":
        return db_to_linear(value)
    try:
        return value * _SCALE[unit.lower()]
    except KeyError:
        raise ValueError(f"unknown unit {unit!r} in {text!r}") from None


# ---------------------------------------------------------------------------
# parameters

@dataclass(frozen=True)
class SystemParams:
    """Physical and protocol constants of the secondary user link.

    All quantities are SI (s, W, J, Hz) and linear ratios. The slot length
    is not stored independently: ``T_slot`` is always ``T_s + T_t``.
    ``B_max`` defaults to twice the energy of one active slot, raised if
    needed to ``e_s + e_t + harvest_energy`` so that the action threshold is
    reachable and a harvest below that threshold is never clipped.
    """

    W: float
    T_s: float
    T_t: float
    P_s: float
    P_t: float
    P_nc: float
    P_p: float
    eta: float
    phi: float
    sigma_w2: float
    sigma_p2: float
    g: float
    P_bar_c: float
    N_s: int = 2000
    B_max: float | None = None
    B_0: float = 0.0
    snr_su: float | None = None
    g_su: float | None = None
    B_max_auto: bool = field(default=False, init=False, repr=False, compare=False)

    def __post_init__(self):
        for name in ("W", "T_s", "T_t", "P_s", "P_t", "P_nc", "P_p", "sigma_w2", "sigma_p2"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ParameterError(name, f"must be finite and > 0, got {v}")
        if not 0 < self.eta <= 1:
            raise ParameterError("eta", f"amplifier efficiency must lie in (0, 1], got {self.eta}")
        if not 0 < self.phi <= 1:
            raise ParameterError("phi", f"harvesting efficiency must lie in (0, 1], got {self.phi}")
        if not (math.isfinite(self.g) and self.g >= 0):
            raise ParameterError("g", f"channel gain must be >= 0, got {self.g}")
        if not 0 < self.P_bar_c < 1:
            raise ParameterError("P_bar_c", f"must lie in (0, 1), got {self.P_bar_c}")
        if int(self.N_s) != self.N_s or self.N_s < 1:
            raise ParameterError("N_s", f"must be a positive integer, got {self.N_s}")
        object.__setattr__(self, "N_s", int(self.N_s))

        if self.g_su is not None:
            if not self.g_su > 0:
                raise ParameterError("g_su", f"must be > 0, got {self.g_su}")
            object.__setattr__(self, "snr_su", self.P_t * self.g_su / self.sigma_w2)
        if self.snr_su is None:
            raise ParameterError("snr_su", "SU link SNR is required (set snr_su or g_su)")
        if not (math.isfinite(self.snr_su) and self.snr_su >= 0):
            raise ParameterError("snr_su", f"must be >= 0, got {self.snr_su}")

        if self.B_max is None:
            slot = self.e_s + self.e_t
            object.__setattr__(self, "B_max", max(2.0 * slot, slot + self.harvest_energy))
            object.__setattr__(self, "B_max_auto", True)
        if not self.B_max > 0:
            raise ParameterError("B_max", f"must be > 0, got {self.B_max}")
        if not 0 <= self.B_0 <= self.B_max:
            raise ParameterError("B_0", f"must lie in [0, B_max], got {self.B_0}")

    @property
    def T_slot(self) -> float:
        return self.T_s + self.T_t

    @property
    def e_s(self) -> float:
        """Sensing energy per active slot."""
        return self.T_s * self.P_s

    @property
    def e_t(self) -> float:
        """Transmission energy per transmitted slot (PA loss plus circuit)."""
        return self.T_t * (self.P_t / self.eta + self.P_nc)

    @property
    def xi(self) -> float:
        """Harvestable energy per busy slot before the channel gain."""
        return self.phi * self.P_p * self.T_t

    @property
    def harvest_energy(self) -> float:
        """Energy gained in one sleeping slot while the harvest channel is busy."""
        return self.g * self.xi

    @property
    def capacity(self) -> float:
        """Shannon rate of the SU link in bit/s."""
        return self.W * math.log2(1.0 + self.snr_su)

    def replace(self, **changes) -> "SystemParams":
        # a defaulted B_max follows the new energies; an explicit one is kept
        if self.B_max_auto and "B_max" not in changes:
            changes["B_max"] = None
        if self.g_su is not None and "snr_su" not in changes:
            changes["snr_su"] = None
        return replace(self, **changes)


PARAM_FIELDS = tuple(f.name for f in fields(SystemParams) if f.init)
_INT_FIELDS = {"N_s"}


def validate_params(raw) -> SystemParams:
    """Build validated :class:`SystemParams` from raw key/value pairs.

    Values may be numbers or unit-suffixed strings (``"2ms"``, ``"-5.65dB"``).
    ``T_slot`` is accepted for cross-checking and ``T_t`` is derived from it
    when missing. ``pu_snr`` (the ratio sigma_p2 / sigma_w2) may stand in for
    ``sigma_p2``.
    """
    if isinstance(raw, SystemParams):
        return raw
    values: dict[str, float | None] = {}
    for key, text in raw.items():
        if key in PARAM_FIELDS or key in ("T_slot", "pu_snr"):
            if text is None or (isinstance(text, str) and text.strip().lower() in ("", "none")):
                values[key] = None
                continue
            try:
                values[key] = parse_quantity(text)
            except ValueError as exc:
                raise ParameterError(key, str(exc)) from None

    for name in ("T_s", "T_t", "T_slot"):
        v = values.get(name)
        if v is not None and not v > 0:
            raise ParameterError(name, f"must be finite and > 0, got {v}")
    t_slot = values.pop("T_slot", None)
    if t_slot is not None:
        if values.get("T_t") is None and values.get("T_s") is not None:
            values["T_t"] = t_slot - values["T_s"]
        elif values.get("T_t") is not None and values.get("T_s") is not None:
            total = values["T_s"] + values["T_t"]
            if not math.isclose(total, t_slot, rel_tol=1e-9):
                raise ParameterError(
                    "T_slot", f"T_s + T_t = {total:g} s does not match T_slot = {t_slot:g} s"
                )
    pu_snr = values.pop("pu_snr", None)
    if pu_snr is not None and values.get("sigma_p2") is None:
        if values.get("sigma_w2") is None:
            raise ParameterError("pu_snr", "requires sigma_w2")
        values["sigma_p2"] = pu_snr * values["sigma_w2"]

    kwargs = {}
    for f in fields(SystemParams):
        if f.init and f.name in values:
            v = values[f.name]
            if v is not None and f.name in _INT_FIELDS:
                if v != int(v):
                    raise ParameterError(f.name, f"must be an integer, got {v}")
                v = int(v)
            kwargs[f.name] = v
    for f in fields(SystemParams):
        if f.init and f.default is MISSING and kwargs.get(f.name) is None:
            raise ParameterError(f.name, "missing required parameter")
    return SystemParams(**kwargs)


def check_battery_reachable(p: SystemParams) -> None:
    """Warn when the battery can never hold enough for one active slot."""
    if p.B_max < p.e_s + p.e_t:
        warnings.warn(
            f"B_max = {p.B_max:.3g} J is below e_s + e_t = {p.e_s + p.e_t:.3g} J; "
            "the secondary user can never become active",
            RuntimeWarning,
            stacklevel=2,
        )
