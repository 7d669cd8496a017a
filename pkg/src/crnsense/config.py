"""Plain-text ``key = value`` configuration and bundled presets.

A config file holds system parameters (see :data:`crnsense.core.PARAM_FIELDS`)
and experiment settings side by side. ``#`` starts a comment; ``include =
NAME`` pulls in another preset or file first, so later lines override it.
"""

from __future__ import annotations

import dataclasses
import warnings
from dataclasses import dataclass, fields
from importlib import resources
from pathlib import Path

from .core import PARAM_FIELDS, ParameterError, SystemParams, check_battery_reachable, validate_params
from .dutycycle import ChannelPair

_SYSTEM_KEYS = set(PARAM_FIELDS) | {"T_slot", "pu_snr"}


@dataclass(frozen=True)
class Settings:
    """Experiment knobs that are not physical parameters."""

    p_i_h: float = 0.2
    p_i_t: float = 0.8
    n_tau: int = 64
    N_t: int = 100_000
    eps_min: float = 0.9
    eps_max: float = 1.3
    eps_points: int = 100
    P_t_grid: tuple[float, ...] = (0.01, 0.02, 0.05, 0.1, 0.2)
    workers: int = 1
    dump_matrix: bool = False
    # traffic and clustering
    traffic: str = "separated"
    subchannels_per_profile: int = 10
    trace_duration: float = 300.0
    warmup: float = 0.5
    points: int = 450
    point_counts: tuple[int, ...] = (50, 150, 250, 350, 450)
    bench_seeds: int = 3
    alpha: float = 1.0
    sweeps: int = 30
    K_T: int = 20
    vb_max_iter: int = 500
    kmeans_restarts: int = 10
    methods: tuple[str, ...] = ("oracle", "gibbs", "vb", "kmeans")
    pipeline_seeds: int = 1


_TUPLE_TYPES = {"P_t_grid": float, "point_counts": int, "methods": str}


def _parse_setting(name: str, text: str):
    field = next(f for f in fields(Settings) if f.name == name)
    kind = field.type if isinstance(field.type, str) else field.type.__name__
    try:
        if name in _TUPLE_TYPES:
            conv = _TUPLE_TYPES[name]
            items = [s.strip() for s in str(text).split(",") if s.strip()]
            if conv is float:
                from .core import parse_quantity
                return tuple(parse_quantity(s) for s in items)
            return tuple(conv(s) for s in items)
        if kind == "bool":
            low = str(text).strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"expected a boolean, got {text!r}")
        if kind == "int":
            value = float(text)
            if value != int(value):
                raise ValueError(f"expected an integer, got {text!r}")
            return int(value)
        if kind == "float":
            return float(text)
        return str(text).strip()
    except ValueError as exc:
        raise ParameterError(name, str(exc)) from None


def _preset_text(name: str) -> str:
    res = resources.files("crnsense") / "presets" / f"{name}.cfg"
    if not res.is_file():
        raise FileNotFoundError(f"no preset named {name!r}; available: {', '.join(list_presets())}")
    return res.read_text()


def list_presets() -> list[str]:
    root = resources.files("crnsense") / "presets"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".cfg"))


def parse_lines(text: str, source: str = "<config>", _depth: int = 0) -> dict[str, str]:
    if _depth > 8:
        raise ValueError(f"{source}: include nesting too deep")
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ValueError(f"{source}:{lineno}: empty key")
        if key == "include":
            out.update(load_raw(value, _depth + 1))
        else:
            out[key] = value
    return out


def load_raw(source, _depth: int = 0) -> dict[str, str]:
    """Key/value strings from a file path or a bundled preset name."""
    path = Path(str(source))
    if path.suffix == ".cfg" or path.exists():
        if not path.is_file():
            raise FileNotFoundError(f"config file not found: {path}")
        return parse_lines(path.read_text(), str(path), _depth)
    return parse_lines(_preset_text(str(source)), f"preset:{source}", _depth)


def parse_overrides(items) -> dict[str, str]:
    out = {}
    for item in items or ():
        if "=" not in item:
            raise ParameterError(str(item), "override must look like KEY=VALUE")
        key, value = (s.strip() for s in item.split("=", 1))
        out[key] = value
    return out


@dataclass(frozen=True)
class Config:
    params: SystemParams
    settings: Settings
    raw: dict

    @property
    def pair(self) -> ChannelPair:
        return ChannelPair(self.settings.p_i_h, self.settings.p_i_t)

    def with_overrides(self, **changes) -> "Config":
        raw = dict(self.raw)
        raw.update({k: str(v) for k, v in changes.items()})
        return build_config(raw)


def build_config(raw: dict) -> Config:
    setting_names = {f.name for f in fields(Settings)}
    unknown = sorted(set(raw) - _SYSTEM_KEYS - setting_names)
    if unknown:
        raise ParameterError(unknown[0], "unknown configuration key")
    params = validate_params({k: v for k, v in raw.items() if k in _SYSTEM_KEYS})
    values = {k: _parse_setting(k, v) for k, v in raw.items() if k in setting_names}
    settings = Settings(**values)
    ChannelPair(settings.p_i_h, settings.p_i_t)
    for name in ("n_tau", "N_t", "eps_points", "points", "sweeps", "K_T", "workers",
                 "bench_seeds", "pipeline_seeds", "subchannels_per_profile", "kmeans_restarts"):
        if getattr(settings, name) < 1:
            raise ParameterError(name, "must be >= 1")
    if not 0 < settings.eps_min < settings.eps_max:
        raise ParameterError("eps_min", "need 0 < eps_min < eps_max")
    if not 0 <= settings.warmup < 1:
        raise ParameterError("warmup", "must lie in [0, 1)")
    with warnings.catch_warnings():
        warnings.simplefilter("always")
        check_battery_reachable(params)
    return Config(params, settings, dict(raw))


def load_config(source="table2", overrides=None) -> Config:
    raw = load_raw(source)
    raw.update(parse_overrides(overrides) if not isinstance(overrides, dict) else
               {k: str(v) for k, v in overrides.items()})
    return build_config(raw)


def settings_dict(s: Settings) -> dict:
    return dataclasses.asdict(s)
