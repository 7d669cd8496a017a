"""Synthetic primary-user traffic, feature extraction and channel statistics.

A trace is one subchannel's packet stream: arrival times in seconds and
lengths in bytes. Each packet occupies the channel for ``8 * length / bitrate``
seconds from its arrival, which is what turns a trace into slot-level idle and
busy probabilities.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import truncnorm

FAMILIES = ("fixed", "normal-truncated", "lognormal", "exponential", "bursty-two-state")


@dataclass(frozen=True)
class Distribution:
    """Positive random quantity described by family, mean and spread.

    ``normal-truncated`` uses ``mean``/``spread`` as the location/scale of a
    normal cut at ``minimum``. ``lognormal`` matches mean and standard
    deviation. ``bursty-two-state`` alternates runs of low (``mean - spread``)
    and high (``mean + spread``) values; each draw leaves the current run with
    probability ``switch``.
    """

    family: str
    mean: float
    spread: float = 0.0
    minimum: float = 0.0
    switch: float = 0.1

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown distribution family {self.family!r}; expected one of {FAMILIES}")
        if not self.mean > 0:
            raise ValueError(f"distribution mean must be > 0, got {self.mean}")
        if self.spread < 0:
            raise ValueError(f"distribution spread must be >= 0, got {self.spread}")
        if self.family == "bursty-two-state":
            if not self.spread < self.mean:
                raise ValueError("bursty-two-state needs spread < mean so both levels stay positive")
            if not 0 < self.switch <= 1:
                raise ValueError(f"switch probability must lie in (0, 1], got {self.switch}")

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if n == 0:
            return np.empty(0)
        if self.family == "exponential":
            return rng.exponential(self.mean, size=n)
        if self.family == "fixed" or self.spread == 0:
            return np.full(n, float(self.mean))
        if self.family == "normal-truncated":
            a = (self.minimum - self.mean) / self.spread
            return truncnorm.rvs(a, np.inf, loc=self.mean, scale=self.spread, size=n,
                                 random_state=rng)
        if self.family == "lognormal":
            s2 = math.log1p((self.spread / self.mean) ** 2)
            return rng.lognormal(math.log(self.mean) - s2 / 2, math.sqrt(s2), size=n)
        # bursty-two-state: run lengths are geometric, levels alternate
        runs = rng.geometric(self.switch, size=n)
        level = np.repeat(np.arange(runs.size) % 2, runs)[:n]
        if rng.random() < 0.5:
            level = 1 - level
        return self.mean + self.spread * (2.0 * level - 1.0)


@dataclass(frozen=True)
class TrafficProfile:
    name: str
    length: Distribution
    interarrival: Distribution
    bitrate: float = 1e6

    def __post_init__(self):
        if not self.bitrate > 0:
            raise ValueError(f"bitrate must be > 0, got {self.bitrate}")


@dataclass(frozen=True)
class PacketTrace:
    subchannel_id: int
    times: np.ndarray
    lengths: np.ndarray
    duration: float
    label: str | None = field(default=None, compare=False)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        ln = np.asarray(self.lengths, dtype=float)
        if t.shape != ln.shape or t.ndim != 1:
            raise ValueError("times and lengths must be 1-D arrays of equal length")
        if t.size and np.any(np.diff(t) <= 0):
            raise ValueError("arrival times must be strictly increasing")
        if np.any(ln <= 0) or not np.all(np.isfinite(ln)):
            raise ValueError("packet lengths must be finite and > 0")
        if t.size and t[0] < 0:
            raise ValueError("arrival times must be >= 0")
        if self.duration < 0:
            raise ValueError("duration must be >= 0")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "lengths", ln)

    def __len__(self):
        return self.times.size


# ---------------------------------------------------------------------------
# presets

def _normal(mean, spread, minimum=0.0):
    return Distribution("normal-truncated", mean, spread, minimum)


# Slot-level busy fraction at 100 ms slots is roughly 0.8 / 0.5 / 0.2.
SEPARATED = (
    TrafficProfile("voip", Distribution("fixed", 160.0), _normal(0.125, 0.010)),
    TrafficProfile("game", _normal(400.0, 150.0, 1.0), _normal(0.200, 0.040)),
    TrafficProfile("udp-stream", _normal(1400.0, 20.0, 1.0), _normal(0.500, 0.050)),
)

# Neighbouring classes touch, and their spreads differ strongly per feature.
OVERLAP = (
    TrafficProfile("voip", _normal(200.0, 10.0, 1.0), _normal(0.125, 0.060)),
    TrafficProfile("game", _normal(280.0, 120.0, 1.0), _normal(0.180, 0.012)),
    TrafficProfile("udp-stream", _normal(600.0, 400.0, 1.0), _normal(0.220, 0.025)),
)

PRESETS = {"separated": SEPARATED, "overlap": OVERLAP}


def profile_preset(name: str) -> tuple[TrafficProfile, ...]:
    try:
        return PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown traffic preset {name!r}; expected one of {sorted(PRESETS)}") from None


# ---------------------------------------------------------------------------
# operations

def generate_trace(profile: TrafficProfile, duration: float, seed,
                   subchannel_id: int = 0) -> PacketTrace:
    """Packet arrivals on ``[0, duration)`` for one subchannel.

    The first arrival comes one interarrival after time 0. Identical
    ``(profile, duration, seed)`` give an identical trace.
    """
    if not duration >= 0:
        raise ValueError(f"duration must be >= 0, got {duration}")
    rng = np.random.default_rng(seed)
    gaps = []
    total = 0.0
    chunk = max(16, int(1.2 * duration / profile.interarrival.mean) + 16)
    while total < duration:
        g = profile.interarrival.sample(rng, chunk)
        g = g[g > 0]
        gaps.append(g)
        total += g.sum()
    times = np.cumsum(np.concatenate(gaps)) if gaps else np.empty(0)
    times = times[times < duration]
    lengths = np.maximum(np.rint(profile.length.sample(rng, times.size)), 1.0)
    return PacketTrace(subchannel_id, times, lengths, float(duration), label=profile.name)


def extract_features(trace: PacketTrace) -> np.ndarray:
    """N x 3 matrix ``[length, interarrival, running variance of lengths]``.

    The interarrival of the first packet is 0 and the variance column is the
    population variance of lengths 1..n, so its first entry is exactly 0.
    """
    if len(trace) == 0:
        raise ValueError(f"subchannel {trace.subchannel_id}: cannot extract features from an empty trace")
    x = trace.lengths
    gaps = np.diff(trace.times, prepend=trace.times[0])
    # shift by the first value: variance is unchanged and cancellation is milder
    d = x - x[0]
    n = np.arange(1, x.size + 1)
    m1 = np.cumsum(d) / n
    m2 = np.cumsum(d * d) / n
    var = np.maximum(m2 - m1 * m1, 0.0)
    var[0] = 0.0
    return np.column_stack([x, gaps, var])


def estimate_channel_stats(trace: PacketTrace, slot: float, bitrate: float):
    """Return ``(lambda, p_i, p_o)`` from slot occupancy of the trace.

    The observation window ``[0, duration)`` is cut into slots of length
    ``slot``; a slot is busy when any packet's airtime overlaps it.
    """
    if not slot > 0:
        raise ValueError(f"slot must be > 0, got {slot}")
    if not bitrate > 0:
        raise ValueError(f"bitrate must be > 0, got {bitrate}")
    if not trace.duration > 0:
        raise ValueError(f"subchannel {trace.subchannel_id}: trace has zero duration")
    n_slots = max(1, math.ceil(trace.duration / slot - 1e-9))
    lam = len(trace) / trace.duration
    if len(trace) == 0:
        return 0.0, 1.0, 0.0
    start = trace.times
    end = start + 8.0 * trace.lengths / bitrate
    first = np.floor(start / slot).astype(np.int64)
    last = np.ceil(end / slot).astype(np.int64)  # exclusive
    first = np.clip(first, 0, n_slots)
    last = np.clip(np.maximum(last, first + 1), 0, n_slots)
    diff = np.zeros(n_slots + 1, dtype=np.int64)
    np.add.at(diff, first, 1)
    np.add.at(diff, last, -1)
    busy = np.cumsum(diff[:-1]) > 0
    p_o = float(busy.mean())
    return lam, 1.0 - p_o, p_o


def ingest_trace(path, subchannel_id: int = 0, duration: float | None = None) -> PacketTrace:
    """Read a ``time_s,length_bytes`` CSV into a sorted, validated trace.

    ``duration`` defaults to the last arrival time.
    """
    path = Path(path)
    times, lengths = [], []
    with path.open(newline="") as fh:
        reader = csv.reader(row for row in fh if not row.startswith("#"))
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["time_s", "length_bytes"]:
            raise ValueError(f"{path}: expected header 'time_s,length_bytes', got {header!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise ValueError(f"{path}:{lineno}: expected 2 fields, got {len(row)}")
            try:
                t, ln = float(row[0]), float(row[1])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric field in {row!r}") from None
            if not (math.isfinite(t) and t >= 0):
                raise ValueError(f"{path}:{lineno}: time must be finite and >= 0, got {row[0]!r}")
            if not (math.isfinite(ln) and ln > 0):
                raise ValueError(f"{path}:{lineno}: length must be > 0, got {row[1]!r}")
            times.append(t)
            lengths.append(ln)
    t = np.asarray(times)
    ln = np.asarray(lengths)
    order = np.argsort(t, kind="stable")
    t, ln = t[order], ln[order]
    if t.size > 1 and np.any(np.diff(t) == 0):
        dup = float(t[np.flatnonzero(np.diff(t) == 0)[0]])
        raise ValueError(f"{path}: two packets share arrival time {dup!r}")
    if duration is None:
        duration = float(t[-1]) if t.size else 0.0
    return PacketTrace(subchannel_id, t, ln, float(duration))


def write_trace(trace: PacketTrace, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time_s", "length_bytes"])
        for t, ln in zip(trace.times, trace.lengths):
            w.writerow([repr(float(t)), repr(float(ln))])


# ---------------------------------------------------------------------------
# multi-subchannel scenarios

def build_subchannels(profiles, per_profile: int, duration: float, seed) -> list[PacketTrace]:
    """``per_profile`` independent traces of every profile, ids ``0, 1, ...``.

    Subchannel ``i`` carries profile ``i // per_profile``.
    """
    children = np.random.SeedSequence(seed).spawn(len(profiles) * per_profile)
    traces = []
    for k, prof in enumerate(profiles):
        for j in range(per_profile):
            sid = k * per_profile + j
            traces.append(generate_trace(prof, duration, children[sid], subchannel_id=sid))
    return traces


def observation_set(traces, n_points: int, warmup: float, seed):
    """Sample ``n_points`` feature rows spread evenly over the subchannels.

    Rows come from the part of each trace after the first ``warmup``
    fraction of packets, where the running length variance has settled.
    Returns ``(X, subchannel_ids)``.
    """
    if n_points < 1:
        raise ValueError(f"n_points must be >= 1, got {n_points}")
    rng = np.random.default_rng(seed)
    shares = [len(a) for a in np.array_split(np.arange(n_points), len(traces))]
    order = rng.permutation(len(traces))  # which subchannels get the remainder
    X, ids = [], []
    for rank, idx in enumerate(order):
        tr = traces[idx]
        F = extract_features(tr)
        F = F[int(warmup * len(F)):]
        take = shares[rank]
        if take == 0:
            continue
        rows = rng.choice(len(F), size=take, replace=take > len(F))
        X.append(F[np.sort(rows)])
        ids.extend([tr.subchannel_id] * take)
    ids = np.asarray(ids)
    order = np.argsort(ids, kind="stable")
    return np.vstack(X)[order], ids[order]
