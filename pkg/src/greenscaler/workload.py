"""Virtual-user load profiles and their conversion to request rates."""

from __future__ import annotations

import csv
import enum
import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidValue, OutOfRange


class Shape(str, enum.Enum):
    SINUSOID = "sinusoid"
    RAMP = "ramp"
    CONSTANT = "constant"
    TRACE_FILE = "trace_file"


@dataclass(frozen=True)
class WorkloadProfile:
    """Deterministic virtual-user profile.

    ``noise_amplitude`` adds seeded, zero-mean jitter (fraction of
    ``vu_max - vu_min``) on a fixed grid of ``noise_grid`` seconds; it is off
    by default. For ``trace_file`` the trace is read once from ``trace_path``.
    """

    shape: Shape = Shape.SINUSOID
    vu_min: float = 0.0
    vu_max: float = 100.0
    period: float = 300.0
    duration: float = 3600.0
    requests_per_vu: float = 1.0
    noise_amplitude: float = 0.0
    noise_grid: float = 5.0
    seed: int = 0
    trace_path: str | None = None
    _trace: tuple[np.ndarray, np.ndarray] | None = field(default=None, repr=False, compare=False)
    _noise: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "shape", Shape(self.shape))
        if not 0 <= self.vu_min <= self.vu_max:
            raise InvalidValue("VU_MIN", "need 0 <= VU_MIN <= VU_MAX")
        if not self.period > 0:
            raise InvalidValue("PERIOD", "must be > 0")
        if not self.duration > 0:
            raise InvalidValue("DURATION", "must be > 0")
        if not self.requests_per_vu > 0:
            raise InvalidValue("REQUESTS_PER_VU", "must be > 0")
        if not 0 <= self.noise_amplitude < 1:
            raise InvalidValue("NOISE_AMPLITUDE", "must lie in [0, 1)")
        if self.shape is Shape.TRACE_FILE:
            if not self.trace_path:
                raise InvalidValue("TRACE_PATH", "trace_file shape needs a trace path")
            object.__setattr__(self, "_trace", read_trace(self.trace_path))
        if self.noise_amplitude > 0:
            n = int(math.ceil(self.duration / self.noise_grid)) + 2
            rng = np.random.default_rng(self.seed)
            object.__setattr__(self, "_noise", rng.uniform(-1.0, 1.0, size=n))


def read_trace(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """Read a ``t_seconds,vus`` CSV (header optional) sorted by time."""
    ts, vus = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                t, v = float(row[0]), float(row[1])
            except ValueError:
                continue  # header
            ts.append(t)
            vus.append(v)
    if len(ts) < 2:
        raise InvalidValue("TRACE_PATH", f"{path} needs at least two rows")
    t_arr, v_arr = np.asarray(ts), np.asarray(vus)
    if np.any(np.diff(t_arr) <= 0):
        raise InvalidValue("TRACE_PATH", f"{path} timestamps must be strictly increasing")
    if np.any(v_arr < 0):
        raise InvalidValue("TRACE_PATH", f"{path} contains negative VU counts")
    return t_arr, v_arr


def _base_vu(profile: WorkloadProfile, t: float) -> float:
    lo, hi = profile.vu_min, profile.vu_max
    if profile.shape is Shape.SINUSOID:
        return lo + (hi - lo) * (1.0 - math.cos(2.0 * math.pi * t / profile.period)) / 2.0
    if profile.shape is Shape.CONSTANT:
        return hi
    if profile.shape is Shape.RAMP:
        half = profile.duration / 2.0
        frac = t / half if t <= half else (profile.duration - t) / half
        return lo + (hi - lo) * frac
    ts, vus = profile._trace
    return float(np.interp(t, ts, vus))


def vu_at(profile: WorkloadProfile, t: float) -> float:
    """Virtual users active at time ``t`` (seconds from the profile start)."""
    if not 0.0 <= t <= profile.duration:
        raise OutOfRange(f"t={t} outside [0, {profile.duration}]")
    vu = _base_vu(profile, t)
    if profile._noise is not None:
        span = profile.vu_max - profile.vu_min
        pos = t / profile.noise_grid
        i = int(pos)
        frac = pos - i
        jitter = (1 - frac) * profile._noise[i] + frac * profile._noise[i + 1]
        vu = min(max(vu + profile.noise_amplitude * span * jitter, profile.vu_min), profile.vu_max)
    return vu


def arrival_rate_at(profile: WorkloadProfile, t: float) -> float:
    """Request arrival rate (req/s) at time ``t``."""
    return vu_at(profile, t) * profile.requests_per_vu


def load_trace(profile: WorkloadProfile, dt: float, n: int) -> np.ndarray:
    """Arrival rates on the grid ``0, dt, ..., (n-1)*dt``."""
    return np.array([arrival_rate_at(profile, i * dt) for i in range(n)])


def trace_hash(loads) -> str:
    """Stable fingerprint of a load sequence, used to check workload identity."""
    arr = np.ascontiguousarray(np.asarray(loads, dtype="<f8"))
    return hashlib.sha256(arr.tobytes()).hexdigest()
