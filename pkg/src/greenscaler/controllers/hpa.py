"""Kubernetes-style Horizontal Pod Autoscaler baseline and the fixed policy.

Follows the upstream algorithm: ``desired = ceil(current * observed / target)``,
skipped inside the tolerance band, with scale-downs held to the largest
recommendation seen in the stabilization window.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

from ..errors import DomainError, InvalidValue
from .mpc import Decision


@dataclass
class HpaState:
    target_cpu: float = 0.5
    tolerance: float = 0.10
    stabilization_window: float = 300.0
    recent_recommendations: deque = field(default_factory=deque)

    def __post_init__(self):
        if not 0 < self.target_cpu <= 1:
            raise InvalidValue("HPA_TARGET_CPU", "must lie in (0, 1]")
        if self.tolerance < 0:
            raise InvalidValue("HPA_TOLERANCE", "must be >= 0")
        if self.stabilization_window < 0:
            raise InvalidValue("HPA_STABILIZATION_WINDOW", "must be >= 0")


def hpa_decide(now: float, hpa: HpaState, observed_cpu_per_pod: float, r_current: int,
               bounds: tuple[int, int]) -> int | None:
    """Return the new replica target, or ``None`` for no change."""
    if r_current < 1:
        raise DomainError(f"r_current must be >= 1, got {r_current}")
    if observed_cpu_per_pod < 0:
        raise DomainError(f"observed cpu must be >= 0, got {observed_cpu_per_pod}")
    lo, hi = bounds
    ratio = observed_cpu_per_pod / hpa.target_cpu
    # slack keeps decimal boundaries such as 0.55 / 0.5 inside a 10% band
    if abs(ratio - 1.0) <= hpa.tolerance + 1e-9:
        recommendation = r_current
    else:
        recommendation = min(max(math.ceil(r_current * ratio), lo), hi)

    window = hpa.recent_recommendations
    while window and window[0][0] < now - hpa.stabilization_window:
        window.popleft()
    window.append((now, recommendation))

    if recommendation < r_current:
        recommendation = max(r for _, r in window)
    desired = min(max(recommendation, lo), hi)
    return None if desired == r_current else desired


class HpaScaler:
    name = "hpa"

    def __init__(self, hpa: HpaState, bounds: tuple[int, int], sync_period: float = 15.0):
        self.hpa = hpa
        self.bounds = bounds
        self.sync_period = sync_period
        self.last_decision = -math.inf

    def observe(self, t: float, load: float) -> None:
        pass

    def decide(self, now: float, r_current: int, sample=None) -> Decision | None:
        if now - self.last_decision < self.sync_period - 1e-9:
            return None
        self.last_decision = now
        action = hpa_decide(now, self.hpa, sample.cpuload, r_current, self.bounds)
        return Decision(t=now, controller=self.name, r_current=r_current, action=action)


def fixed_decide(r_fixed: int) -> int:
    return r_fixed


class FixedScaler:
    """No autoscaling. ``schedule`` optionally cycles replica levels, one per
    ``level_period`` seconds, for profiling sweeps."""

    name = "none"

    def __init__(self, r_fixed: int = 1, schedule: tuple[int, ...] = (),
                 level_period: float = 300.0, sync_period: float = 15.0):
        self.r_fixed = r_fixed
        self.schedule = tuple(schedule)
        self.level_period = level_period
        self.sync_period = sync_period
        self.last_decision = -math.inf

    def target_at(self, now: float) -> int:
        if not self.schedule:
            return fixed_decide(self.r_fixed)
        return self.schedule[int(now // self.level_period + 1e-9) % len(self.schedule)]

    def observe(self, t: float, load: float) -> None:
        pass

    def decide(self, now: float, r_current: int, sample=None) -> Decision | None:
        if now - self.last_decision < self.sync_period - 1e-9:
            return None
        self.last_decision = now
        target = self.target_at(now)
        return Decision(t=now, controller=self.name, r_current=r_current,
                        action=None if target == r_current else target)
