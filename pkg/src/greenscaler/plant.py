"""Discrete-time ground-truth cluster model.

The plant maps (replicas, load) to P95 latency, CPU, memory and three power
tiers (PDU >= host >= containers) and delays scaling actions by a start-up
or shutdown latency. Default parameters are tuned, not measured: they were
chosen so the default HPA-vs-MPC scenario lands near the published energy
ratio (see README, "Calibration").
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, EmptyInput, InvalidValue, NonMonotonicTime

P95_FACTOR = math.log(20.0)
RHO_CAP = 0.999

TIERS = ("pdu", "host", "containers")


@dataclass(frozen=True)
class PlantParams:
    mu: float = 25.0                # req/s one replica can serve
    l0: float = 150.0               # ms, zero-load latency
    p_node_idle: float = 60.0       # W per node
    n_nodes: int = 3
    p_replica_idle: float = 2.0     # W per running replica
    e_per_request: float = 0.22     # J per request
    pdu_overhead: float = 0.08
    startup_delay: float = 10.0
    shutdown_delay: float = 2.0
    mem_per_replica: float = 0.05   # fraction of node memory
    swap_factor: float = 1.0
    cpu_cap: float = 1.0
    sample_interval: float = 5.0
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not self.mu > 0:
            raise InvalidValue("MU", "must be > 0")
        if not self.l0 > 0:
            raise InvalidValue("L0", "must be > 0")
        for key in ("p_node_idle", "p_replica_idle", "e_per_request", "pdu_overhead"):
            if getattr(self, key) < 0:
                raise InvalidValue(key.upper(), "must be >= 0")
        if self.n_nodes < 0:
            raise InvalidValue("N_NODES", "must be >= 0")
        if self.startup_delay < 0 or self.shutdown_delay < 0:
            raise InvalidValue("STARTUP_DELAY", "delays must be >= 0")
        if not 0 <= self.mem_per_replica <= 1:
            raise InvalidValue("MEM_PER_REPLICA", "must lie in [0, 1]")
        if not self.sample_interval > 0:
            raise InvalidValue("SAMPLE_INTERVAL", "must be > 0")
        if not 0 <= self.noise_sigma < 1:
            raise InvalidValue("NOISE_SIGMA", "must lie in [0, 1)")
        if not self.cpu_cap > 0:
            raise InvalidValue("CPU_CAP", "must be > 0")


@dataclass(frozen=True)
class ClusterState:
    """Plant state. ``replicas_desired`` is the control-plane target,
    ``replicas_serving`` what actually answers requests. Each pending entry is
    ``(effective_time, delta)``."""

    t: float = 0.0
    replicas_desired: int = 1
    replicas_serving: int = 1
    pending_changes: tuple[tuple[float, int], ...] = ()
    replicas_previous: int = 1      # target in force during the previous interval


@dataclass(frozen=True, slots=True)
class TelemetrySample:
    t: float
    load: float
    replicas_serving: int
    p95_latency: float
    cpuload: float
    mem_used: float
    swap_used: float
    power_pdu: float
    power_host: float
    power_containers: float

    def tier_power(self, tier: str) -> float:
        return getattr(self, f"power_{tier}")


def latency_curve(l0: float, rho: float) -> float:
    """``l0 * (1 + ln(20) * rho / (1 - rho))`` with rho capped at :data:`RHO_CAP`."""
    rho = min(rho, RHO_CAP)
    return l0 * (1.0 + P95_FACTOR * rho / (1.0 - rho))


def plant_p95_latency(params: PlantParams, replicas: int, load: float) -> float:
    if replicas < 1:
        raise DomainError(f"replicas must be >= 1, got {replicas}")
    if load < 0:
        raise DomainError(f"load must be >= 0, got {load}")
    return latency_curve(params.l0, load / (replicas * params.mu))


def plant_power(params: PlantParams, replicas: int, load: float) -> tuple[float, float, float]:
    """Return ``(power_pdu, power_host, power_containers)`` in watts."""
    if replicas < 0 or load < 0:
        raise DomainError("replicas and load must be >= 0")
    containers = replicas * params.p_replica_idle + load * params.e_per_request
    host = containers + params.p_node_idle * params.n_nodes
    pdu = host * (1.0 + params.pdu_overhead)
    return pdu, host, containers


def initial_state(replicas: int, t: float = 0.0) -> ClusterState:
    return ClusterState(t=t, replicas_desired=replicas, replicas_serving=replicas,
                        replicas_previous=replicas)


def _schedule(state: ClusterState, params: PlantParams, desired: int) -> ClusterState:
    delta = desired - state.replicas_desired
    if delta == 0:
        return state
    pending = list(state.pending_changes)
    # Cancel not-yet-effective changes of the opposite sign first, newest
    # first, the way a control plane drops pods that never became ready.
    i = len(pending) - 1
    while delta != 0 and i >= 0:
        eff, d = pending[i]
        if (d > 0) != (delta > 0):
            cancel = min(abs(d), abs(delta))
            d_new = d + (cancel if d < 0 else -cancel)
            delta += -cancel if delta > 0 else cancel
            if d_new == 0:
                pending.pop(i)
            else:
                pending[i] = (eff, d_new)
        i -= 1
    if delta > 0:
        pending.append((state.t + params.startup_delay, delta))
    elif delta < 0:
        pending.append((state.t + params.shutdown_delay, delta))
    return replace(state, replicas_desired=desired, pending_changes=tuple(pending))


def _mature(state: ClusterState, t_new: float) -> ClusterState:
    serving = state.replicas_serving
    remaining = []
    for eff, d in state.pending_changes:
        if eff <= t_new + 1e-9:
            serving += d
        else:
            remaining.append((eff, d))
    return replace(state, t=t_new, replicas_serving=serving, pending_changes=tuple(remaining))


def observe(state: ClusterState, params: PlantParams, load: float,
            rng: np.random.Generator | None = None) -> TelemetrySample:
    """Telemetry for the current state. Noise draws come from ``rng`` when
    ``params.noise_sigma > 0``; four normal draws per call, fixed order."""
    if load < 0:
        raise DomainError(f"load must be >= 0, got {load}")
    r = state.replicas_serving
    if r >= 1:
        latency = plant_p95_latency(params, r, load)
        cpu = min(load / (r * params.mu), params.cpu_cap)
    else:
        latency = latency_curve(params.l0, 1.0) if load > 0 else params.l0
        cpu = 0.0
    mem = min(max(r * params.mem_per_replica, 0.0), 1.0)
    swap = max(0.0, mem - 0.9) * params.swap_factor
    _, _, containers = plant_power(params, max(r, 0), load)
    node_idle = params.p_node_idle * params.n_nodes
    if params.noise_sigma > 0:
        if rng is None:
            raise ValueError("noise_sigma > 0 requires an rng")
        eps = rng.standard_normal(4) * params.noise_sigma
        latency *= max(1.0 + eps[0], 0.05)
        containers *= max(1.0 + eps[1], 0.0)
        node_idle *= max(1.0 + eps[2], 0.0)
        cpu = min(max(cpu * (1.0 + eps[3]), 0.0), params.cpu_cap)
    host = containers + node_idle
    pdu = host * (1.0 + params.pdu_overhead)
    return TelemetrySample(t=state.t, load=load, replicas_serving=r, p95_latency=latency,
                           cpuload=cpu, mem_used=mem, swap_used=swap,
                           power_pdu=pdu, power_host=host, power_containers=containers)


def step(state: ClusterState, params: PlantParams, desired: int, load: float, dt: float,
         rng: np.random.Generator | None = None) -> tuple[ClusterState, TelemetrySample]:
    """Apply ``desired`` at ``state.t``, advance by ``dt`` and observe ``load``.

    Scale-ups become serving ``startup_delay`` seconds after the request,
    scale-downs after ``shutdown_delay``.
    """
    if not dt > 0:
        raise DomainError(f"dt must be > 0, got {dt}")
    if desired < 1:
        raise DomainError(f"desired replicas must be >= 1, got {desired}")
    previous = state.replicas_desired
    state = _schedule(state, params, desired)
    state = _mature(state, state.t + dt)
    state = replace(state, replicas_previous=previous)
    return state, observe(state, params, load, rng)


class Plant:
    """Stateful convenience wrapper around :func:`step` with its own RNG."""

    def __init__(self, params: PlantParams, replicas: int = 1):
        self.params = params
        self.state = initial_state(replicas)
        self.rng = np.random.default_rng(params.seed)

    def observe(self, load: float) -> TelemetrySample:
        return observe(self.state, self.params, load, self.rng)

    def step(self, desired: int, load: float, dt: float | None = None) -> TelemetrySample:
        self.state, sample = step(self.state, self.params, desired, load,
                                  dt or self.params.sample_interval, self.rng)
        return sample


def energy_wh(samples: Sequence[TelemetrySample], tier: str = "containers") -> float:
    """Trapezoidal integral of one tier's power, in watt-hours."""
    if tier not in TIERS:
        raise ValueError(f"tier must be one of {TIERS}, got {tier!r}")
    if len(samples) == 0:
        raise EmptyInput("no samples")
    t = np.array([s.t for s in samples], dtype=float)
    p = np.array([s.tier_power(tier) for s in samples], dtype=float)
    return integrate_wh(t, p)


def integrate_wh(t: Iterable[float], power: Iterable[float]) -> float:
    t = np.asarray(t, dtype=float)
    p = np.asarray(power, dtype=float)
    if t.size == 0:
        raise EmptyInput("no samples")
    if np.any(np.diff(t) <= 0):
        raise NonMonotonicTime("sample times must be strictly increasing")
    if t.size == 1:
        return 0.0
    return float(np.sum((p[1:] + p[:-1]) * np.diff(t)) / 2.0 / 3600.0)
