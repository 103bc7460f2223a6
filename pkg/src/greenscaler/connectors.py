"""Abstract infrastructure/predictor connectors and their simulator backends."""

from __future__ import annotations

import abc

from .config import EndpointStatus, PredictorConfig, PredictorEndpoint
from .plant import Plant, TelemetrySample


class InfraConnector(abc.ABC):
    """Control-plane access. After an acknowledged ``scale(n)`` and the
    actuation delay, ``get_replicas()`` must return ``n``."""

    @abc.abstractmethod
    def get_replicas(self) -> int:
        """Replicas currently running (serving)."""

    @abc.abstractmethod
    def scale(self, target: int) -> bool:
        """Request ``target`` replicas; returns the acknowledgment."""


class PredictorConnector(abc.ABC):
    @abc.abstractmethod
    def fetch(self, now: float) -> dict[str, float]:
        """Latest runtime metrics keyed by metric name."""


class SimInfraConnector(InfraConnector):
    def __init__(self, plant: Plant):
        self.plant = plant

    def get_replicas(self) -> int:
        return self.plant.state.replicas_serving

    def desired_replicas(self) -> int:
        return self.plant.state.replicas_desired

    def scale(self, target: int) -> bool:
        if target < 1:
            return False
        self._target = target
        return True

    def pending_target(self) -> int:
        return getattr(self, "_target", self.plant.state.replicas_desired)


class SimPredictorConnector(PredictorConnector):
    """Serves metrics from the most recent plant sample and keeps the
    endpoint status current."""

    METRICS = {"latency": "p95_latency", "cpu": "cpuload", "request_rate": "load"}

    def __init__(self, config: PredictorConfig, endpoint_id: str = "sim"):
        self.config = config
        self.endpoint = PredictorEndpoint(endpoint_id)
        self._sample: TelemetrySample | None = None

    def push(self, sample: TelemetrySample) -> None:
        self._sample = sample
        self.endpoint.observe(sample.p95_latency, sample.t)

    def fetch(self, now: float) -> dict[str, float]:
        status = self.endpoint.refresh(now, self.config.staleness_bound)
        if self._sample is None or status is EndpointStatus.UNREACHABLE:
            return {}
        return {name: getattr(self._sample, attr) for name, attr in self.METRICS.items()
                if name in self.config.metrics}
