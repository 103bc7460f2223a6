import pytest

from greenscaler.harness import default_phase1_spec, reproduce, run_phase1
from greenscaler.plant import PlantParams
from greenscaler.surrogate import SurrogateModel, fit_surrogate


class StubModel(SurrogateModel):
    """Surrogate with table-driven heads, for hand-built planner cases."""

    def __init__(self, latency_fn, power_fn):
        super().__init__(latency_coeffs=(1.0, 1.0), energy_coeffs=(0.0, 0.0, 0.0))
        object.__setattr__(self, "_lat", latency_fn)
        object.__setattr__(self, "_pw", power_fn)

    def latency(self, replicas, load):
        return self._lat(replicas, load)

    def power(self, replicas, load):
        return self._pw(replicas, load)


@pytest.fixture(scope="session")
def phase1_noiseless():
    return run_phase1(default_phase1_spec(hours=4.0, plant=PlantParams(noise_sigma=0.0)))


@pytest.fixture(scope="session")
def fitted_model(phase1_noiseless):
    return fit_surrogate(phase1_noiseless.samples)


@pytest.fixture(scope="session")
def default_reproduction():
    return reproduce()
