"""Energy-aware MPC replica autoscaling with a simulated cluster plant.

The public surface re-exports the pieces most callers need; submodules hold
the rest.
"""

from .config import ControllerConfig, ScaleRule, load_config, validate_rule
from .controllers import HpaState, PlanResult, hpa_decide, mpc_decide, mpc_plan, plan_cost
from .forecast import LoadHistory, forecast
from .harness import ScenarioSpec, compare, reproduce, run_phase1, run_scenario
from .plant import PlantParams, TelemetrySample, energy_wh, plant_p95_latency, plant_power
from .surrogate import SurrogateModel, fit_power_features, fit_surrogate, predict
from .workload import WorkloadProfile, arrival_rate_at, vu_at

__version__ = "0.1.0"

__all__ = [
    "ControllerConfig", "HpaState", "LoadHistory", "PlanResult", "PlantParams", "ScaleRule",
    "ScenarioSpec", "SurrogateModel", "TelemetrySample", "WorkloadProfile", "arrival_rate_at",
    "compare", "energy_wh", "fit_power_features", "fit_surrogate", "forecast", "hpa_decide",
    "load_config", "mpc_decide", "mpc_plan", "plan_cost", "plant_p95_latency", "plant_power",
    "predict", "reproduce", "run_phase1", "run_scenario", "validate_rule", "vu_at",
]
