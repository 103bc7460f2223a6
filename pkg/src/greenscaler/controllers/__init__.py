from .hpa import FixedScaler, HpaScaler, HpaState, fixed_decide, hpa_decide
from .mpc import (Decision, MPCScaler, MPCState, PlanResult, mpc_decide, mpc_plan,
                  plan_cost, plan_forecasts)

__all__ = [
    "Decision", "FixedScaler", "HpaScaler", "HpaState", "MPCScaler", "MPCState", "PlanResult",
    "fixed_decide", "hpa_decide", "mpc_decide", "mpc_plan", "plan_cost", "plan_forecasts",
]
