"""Receding-horizon MPC scaler.

Plans are found by exhaustive enumeration of every replica sequence in
``[r_min, r_max]^H``. All sequences are scored at once with numpy; per-step
sums are accumulated in step order, the same order :func:`plan_cost` uses,
so vectorized and scalar costs agree bit for bit.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ..config import ControllerConfig, ForecastAggregation, ForecastMethod
from ..errors import EmptyForecast, InsufficientHistory, LengthMismatch, OutOfBounds, PlanningError
from ..forecast import LoadHistory, forecast, peak_forecast
from ..surrogate import SurrogateModel, predict


@dataclass(frozen=True)
class PlanResult:
    sequence: tuple[int, ...]
    applied: int
    total_cost: float
    energy_term: float
    change_penalty_term: float
    feasible: bool
    fallback_used: bool
    evaluated_sequences: int
    violation: float = 0.0
    forecasts: tuple[float, ...] = ()


def plan_cost(sequence: Sequence[int], forecasts: Sequence[float], r_prev: int,
              model: SurrogateModel, cfg: ControllerConfig) -> tuple[float, bool, float]:
    """Cost, feasibility and total SLO violation of one replica sequence.

    Returns ``(cost, feasible, violation)``; the cost is the sum of the
    weighted predicted power and the replica-change penalty over all steps.
    """
    cost, _, _, feasible, violation = _score(sequence, forecasts, r_prev, model, cfg)
    return cost, feasible, violation


def _score(sequence, forecasts, r_prev, model, cfg):
    if len(sequence) != len(forecasts):
        raise LengthMismatch(f"sequence has {len(sequence)} steps, forecasts {len(forecasts)}")
    if len(sequence) != cfg.horizon:
        raise LengthMismatch(f"expected horizon {cfg.horizon}, got {len(sequence)} steps")
    energy = 0.0
    change = 0.0
    violation = 0.0
    feasible = True
    prev = r_prev
    for r, x in zip(sequence, forecasts):
        if not cfg.r_min <= r <= cfg.r_max:
            raise OutOfBounds(f"replica count {r} outside [{cfg.r_min}, {cfg.r_max}]")
        latency, power = predict(model, r, x)
        energy += cfg.energy_gain * power
        change += cfg.lmbd_drep * abs(r - prev)
        if latency > cfg.slo_p95:
            feasible = False
            violation += latency - cfg.slo_p95
        prev = r
    return energy + change, energy, change, feasible, violation


@functools.lru_cache(maxsize=32)
def _sequences(r_min: int, r_max: int, horizon: int) -> np.ndarray:
    # itertools.product yields lexicographic order, which the tie-break relies on
    seqs = np.array(list(itertools.product(range(r_min, r_max + 1), repeat=horizon)), dtype=np.int64)
    seqs.setflags(write=False)
    return seqs


def mpc_plan(forecasts: Sequence[float], r_prev: int, model: SurrogateModel,
             cfg: ControllerConfig, step_limit: int | None = None) -> PlanResult:
    """Minimum-cost feasible replica sequence over the forecast horizon.

    Ties go to the lexicographically smallest sequence (hence the smallest
    first action). If nothing is feasible, the sequence with the least total
    SLO violation is returned instead, ties broken by cost and then
    lexicographic order, with ``fallback_used=True``.
    """
    forecasts = [float(x) for x in forecasts]
    if not forecasts:
        raise EmptyForecast("forecast is empty")
    if len(forecasts) != cfg.horizon:
        raise LengthMismatch(f"expected {cfg.horizon} forecasts, got {len(forecasts)}")
    if step_limit is None and cfg.step_limit > 0:
        step_limit = cfg.step_limit
    H = len(forecasts)
    levels = range(cfg.r_min, cfg.r_max + 1)

    lat = np.empty((H, len(levels)))
    pw = np.empty((H, len(levels)))
    for k, x in enumerate(forecasts):
        for i, r in enumerate(levels):
            lat[k, i], pw[k, i] = predict(model, r, x)

    seqs = _sequences(cfg.r_min, cfg.r_max, H)
    idx = seqs - cfg.r_min
    n = len(seqs)
    energy = np.zeros(n)
    change = np.zeros(n)
    violation = np.zeros(n)
    feasible = np.ones(n, dtype=bool)
    within_step = np.ones(n, dtype=bool)
    prev = np.full(n, r_prev, dtype=np.int64)
    for k in range(H):
        step_lat = lat[k, idx[:, k]]
        energy = energy + cfg.energy_gain * pw[k, idx[:, k]]
        delta = np.abs(seqs[:, k] - prev)
        change = change + cfg.lmbd_drep * delta
        over = step_lat > cfg.slo_p95
        feasible &= ~over
        violation = violation + np.where(over, step_lat - cfg.slo_p95, 0.0)
        if step_limit is not None:
            within_step &= delta <= step_limit
        prev = seqs[:, k]
    cost = energy + change

    candidates = np.flatnonzero(within_step)
    if candidates.size == 0:
        raise PlanningError(f"no sequence respects step_limit={step_limit} from r_prev={r_prev}")
    ok = candidates[feasible[candidates]]
    if ok.size:
        best = int(ok[np.argmin(cost[ok])])  # argmin keeps the first, i.e. lexicographic, tie
        fallback = False
    else:
        order = np.lexsort((candidates, cost[candidates], violation[candidates]))
        best = int(candidates[order[0]])
        fallback = True
    seq = tuple(int(r) for r in seqs[best])
    return PlanResult(sequence=seq, applied=seq[0], total_cost=float(cost[best]),
                      energy_term=float(energy[best]), change_penalty_term=float(change[best]),
                      feasible=not fallback, fallback_used=fallback,
                      evaluated_sequences=int(candidates.size),
                      violation=float(violation[best]), forecasts=tuple(forecasts))


@dataclass
class MPCState:
    last_decision: float = -math.inf
    last_plan: PlanResult | None = None
    forecast_method_used: str | None = None


@dataclass
class Decision:
    t: float
    controller: str
    r_current: int
    action: int | None
    plan: PlanResult | None = None

    @property
    def target(self) -> int:
        return self.r_current if self.action is None else self.action


def plan_forecasts(history: LoadHistory, cfg: ControllerConfig,
                   truth: Callable[[float], float] | None = None) -> tuple[list[float], str]:
    """Horizon loads for the planner plus the forecast method actually used.

    ``seasonal_naive`` falls back to persistence until a full period of
    history exists.
    """
    method = cfg.forecast_method
    kwargs = dict(seasonal_period=cfg.seasonal_period, truth=truth)

    def run(m):
        if cfg.forecast_agg is ForecastAggregation.PEAK:
            return peak_forecast(history, m, cfg.horizon, cfg.cool_down,
                                 window=cfg.cool_down + cfg.actuation_delay, **kwargs)
        return forecast(history, m, cfg.horizon, cfg.cool_down, **kwargs)

    try:
        return run(method), method.value
    except InsufficientHistory:
        return run(ForecastMethod.PERSISTENCE), ForecastMethod.PERSISTENCE.value


def mpc_decide(now: float, state: MPCState, history: LoadHistory, r_current: int,
               model: SurrogateModel, cfg: ControllerConfig,
               truth: Callable[[float], float] | None = None) -> Decision | None:
    """One receding-horizon step. Returns ``None`` inside the cool-down window,
    otherwise the decision whose action is the plan's first element."""
    if now - state.last_decision < cfg.cool_down - 1e-9:
        return None
    loads, used = plan_forecasts(history, cfg, truth)
    plan = mpc_plan(loads, r_current, model, cfg)
    state.last_decision = now
    state.last_plan = plan
    state.forecast_method_used = used
    return Decision(t=now, controller="mpc", r_current=r_current, action=plan.applied, plan=plan)


class MPCScaler:
    """Stateful wrapper: owns the load history and cool-down bookkeeping."""

    name = "mpc"

    def __init__(self, model: SurrogateModel, cfg: ControllerConfig,
                 history: LoadHistory | None = None,
                 truth: Callable[[float], float] | None = None):
        self.model = model
        self.cfg = cfg
        self.history = history or LoadHistory(capacity=4096)
        self.truth = truth
        self.state = MPCState()

    def observe(self, t: float, load: float) -> None:
        self.history.append(t, load)

    def decide(self, now: float, r_current: int, sample=None) -> Decision | None:
        return mpc_decide(now, self.state, self.history, r_current, self.model, self.cfg, self.truth)
