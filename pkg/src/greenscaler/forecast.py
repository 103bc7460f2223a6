"""Load forecasts for the MPC planning horizon."""

from __future__ import annotations

import bisect
import math
from collections import deque
from typing import Callable, Iterable

from .config import ForecastMethod
from .errors import EmptyHistory, InsufficientHistory, NonMonotonicTime


class LoadHistory:
    """Bounded ring of ``(t, load)`` observations with strictly increasing ``t``."""

    def __init__(self, capacity: int = 720, items: Iterable[tuple[float, float]] = ()):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._ring: deque[tuple[float, float]] = deque(maxlen=capacity)
        for t, x in items:
            self.append(t, x)

    @classmethod
    def for_period(cls, seasonal_period: float, sample_interval: float, periods: float = 2.0):
        return cls(capacity=max(2, int(math.ceil(periods * seasonal_period / sample_interval)) + 1))

    def append(self, t: float, load: float) -> None:
        if self._ring and t <= self._ring[-1][0]:
            raise NonMonotonicTime(f"t={t} is not after {self._ring[-1][0]}")
        self._ring.append((float(t), float(load)))

    def __len__(self) -> int:
        return len(self._ring)

    def snapshot(self) -> tuple[list[float], list[float]]:
        ts = [t for t, _ in self._ring]
        xs = [x for _, x in self._ring]
        return ts, xs

    @property
    def latest(self) -> tuple[float, float]:
        if not self._ring:
            raise EmptyHistory("history is empty")
        return self._ring[-1]

    def spacing(self) -> float:
        """Median gap between observations (0 with fewer than two)."""
        ts, _ = self.snapshot()
        if len(ts) < 2:
            return 0.0
        gaps = sorted(b - a for a, b in zip(ts, ts[1:]))
        return gaps[len(gaps) // 2]

    def span(self) -> float:
        """Time covered, counting the last observation as one spacing wide."""
        ts, _ = self.snapshot()
        if not ts:
            return 0.0
        return ts[-1] - ts[0] + self.spacing()


def _nearest(ts: list[float], xs: list[float], target: float) -> float:
    i = bisect.bisect_left(ts, target)
    if i == 0:
        return xs[0]
    if i == len(ts):
        return xs[-1]
    # ties resolve to the earlier observation
    return xs[i - 1] if target - ts[i - 1] <= ts[i] - target else xs[i]


def point_forecaster(history: LoadHistory, method: ForecastMethod | str,
                     seasonal_period: float = 300.0,
                     truth: Callable[[float], float] | None = None) -> Callable[[float], float]:
    """Return ``f(offset)`` giving the forecast load ``offset`` seconds after the
    latest observation."""
    method = ForecastMethod(method)
    if len(history) == 0:
        raise EmptyHistory("cannot forecast from an empty history")
    t_now, x_now = history.latest
    if method is ForecastMethod.PERSISTENCE:
        return lambda offset: x_now
    if method is ForecastMethod.ORACLE:
        if truth is None:
            raise ValueError("oracle forecasts need the ground-truth load function")
        return lambda offset: max(0.0, truth(t_now + offset))
    if history.span() < seasonal_period - 1e-9:
        raise InsufficientHistory(
            f"seasonal_naive needs {seasonal_period} s of history, have {history.span()} s")
    ts, xs = history.snapshot()
    return lambda offset: _nearest(ts, xs, t_now + offset - seasonal_period)


def forecast(history: LoadHistory, method: ForecastMethod | str, horizon: int, step_len: float,
             seasonal_period: float = 300.0,
             truth: Callable[[float], float] | None = None) -> list[float]:
    """Loads for steps ``k = 0..horizon-1``, step ``k`` at ``t + k * step_len``.

    ``t`` is the time of the latest observation. ``truth`` is only used by the
    test-only ``oracle`` method.
    """
    f = point_forecaster(history, method, seasonal_period, truth)
    return [max(0.0, f(k * step_len)) for k in range(horizon)]


def peak_forecast(history: LoadHistory, method: ForecastMethod | str, horizon: int,
                  step_len: float, window: float, seasonal_period: float = 300.0,
                  truth: Callable[[float], float] | None = None,
                  resolution: float | None = None) -> list[float]:
    """Per-step worst case: entry ``k`` is the largest point forecast over
    ``[k * step_len, k * step_len + window]``, sampled every ``resolution``
    seconds (default: the history spacing)."""
    f = point_forecaster(history, method, seasonal_period, truth)
    res = resolution or history.spacing() or step_len
    n_sub = max(1, int(math.floor(window / res + 1e-9)))
    out = []
    for k in range(horizon):
        start = k * step_len
        offsets = [start + j * res for j in range(n_sub + 1)]
        if offsets[-1] < start + window - 1e-9:
            offsets.append(start + window)
        out.append(max(0.0, max(f(o) for o in offsets)))
    return out
