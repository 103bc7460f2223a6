"""Controller configuration, scaling rules and predictor bookkeeping.

Configuration documents are flat ``KEY=VALUE`` text. Keys use the upper-case
names of the MPC tuning table (``COOL_DOWN``, ``SLO_P95``, ``R_MIN``, ...).
"""

from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping

from .errors import InvalidValue, MissingKey, UnknownKey


class ForecastMethod(str, enum.Enum):
    PERSISTENCE = "persistence"
    SEASONAL_NAIVE = "seasonal_naive"
    ORACLE = "oracle"


class ForecastAggregation(str, enum.Enum):
    POINT = "point"
    PEAK = "peak"


@dataclass(frozen=True)
class ControllerConfig:
    """Tuning knobs of the MPC scaler.

    ``forecast_agg`` and ``actuation_delay`` decide which load each plan step
    is sized for: ``point`` uses the forecast at the step start, ``peak`` the
    largest forecast over the interval the step's replicas actually serve
    (step length plus ``actuation_delay``). ``step_limit`` of 0 means the
    search is unrestricted.
    """

    cool_down: float = 15.0
    slo_p95: float = 1200.0
    r_min: int = 1
    r_max: int = 20
    horizon: int = 3
    lmbd_drep: float = 4.0
    energy_gain: float = 1.0
    forecast_method: ForecastMethod = ForecastMethod.SEASONAL_NAIVE
    seasonal_period: float = 300.0
    forecast_agg: ForecastAggregation = ForecastAggregation.PEAK
    actuation_delay: float = 10.0
    step_limit: int = 0

    def __post_init__(self):
        object.__setattr__(self, "forecast_method", ForecastMethod(self.forecast_method))
        object.__setattr__(self, "forecast_agg", ForecastAggregation(self.forecast_agg))
        if self.r_min < 1:
            raise InvalidValue("R_MIN", f"must be >= 1, got {self.r_min}")
        if self.r_min > self.r_max:
            raise InvalidValue("R_MIN", "R_MIN > R_MAX")
        if self.horizon < 1:
            raise InvalidValue("HORIZON", f"must be >= 1, got {self.horizon}")
        if not self.cool_down > 0:
            raise InvalidValue("COOL_DOWN", f"must be > 0, got {self.cool_down}")
        if not self.slo_p95 > 0:
            raise InvalidValue("SLO_P95", f"must be > 0, got {self.slo_p95}")
        if self.lmbd_drep < 0:
            raise InvalidValue("LMBD_DREP", f"must be >= 0, got {self.lmbd_drep}")
        if self.energy_gain < 0:
            raise InvalidValue("ENERGY_GAIN", f"must be >= 0, got {self.energy_gain}")
        if not self.seasonal_period > 0:
            raise InvalidValue("SEASONAL_PERIOD", f"must be > 0, got {self.seasonal_period}")
        if self.actuation_delay < 0:
            raise InvalidValue("ACTUATION_DELAY", f"must be >= 0, got {self.actuation_delay}")
        if self.step_limit < 0:
            raise InvalidValue("STEP_LIMIT", f"must be >= 0, got {self.step_limit}")
        for name in ("cool_down", "slo_p95", "lmbd_drep", "energy_gain",
                     "seasonal_period", "actuation_delay"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidValue(name.upper(), "must be finite")


def _parse_int(key: str, raw: Any) -> int:
    if isinstance(raw, bool):
        raise InvalidValue(key, f"expected an integer, got {raw!r}")
    if isinstance(raw, int):
        return raw
    try:
        value = float(raw)
    except (TypeError, ValueError):
        raise InvalidValue(key, f"expected an integer, got {raw!r}") from None
    if not value.is_integer():
        raise InvalidValue(key, f"expected an integer, got {raw!r}")
    return int(value)


def _parse_float(key: str, raw: Any) -> float:
    try:
        value = float(raw)
    except (TypeError, ValueError):
        raise InvalidValue(key, f"expected a number, got {raw!r}") from None
    if not math.isfinite(value):
        raise InvalidValue(key, f"expected a finite number, got {raw!r}")
    return value


def _parse_enum(enum_cls: type[enum.Enum]) -> Callable[[str, Any], Any]:
    def parse(key: str, raw: Any):
        try:
            return enum_cls(str(raw).strip().lower())
        except ValueError:
            allowed = ", ".join(m.value for m in enum_cls)
            raise InvalidValue(key, f"expected one of {{{allowed}}}, got {raw!r}") from None
    return parse


# document key -> (field name, parser)
CONFIG_KEYS: dict[str, tuple[str, Callable[[str, Any], Any]]] = {
    "COOL_DOWN": ("cool_down", _parse_float),
    "SLO_P95": ("slo_p95", _parse_float),
    "R_MIN": ("r_min", _parse_int),
    "R_MAX": ("r_max", _parse_int),
    "HORIZON": ("horizon", _parse_int),
    "LMBD_DREP": ("lmbd_drep", _parse_float),
    "ENERGY_GAIN": ("energy_gain", _parse_float),
    "FORECAST_METHOD": ("forecast_method", _parse_enum(ForecastMethod)),
    "SEASONAL_PERIOD": ("seasonal_period", _parse_float),
    "FORECAST_AGG": ("forecast_agg", _parse_enum(ForecastAggregation)),
    "ACTUATION_DELAY": ("actuation_delay", _parse_float),
    "STEP_LIMIT": ("step_limit", _parse_int),
}

# Keys that must be present when defaults are disabled.
REQUIRED_KEYS = ("COOL_DOWN", "SLO_P95", "R_MIN", "R_MAX", "HORIZON", "LMBD_DREP")


def load_config(source: Mapping[str, Any], use_defaults: bool = True) -> ControllerConfig:
    """Build a validated :class:`ControllerConfig` from a key-value mapping.

    Keys are matched case-insensitively against :data:`CONFIG_KEYS`; unknown
    keys raise :class:`UnknownKey`. With ``use_defaults=False`` every key in
    :data:`REQUIRED_KEYS` must be supplied.
    """
    normalized = {str(k).strip().upper(): v for k, v in source.items()}
    for key in normalized:
        if key not in CONFIG_KEYS:
            raise UnknownKey(key, "not a controller configuration key")
    if not use_defaults:
        for key in REQUIRED_KEYS:
            if key not in normalized:
                raise MissingKey(key, "required key is missing")
    kwargs = {}
    for key, raw in normalized.items():
        name, parse = CONFIG_KEYS[key]
        kwargs[name] = parse(key, raw)
    return ControllerConfig(**kwargs)


def config_to_dict(cfg: ControllerConfig) -> dict[str, Any]:
    out = {}
    for key, (name, _) in CONFIG_KEYS.items():
        value = getattr(cfg, name)
        out[key] = value.value if isinstance(value, enum.Enum) else value
    return out


def dump_config(cfg: ControllerConfig) -> str:
    """Serialize to ``KEY=VALUE`` lines; floats use ``repr`` so parsing is lossless."""
    lines = []
    for key, value in config_to_dict(cfg).items():
        lines.append(f"{key}={value!r}" if isinstance(value, float) else f"{key}={value}")
    return "\n".join(lines) + "\n"


def parse_kv_text(text: str) -> dict[str, dict[str, str]]:
    """Parse ``KEY=VALUE`` lines with optional ``[section]`` headers.

    Keys before the first header land in section ``""``. Blank lines and
    ``#`` comments are skipped. Section names are lower-cased, keys upper-cased.
    """
    sections: dict[str, dict[str, str]] = {"": {}}
    current = ""
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip().lower()
            sections.setdefault(current, {})
            continue
        if "=" not in line:
            raise InvalidValue(f"line {lineno}", f"expected KEY=VALUE, got {raw_line!r}")
        key, value = line.split("=", 1)
        sections[current][key.strip().upper()] = value.strip()
    return sections


def read_config_file(path: str | Path, overrides: Mapping[str, Any] | None = None) -> ControllerConfig:
    doc = parse_kv_text(Path(path).read_text(encoding="utf-8"))
    flat = dict(doc.get("", {}))
    flat.update(doc.get("controller", {}))
    if overrides:
        flat.update({k.upper(): v for k, v in overrides.items()})
    return load_config(flat)


@dataclass
class ScaleRule:
    """Per-service scaling policy.

    Construction never validates; call :func:`validate_rule`. The thresholds
    are utilization fractions and only matter to threshold-style scalers and
    the HPA tolerance band; the MPC path ignores them.
    """

    predictor_id: str
    namespace: str = "default"
    min_replicas: int = 1
    max_replicas: int = 20
    step: int = 1
    upper_threshold: float = 0.8
    lower_threshold: float = 0.2


def validate_rule(rule: ScaleRule) -> list[str]:
    """Return every violated invariant of ``rule``; an empty list means valid."""
    problems = []
    try:
        if rule.min_replicas > rule.max_replicas:
            problems.append("min_replicas > max_replicas")
    except TypeError:
        problems.append("min_replicas/max_replicas not comparable")
    try:
        if rule.min_replicas < 0:
            problems.append("min_replicas < 0")
    except TypeError:
        pass
    try:
        if not rule.step >= 1:
            problems.append("step < 1")
    except TypeError:
        problems.append("step not numeric")
    try:
        lower, upper = rule.lower_threshold, rule.upper_threshold
        if not 0 <= lower <= 1:
            problems.append("lower_threshold outside [0, 1]")
        if not 0 <= upper <= 1:
            problems.append("upper_threshold outside [0, 1]")
        if not lower < upper:
            problems.append("lower_threshold ≥ upper_threshold")
    except TypeError:
        problems.append("thresholds not numeric")
    if not rule.predictor_id:
        problems.append("predictor_id is empty")
    return problems


class EndpointStatus(str, enum.Enum):
    HEALTHY = "healthy"
    STALE = "stale"
    UNREACHABLE = "unreachable"


@dataclass
class PredictorConfig:
    """Connection settings for a predictor service. Credentials stay opaque."""

    endpoint_url: str
    poll_interval: float = 5.0
    staleness_bound: float = 30.0
    auth_token: str = field(default="", repr=False)
    metrics: tuple[str, ...] = ("latency", "cpu", "request_rate")


@dataclass
class PredictorEndpoint:
    endpoint_id: str
    last_value: float = math.nan
    status: EndpointStatus = EndpointStatus.UNREACHABLE
    last_update: float = -math.inf

    def observe(self, value: float, now: float) -> None:
        self.last_value = float(value)
        self.last_update = now
        self.status = EndpointStatus.HEALTHY

    def mark_unreachable(self) -> None:
        self.status = EndpointStatus.UNREACHABLE

    def refresh(self, now: float, staleness_bound: float) -> EndpointStatus:
        """Downgrade a healthy endpoint to stale once its value is too old."""
        if self.status is EndpointStatus.HEALTHY and now - self.last_update > staleness_bound:
            self.status = EndpointStatus.STALE
        return self.status


def replace(cfg: ControllerConfig, **changes) -> ControllerConfig:
    return dataclasses.replace(cfg, **changes)
