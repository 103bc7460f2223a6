"""Surrogate performance/power model fitted from recorded telemetry.

Latency head: ``a0 * (1 + ln(20) * rho / (1 - rho))`` with ``rho = X / (R * a1)``
capped at 0.999, the same family the plant uses. Power head: ``b0 + b1*R + b2*X``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import optimize

from .errors import DegenerateDesign, DomainError, InsufficientData
from .plant import TIERS, TelemetrySample, latency_curve, P95_FACTOR, RHO_CAP

FORMAT_VERSION = 1
SURROGATE_FAMILY = "queueing-p95+affine-power"
POWER_FEATURE_FAMILY = "affine-features"
POWER_FEATURES = ("cpuload", "mem_used", "swap_used")


def _check_design(X: np.ndarray, names: Sequence[str]) -> None:
    """Raise :class:`DegenerateDesign` naming the first column that adds no rank.

    Column 0 is the intercept.
    """
    for j in range(1, X.shape[1]):
        if np.ptp(X[:, j]) == 0.0:
            raise DegenerateDesign(names[j])
    rank = 0
    for j in range(X.shape[1]):
        r = np.linalg.matrix_rank(X[:, : j + 1])
        if r <= rank:
            raise DegenerateDesign(names[j], f"column {names[j]!r} is collinear with "
                                             f"{', '.join(names[:j])}")
        rank = r


def _ols(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    return coef


def _rmse(residuals: np.ndarray) -> float:
    return float(np.sqrt(np.mean(residuals**2)))


@dataclass(frozen=True)
class SurrogateModel:
    latency_coeffs: tuple[float, float]
    energy_coeffs: tuple[float, float, float]
    power_tier: str = "containers"
    fit_report: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.latency_coeffs[1] > 0:
            raise DomainError(f"latency service-rate coefficient must be > 0, got {self.latency_coeffs[1]}")

    def latency(self, replicas: int, load: float) -> float:
        a0, a1 = self.latency_coeffs
        return latency_curve(a0, load / (replicas * a1))

    def power(self, replicas: int, load: float) -> float:
        b0, b1, b2 = self.energy_coeffs
        return b0 + b1 * replicas + b2 * load

    def to_dict(self) -> dict:
        return {
            "format": FORMAT_VERSION,
            "family": SURROGATE_FAMILY,
            "latency_coeffs": list(self.latency_coeffs),
            "energy_coeffs": list(self.energy_coeffs),
            "power_tier": self.power_tier,
            "fit_report": self.fit_report,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SurrogateModel":
        if doc.get("format") != FORMAT_VERSION or doc.get("family") != SURROGATE_FAMILY:
            raise ValueError(f"unsupported surrogate document (format={doc.get('format')!r}, "
                             f"family={doc.get('family')!r})")
        return cls(latency_coeffs=tuple(float(v) for v in doc["latency_coeffs"]),
                   energy_coeffs=tuple(float(v) for v in doc["energy_coeffs"]),
                   power_tier=doc.get("power_tier", "containers"),
                   fit_report=doc.get("fit_report", {}))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n",
                              encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "SurrogateModel":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def predict(model: SurrogateModel, replicas: int, load: float) -> tuple[float, float]:
    """Predicted ``(p95_latency_ms, power_w)`` for ``replicas`` serving ``load`` req/s."""
    if replicas < 1:
        raise DomainError(f"replicas must be >= 1, got {replicas}")
    if load < 0:
        raise DomainError(f"load must be >= 0, got {load}")
    return model.latency(replicas, load), model.power(replicas, load)


def _latency_basis(R: np.ndarray, X: np.ndarray, a1: float) -> np.ndarray:
    rho = np.minimum(X / (R * a1), RHO_CAP)
    return 1.0 + P95_FACTOR * rho / (1.0 - rho)


def _fit_latency(R: np.ndarray, X: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    def a0_for(a1: float) -> float:
        f = _latency_basis(R, X, a1)
        return float(f @ y / (f @ f))

    def sse(log_a1: float) -> float:
        a1 = math.exp(log_a1)
        f = _latency_basis(R, X, a1)
        return float(np.sum((y - a0_for(a1) * f) ** 2))

    per_replica = X / R
    scale = float(np.max(per_replica)) if np.max(per_replica) > 0 else 1.0
    grid = np.linspace(math.log(scale) - 7.0, math.log(scale) + 7.0, 281)
    values = [sse(g) for g in grid]
    i = int(np.argmin(values))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    res = optimize.minimize_scalar(sse, bounds=(lo, hi), method="bounded",
                                   options={"xatol": 1e-12})
    log_a1 = float(res.x) if res.fun <= values[i] else float(grid[i])
    a1 = math.exp(log_a1)
    a0 = a0_for(a1)

    # Gauss-Newton polish on both parameters: converges to machine precision
    # when the data come from the model family without noise.
    def residuals(theta):
        return theta[0] * _latency_basis(R, X, math.exp(theta[1])) - y

    polished = optimize.least_squares(residuals, x0=[a0, log_a1], method="lm",
                                      xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=2000)
    if np.sum(polished.fun**2) <= np.sum(residuals([a0, log_a1]) ** 2):
        a0, a1 = float(polished.x[0]), math.exp(float(polished.x[1]))
    return a0, a1


def fit_surrogate(samples: Sequence[TelemetrySample], tier: str = "containers",
                  min_samples: int = 10) -> SurrogateModel:
    """Fit both heads from telemetry, using ``replicas_serving`` as R and ``load`` as X.

    Samples with zero serving replicas are ignored.
    """
    if tier not in TIERS:
        raise ValueError(f"tier must be one of {TIERS}, got {tier!r}")
    rows = [s for s in samples if s.replicas_serving >= 1]
    if len(rows) < min_samples:
        raise InsufficientData(f"need >= {min_samples} samples with serving replicas, got {len(rows)}")
    R = np.array([s.replicas_serving for s in rows], dtype=float)
    X = np.array([s.load for s in rows], dtype=float)
    L = np.array([s.p95_latency for s in rows], dtype=float)
    P = np.array([s.tier_power(tier) for s in rows], dtype=float)

    design = np.column_stack([np.ones_like(R), R, X])
    _check_design(design, ("intercept", "R", "X"))
    b = _ols(design, P)
    a0, a1 = _fit_latency(R, X, L)

    model = SurrogateModel(latency_coeffs=(a0, a1), energy_coeffs=tuple(float(v) for v in b),
                           power_tier=tier)
    lat_pred = np.array([model.latency(r, x) for r, x in zip(R, X)])
    report = {
        "n_samples": len(rows),
        "replica_levels": sorted({int(r) for r in R}),
        "load_range": [float(X.min()), float(X.max())],
        "latency_rmse_ms": _rmse(lat_pred - L),
        "power_rmse_w": _rmse(design @ b - P),
    }
    return SurrogateModel(latency_coeffs=(a0, a1), energy_coeffs=model.energy_coeffs,
                          power_tier=tier, fit_report=report)


@dataclass(frozen=True)
class PowerFeatureModel:
    """Active-power regressor over (1, cpuload, mem_used, swap_used)."""

    weights: tuple[float, float, float, float]
    fit_report: dict = field(default_factory=dict, compare=False)

    def predict(self, cpuload: float, mem_used: float, swap_used: float) -> float:
        w = self.weights
        return w[0] + w[1] * cpuload + w[2] * mem_used + w[3] * swap_used

    def predict_samples(self, samples: Sequence[TelemetrySample]) -> np.ndarray:
        F = _feature_matrix(samples)
        return F @ np.asarray(self.weights)

    def to_dict(self) -> dict:
        return {"format": FORMAT_VERSION, "family": POWER_FEATURE_FAMILY,
                "features": ["intercept", *POWER_FEATURES],
                "weights": list(self.weights), "fit_report": self.fit_report}

    @classmethod
    def from_dict(cls, doc: dict) -> "PowerFeatureModel":
        if doc.get("format") != FORMAT_VERSION or doc.get("family") != POWER_FEATURE_FAMILY:
            raise ValueError("unsupported power-feature document")
        return cls(weights=tuple(float(w) for w in doc["weights"]),
                   fit_report=doc.get("fit_report", {}))


def _feature_matrix(samples: Sequence[TelemetrySample]) -> np.ndarray:
    return np.array([[1.0, s.cpuload, s.mem_used, s.swap_used] for s in samples], dtype=float)


def fit_power_features(samples: Sequence[TelemetrySample]) -> PowerFeatureModel:
    """OLS of host power on (1, cpuload, mem_used, swap_used)."""
    if len(samples) < 4:
        raise InsufficientData(f"need >= 4 samples, got {len(samples)}")
    F = _feature_matrix(samples)
    _check_design(F, ("intercept", *POWER_FEATURES))
    y = np.array([s.power_host for s in samples], dtype=float)
    w = _ols(F, y)
    report = {"n_samples": len(samples), "rmse_w": _rmse(F @ w - y),
              "mape": float(np.mean(np.abs((F @ w - y) / y))) if np.all(y != 0) else None}
    return PowerFeatureModel(weights=tuple(float(v) for v in w), fit_report=report)


def mape(predicted, actual) -> float:
    predicted = np.asarray(predicted, dtype=float)
    actual = np.asarray(actual, dtype=float)
    return float(np.mean(np.abs(predicted - actual) / np.abs(actual)))
