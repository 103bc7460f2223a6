"""Experiment phases, closed-loop runs, reports and artifact export.

Phase 1 drives the plant with a fixed replica policy to collect a fitting
dataset. Phases 2 and 3 close the loop with the HPA and MPC scalers on the
same workload. Reports are always computed from the exported CSV text, so
they can be re-derived from the files alone.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .config import ControllerConfig, load_config, parse_kv_text
from .controllers import Decision, FixedScaler, HpaScaler, HpaState, MPCScaler
from .errors import InvalidScenario, InvalidValue, MismatchedScenario, MissingSurrogate, UnknownKey
from .forecast import LoadHistory
from .plant import Plant, PlantParams, TelemetrySample, TIERS, integrate_wh
from .surrogate import SurrogateModel, fit_surrogate
from .workload import WorkloadProfile, arrival_rate_at, trace_hash

TELEMETRY_HEADER = ("t", "load", "replicas_serving", "p95_ms", "cpuload", "mem_used",
                    "swap_used", "power_pdu_w", "power_host_w", "power_containers_w")
DECISION_HEADER = ("t", "controller", "r_current", "action", "cost", "energy_term",
                   "change_penalty", "feasible", "fallback", "plan")

# published one-hour container energy for the HPA and MPC runs, used as the calibration target
REFERENCE_HPA_WH = 24.58
REFERENCE_MPC_WH = 18.25
REFERENCE_ENERGY_RATIO = REFERENCE_HPA_WH / REFERENCE_MPC_WH
RATIO_TOLERANCE = 0.15
ENERGY_FRACTION_MAX = 0.85
SLO_FRACTION_MAX = 0.01

CONTROLLERS = ("none", "hpa", "mpc")


@dataclass(frozen=True)
class ScenarioSpec:
    workload: WorkloadProfile = field(default_factory=WorkloadProfile)
    plant: PlantParams = field(default_factory=PlantParams)
    controller: str = "mpc"
    cfg: ControllerConfig = field(default_factory=ControllerConfig)
    duration: float = 3600.0
    seed: int = 0
    r_fixed: int = 1
    profile_sweep: tuple[int, ...] = ()
    hpa_target_cpu: float = 0.6     # calibrated so HPA also holds the SLO
    hpa_tolerance: float = 0.10
    hpa_stabilization_window: float = 300.0

    def __post_init__(self):
        if self.controller not in CONTROLLERS:
            raise InvalidScenario(f"controller must be one of {CONTROLLERS}, got {self.controller!r}")
        if self.duration < 2 * self.cfg.cool_down:
            raise InvalidScenario(f"duration {self.duration} s is shorter than two cool-down "
                                  f"intervals ({2 * self.cfg.cool_down} s)")
        if self.r_fixed < 1:
            raise InvalidScenario("r_fixed must be >= 1")
        if self.workload.duration != self.duration:
            object.__setattr__(self, "workload", dataclasses.replace(self.workload, duration=self.duration))
        if self.plant.seed != self.seed:
            object.__setattr__(self, "plant", dataclasses.replace(self.plant, seed=self.seed))
        if self.workload.seed != self.seed:
            object.__setattr__(self, "workload", dataclasses.replace(self.workload, seed=self.seed))

    @property
    def n_samples(self) -> int:
        return int(round(self.duration / self.plant.sample_interval))


@dataclass
class RunResult:
    spec: ScenarioSpec
    samples: list[TelemetrySample]
    decisions: list[Decision]
    telemetry_csv: str
    decisions_csv: str
    report: dict[str, Any]

    def write(self, out_dir: str | Path, prefix: str = "") -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {
            "telemetry": out / f"{prefix}telemetry.csv",
            "decisions": out / f"{prefix}decisions.csv",
            "report": out / f"{prefix}report.json",
        }
        paths["telemetry"].write_text(self.telemetry_csv, encoding="utf-8")
        paths["decisions"].write_text(self.decisions_csv, encoding="utf-8")
        paths["report"].write_text(dump_json(self.report), encoding="utf-8")
        return paths


def dump_json(doc: Any) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _g6(value: float) -> str:
    return f"{value:.6g}"


def format_telemetry_csv(samples: Sequence[TelemetrySample]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TELEMETRY_HEADER)
    for s in samples:
        w.writerow([_g6(s.t), _g6(s.load), str(s.replicas_serving), _g6(s.p95_latency),
                    _g6(s.cpuload), _g6(s.mem_used), _g6(s.swap_used), _g6(s.power_pdu),
                    _g6(s.power_host), _g6(s.power_containers)])
    return buf.getvalue()


def parse_telemetry_csv(text: str) -> list[TelemetrySample]:
    reader = csv.reader(io.StringIO(text))
    header = tuple(next(reader))
    if header != TELEMETRY_HEADER:
        raise ValueError(f"unexpected telemetry header {header}")
    out = []
    for row in reader:
        if not row:
            continue
        v = [float(x) for x in row]
        out.append(TelemetrySample(t=v[0], load=v[1], replicas_serving=int(v[2]),
                                   p95_latency=v[3], cpuload=v[4], mem_used=v[5],
                                   swap_used=v[6], power_pdu=v[7], power_host=v[8],
                                   power_containers=v[9]))
    return out


def format_decisions_csv(decisions: Sequence[Decision]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(DECISION_HEADER)
    for d in decisions:
        p = d.plan
        w.writerow([
            _g6(d.t), d.controller, d.r_current, d.target,
            "" if p is None else repr(p.total_cost),
            "" if p is None else repr(p.energy_term),
            "" if p is None else repr(p.change_penalty_term),
            "" if p is None else int(p.feasible),
            "" if p is None else int(p.fallback_used),
            "" if p is None else "|".join(str(r) for r in p.sequence),
        ])
    return buf.getvalue()


def parse_decisions_csv(text: str) -> list[dict[str, Any]]:
    rows = []
    for row in csv.DictReader(io.StringIO(text)):
        rows.append({
            "t": float(row["t"]),
            "controller": row["controller"],
            "r_current": int(row["r_current"]),
            "action": int(row["action"]),
            "cost": float(row["cost"]) if row["cost"] else None,
            "feasible": bool(int(row["feasible"])) if row["feasible"] else None,
            "fallback": bool(int(row["fallback"])) if row["fallback"] else None,
            "plan": tuple(int(r) for r in row["plan"].split("|")) if row.get("plan") else None,
        })
    return rows


def derive_report(telemetry_csv: str, decisions_csv: str, slo_p95: float) -> dict[str, Any]:
    """Every report field, computed from the two exported CSV documents."""
    samples = parse_telemetry_csv(telemetry_csv)
    decisions = parse_decisions_csv(decisions_csv)
    t = np.array([s.t for s in samples])
    p95 = {s.t: s.p95_latency for s in samples}
    epochs = [d["t"] for d in decisions]
    violated = sum(1 for e in epochs if p95[e] > slo_p95)
    sample_violations = sum(1 for s in samples if s.p95_latency > slo_p95)
    return {
        "controller": decisions[0]["controller"] if decisions else "none",
        "sample_count": len(samples),
        "duration_s": float(t[-1] - t[0]) if len(t) else 0.0,
        "total_energy_wh": {tier: integrate_wh(t, [s.tier_power(tier) for s in samples])
                            for tier in TIERS},
        "avg_replicas": float(np.mean([s.replicas_serving for s in samples])),
        "avg_cpu_per_pod": float(np.mean([s.cpuload for s in samples])),
        "p95_latency_timeline": [[s.t, s.p95_latency] for s in samples],
        "max_p95_ms": max(s.p95_latency for s in samples),
        "slo_p95_ms": slo_p95,
        "slo_violation_fraction": violated / len(epochs) if epochs else 0.0,
        "slo_violation_fraction_samples": sample_violations / len(samples),
        "decision_count": len(decisions),
        "replica_change_count": sum(1 for d in decisions if d["action"] != d["r_current"]),
        "fallback_count": sum(1 for d in decisions if d["fallback"]),
        "workload_hash": trace_hash([s.load for s in samples]),
    }


def _make_controller(spec: ScenarioSpec, model: SurrogateModel | None,
                     warm_history: Sequence[tuple[float, float]] | None):
    cfg = spec.cfg
    if spec.controller == "none":
        return FixedScaler(r_fixed=spec.r_fixed, schedule=spec.profile_sweep,
                           level_period=spec.workload.period, sync_period=cfg.cool_down)
    if spec.controller == "hpa":
        state = HpaState(target_cpu=spec.hpa_target_cpu, tolerance=spec.hpa_tolerance,
                         stabilization_window=spec.hpa_stabilization_window)
        return HpaScaler(state, bounds=(cfg.r_min, cfg.r_max), sync_period=cfg.cool_down)
    if model is None:
        raise MissingSurrogate("the mpc controller needs a fitted surrogate model")
    capacity = max(4096, int(math.ceil(2 * cfg.seasonal_period / spec.plant.sample_interval)) + 1)
    history = LoadHistory(capacity=capacity, items=warm_history or ())
    workload = spec.workload
    truth = lambda t: arrival_rate_at(workload, min(max(t, 0.0), workload.duration))
    return MPCScaler(model, cfg, history=history, truth=truth)


def simulate(spec: ScenarioSpec, model: SurrogateModel | None = None,
             warm_history: Sequence[tuple[float, float]] | None = None) -> RunResult:
    """Run one closed-loop scenario in virtual time.

    Samples are taken at ``t = 0, dt, ..., duration - dt``. At each tick the
    controller sees the current sample, possibly acts, then the plant
    advances one interval.
    """
    dt = spec.plant.sample_interval
    n = spec.n_samples
    controller = _make_controller(spec, model, warm_history)
    initial = spec.r_fixed if spec.controller == "none" else spec.cfg.r_min
    if spec.controller == "none" and spec.profile_sweep:
        initial = spec.profile_sweep[0]
    plant = Plant(spec.plant, replicas=initial)
    loads = [arrival_rate_at(spec.workload, i * dt) for i in range(n)]

    sample = plant.observe(loads[0])
    samples = [sample]
    decisions: list[Decision] = []
    for i in range(n):
        now = i * dt
        controller.observe(now, loads[i])
        r_current = plant.state.replicas_desired
        decision = controller.decide(now, r_current, sample)
        target = r_current
        if decision is not None:
            decisions.append(decision)
            target = decision.target
        if i + 1 < n:
            sample = plant.step(target, loads[i + 1], dt)
            samples.append(sample)

    telemetry_csv = format_telemetry_csv(samples)
    decisions_csv = format_decisions_csv(decisions)
    report = derive_report(telemetry_csv, decisions_csv, spec.cfg.slo_p95)
    report["controller"] = spec.controller
    return RunResult(spec, samples, decisions, telemetry_csv, decisions_csv, report)


def default_phase1_spec(hours: float = 4.0, sweep: bool = True, **overrides) -> ScenarioSpec:
    """Profiling run: fixed replicas under the periodic workload.

    With ``sweep`` the replica level steps through ``R_MIN..R_MAX``, one
    level per load period, so the fit sees several replica counts.
    """
    cfg = overrides.pop("cfg", ControllerConfig())
    sweep_levels = tuple(range(cfg.r_min, cfg.r_max + 1)) if sweep else ()
    return ScenarioSpec(controller="none", cfg=cfg, duration=hours * 3600.0,
                        profile_sweep=sweep_levels, **overrides)


def run_phase1(spec: ScenarioSpec) -> RunResult:
    if spec.controller != "none":
        raise InvalidScenario("phase 1 runs without autoscaling (controller='none')")
    return simulate(spec)


def warm_history_from(samples: Sequence[TelemetrySample], seasonal_period: float,
                      sample_interval: float) -> list[tuple[float, float]]:
    """Last seasonal period of a recorded load trace, re-timed to end one
    sample before ``t=0``. Phase alignment holds when the recording length is
    a whole number of periods."""
    n = int(round(seasonal_period / sample_interval))
    tail = list(samples)[-n:]
    return [(-(len(tail) - i) * sample_interval, s.load) for i, s in enumerate(tail)]


def run_scenario(spec: ScenarioSpec, model: SurrogateModel | None = None,
                 phase1_samples: Sequence[TelemetrySample] | None = None,
                 warm_history: Sequence[tuple[float, float]] | None = None) -> RunResult:
    """Closed-loop run of phase 2 (``hpa``) or 3 (``mpc``), or a fixed policy.

    For ``mpc`` the surrogate is ``model`` or, failing that, fit from
    ``phase1_samples``; the phase-1 trace also seeds the forecaster history.
    """
    if spec.controller == "mpc":
        if model is None and phase1_samples is not None:
            model = fit_surrogate(phase1_samples)
        if model is None:
            raise MissingSurrogate("mpc needs a surrogate model or a phase-1 dataset")
        if warm_history is None and phase1_samples is not None:
            warm_history = warm_history_from(phase1_samples, spec.cfg.seasonal_period,
                                             spec.plant.sample_interval)
    return simulate(spec, model=model, warm_history=warm_history)


def compare(hpa: Mapping[str, Any], mpc: Mapping[str, Any],
            slo_fraction_max: float = SLO_FRACTION_MAX) -> dict[str, Any]:
    """Ratios, SLO verdicts and directional pass/fail lines for two reports."""
    if hpa.get("workload_hash") != mpc.get("workload_hash"):
        raise MismatchedScenario("reports were produced from different workloads")
    e_h = hpa["total_energy_wh"]["containers"]
    e_m = mpc["total_energy_wh"]["containers"]
    ratio = e_h / e_m if e_m else math.inf

    def ratio_of(key):
        return hpa[key] / mpc[key] if mpc[key] else (1.0 if hpa[key] == mpc[key] else math.inf)

    def verdict(report):
        return "PASS-SLO" if report["slo_violation_fraction"] <= slo_fraction_max else "FAIL-SLO"

    checks = [
        ("energy: mpc <= 0.85 x hpa (containers)", e_m <= ENERGY_FRACTION_MAX * e_h),
        (f"energy ratio within +/-15% of {REFERENCE_ENERGY_RATIO:.4f}",
         abs(ratio / REFERENCE_ENERGY_RATIO - 1.0) <= RATIO_TOLERANCE),
        ("mpc maintains P95 SLO", verdict(mpc) == "PASS-SLO"),
        ("mpc avg replicas < hpa avg replicas", mpc["avg_replicas"] < hpa["avg_replicas"]),
    ]
    return {
        "energy_ratio_hpa_over_mpc": {tier: ratio_of_tier(hpa, mpc, tier) for tier in TIERS},
        "energy_increase_hpa_vs_mpc_pct": (ratio - 1.0) * 100.0,
        "energy_reduction_mpc_vs_hpa_pct": (1.0 - e_m / e_h) * 100.0 if e_h else 0.0,
        "avg_replicas_ratio": ratio_of("avg_replicas"),
        "avg_cpu_ratio": ratio_of("avg_cpu_per_pod"),
        "hpa": _headline(hpa, verdict(hpa)),
        "mpc": _headline(mpc, verdict(mpc)),
        "reference_result": {"hpa_wh": REFERENCE_HPA_WH, "mpc_wh": REFERENCE_MPC_WH,
                            "ratio": REFERENCE_ENERGY_RATIO},
        "checks": [{"name": name, "passed": bool(ok)} for name, ok in checks],
    }


def ratio_of_tier(hpa, mpc, tier):
    a, b = hpa["total_energy_wh"][tier], mpc["total_energy_wh"][tier]
    return a / b if b else (1.0 if a == b else math.inf)


def _headline(report, verdict):
    return {
        "energy_wh": report["total_energy_wh"],
        "avg_replicas": report["avg_replicas"],
        "avg_cpu_per_pod": report["avg_cpu_per_pod"],
        "slo_violation_fraction": report["slo_violation_fraction"],
        "slo_verdict": verdict,
        "replica_change_count": report["replica_change_count"],
    }


def comparison_lines(summary: Mapping[str, Any]) -> list[str]:
    return [f"{'PASS' if c['passed'] else 'FAIL'}  {c['name']}" for c in summary["checks"]]


@dataclass
class Reproduction:
    phase1: RunResult
    model: SurrogateModel
    hpa: RunResult
    mpc: RunResult
    summary: dict[str, Any]


def reproduce(hpa_spec: ScenarioSpec | None = None, mpc_spec: ScenarioSpec | None = None,
              phase1_spec: ScenarioSpec | None = None) -> Reproduction:
    """Phase 1, surrogate fit, HPA run, MPC run and the comparison."""
    mpc_spec = mpc_spec or ScenarioSpec(controller="mpc")
    hpa_spec = hpa_spec or dataclasses.replace(mpc_spec, controller="hpa")
    phase1_spec = phase1_spec or default_phase1_spec(
        cfg=mpc_spec.cfg, plant=dataclasses.replace(mpc_spec.plant),
        workload=mpc_spec.workload, seed=mpc_spec.seed)
    phase1 = run_phase1(phase1_spec)
    model = fit_surrogate(phase1.samples)
    hpa = run_scenario(hpa_spec)
    mpc = run_scenario(mpc_spec, model=model, phase1_samples=phase1.samples)
    summary = compare(hpa.report, mpc.report)
    return Reproduction(phase1, model, hpa, mpc, summary)


# -- scenario files ---------------------------------------------------------

_WORKLOAD_KEYS = {
    "SHAPE": ("shape", str), "VU_MIN": ("vu_min", float), "VU_MAX": ("vu_max", float),
    "PERIOD": ("period", float), "REQUESTS_PER_VU": ("requests_per_vu", float),
    "NOISE_AMPLITUDE": ("noise_amplitude", float), "NOISE_GRID": ("noise_grid", float),
    "TRACE_PATH": ("trace_path", str),
}
_PLANT_KEYS = {f.name.upper(): (f.name, f.type) for f in dataclasses.fields(PlantParams)}
_SCENARIO_KEYS = {
    "CONTROLLER": ("controller", str), "DURATION": ("duration", float), "SEED": ("seed", int),
    "R_FIXED": ("r_fixed", int), "PROFILE_SWEEP": ("profile_sweep", "levels"),
    "HPA_TARGET_CPU": ("hpa_target_cpu", float), "HPA_TOLERANCE": ("hpa_tolerance", float),
    "HPA_STABILIZATION_WINDOW": ("hpa_stabilization_window", float),
}


def _coerce(key: str, kind, raw: str):
    try:
        if kind in (int, "int"):
            return int(float(raw))
        if kind in (float, "float"):
            return float(raw)
        if kind == "levels":
            return tuple(int(x) for x in raw.replace(",", " ").split()) if raw.strip() else ()
        return raw
    except ValueError:
        raise InvalidValue(key, f"cannot parse {raw!r}") from None


def _section(values: Mapping[str, str], keys: Mapping[str, tuple[str, Any]], section: str) -> dict:
    out = {}
    for key, raw in values.items():
        if key not in keys:
            raise UnknownKey(key, f"not a [{section}] key")
        name, kind = keys[key]
        out[name] = _coerce(key, kind, raw)
    return out


def scenario_from_text(text: str, overrides: Mapping[str, str] | None = None,
                       base_dir: str | Path | None = None) -> ScenarioSpec:
    """Build a :class:`ScenarioSpec` from key-value text.

    Top-level keys and ``[controller]`` are controller config; ``[scenario]``,
    ``[workload]`` and ``[plant]`` fill the rest. ``overrides`` use
    ``KEY`` (controller) or ``section.KEY``.
    """
    doc = parse_kv_text(text)
    unknown = set(doc) - {"", "controller", "scenario", "workload", "plant"}
    if unknown:
        raise UnknownKey(sorted(unknown)[0], "unknown section")
    controller = {**doc.get("", {}), **doc.get("controller", {})}
    scenario = dict(doc.get("scenario", {}))
    workload = dict(doc.get("workload", {}))
    plant = dict(doc.get("plant", {}))
    targets = {"controller": controller, "scenario": scenario, "workload": workload, "plant": plant}
    for key, value in (overrides or {}).items():
        section, _, name = key.rpartition(".")
        targets[section.lower() or "controller"][name.upper()] = value
    cfg = load_config(controller)
    wl = _section(workload, _WORKLOAD_KEYS, "workload")
    if wl.get("trace_path") and base_dir is not None and not Path(wl["trace_path"]).is_absolute():
        wl["trace_path"] = str(Path(base_dir) / wl["trace_path"])
    params = _section(plant, _PLANT_KEYS, "plant")
    kwargs = _section(scenario, _SCENARIO_KEYS, "scenario")
    duration = kwargs.get("duration", 3600.0)
    profile = WorkloadProfile(duration=duration, **wl)
    return ScenarioSpec(workload=profile, plant=PlantParams(**params), cfg=cfg, **kwargs)


def scenario_from_file(path: str | Path, overrides: Mapping[str, str] | None = None) -> ScenarioSpec:
    path = Path(path)
    return scenario_from_text(path.read_text(encoding="utf-8"), overrides, base_dir=path.parent)
