"""Command line entry point: ``greenscaler {phase1,fit,run,compare,report}``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path
from typing import Sequence

from .config import parse_kv_text
from .errors import GreenScalerError
from .harness import (ScenarioSpec, compare, comparison_lines, default_phase1_spec, derive_report,
                      dump_json, parse_telemetry_csv, reproduce, run_phase1, run_scenario,
                      scenario_from_file, scenario_from_text)
from .surrogate import SurrogateModel, fit_power_features, fit_surrogate


def _overrides(args: argparse.Namespace) -> dict[str, str]:
    out: dict[str, str] = {}
    if args.config:
        doc = parse_kv_text(Path(args.config).read_text(encoding="utf-8"))
        out.update(doc.get("", {}))
        out.update(doc.get("controller", {}))
    for item in args.set or ():
        if "=" not in item:
            raise SystemExit(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        out[key.strip()] = value.strip()
    if args.seed is not None:
        out["scenario.SEED"] = str(args.seed)
    if getattr(args, "controller", None):
        out["scenario.CONTROLLER"] = args.controller
    return out


def _scenario(args: argparse.Namespace) -> ScenarioSpec:
    overrides = _overrides(args)
    if args.scenario:
        return scenario_from_file(args.scenario, overrides)
    return scenario_from_text("", overrides)


def cmd_phase1(args) -> int:
    base = _scenario(args)
    hours = 48.0 if args.full else args.hours
    spec = default_phase1_spec(hours=hours, sweep=not args.single_replica, cfg=base.cfg,
                               plant=base.plant, workload=base.workload, seed=base.seed)
    result = run_phase1(spec)
    out = Path(args.out)
    paths = result.write(out, prefix="phase1_")
    print(f"phase1: {len(result.samples)} samples -> {paths['telemetry']}")
    return 0


def cmd_fit(args) -> int:
    samples = parse_telemetry_csv(Path(args.data).read_text(encoding="utf-8"))
    model = fit_surrogate(samples, tier=args.tier)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    model.save(out / "surrogate.json")
    features = fit_power_features(samples)
    (out / "power_features.json").write_text(dump_json(features.to_dict()), encoding="utf-8")
    print(f"fit: latency {model.latency_coeffs}, power {model.energy_coeffs} -> {out / 'surrogate.json'}")
    return 0


def cmd_run(args) -> int:
    spec = _scenario(args)
    model = SurrogateModel.load(args.model) if args.model else None
    phase1 = parse_telemetry_csv(Path(args.data).read_text(encoding="utf-8")) if args.data else None
    result = run_scenario(spec, model=model, phase1_samples=phase1)
    paths = result.write(args.out)
    rep = result.report
    print(f"run[{spec.controller}]: {rep['total_energy_wh']['containers']:.4f} Wh (containers), "
          f"avg replicas {rep['avg_replicas']:.3f}, SLO violations {rep['slo_violation_fraction']:.4f} "
          f"-> {paths['report']}")
    return 0


def cmd_compare(args) -> int:
    out = Path(args.out)
    if args.hpa and args.mpc:
        hpa = json.loads(Path(args.hpa).read_text(encoding="utf-8"))
        mpc = json.loads(Path(args.mpc).read_text(encoding="utf-8"))
        summary = compare(hpa, mpc)
    elif args.hpa or args.mpc:
        raise SystemExit("compare needs both --hpa and --mpc reports, or neither")
    else:
        spec = _scenario(args)
        mpc_spec = dataclasses.replace(spec, controller="mpc")
        rep = reproduce(mpc_spec=mpc_spec)
        rep.phase1.write(out / "phase1", prefix="phase1_")
        rep.model.save(_mkdir(out / "phase1") / "surrogate.json")
        rep.hpa.write(out / "hpa")
        rep.mpc.write(out / "mpc")
        summary = rep.summary
    _mkdir(out)
    (out / "comparison.json").write_text(dump_json(summary), encoding="utf-8")
    ratio = summary["energy_ratio_hpa_over_mpc"]["containers"]
    print(f"energy ratio hpa/mpc (containers): {ratio:.4f} "
          f"(+{summary['energy_increase_hpa_vs_mpc_pct']:.2f}% hpa vs mpc, "
          f"-{summary['energy_reduction_mpc_vs_hpa_pct']:.2f}% mpc vs hpa)")
    print(f"hpa {summary['hpa']['slo_verdict']}, mpc {summary['mpc']['slo_verdict']}")
    for line in comparison_lines(summary):
        print(line)
    return 0 if all(c["passed"] for c in summary["checks"]) else 1


def cmd_report(args) -> int:
    report = derive_report(Path(args.telemetry).read_text(encoding="utf-8"),
                           Path(args.decisions).read_text(encoding="utf-8"), args.slo)
    text = dump_json(report)
    if args.out:
        _mkdir(Path(args.out))
        (Path(args.out) / "report.json").write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def _mkdir(path: Path) -> Path:
    path.mkdir(parents=True, exist_ok=True)
    return path


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", type=Path, help="scenario file (KEY=VALUE with sections)")
    common.add_argument("--config", type=Path, help="controller config file (KEY=VALUE)")
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override one key; use section.KEY for scenario/workload/plant")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", type=Path, default=Path("out"))

    parser = argparse.ArgumentParser(prog="greenscaler", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phase1", parents=[common], help="collect the profiling dataset")
    p.add_argument("--hours", type=float, default=4.0)
    p.add_argument("--full", action="store_true", help="run the full 48 h profile")
    p.add_argument("--single-replica", action="store_true",
                   help="profile one replica only instead of sweeping R_MIN..R_MAX")
    p.set_defaults(handler=cmd_phase1)

    p = sub.add_parser("fit", parents=[common], help="fit the surrogate from phase-1 telemetry")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--tier", choices=("containers", "host", "pdu"), default="containers")
    p.set_defaults(handler=cmd_fit)

    p = sub.add_parser("run", parents=[common], help="closed-loop run of one controller")
    p.add_argument("--controller", choices=("none", "hpa", "mpc"))
    p.add_argument("--model", type=Path, help="surrogate.json (mpc)")
    p.add_argument("--data", type=Path, help="phase-1 telemetry: fit source and forecaster warm-up")
    p.set_defaults(handler=cmd_run)

    p = sub.add_parser("compare", parents=[common],
                       help="compare two reports, or run the whole pipeline when none are given")
    p.add_argument("--hpa", type=Path)
    p.add_argument("--mpc", type=Path)
    p.set_defaults(handler=cmd_compare)

    p = sub.add_parser("report", parents=[common], help="re-derive a report from exported CSVs")
    p.add_argument("--telemetry", type=Path, required=True)
    p.add_argument("--decisions", type=Path, required=True)
    p.add_argument("--slo", type=float, default=1200.0)
    p.set_defaults(handler=cmd_report, out=None)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except GreenScalerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
