"""Command-line entry points: simulate, calibrate, labels, replay, serve."""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import __version__
from .calibrate import calibrate, write_calibration_report
from .config import (
    ConfigError,
    config_hash,
    load_calibrate_config,
    load_simulate_config,
)
from .engine import replay_transcript
from .models import ModelKind, Skeleton, WorkingModel, backward_fit_labels
from .numerics import normal_cdf
from .simulate import SimPlan, run_plan, write_oc_csv, write_oc_json

EXIT_CONFIG = 2
EXIT_INVALID_PARAMS = 3


def _write_manifest(directory: Path, name: str, payload: dict) -> None:
    path = directory / f"manifest_{name}.json"
    with open(path, "w") as handle:
        json.dump(payload, handle, indent=2)
        handle.write("\n")


def cmd_simulate(args) -> int:
    try:
        config = load_simulate_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        gens = tuple(g.build() for g in config.generation)
    except ValueError as exc:
        print(f"invalid generation parameters: {exc}", file=sys.stderr)
        return EXIT_INVALID_PARAMS
    try:
        designs = tuple(d.build() for d in config.designs)
        scenarios = config.build_scenarios(designs[0].phi_t)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    outdir = Path(args.output or config.output_directory)
    outdir.mkdir(parents=True, exist_ok=True)
    plan = SimPlan(
        name=config.name,
        scenarios=scenarios,
        designs=designs,
        gen_variants=gens,
        replications=config.replications,
        master_seed=config.seed,
    )
    started = time.time()
    result = run_plan(plan, workers=args.workers)
    elapsed = time.time() - started
    csv_path = outdir / f"oc_{config.name}.csv"
    json_path = outdir / f"oc_{config.name}.json"
    write_oc_csv(csv_path, result)
    write_oc_json(json_path, result)
    _write_manifest(
        outdir,
        config.name,
        {
            "command": "simulate",
            "config_hash": config_hash(args.config),
            "seed": config.seed,
            "replications": config.replications,
            "version": __version__,
            "elapsed_seconds": round(elapsed, 3),
            "outputs": [csv_path.name, json_path.name],
        },
    )
    print(f"wrote {csv_path} and {json_path} in {elapsed:.1f}s")
    return 0


def cmd_calibrate(args) -> int:
    try:
        config = load_calibrate_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        gen = config.generation.build()
    except ValueError as exc:
        print(f"invalid generation parameters: {exc}", file=sys.stderr)
        return EXIT_INVALID_PARAMS
    try:
        design = config.design.build()
        grid = config.grid.build(design.skeleton)
        scenarios = config.build_scenarios(design.phi_t)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    outdir = Path(config.output_directory)
    outdir.mkdir(parents=True, exist_ok=True)
    started = time.time()
    result = calibrate(design, scenarios, gen, grid, seed=config.seed, workers=args.workers)
    elapsed = time.time() - started
    report_path = outdir / f"calibration_{config.name}.json"
    write_calibration_report(report_path, result)
    _write_manifest(
        outdir,
        config.name,
        {
            "command": "calibrate",
            "config_hash": config_hash(args.config),
            "seed": config.seed,
            "version": __version__,
            "elapsed_seconds": round(elapsed, 3),
            "outputs": [report_path.name],
        },
    )
    labels = ", ".join(f"{v:.4f}" for v in result.labels.values)
    print(f"calibrated labels: [{labels}]  objective {result.objective:.4f}")
    print(f"wrote {report_path} in {elapsed:.1f}s")
    return 0


def cmd_labels(args) -> int:
    try:
        skeleton = Skeleton(tuple(float(v) for v in args.skeleton.split(",")))
    except ValueError as exc:
        print(f"invalid skeleton: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    kind = args.model.lower()
    if kind == "empiric":
        model = WorkingModel.empiric()
    elif kind == "probit1":
        model = WorkingModel.probit1(args.a0)
    elif kind == "probit2":
        model = WorkingModel.probit2()
    else:
        print(f"unknown model {args.model!r}", file=sys.stderr)
        return EXIT_CONFIG
    labels = backward_fit_labels(skeleton, model)
    print(f"{'dose':>6} {'skeleton':>10} {'label':>10}")
    for j, (p, x) in enumerate(zip(skeleton.probs, labels.values), start=1):
        print(f"{'d' + str(j):>6} {p:>10.4f} {x:>10.4f}")
    if model.kind is ModelKind.PROBIT1:
        ref = float(normal_cdf(model.intercept))
        print(
            f"reference dose x*=0 fixes the curve at {ref:.3f}; labels are "
            f"quantile(skeleton) - {model.intercept:g}"
        )
    return 0


def cmd_replay(args) -> int:
    state = replay_transcript(args.transcript)
    print(f"{'cohort':>7} {'stage':>10} {'dose':>5} {'outcomes':>10} {'next':>5}")
    for c in state.cohorts:
        nxt = "-" if c.next_dose is None else f"d{c.next_dose + 1}"
        print(
            f"{c.cohort_index + 1:>7} {c.stage.value:>10} {'d' + str(c.dose + 1):>5} "
            f"{''.join(str(v) for v in c.outcomes):>10} {nxt:>5}"
        )
    if state.recommendation is not None:
        print(f"recommendation: d{state.recommendation + 1}")
    else:
        print(f"terminal stage: {state.stage.value}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(args.state, ui_directory=args.ui)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jointcrm",
        description="Dose-finding designs with joint toxicity/biomarker models",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run a Monte Carlo plan from a config file")
    p_sim.add_argument("config")
    p_sim.add_argument("--workers", type=int, default=None)
    p_sim.add_argument("--output", default=None)
    p_sim.set_defaults(func=cmd_simulate)

    p_cal = sub.add_parser("calibrate", help="grid-search dose-label calibration")
    p_cal.add_argument("config")
    p_cal.add_argument("--workers", type=int, default=None)
    p_cal.set_defaults(func=cmd_calibrate)

    p_lab = sub.add_parser("labels", help="print backward-fitted dose labels")
    p_lab.add_argument("--skeleton", required=True, help="comma-separated probabilities")
    p_lab.add_argument("--model", required=True, choices=["empiric", "probit1", "probit2"])
    p_lab.add_argument("--a0", type=float, default=3.0)
    p_lab.set_defaults(func=cmd_labels)

    p_rep = sub.add_parser("replay", help="replay a trial transcript")
    p_rep.add_argument("transcript")
    p_rep.set_defaults(func=cmd_replay)

    p_srv = sub.add_parser("serve", help="run the live-conduct HTTP service")
    p_srv.add_argument("--port", type=int, default=8710)
    p_srv.add_argument("--host", default="127.0.0.1")
    p_srv.add_argument("--state", required=True, help="writable state directory")
    p_srv.add_argument("--ui", default=None, help="serve this directory at /ui (e.g. frontend/)")
    p_srv.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
