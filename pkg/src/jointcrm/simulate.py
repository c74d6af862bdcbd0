"""Monte Carlo replication engine and operating-characteristics aggregation.

Replications share latent patient profiles across every design in the plan
(common random numbers): the latent draw for (scenario, replication, patient)
is fixed by the master seed, and each design realizes outcomes against its
own dose labels. Results are reduced in replication order, so a plan's output
is byte-identical for any worker count.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field
from multiprocessing import get_context
from typing import Sequence

import numpy as np

from .engine import DesignSpec, run_trial
from .optimize import OptimizerSpec
from .profiles import (
    GenerationParams,
    ProfileRealizer,
    Scenario,
    draw_latent,
    profile_stream_index,
)
from .numerics import RngStream

STOPPED = -1
NO_RECOMMENDATION = -2

WORKERS_ENV = "JOINTCRM_WORKERS"


@dataclass(frozen=True)
class SimPlan:
    name: str
    scenarios: tuple[Scenario, ...]
    designs: tuple[DesignSpec, ...]
    gen_variants: tuple[GenerationParams, ...]
    replications: int
    master_seed: int = 0
    fit_spec: OptimizerSpec = OptimizerSpec()

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        names = [d.name for d in self.designs]
        if len(set(names)) != len(names):
            raise ValueError("design names must be unique")


@dataclass(frozen=True)
class OperatingCharacteristics:
    """Aggregated metrics for one (scenario, design, generation) cell.

    Selection proportions are over all replications (stopped trials select
    nothing), so selection_distribution plus early_stop_rate sums to one.
    pcs_completed conditions on trials that ran to completion — the scale the
    published summary tables use, which only differs where stopping occurs.
    Separation and equal-probability rates are over completed trials; the
    mean initial-stage cohort count averages every trial, counting a stopped
    trial's cohorts up to its stop.
    """

    pcs: float
    pcs_completed: float
    separation_rate: float
    equal_prob_rate: float
    early_stop_rate: float
    mean_initial_cohorts: float
    selection_distribution: tuple[float, ...]
    n_replications: int

    def as_dict(self) -> dict:
        return {
            "pcs": self.pcs,
            "pcs_completed": self.pcs_completed,
            "separation_rate": self.separation_rate,
            "equal_prob_rate": self.equal_prob_rate,
            "early_stop_rate": self.early_stop_rate,
            "mean_initial_cohorts": self.mean_initial_cohorts,
            "selection_distribution": list(self.selection_distribution),
            "n_replications": self.n_replications,
        }


@dataclass
class CellAccumulator:
    n_doses: int
    selections: list[int] = field(default_factory=list)
    separation: list[bool] = field(default_factory=list)
    equal_prob: list[bool] = field(default_factory=list)
    initial_cohorts: list[int] = field(default_factory=list)

    def add(self, selection: int, sep: bool, eq: bool, initial: int) -> None:
        self.selections.append(selection)
        self.initial_cohorts.append(initial)
        if selection != STOPPED:
            self.separation.append(sep)
            self.equal_prob.append(eq)

    def finalize(self, target_dose: int) -> OperatingCharacteristics:
        sel = np.asarray(self.selections)
        n = sel.size
        dist = tuple(float(np.mean(sel == j)) for j in range(self.n_doses))
        completed = max(len(self.separation), 1)
        correct = int(np.sum(sel == target_dose))
        return OperatingCharacteristics(
            pcs=dist[target_dose],
            pcs_completed=correct / completed,
            separation_rate=float(sum(self.separation)) / completed,
            equal_prob_rate=float(sum(self.equal_prob)) / completed,
            early_stop_rate=float(np.mean(sel == STOPPED)),
            mean_initial_cohorts=(
                float(np.mean(self.initial_cohorts)) if self.initial_cohorts else 0.0
            ),
            selection_distribution=dist,
            n_replications=int(n),
        )


@dataclass(frozen=True)
class PlanResult:
    plan_name: str
    table: dict  # (scenario, design, rho_b) -> OperatingCharacteristics
    selections: dict  # (scenario, design, rho_b) -> tuple of per-replication picks

    def oc(self, scenario: str, design: str, rho_b: float) -> OperatingCharacteristics:
        return self.table[(scenario, design, rho_b)]


def _replication_task(plan: SimPlan, scenario_idx: int, gen: GenerationParams, rep: int):
    """Run every design of one replication on shared latent profiles."""
    scenario = plan.scenarios[scenario_idx]
    max_patients = max(d.cohort_size * d.max_cohorts for d in plan.designs)
    latents = [
        draw_latent(
            gen,
            RngStream(plan.master_seed, profile_stream_index(scenario_idx, rep, i)),
        )
        for i in range(max_patients)
    ]
    out = []
    realizers: dict[tuple, ProfileRealizer] = {}
    for design in plan.designs:
        labels = design.dose_labels()
        key = labels.values
        if key not in realizers:
            realizers[key] = ProfileRealizer(scenario, gen, labels)
        realizer = realizers[key]
        profiles = (realizer.realize(lat) for lat in latents)
        record = run_trial(design, profiles, plan.fit_spec)
        if record.stopped:
            out.append((STOPPED, False, False, record.initial_cohorts))
        else:
            selection = (
                record.recommendation
                if record.recommendation is not None
                else NO_RECOMMENDATION
            )
            diag = record.final_fit.diagnostics if record.final_fit else None
            out.append(
                (
                    selection,
                    bool(diag.separation) if diag else False,
                    bool(diag.equal_probability) if diag else False,
                    record.initial_cohorts,
                )
            )
    return out


def _iter_tasks(plan: SimPlan):
    for scenario_idx in range(len(plan.scenarios)):
        for gen in plan.gen_variants:
            for rep in range(plan.replications):
                yield scenario_idx, gen, rep


def _task_wrapper(args):
    plan, scenario_idx, gen, rep = args
    return _replication_task(plan, scenario_idx, gen, rep)


def default_workers() -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return max(1, os.cpu_count() or 1)


def run_plan(plan: SimPlan, workers: int | None = None) -> PlanResult:
    """Execute the plan and aggregate operating characteristics per cell."""
    workers = workers or default_workers()
    n_doses = plan.designs[0].n_doses
    accumulators = {
        (scenario.name, design.name, gen.rho_b): CellAccumulator(n_doses)
        for scenario in plan.scenarios
        for design in plan.designs
        for gen in plan.gen_variants
    }

    tasks = list(_iter_tasks(plan))
    if workers == 1:
        results = (_replication_task(plan, s, g, r) for s, g, r in tasks)
    else:
        ctx = get_context("spawn")
        pool = ctx.Pool(workers)
        results = pool.imap(
            _task_wrapper, [(plan, s, g, r) for s, g, r in tasks], chunksize=8
        )

    try:
        for (scenario_idx, gen, _rep), per_design in zip(tasks, results):
            scenario = plan.scenarios[scenario_idx]
            for design, row in zip(plan.designs, per_design):
                accumulators[(scenario.name, design.name, gen.rho_b)].add(*row)
    finally:
        if workers != 1:
            pool.close()
            pool.join()

    table = {}
    selections = {}
    for scenario in plan.scenarios:
        for design in plan.designs:
            for gen in plan.gen_variants:
                key = (scenario.name, design.name, gen.rho_b)
                table[key] = accumulators[key].finalize(scenario.target_dose)
                selections[key] = tuple(accumulators[key].selections)
    return PlanResult(plan_name=plan.name, table=table, selections=selections)


class KeyMismatch(KeyError):
    """Result tables to compare do not share (scenario, rho_b) keys."""


def compare_methods(result: PlanResult, design_a: str, design_b: str) -> dict:
    """Paired PCS differences (a minus b) per (scenario, rho_b) key.

    Valid because both designs ran on common random numbers within the plan.
    """
    keys_a = {(s, r) for (s, d, r) in result.table if d == design_a}
    keys_b = {(s, r) for (s, d, r) in result.table if d == design_b}
    if not keys_a or keys_a != keys_b:
        raise KeyMismatch(
            f"designs {design_a!r} and {design_b!r} do not share scenario keys"
        )
    deltas = {}
    for s, r in sorted(keys_a):
        deltas[(s, r)] = (
            result.table[(s, design_a, r)].pcs - result.table[(s, design_b, r)].pcs
        )
    return deltas


def geometric_mean(values: Sequence[float]) -> float:
    if any(v <= 0.0 for v in values):
        return 0.0
    return math.exp(sum(math.log(v) for v in values) / len(values))


# --- emission ---------------------------------------------------------------


def write_oc_csv(path, result: PlanResult) -> None:
    keys = sorted(result.table)
    n_doses = len(next(iter(result.table.values())).selection_distribution)
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(
            [
                "scenario",
                "design",
                "rho_b",
                "pcs",
                "pcs_completed",
                "separation_rate",
                "equal_prob_rate",
                "early_stop_rate",
                "mean_initial_cohorts",
            ]
            + [f"sel_d{j + 1}" for j in range(n_doses)]
            + ["n_replications"]
        )
        for key in keys:
            oc = result.table[key]
            writer.writerow(
                [
                    key[0],
                    key[1],
                    f"{key[2]:g}",
                    f"{oc.pcs:.6f}",
                    f"{oc.pcs_completed:.6f}",
                    f"{oc.separation_rate:.6f}",
                    f"{oc.equal_prob_rate:.6f}",
                    f"{oc.early_stop_rate:.6f}",
                    f"{oc.mean_initial_cohorts:.6f}",
                ]
                + [f"{v:.6f}" for v in oc.selection_distribution]
                + [oc.n_replications]
            )


def write_oc_json(path, result: PlanResult) -> None:
    nested: dict = {}
    for (scenario, design, rho_b), oc in sorted(result.table.items()):
        nested.setdefault(scenario, {}).setdefault(design, {})[
            f"{rho_b:g}"
        ] = oc.as_dict()
    with open(path, "w") as handle:
        json.dump({"plan": result.plan_name, "results": nested}, handle, indent=2)
        handle.write("\n")
