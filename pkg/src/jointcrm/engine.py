"""Two-stage dose-finding state machine.

Stage 1 escalates by rule (escalate on zero toxicities, hold on one,
de-escalate on two or more, stopping test at the lowest dose) until the
heterogeneity gate is met; Stage 2 fits the chosen method after each cohort
and doses at the target subject to the no-skipping rule. The engine consumes
outcomes from any source, so batch simulation and live conduct share one
implementation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator, Sequence

from .fitting import FitResult, Method, TrialData, early_stop_posterior, fit
from .models import (
    DEFAULT_SKELETON,
    DoseLabels,
    Skeleton,
    WorkingModel,
    backward_fit_labels,
    select_target,
)
from .optimize import OptimizerSpec
from .profiles import PatientProfile


class Stage(str, Enum):
    INITIAL = "initial"
    MODELING = "modeling"
    STOPPED_TOXIC = "stopped_toxic"
    COMPLETED = "completed"


@dataclass(frozen=True)
class DesignSpec:
    """Declarative description of one trial design."""

    name: str
    method: Method = "probit"
    skeleton: Skeleton = DEFAULT_SKELETON
    phi_t: float = 0.3
    initial_rule: int = 1  # Initial-k: require >= k toxicities and >= k non-toxicities
    cohort_size: int = 3
    max_cohorts: int = 20
    a0: float = 3.0  # fixed intercept, used by the probit1 method only
    rho_time: float = 0.4  # assumed AR(1) correlation for the joint9d fit
    labels: DoseLabels | None = None  # overrides backward fitting when set

    def __post_init__(self):
        if self.method not in ("probit", "probit1", "empiric", "joint2d", "joint9d"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.initial_rule < 1:
            raise ValueError("initial_rule must be >= 1")
        if self.cohort_size < 1 or self.max_cohorts < 1:
            raise ValueError("cohort_size and max_cohorts must be positive")
        if not 0.0 < self.phi_t < 1.0:
            raise ValueError("phi_t must lie in (0, 1)")
        if self.labels is not None and len(self.labels) != len(self.skeleton):
            raise ValueError("labels must match the skeleton length")

    @property
    def n_doses(self) -> int:
        return len(self.skeleton)

    @property
    def model(self) -> WorkingModel:
        if self.method == "empiric":
            return WorkingModel.empiric()
        if self.method == "probit1":
            return WorkingModel.probit1(self.a0)
        return WorkingModel.probit2()

    def dose_labels(self) -> DoseLabels:
        return self.labels or backward_fit_labels(self.skeleton, self.model)

    @property
    def uses_biomarkers(self) -> bool:
        return self.method in ("joint2d", "joint9d")


@dataclass
class CohortRecord:
    cohort_index: int
    stage: Stage
    dose: int
    outcomes: tuple[int, ...]
    fit_summary: dict | None
    next_dose: int | None


@dataclass
class TrialState:
    """Mutable single-owner trial state; one instance per running trial."""

    design: DesignSpec
    stage: Stage = Stage.INITIAL
    current_dose: int = 0
    data: TrialData = field(default_factory=TrialData)
    cohorts: list[CohortRecord] = field(default_factory=list)
    initial_cohorts: int = 0
    last_fit: FitResult | None = None
    recommendation: int | None = None

    @property
    def n_cohorts(self) -> int:
        return len(self.cohorts)

    @property
    def highest_tried(self) -> int:
        # from the accumulated data, so the cohort being processed counts
        return max(self.data.dose_idx, default=0)

    @property
    def finished(self) -> bool:
        return self.stage in (Stage.STOPPED_TOXIC, Stage.COMPLETED)


def _gate_met(data: TrialData, k: int) -> bool:
    return data.n_tox >= k and data.n_non_tox >= k


def stage1_next(design: DesignSpec, state: TrialState, cohort_dlts: int):
    """Rule-based next action after a Stage-1 cohort.

    Returns "advance" when the heterogeneity gate is met, "stop" when the
    toxicity stopping rule fires at the lowest dose, or the next dose index.
    """
    if _gate_met(state.data, design.initial_rule):
        return "advance"
    dose = state.current_dose
    if cohort_dlts == 0:
        return min(dose + 1, design.n_doses - 1)
    if cohort_dlts == 1:
        return dose
    if dose == 0:
        tox, total = state.data.counts_at(0)
        if early_stop_posterior(tox, total, design.phi_t):
            return "stop"
        return 0
    return dose - 1


def stage2_next(design: DesignSpec, state: TrialState, fit_result: FitResult) -> int:
    """Model-guided next dose: the target, clamped by the no-skipping rule.

    A non-converged fit retains the previous dose.
    """
    if not fit_result.converged:
        return state.current_dose
    target = select_target(fit_result.curve, design.phi_t)
    return min(target, state.highest_tried + 1, design.n_doses - 1)


def _fit_summary(result: FitResult, target: int | None) -> dict:
    return {
        "curve": [round(float(p), 10) for p in result.curve],
        "converged": result.converged,
        "separation": result.diagnostics.separation,
        "equal_probability": result.diagnostics.equal_probability,
        "boundary_parameter": result.diagnostics.boundary_parameter,
        "target": None if target is None else int(target),
    }


def step(
    state: TrialState,
    y_b: Sequence[int],
    y_c: Sequence | None = None,
    fit_spec: OptimizerSpec | None = None,
) -> TrialState:
    """Record one cohort's outcomes at the current dose and advance the trial."""
    design = state.design
    if state.finished:
        raise RuntimeError("trial already finished")
    if len(y_b) != design.cohort_size:
        raise ValueError(f"expected {design.cohort_size} outcomes, got {len(y_b)}")
    if design.uses_biomarkers and y_c is None:
        raise ValueError(f"method {design.method} requires biomarker vectors")

    dose = state.current_dose
    state.data.add_cohort(dose, y_b, y_c)
    cohort_idx = state.n_cohorts
    cohort_dlts = int(sum(y_b))
    stage_at_entry = state.stage
    is_last = cohort_idx + 1 >= design.max_cohorts

    fit_summary = None
    next_dose: int | None = None

    if stage_at_entry == Stage.INITIAL:
        state.initial_cohorts += 1
        decision = stage1_next(design, state, cohort_dlts)
        if decision == "stop":
            state.stage = Stage.STOPPED_TOXIC
        elif decision == "advance":
            state.stage = Stage.MODELING
            result = fit(
                design.method,
                design.model,
                design.dose_labels(),
                state.data,
                fit_spec,
                rho_time=design.rho_time,
            )
            state.last_fit = result
            target = select_target(result.curve, design.phi_t)
            fit_summary = _fit_summary(result, target)
            if is_last:
                state.stage = Stage.COMPLETED
                state.recommendation = target
            else:
                next_dose = stage2_next(design, state, result)
                state.current_dose = next_dose
        else:
            if is_last:
                state.stage = Stage.COMPLETED
                # gate never met: fall back to the last rule-based dose
                state.recommendation = dose
            else:
                next_dose = int(decision)
                state.current_dose = next_dose
    else:
        result = fit(
            design.method,
            design.model,
            design.dose_labels(),
            state.data,
            fit_spec,
            rho_time=design.rho_time,
        )
        state.last_fit = result
        target = select_target(result.curve, design.phi_t)
        fit_summary = _fit_summary(result, target)
        if is_last:
            state.stage = Stage.COMPLETED
            state.recommendation = target
        else:
            next_dose = stage2_next(design, state, result)
            state.current_dose = next_dose

    state.cohorts.append(
        CohortRecord(
            cohort_index=cohort_idx,
            stage=stage_at_entry,
            dose=dose,
            outcomes=tuple(int(v) for v in y_b),
            fit_summary=fit_summary,
            next_dose=next_dose,
        )
    )
    return state


@dataclass(frozen=True)
class TrialRecord:
    design_name: str
    stopped: bool
    recommendation: int | None
    n_cohorts: int
    initial_cohorts: int
    final_fit: FitResult | None
    cohorts: tuple[CohortRecord, ...]

    @property
    def dose_path(self) -> tuple[int, ...]:
        return tuple(c.dose for c in self.cohorts)


def run_trial(
    design: DesignSpec,
    profiles: Iterable[PatientProfile],
    fit_spec: OptimizerSpec | None = None,
) -> TrialRecord:
    """Run one complete trial against a stream of complete-information profiles."""
    stream: Iterator[PatientProfile] = iter(profiles)
    state = TrialState(design=design)
    while not state.finished:
        cohort = [next(stream) for _ in range(design.cohort_size)]
        dose = state.current_dose
        y_b = [int(p.y_b[dose]) for p in cohort]
        y_c = [p.y_c[dose] for p in cohort]
        step(state, y_b, y_c, fit_spec)
    return TrialRecord(
        design_name=design.name,
        stopped=state.stage == Stage.STOPPED_TOXIC,
        recommendation=state.recommendation,
        n_cohorts=state.n_cohorts,
        initial_cohorts=state.initial_cohorts,
        final_fit=state.last_fit,
        cohorts=tuple(state.cohorts),
    )


# --- transcripts -----------------------------------------------------------


def transcript_records(state: TrialState) -> list[dict]:
    """JSON-ready per-cohort records (one line each in a transcript file)."""
    records = []
    for c in state.cohorts:
        biomarkers = None
        if state.design.uses_biomarkers or state.data.biomarkers:
            start = c.cohort_index * state.design.cohort_size
            rows = state.data.biomarkers[start : start + state.design.cohort_size]
            if rows:
                biomarkers = [[float(v) for v in row] for row in rows]
        records.append(
            {
                "cohortIndex": c.cohort_index,
                "stage": c.stage.value,
                "dose": c.dose,
                "outcomes": list(c.outcomes),
                "biomarkers": biomarkers,
                "fitSummary": c.fit_summary,
                "nextDose": c.next_dose,
            }
        )
    return records


def write_transcript(path, design: DesignSpec, state: TrialState) -> None:
    with open(path, "w") as handle:
        header = {"design": design_to_dict(design)}
        handle.write(json.dumps(header) + "\n")
        for record in transcript_records(state):
            handle.write(json.dumps(record) + "\n")


def replay_transcript(path, fit_spec: OptimizerSpec | None = None) -> TrialState:
    """Rebuild a trial by feeding a transcript's outcomes through the engine."""
    with open(path) as handle:
        lines = [json.loads(line) for line in handle if line.strip()]
    design = design_from_dict(lines[0]["design"])
    state = TrialState(design=design)
    for record in lines[1:]:
        if record["dose"] != state.current_dose:
            raise ValueError(
                f"transcript dose {record['dose']} diverges from engine dose "
                f"{state.current_dose} at cohort {record['cohortIndex']}"
            )
        step(state, record["outcomes"], record.get("biomarkers"), fit_spec)
    return state


def design_to_dict(design: DesignSpec) -> dict:
    out = {
        "name": design.name,
        "method": design.method,
        "skeleton": list(design.skeleton.probs),
        "phi_t": design.phi_t,
        "initial_rule": design.initial_rule,
        "cohort_size": design.cohort_size,
        "max_cohorts": design.max_cohorts,
        "a0": design.a0,
        "rho_time": design.rho_time,
    }
    if design.labels is not None:
        out["labels"] = list(design.labels.values)
    return out


def design_from_dict(payload: dict) -> DesignSpec:
    labels = payload.get("labels")
    return DesignSpec(
        name=payload["name"],
        method=payload.get("method", "probit"),
        skeleton=Skeleton(tuple(payload["skeleton"])),
        phi_t=float(payload.get("phi_t", 0.3)),
        initial_rule=int(payload.get("initial_rule", 1)),
        cohort_size=int(payload.get("cohort_size", 3)),
        max_cohorts=int(payload.get("max_cohorts", 20)),
        a0=float(payload.get("a0", 3.0)),
        rho_time=float(payload.get("rho_time", 0.4)),
        labels=DoseLabels(tuple(labels)) if labels else None,
    )
