"""Live-conduct HTTP service: create a session, post cohort outcomes, read the
engine's recommendation. Recommendations come from the same engine step used
in batch simulation, so live and batch conduct are interchangeable."""

from __future__ import annotations

import json
import threading
import uuid
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.responses import PlainTextResponse
from pydantic import BaseModel, ConfigDict, Field

from .engine import (
    DesignSpec,
    Stage,
    TrialState,
    design_from_dict,
    design_to_dict,
    step,
    transcript_records,
)
from .models import DoseLabels, Skeleton


class DesignPayload(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str = "live-session"
    method: str = "probit"
    skeleton: list[float] = Field(default=[0.25, 0.35, 0.45, 0.55, 0.65])
    labels: list[float] | None = None
    phi_t: float = 0.3
    initial_rule: int = Field(default=1, ge=1)
    cohort_size: int = Field(default=3, ge=1)
    max_cohorts: int = Field(default=20, ge=1)
    a0: float = 3.0
    rho_time: float = 0.4

    def build(self) -> DesignSpec:
        return DesignSpec(
            name=self.name,
            method=self.method,
            skeleton=Skeleton(tuple(self.skeleton)),
            labels=DoseLabels(tuple(self.labels)) if self.labels else None,
            phi_t=self.phi_t,
            initial_rule=self.initial_rule,
            cohort_size=self.cohort_size,
            max_cohorts=self.max_cohorts,
            a0=self.a0,
            rho_time=self.rho_time,
        )


class CohortPayload(BaseModel):
    model_config = ConfigDict(extra="forbid")

    cohort_index: int = Field(ge=0)
    outcomes: list[int]
    biomarkers: list[list[float]] | None = None


class Session:
    def __init__(self, session_id: str, state: TrialState, path: Path):
        self.id = session_id
        self.state = state
        self.path = path
        self.lock = threading.Lock()

    def persist(self) -> None:
        with open(self.path, "w") as handle:
            handle.write(json.dumps({"design": design_to_dict(self.state.design)}) + "\n")
            for record in transcript_records(self.state):
                handle.write(json.dumps(record) + "\n")


def _stopping_view(state: TrialState) -> dict:
    from scipy import stats

    tox, total = state.data.counts_at(0)
    posterior = None
    if total > 0:
        posterior = float(
            stats.beta.sf(state.design.phi_t, 1 + tox, 1 + total - tox)
        )
    return {
        "stopped": state.stage is Stage.STOPPED_TOXIC,
        "rule": "P(p > phi_T) >= 0.95 with at least two toxicities at the lowest dose",
        "lowestDoseToxicities": tox,
        "lowestDosePatients": total,
        "posterior": posterior,
    }


def _session_view(session: Session) -> dict:
    state = session.state
    design = state.design
    fit = state.last_fit
    view = {
        "sessionId": session.id,
        "design": design_to_dict(design),
        "doseLabels": list(design.dose_labels().values),
        "stage": state.stage.value,
        "currentDose": state.current_dose,
        "nextCohortIndex": state.n_cohorts,
        "initialCohorts": state.initial_cohorts,
        "recommendation": state.recommendation,
        "finished": state.finished,
        "history": [
            {
                "cohortIndex": c.cohort_index,
                "stage": c.stage.value,
                "dose": c.dose,
                "outcomes": list(c.outcomes),
                "nextDose": c.next_dose,
            }
            for c in state.cohorts
        ],
        "curve": None,
        "flags": None,
        "stopping": _stopping_view(state),
    }
    if fit is not None:
        view["curve"] = [float(p) for p in fit.curve]
        view["flags"] = {
            "separation": fit.diagnostics.separation,
            "equalProbability": fit.diagnostics.equal_probability,
            "boundaryParameter": fit.diagnostics.boundary_parameter,
            "converged": fit.converged,
        }
    return view


def create_app(state_directory: str | Path, ui_directory: str | Path | None = None) -> FastAPI:
    state_dir = Path(state_directory)
    state_dir.mkdir(parents=True, exist_ok=True)
    app = FastAPI(title="jointcrm live conduct", version="0.1.0")
    if ui_directory is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=ui_directory, html=True), name="ui")
    sessions: dict[str, Session] = {}
    registry_lock = threading.Lock()

    def restore() -> None:
        for path in sorted(state_dir.glob("session_*.jsonl")):
            session_id = path.stem.removeprefix("session_")
            try:
                with open(path) as handle:
                    lines = [json.loads(line) for line in handle if line.strip()]
                state = TrialState(design=design_from_dict(lines[0]["design"]))
                for record in lines[1:]:
                    step(state, record["outcomes"], record.get("biomarkers"))
                sessions[session_id] = Session(session_id, state, path)
            except Exception:  # pragma: no cover - corrupted state files are skipped
                continue

    restore()

    def get_session(session_id: str) -> Session:
        session = sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail="unknown session")
        return session

    @app.post("/sessions", status_code=201)
    def create_session(payload: DesignPayload):
        try:
            design = payload.build()
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        session_id = uuid.uuid4().hex[:12]
        session = Session(
            session_id,
            TrialState(design=design),
            state_dir / f"session_{session_id}.jsonl",
        )
        with registry_lock:
            sessions[session_id] = session
        session.persist()
        return _session_view(session)

    @app.get("/sessions/{session_id}")
    def read_session(session_id: str):
        return _session_view(get_session(session_id))

    @app.post("/sessions/{session_id}/cohorts")
    def submit_cohort(session_id: str, payload: CohortPayload):
        session = get_session(session_id)
        if not session.lock.acquire(blocking=False):
            raise HTTPException(status_code=409, detail="cohort submission in progress")
        try:
            state = session.state
            design = state.design
            if state.finished:
                raise HTTPException(status_code=409, detail="trial already finished")
            if payload.cohort_index != state.n_cohorts:
                raise HTTPException(
                    status_code=409,
                    detail=f"expected cohort {state.n_cohorts}, got {payload.cohort_index}",
                )
            if len(payload.outcomes) != design.cohort_size:
                raise HTTPException(
                    status_code=422,
                    detail=f"expected {design.cohort_size} outcomes",
                )
            if any(v not in (0, 1) for v in payload.outcomes):
                raise HTTPException(status_code=422, detail="outcomes must be 0 or 1")
            biomarkers = payload.biomarkers
            if design.uses_biomarkers:
                need = 8 if design.method == "joint9d" else 1
                if biomarkers is None or len(biomarkers) != design.cohort_size:
                    raise HTTPException(
                        status_code=422,
                        detail="biomarker vectors required for every patient",
                    )
                for row in biomarkers:
                    if design.method == "joint9d" and len(row) != 8:
                        raise HTTPException(
                            status_code=422,
                            detail="joint9d requires 8 weekly biomarker values",
                        )
                    if design.method == "joint2d" and len(row) not in (1, 8):
                        raise HTTPException(
                            status_code=422,
                            detail="joint2d requires the week-8 value (or all 8)",
                        )
            else:
                biomarkers = None
            step(state, payload.outcomes, biomarkers)
            session.persist()
            view = _session_view(session)
            view["fitSummary"] = state.cohorts[-1].fit_summary
            view["nextDose"] = state.cohorts[-1].next_dose
            return view
        finally:
            session.lock.release()

    @app.get("/sessions/{session_id}/transcript", response_class=PlainTextResponse)
    def export_transcript(session_id: str):
        session = get_session(session_id)
        lines = [json.dumps({"design": design_to_dict(session.state.design)})]
        lines += [json.dumps(r) for r in transcript_records(session.state)]
        return "\n".join(lines) + "\n"

    return app
