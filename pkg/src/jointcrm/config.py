"""Declarative run configuration: TOML or JSON documents, strictly validated."""

from __future__ import annotations

import hashlib
import json
import sys
from pathlib import Path

from pydantic import BaseModel, ConfigDict, Field, field_validator

from .calibrate import CalibrationGrid, probit_shift_stretch_grid
from .engine import DesignSpec
from .models import DoseLabels, Skeleton
from .profiles import SCENARIOS, GenerationParams, Scenario

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(ValueError):
    """Configuration document failed validation."""


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ScenarioConfig(StrictModel):
    name: str
    tox_probs: list[float] | None = None

    def build(self, phi_t: float = 0.3) -> Scenario:
        if self.tox_probs is None:
            if self.name not in SCENARIOS:
                raise ConfigError(
                    f"unknown built-in scenario {self.name!r}; give tox_probs"
                )
            return SCENARIOS[self.name]
        return Scenario.from_probs(self.name, self.tox_probs, phi_t)


class DesignConfig(StrictModel):
    name: str
    method: str = "probit"
    skeleton: list[float] | None = None
    labels: list[float] | None = None
    phi_t: float = 0.3
    initial_rule: int = Field(default=1, ge=1)
    cohort_size: int = Field(default=3, ge=1)
    max_cohorts: int = Field(default=20, ge=1)
    a0: float = 3.0
    rho_time: float = 0.4

    def build(self) -> DesignSpec:
        kwargs = dict(
            name=self.name,
            method=self.method,
            phi_t=self.phi_t,
            initial_rule=self.initial_rule,
            cohort_size=self.cohort_size,
            max_cohorts=self.max_cohorts,
            a0=self.a0,
            rho_time=self.rho_time,
        )
        if self.skeleton is not None:
            kwargs["skeleton"] = Skeleton(tuple(self.skeleton))
        if self.labels is not None:
            kwargs["labels"] = DoseLabels(tuple(self.labels))
        try:
            return DesignSpec(**kwargs)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


class GenerationConfig(StrictModel):
    rho_b: float = 0.0
    rho_c: float = 0.4
    sigma_c: float = 1.0
    intercept: float = 20.0
    dose_effect: float = -2.0
    time_effect: float = -1.0

    def build(self) -> GenerationParams:
        # GenerationParams itself raises on infeasible correlations; callers
        # map that to the dedicated exit code
        return GenerationParams(
            rho_b=self.rho_b,
            rho_c=self.rho_c,
            sigma_c=self.sigma_c,
            intercept=self.intercept,
            dose_effect=self.dose_effect,
            time_effect=self.time_effect,
        )


class GridRange(StrictModel):
    start: float
    stop: float
    step: float

    def values(self) -> list[float]:
        if self.step <= 0 or self.stop < self.start:
            raise ConfigError("grid range needs step > 0 and stop >= start")
        out = []
        v = self.start
        while v <= self.stop + 1e-9:
            out.append(round(v, 10))
            v += self.step
        return out


class GridConfig(StrictModel):
    offsets: GridRange | list[float] | None = None
    scales: GridRange | list[float] | None = None
    refinement_rounds: int = Field(default=2, ge=1)
    replications_per_cell: int = Field(default=100, ge=100)

    def build(self, skeleton: Skeleton) -> CalibrationGrid:
        offsets = self.offsets.values() if isinstance(self.offsets, GridRange) else self.offsets
        scales = self.scales.values() if isinstance(self.scales, GridRange) else self.scales
        return probit_shift_stretch_grid(
            skeleton,
            offsets=offsets,
            scales=scales,
            refinement_rounds=self.refinement_rounds,
            replications_per_cell=self.replications_per_cell,
        )


class SimulateConfig(StrictModel):
    name: str
    seed: int = 0
    replications: int = Field(default=1000, ge=1)
    output_directory: str = "."
    scenarios: list[ScenarioConfig] = Field(default_factory=list)
    designs: list[DesignConfig]
    generation: list[GenerationConfig] = Field(default_factory=lambda: [GenerationConfig()])

    @field_validator("designs")
    @classmethod
    def _at_least_one_design(cls, v):
        if not v:
            raise ValueError("at least one design is required")
        return v

    def build_scenarios(self, phi_t: float = 0.3) -> tuple[Scenario, ...]:
        if not self.scenarios:
            return tuple(SCENARIOS.values())
        return tuple(s.build(phi_t) for s in self.scenarios)


class CalibrateConfig(StrictModel):
    name: str
    seed: int = 0
    output_directory: str = "."
    design: DesignConfig
    generation: GenerationConfig = Field(default_factory=GenerationConfig)
    grid: GridConfig = Field(default_factory=GridConfig)
    scenarios: list[ScenarioConfig] = Field(default_factory=list)
    evaluation_replications: int = Field(default=1000, ge=1)

    def build_scenarios(self, phi_t: float = 0.3) -> tuple[Scenario, ...]:
        if not self.scenarios:
            return tuple(SCENARIOS.values())
        return tuple(s.build(phi_t) for s in self.scenarios)


def load_document(path: str | Path) -> dict:
    path = Path(path)
    raw = path.read_bytes()
    if path.suffix.lower() == ".toml":
        return tomllib.loads(raw.decode())
    if path.suffix.lower() == ".json":
        return json.loads(raw.decode())
    try:
        return tomllib.loads(raw.decode())
    except Exception:
        try:
            return json.loads(raw.decode())
        except Exception as exc:
            raise ConfigError(f"{path} is neither valid TOML nor JSON: {exc}") from exc


def config_hash(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()[:16]


def load_simulate_config(path: str | Path) -> SimulateConfig:
    try:
        return SimulateConfig.model_validate(load_document(path))
    except ConfigError:
        raise
    except Exception as exc:
        raise ConfigError(str(exc)) from exc


def load_calibrate_config(path: str | Path) -> CalibrateConfig:
    try:
        return CalibrateConfig.model_validate(load_document(path))
    except ConfigError:
        raise
    except Exception as exc:
        raise ConfigError(str(exc)) from exc
