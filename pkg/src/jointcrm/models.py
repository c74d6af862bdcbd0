"""Working dose-toxicity models, backward-fitted dose labels, target selection."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .numerics import normal_cdf, normal_quantile


class ModelKind(str, Enum):
    EMPIRIC = "empiric"
    PROBIT1 = "probit1"
    PROBIT2 = "probit2"


def safe_exp(value: float) -> float:
    """exp with saturation instead of overflow; divergent fitted slopes stay
    representable (the curve is already flat at 0/1 long before this bites)."""
    return math.exp(min(value, 700.0))


@dataclass(frozen=True)
class WorkingModel:
    """Dose-toxicity model family; `intercept` is the fixed a0 of the
    one-parameter probit and ignored by the other kinds."""

    kind: ModelKind
    intercept: float = 0.0

    @staticmethod
    def empiric() -> "WorkingModel":
        return WorkingModel(ModelKind.EMPIRIC)

    @staticmethod
    def probit1(a0: float = 3.0) -> "WorkingModel":
        return WorkingModel(ModelKind.PROBIT1, intercept=a0)

    @staticmethod
    def probit2() -> "WorkingModel":
        return WorkingModel(ModelKind.PROBIT2)


@dataclass(frozen=True)
class Skeleton:
    """Prior guesses of per-dose toxicity probabilities, strictly increasing."""

    probs: tuple[float, ...]

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 1 or p.size < 1:
            raise ValueError("skeleton must be a non-empty vector")
        if np.any(p <= 0.0) or np.any(p >= 1.0):
            raise ValueError("skeleton probabilities must lie in (0, 1)")
        if np.any(np.diff(p) <= 0.0):
            raise ValueError("skeleton probabilities must be strictly increasing")
        object.__setattr__(self, "probs", tuple(float(v) for v in p))

    def __len__(self) -> int:
        return len(self.probs)


DEFAULT_SKELETON = Skeleton((0.25, 0.35, 0.45, 0.55, 0.65))


@dataclass(frozen=True)
class DoseLabels:
    """Conceptual dose covariate values, strictly increasing."""

    values: tuple[float, ...]

    def __post_init__(self):
        x = np.asarray(self.values, dtype=float)
        if np.any(~np.isfinite(x)):
            raise ValueError("dose labels must be finite")
        if np.any(np.diff(x) <= 0.0):
            raise ValueError("dose labels must be strictly increasing")
        object.__setattr__(self, "values", tuple(float(v) for v in x))

    def __len__(self) -> int:
        return len(self.values)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)


@dataclass(frozen=True)
class ToxicityParams:
    """Intercept and log-scale slope; the effective slope is exp(slope_log),
    which keeps every fitted curve nondecreasing in the dose label."""

    intercept: float = 0.0  # absent (0, unused) for empiric/probit1
    slope_log: float = 0.0


def backward_fit_labels(skeleton: Skeleton, model: WorkingModel) -> DoseLabels:
    """Solve the working model at its initial parameter guess so that each
    label reproduces the skeleton probability exactly."""
    p = np.asarray(skeleton.probs, dtype=float)
    if model.kind is ModelKind.EMPIRIC:
        values = p
    elif model.kind is ModelKind.PROBIT1:
        values = normal_quantile(p) - model.intercept
    elif model.kind is ModelKind.PROBIT2:
        values = normal_quantile(p)
    else:  # pragma: no cover
        raise ValueError(f"unknown model kind {model.kind}")
    return DoseLabels(tuple(float(v) for v in np.atleast_1d(values)))


def toxicity_prob(model: WorkingModel, params: ToxicityParams, label):
    """Toxicity probability at a dose label (scalar or array)."""
    slope = safe_exp(params.slope_log)
    x = np.asarray(label, dtype=float)
    if model.kind is ModelKind.EMPIRIC:
        out = np.power(x, slope)
    elif model.kind is ModelKind.PROBIT1:
        out = normal_cdf(model.intercept + slope * x)
    else:
        out = normal_cdf(params.intercept + slope * x)
    return float(out) if np.isscalar(label) else out


def select_target(curve, phi_t: float) -> int:
    """Index of the dose whose estimated toxicity is closest to the target.

    Equidistant candidates resolve to the lower dose index.
    """
    curve = np.asarray(curve, dtype=float)
    return int(np.argmin(np.abs(curve - phi_t)))
