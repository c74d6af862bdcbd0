"""Maximum-likelihood fitting of the dose-finding methods plus diagnostics.

Methods: "probit" (two-parameter), "probit1" (fixed intercept), "empiric"
(power), "joint2d" and "joint9d" (factorized joint models). Fits run on the
compiled kernels; diagnostics are functions of the fitted per-dose curve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Literal, Sequence

import numpy as np
from scipy import stats

from . import _kernels
from .joint import BiomarkerParams, JointParams, MarginalToxicity, conditional_to_marginal
from .models import DoseLabels, ToxicityParams, WorkingModel, safe_exp
from .numerics import RngStream, normal_quantile
from .optimize import OptimizerSpec

Method = Literal["probit", "probit1", "empiric", "joint2d", "joint9d"]

METHODS: tuple[str, ...] = ("probit", "probit1", "empiric", "joint2d", "joint9d")
JOINT_METHODS: tuple[str, ...] = ("joint2d", "joint9d")

# |linear predictor| beyond this at any investigated label marks a boundary
# estimate (the normal CDF saturates past ~1e-15 there).
BOUND_THRESHOLD = 8.0
FLAG_TOLERANCE = 1e-4


class SeparationClass(str, Enum):
    COMPLETE = "complete_separation"
    QUASI = "quasi_complete_separation"
    OVERLAP = "overlap"


def classify_separation(data: Sequence[tuple[float, int]]) -> SeparationClass:
    """Classify a binary dataset by whether a label threshold splits outcomes.

    A strict split (no shared boundary point) is complete separation; a split
    with ties only at the threshold is quasi-complete; anything else overlaps.
    Both orientations of the split are considered.
    """
    if len(data) == 0:
        raise ValueError("data must be non-empty")
    lab0 = [x for x, y in data if not y]
    lab1 = [x for x, y in data if y]
    if not lab0 or not lab1:
        return SeparationClass.COMPLETE
    hi0, lo0 = max(lab0), min(lab0)
    hi1, lo1 = max(lab1), min(lab1)
    if hi0 < lo1 or hi1 < lo0:
        return SeparationClass.COMPLETE
    if hi0 == lo1 or hi1 == lo0:
        return SeparationClass.QUASI
    return SeparationClass.OVERLAP


def early_stop_posterior(
    tox_count: int, total_count: int, phi_t: float, threshold: float = 0.95
) -> bool:
    """Stop for excessive toxicity at the lowest dose.

    Requires at least two observed toxicities, then checks
    P(p > phi_t) >= threshold under a uniform Beta(1, 1) prior.
    """
    if not 0 <= tox_count <= total_count:
        raise ValueError("need 0 <= tox_count <= total_count")
    if tox_count < 2:
        return False
    posterior_tail = stats.beta.sf(phi_t, 1 + tox_count, 1 + total_count - tox_count)
    return bool(posterior_tail >= threshold)


@dataclass
class TrialData:
    """Accumulated patient-level outcomes, in enrollment order."""

    dose_idx: list[int] = field(default_factory=list)
    y: list[int] = field(default_factory=list)
    biomarkers: list[np.ndarray] = field(default_factory=list)

    def add_cohort(self, dose_idx: int, y_b, y_c=None) -> None:
        for i, outcome in enumerate(y_b):
            self.dose_idx.append(int(dose_idx))
            self.y.append(int(outcome))
            if y_c is not None:
                self.biomarkers.append(np.asarray(y_c[i], dtype=float))

    def __len__(self) -> int:
        return len(self.y)

    @property
    def n_tox(self) -> int:
        return int(sum(self.y))

    @property
    def n_non_tox(self) -> int:
        return len(self.y) - self.n_tox

    def counts_at(self, dose_idx: int) -> tuple[int, int]:
        tox = sum(y for d, y in zip(self.dose_idx, self.y) if d == dose_idx)
        total = sum(1 for d in self.dose_idx if d == dose_idx)
        return int(tox), int(total)


@dataclass(frozen=True)
class DiagnosticFlags:
    separation: bool
    equal_probability: bool
    boundary_parameter: bool


@dataclass(frozen=True)
class FitResult:
    method: str
    params: object  # ToxicityParams or JointParams
    marginal: MarginalToxicity | None
    curve: np.ndarray
    converged: bool
    diagnostics: DiagnosticFlags
    loglik: float


def _diagnostics(curve: np.ndarray, eta: np.ndarray) -> DiagnosticFlags:
    sep = bool(np.any(np.minimum(curve, 1.0 - curve) <= FLAG_TOLERANCE))
    equal = bool(abs(curve[-1] - curve[0]) <= FLAG_TOLERANCE)
    boundary = bool(np.any(np.abs(eta) > BOUND_THRESHOLD))
    return DiagnosticFlags(sep, equal, boundary)


# iteration budgets by parameter count; restarts re-engage only for fits that
# stall in the interior (a non-converged boundary fit is already at the
# supremum direction of a separated likelihood, so restarting cannot help)
DEFAULT_MAX_ITER = {"probit": 150, "probit1": 120, "empiric": 120, "joint2d": 250, "joint9d": 350}


@lru_cache(maxsize=64)
def _jitter_rows(seed: int, count: int, dim: int, sd: float) -> np.ndarray:
    rows = np.zeros((max(count, 1), dim))[:count]
    for attempt in range(1, count + 1):
        rows[attempt - 1] = RngStream(seed, attempt).normal(0.0, sd, dim)
    return rows


def _method_spec(method: str, spec: OptimizerSpec | None) -> OptimizerSpec:
    if spec is not None:
        return spec
    return OptimizerSpec(max_iterations=DEFAULT_MAX_ITER[method])


def _run_kernel(kernel_name, start, x_mat, y, consts, spec, eta_fn=None):
    """One optimizer pass, then jittered restarts when an interior fit stalls."""
    kernel = _kernels.NLL_KERNELS[kernel_name]
    x_mat = np.ascontiguousarray(x_mat, dtype=float)
    y = np.asarray(y, dtype=float)
    consts = np.asarray(consts, dtype=float)
    start = np.asarray(start, dtype=float)
    empty = np.zeros((0, start.size))
    xopt, value, converged, _ = _kernels.minimize_core(
        kernel, start, x_mat, y, consts, spec.tolerance, spec.max_iterations, empty
    )
    if not converged and spec.restart_count > 0:
        at_boundary = (
            eta_fn is not None
            and float(np.max(np.abs(eta_fn(xopt)))) > BOUND_THRESHOLD
        )
        if not at_boundary:
            jitters = _jitter_rows(
                spec.jitter_seed, spec.restart_count, start.size, spec.jitter_sd
            )
            x2, v2, c2, _ = _kernels.minimize_core(
                kernel,
                start,
                x_mat,
                y,
                consts,
                spec.tolerance,
                spec.max_iterations,
                jitters,
                False,
            )
            if v2 < value or (v2 == value and c2):
                xopt, value, converged = x2, v2, c2
    return xopt, float(value), bool(converged)


def _probit_solution(x, y, spec, labels_arr):
    def eta_fn(p):
        return p[0] + safe_exp(p[1]) * labels_arr

    xopt, value, converged = _run_kernel(
        "probit2", np.zeros(2), x.reshape(-1, 1), y, np.zeros(1), spec, eta_fn
    )
    return xopt, value, converged


def _ols_biomarker_start(x, yc):
    """Least-squares start (intercept, dose, time slopes) for the weekly model."""
    n = x.shape[0]
    weeks = np.arange(1.0, 9.0)
    design = np.column_stack(
        [
            np.ones(n * 8),
            np.repeat(x, 8),
            np.tile(weeks, n),
        ]
    )
    response = yc.reshape(-1)
    coef, *_ = np.linalg.lstsq(design, response, rcond=None)
    resid = (response - design @ coef).reshape(n, 8)
    sigma = max(float(np.std(resid)), 0.2)
    flat = resid
    num = float(np.sum(flat[:, :-1] * flat[:, 1:]))
    den = float(np.sum(flat * flat))
    rho = num / den if den > 0 else 0.2
    rho = min(max(rho, 0.05), 0.9)
    return coef, sigma, rho


def fit(
    method: Method,
    model: WorkingModel,
    labels: DoseLabels,
    data: TrialData,
    spec: OptimizerSpec | None = None,
    rho_time: float = 0.4,
) -> FitResult:
    """Fit `method` to the accumulated data and evaluate the per-dose curve.

    `rho_time` is the design's assumed AR(1) correlation for the 9-dim joint
    method, whose parameter vector carries the association and sigma but not
    the serial correlation. Non-convergence is reported through the
    `converged` flag, never raised.
    """
    spec = _method_spec(method, spec)
    label_arr = labels.as_array()
    x = label_arr[np.asarray(data.dose_idx, dtype=int)]
    y = np.asarray(data.y, dtype=float)
    if x.size == 0:
        raise ValueError("cannot fit an empty dataset")

    if method == "probit":
        xopt, value, converged = _probit_solution(x, y, spec, label_arr)
        params = ToxicityParams(float(xopt[0]), float(xopt[1]))
        marginal = MarginalToxicity(params.intercept, safe_exp(params.slope_log))
        curve = marginal.prob(label_arr)
        eta = marginal.intercept + marginal.slope * label_arr
    elif method == "probit1":
        a0 = model.intercept
        xopt, value, converged = _run_kernel(
            "probit1",
            np.zeros(1),
            x.reshape(-1, 1),
            y,
            np.array([a0]),
            spec,
            lambda p: a0 + safe_exp(p[0]) * label_arr,
        )
        params = ToxicityParams(0.0, float(xopt[0]))
        marginal = MarginalToxicity(a0, safe_exp(params.slope_log))
        curve = marginal.prob(label_arr)
        eta = marginal.intercept + marginal.slope * label_arr
    elif method == "empiric":
        xopt, value, converged = _run_kernel(
            "empiric",
            np.zeros(1),
            x.reshape(-1, 1),
            y,
            np.zeros(1),
            spec,
            lambda p: normal_quantile(
                np.clip(label_arr ** safe_exp(p[0]), 1e-300, 1.0 - 1e-16)
            ),
        )
        params = ToxicityParams(0.0, float(xopt[0]))
        marginal = None
        curve = label_arr ** safe_exp(params.slope_log)
        eta = normal_quantile(np.clip(curve, 1e-300, 1.0 - 1e-16))
    elif method in JOINT_METHODS:
        if len(data.biomarkers) != x.size:
            raise ValueError("joint methods need biomarker values for every patient")
        tox_start, _, _ = _probit_solution(x, y, spec, label_arr)
        b_start = np.clip(tox_start, [-8.0, -4.0], [8.0, 4.0])
        if method == "joint2d":
            # final (week-8) value; rows may carry the full profile or just it
            yc8 = np.array([row[-1] for row in data.biomarkers], dtype=float)
            design = np.column_stack([np.ones(x.size), x])
            coef, *_ = np.linalg.lstsq(design, yc8, rcond=None)
            sigma0 = max(float(np.std(yc8 - design @ coef)), 0.2)
            start = np.array(
                [b_start[0], b_start[1], coef[0], coef[1], 0.0, math.log(sigma0)]
            )

            def eta2d(p):
                denom = math.sqrt(1.0 + (safe_exp(p[5]) * p[4]) ** 2)
                return (p[0] + safe_exp(p[1]) * label_arr) / denom

            xopt, value, converged = _run_kernel(
                "joint2d", start, np.column_stack([x, yc8]), y, np.zeros(1), spec, eta2d
            )
            bio = BiomarkerParams(
                intercept=float(xopt[2]),
                dose_effect=float(xopt[3]),
                time_effect=0.0,
                sigma=safe_exp(float(xopt[5])),
                rho_time=0.0,
            )
            params = JointParams(
                toxicity=ToxicityParams(float(xopt[0]), float(xopt[1])),
                biomarker=bio,
                association=float(xopt[4]),
            )
            marginal = conditional_to_marginal(params, "joint2d")
        else:
            yc = np.asarray(data.biomarkers, dtype=float)
            if yc.ndim != 2 or yc.shape[1] != 8:
                raise ValueError("joint9d needs all 8 biomarker values per patient")
            coef, sigma0, _ = _ols_biomarker_start(x, yc)
            start = np.array(
                [
                    b_start[0],
                    b_start[1],
                    coef[0],
                    coef[1],
                    coef[2],
                    math.atanh(0.1),
                    math.log(sigma0),
                ]
            )

            def eta9d(p):
                _, cond_var, ok = _kernels.joint9d_weights(
                    abs(math.tanh(p[5])), rho_time, safe_exp(p[6])
                )
                scale = math.sqrt(cond_var) if ok else 1.0
                return (p[0] + safe_exp(p[1]) * label_arr) * scale

            xopt, value, converged = _run_kernel(
                "joint9d_fixed_rc",
                start,
                np.column_stack([x, yc]),
                y,
                np.array([rho_time, 0.0]),
                spec,
                eta9d,
            )
            bio = BiomarkerParams(
                intercept=float(xopt[2]),
                dose_effect=float(xopt[3]),
                time_effect=float(xopt[4]),
                sigma=safe_exp(float(xopt[6])),
                rho_time=rho_time,
            )
            params = JointParams(
                toxicity=ToxicityParams(float(xopt[0]), float(xopt[1])),
                biomarker=bio,
                association=abs(math.tanh(float(xopt[5]))),
            )
            marginal = conditional_to_marginal(params, "joint9d")
        curve = marginal.prob(label_arr)
        eta = marginal.intercept + marginal.slope * label_arr
    else:
        raise ValueError(f"unknown method {method!r}")

    return FitResult(
        method=method,
        params=params,
        marginal=marginal,
        curve=np.asarray(curve, dtype=float),
        converged=converged,
        diagnostics=_diagnostics(np.asarray(curve, dtype=float), np.asarray(eta)),
        loglik=-value,
    )
