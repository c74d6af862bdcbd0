"""Factorized joint likelihood for binary toxicity and AR(1) biomarker values.

The joint density factorizes into a marginal Gaussian model for the repeated
biomarker and a conditional probit for toxicity given the biomarker. Two
variants are supported: a bivariate one using the final (week-8) biomarker
value with a free association scalar tau, and a 9-dimensional one using all
eight weekly values, parameterized by the latent correlation magnitude rho_b
with sign convention "lower biomarker, higher toxicity risk".
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from .models import ToxicityParams, safe_exp
from .numerics import (
    NotPositiveDefinite,
    cholesky,
    condition_gaussian,
    log_normal_cdf,
    normal_cdf,
)

WEEKS = 8

Variant = Literal["joint2d", "joint9d"]


class InvalidAssociation(ValueError):
    """Association/correlation parameters imply an invalid joint covariance."""


@dataclass(frozen=True)
class BiomarkerParams:
    """Linear mean structure and AR(1) covariance of the weekly biomarker."""

    intercept: float  # mean at dose label 0, week 0
    dose_effect: float
    time_effect: float
    sigma: float
    rho_time: float

    def __post_init__(self):
        if self.sigma <= 0.0:
            raise ValueError("sigma must be positive")
        if not -1.0 < self.rho_time < 1.0:
            raise ValueError("rho_time must lie in (-1, 1)")

    def mean(self, label: float, week) -> np.ndarray:
        week = np.asarray(week, dtype=float)
        return self.intercept + self.dose_effect * float(label) + self.time_effect * week

    def mean_profile(self, label: float) -> np.ndarray:
        return self.mean(label, np.arange(1, WEEKS + 1))


@dataclass(frozen=True)
class JointParams:
    """Conditional-scale toxicity effects, biomarker model, and association.

    `association` is the free conditional regression weight tau for the
    bivariate variant, or the latent correlation magnitude rho_b in [0, 1)
    for the 9-dimensional variant.
    """

    toxicity: ToxicityParams
    biomarker: BiomarkerParams
    association: float


@dataclass(frozen=True)
class MarginalToxicity:
    """Marginal-scale probit effects; slope is on the natural (positive) scale."""

    intercept: float
    slope: float

    def prob(self, label):
        x = np.asarray(label, dtype=float)
        out = normal_cdf(self.intercept + self.slope * x)
        return float(out) if np.isscalar(label) else out


def tau_from_rho(rho_b: float, sigma_c: float) -> float:
    """Conditional regression weight implied by a latent correlation rho_b."""
    return rho_b / (sigma_c * math.sqrt(1.0 - rho_b**2))


def ar1_covariance(sigma_c: float, rho_c: float, t: int) -> np.ndarray:
    """t x t AR(1) covariance: entry (i, j) = rho_c^|i-j| * sigma_c^2."""
    if sigma_c <= 0.0:
        raise ValueError("sigma_c must be positive")
    if not -1.0 < rho_c < 1.0:
        raise ValueError("rho_c must lie in (-1, 1)")
    if t < 1:
        raise ValueError("t must be a positive integer")
    idx = np.arange(t)
    return sigma_c**2 * rho_c ** np.abs(idx[:, None] - idx[None, :])


def model_covariance(rho_b: float, rho_c: float, sigma_c: float) -> np.ndarray:
    """9x9 covariance of (Y_c1..Y_c8, Y_b*) on the model side.

    The latent toxicity coordinate has unit variance and cross-covariances
    -rho_b^k * sigma_c with the biomarker measured k weeks before week 8.
    """
    cov = np.empty((9, 9))
    cov[:WEEKS, :WEEKS] = ar1_covariance(sigma_c, rho_c, WEEKS)
    cross = -(rho_b ** np.arange(WEEKS, 0, -1)) * sigma_c
    cov[:WEEKS, WEEKS] = cross
    cov[WEEKS, :WEEKS] = cross
    cov[WEEKS, WEEKS] = 1.0
    return cov


def generation_correlation(rho_b: float, rho_c: float) -> np.ndarray:
    """9x9 correlation of the latent profile vector (8 biomarker coords + 1
    toxicity coord) used by the complete-information generator; cross terms
    are +rho_b^k."""
    corr = np.empty((9, 9))
    idx = np.arange(WEEKS)
    corr[:WEEKS, :WEEKS] = rho_c ** np.abs(idx[:, None] - idx[None, :])
    cross = rho_b ** np.arange(WEEKS, 0, -1)
    corr[:WEEKS, WEEKS] = cross
    corr[WEEKS, :WEEKS] = cross
    corr[WEEKS, WEEKS] = 1.0
    return corr


def joint9d_conditional(
    rho_b: float, rho_c: float, sigma_c: float
) -> tuple[np.ndarray, float]:
    """Conditioning weights on the centered biomarker vector and the
    conditional variance of the latent toxicity coordinate (Schur complement).

    Raises InvalidAssociation when the 9x9 covariance is not positive definite.
    """
    cov = model_covariance(rho_b, rho_c, sigma_c)
    try:
        cond = condition_gaussian(cov, WEEKS, range(WEEKS))
    except NotPositiveDefinite as exc:
        raise InvalidAssociation(str(exc)) from exc
    return cond.coefficients, cond.conditional_variance


def validate_params(rho_b: float, rho_c: float, sigma_c: float = 1.0):
    """Check that the latent 9-dim generation covariance is positive definite
    and the conditional toxicity variance is positive.

    Returns (valid, reason); reason is empty when valid.
    """
    if not 0.0 <= rho_b < 1.0:
        return False, f"rho_b={rho_b} outside [0, 1)"
    if not -1.0 < rho_c < 1.0:
        return False, f"rho_c={rho_c} outside (-1, 1)"
    if sigma_c <= 0.0:
        return False, f"sigma_c={sigma_c} not positive"
    try:
        cholesky(generation_correlation(rho_b, rho_c))
        _, cond_var = joint9d_conditional(rho_b, rho_c, sigma_c)
    except (NotPositiveDefinite, InvalidAssociation) as exc:
        return False, f"9-dim covariance not positive definite ({exc})"
    if cond_var <= 0.0:
        return False, f"conditional variance {cond_var:.3e} not positive"
    return True, ""


def _conditional_eta_2d(params: JointParams, y_c: float, label: float) -> float:
    tox = params.toxicity
    mu_b = tox.intercept + safe_exp(tox.slope_log) * label
    mu_c = float(params.biomarker.mean(label, WEEKS))
    return mu_b + params.association * (y_c - mu_c)


def conditional_probit_2d(params: JointParams, y_c: float, label: float) -> float:
    """P(toxicity | week-8 biomarker value) under the bivariate variant."""
    return float(normal_cdf(_conditional_eta_2d(params, y_c, label)))


def _conditional_eta_9d(params: JointParams, y_c: np.ndarray, label: float) -> float:
    y_c = np.asarray(y_c, dtype=float)
    if y_c.shape != (WEEKS,):
        raise ValueError(f"expected {WEEKS} biomarker values, got shape {y_c.shape}")
    bio = params.biomarker
    weights, cond_var = joint9d_conditional(params.association, bio.rho_time, bio.sigma)
    tox = params.toxicity
    mu_b = tox.intercept + safe_exp(tox.slope_log) * label
    resid = y_c - bio.mean_profile(label)
    return mu_b + float(weights @ resid) / math.sqrt(cond_var)


def conditional_probit_9d(params: JointParams, y_c, label: float) -> float:
    """P(toxicity | all eight biomarker values) under the 9-dim variant."""
    return float(normal_cdf(_conditional_eta_9d(params, y_c, label)))


def conditional_to_marginal(params: JointParams, variant: Variant) -> MarginalToxicity:
    """Rescale conditional-scale probit effects to the marginal scale."""
    tox = params.toxicity
    slope_nat = safe_exp(tox.slope_log)
    if variant == "joint2d":
        denom = math.sqrt(1.0 + (params.biomarker.sigma * params.association) ** 2)
        return MarginalToxicity(tox.intercept / denom, slope_nat / denom)
    if variant == "joint9d":
        _, cond_var = joint9d_conditional(
            params.association, params.biomarker.rho_time, params.biomarker.sigma
        )
        scale = math.sqrt(cond_var)
        return MarginalToxicity(tox.intercept * scale, slope_nat * scale)
    raise ValueError(f"unknown variant {variant!r}")


def loglik_probit(
    data: Sequence[tuple[float, int]], params: ToxicityParams, model=None
) -> float:
    """Bernoulli-probit log-likelihood of (label, outcome) pairs.

    `model` selects the curve family; default is the two-parameter probit.
    """
    from .models import ModelKind, WorkingModel, toxicity_prob

    model = model or WorkingModel.probit2()
    if len(data) == 0:
        raise ValueError("data must be non-empty")
    total = 0.0
    slope = safe_exp(params.slope_log)
    for label, y in data:
        if model.kind is ModelKind.PROBIT2:
            eta = params.intercept + slope * label
            term = log_normal_cdf(eta) if y else log_normal_cdf(-eta)
        elif model.kind is ModelKind.PROBIT1:
            eta = model.intercept + slope * label
            term = log_normal_cdf(eta) if y else log_normal_cdf(-eta)
        else:
            p = min(max(toxicity_prob(model, params, label), 1e-300), 1.0 - 1e-16)
            term = math.log(p) if y else math.log(1.0 - p)
        total += float(term)
    return total


def gaussian_loglik_2d(
    data: Sequence[tuple[float, int, float]], bio: BiomarkerParams
) -> float:
    total = 0.0
    for label, _, y_c in data:
        mu = float(bio.mean(label, WEEKS))
        z = (y_c - mu) / bio.sigma
        total += -0.5 * z * z - math.log(bio.sigma) - 0.5 * math.log(2.0 * math.pi)
    return total


def gaussian_loglik_9d(
    data: Sequence[tuple[float, int, np.ndarray]], bio: BiomarkerParams
) -> float:
    cov = ar1_covariance(bio.sigma, bio.rho_time, WEEKS)
    factor = cholesky(cov)
    logdet = 2.0 * float(np.sum(np.log(np.diag(factor))))
    total = 0.0
    for label, _, y_c in data:
        resid = np.asarray(y_c, dtype=float) - bio.mean_profile(label)
        half = np.linalg.solve(factor, resid)
        total += -0.5 * (float(half @ half) + logdet + WEEKS * math.log(2.0 * math.pi))
    return total


def loglik_joint(data, params: JointParams, variant: Variant) -> float:
    """Factorized log-likelihood: marginal Gaussian of the biomarker plus the
    conditional Bernoulli of toxicity given the biomarker."""
    if len(data) == 0:
        raise ValueError("data must be non-empty")
    if variant == "joint2d":
        total = gaussian_loglik_2d(data, params.biomarker)
        for label, y, y_c in data:
            eta = _conditional_eta_2d(params, float(y_c), label)
            total += float(log_normal_cdf(eta) if y else log_normal_cdf(-eta))
        return total
    if variant == "joint9d":
        total = gaussian_loglik_9d(data, params.biomarker)
        for label, y, y_c in data:
            eta = _conditional_eta_9d(params, y_c, label)
            total += float(log_normal_cdf(eta) if y else log_normal_cdf(-eta))
        return total
    raise ValueError(f"unknown variant {variant!r}")
