"""Complete-information patient profiles.

Each patient is one draw of a 9-dimensional latent normal vector (eight
weekly biomarker coordinates following an AR(1) correlation, plus one
toxicity coordinate). The latent vector maps to uniforms and then, by
quantile transforms, to a full set of outcomes at every dose, so competing
designs can be evaluated against identical patients.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special

from .joint import WEEKS, generation_correlation, validate_params
from .models import DoseLabels
from .numerics import RngStream, cholesky


@dataclass(frozen=True)
class Scenario:
    """True per-dose toxicity probabilities with the target dose index."""

    name: str
    tox_probs: tuple[float, ...]
    target_dose: int

    @staticmethod
    def from_probs(name: str, probs, phi_t: float = 0.3) -> "Scenario":
        probs = tuple(float(p) for p in probs)
        if any(b <= a for a, b in zip(probs, probs[1:])):
            raise ValueError("toxicity probabilities must be strictly increasing")
        target = int(np.argmin(np.abs(np.asarray(probs) - phi_t)))
        return Scenario(name, probs, target)


SCENARIOS: dict[str, Scenario] = {
    s.name: s
    for s in (
        Scenario.from_probs("S1", (0.30, 0.45, 0.55, 0.65, 0.75)),
        Scenario.from_probs("S2", (0.15, 0.30, 0.45, 0.55, 0.65)),
        Scenario.from_probs("S3", (0.10, 0.15, 0.30, 0.45, 0.55)),
        Scenario.from_probs("S4", (0.05, 0.10, 0.15, 0.30, 0.45)),
        Scenario.from_probs("S5", (0.05, 0.08, 0.10, 0.15, 0.30)),
    )
}


@dataclass(frozen=True)
class GenerationParams:
    """Latent correlations and biomarker mean structure for data generation."""

    rho_b: float = 0.0
    rho_c: float = 0.4
    sigma_c: float = 1.0
    intercept: float = 20.0
    dose_effect: float = -2.0
    time_effect: float = -1.0

    def __post_init__(self):
        ok, reason = validate_params(self.rho_b, self.rho_c, self.sigma_c)
        if not ok:
            raise ValueError(f"invalid generation parameters: {reason}")

    def mean_matrix(self, labels: DoseLabels) -> np.ndarray:
        """(n_doses, 8) biomarker means by dose label and week."""
        x = labels.as_array()[:, None]
        weeks = np.arange(1.0, WEEKS + 1)[None, :]
        return self.intercept + self.dose_effect * x + self.time_effect * weeks


@dataclass(frozen=True)
class LatentProfile:
    """Uniform profiles for one patient: eight biomarker coords + toxicity."""

    u_c: np.ndarray
    u_b: float


@dataclass(frozen=True)
class PatientProfile:
    """Complete outcomes at every dose for one patient."""

    u_c: np.ndarray  # (8,)
    u_b: float
    y_b: np.ndarray  # (n_doses,) 0/1, nondecreasing across doses
    y_c: np.ndarray  # (n_doses, 8)


@lru_cache(maxsize=32)
def _latent_factor(rho_b: float, rho_c: float) -> np.ndarray:
    return cholesky(generation_correlation(rho_b, rho_c))


def draw_latent(gen: GenerationParams, rng: RngStream) -> LatentProfile:
    z = rng.standard_normal(WEEKS + 1)
    w = _latent_factor(gen.rho_b, gen.rho_c) @ z
    u = special.ndtr(w)
    return LatentProfile(u_c=u[:WEEKS], u_b=float(u[WEEKS]))


class ProfileRealizer:
    """Maps latent profiles to per-dose outcomes for one (scenario, labels) pair.

    Precomputes the biomarker mean matrix so realizing a patient is a single
    broadcast; used by the simulation harness where designs share latent draws.
    """

    def __init__(self, scenario: Scenario, gen: GenerationParams, labels: DoseLabels):
        if len(labels) != len(scenario.tox_probs):
            raise ValueError("labels and scenario must have the same length")
        self.scenario = scenario
        self.gen = gen
        self.labels = labels
        self._mu = gen.mean_matrix(labels)
        self._tox = np.asarray(scenario.tox_probs)

    def realize(self, latent: LatentProfile) -> PatientProfile:
        y_b = (latent.u_b <= self._tox).astype(np.int8)
        z_c = special.ndtri(latent.u_c)
        y_c = self._mu + z_c[None, :] * self.gen.sigma_c
        return PatientProfile(u_c=latent.u_c, u_b=latent.u_b, y_b=y_b, y_c=y_c)


def generate_profile(
    scenario: Scenario, gen: GenerationParams, labels: DoseLabels, rng: RngStream
) -> PatientProfile:
    """Draw one patient's latent vector and realize outcomes at every dose."""
    return ProfileRealizer(scenario, gen, labels).realize(draw_latent(gen, rng))


def profile_stream_index(scenario_idx: int, replication: int, patient_idx: int) -> int:
    """Pack the (scenario, replication, patient) key into one stream index.

    Patient index must stay below 2^10 and replication below 2^34; any
    collision would silently correlate profiles, so bounds are enforced.
    """
    if not 0 <= patient_idx < 1024:
        raise ValueError("patient index out of range")
    if not 0 <= replication < 2**34:
        raise ValueError("replication out of range")
    return (scenario_idx << 44) | (replication << 10) | patient_idx


def toxicity_margin_check(
    scenario: Scenario,
    gen: GenerationParams,
    labels: DoseLabels,
    n_draws: int = 10_000,
    seed: int = 0,
):
    """Empirical per-dose toxicity rates of the generator.

    Returns (rates, ok) where ok requires every dose's empirical rate to sit
    within three Monte Carlo standard errors of the scenario's truth.
    """
    if n_draws < 10_000:
        raise ValueError("n_draws must be at least 10_000")
    factor = _latent_factor(gen.rho_b, gen.rho_c)
    z = RngStream(seed).standard_normal((n_draws, WEEKS + 1))
    u_b = special.ndtr(z @ factor.T)[:, WEEKS]
    tox = np.asarray(scenario.tox_probs)
    rates = (u_b[:, None] <= tox[None, :]).mean(axis=0)
    bound = 3.0 * np.sqrt(tox * (1.0 - tox) / n_draws)
    return rates, bool(np.all(np.abs(rates - tox) <= bound))


def write_profiles_csv(path, profiles) -> None:
    """Dump profiles as one row per patient per dose."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(
            ["patientId", "dose", "y_b"]
            + [f"y_c{t}" for t in range(1, WEEKS + 1)]
            + ["u_b"]
        )
        for pid, prof in enumerate(profiles):
            for j in range(prof.y_b.shape[0]):
                writer.writerow(
                    [pid, j + 1, int(prof.y_b[j])]
                    + [f"{v:.10g}" for v in prof.y_c[j]]
                    + [f"{prof.u_b:.10g}"]
                )
