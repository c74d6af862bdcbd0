"""Shared fixtures: the pinned example-trial profile stream.

The stream reproduces the worked hypothetical trial: no toxicities in the
first cohort, one in the second at the next dose up, and a scenario whose
target is the highest dose. Patient 21 onward cycles one highest-dose-only
toxicity per cohort. The biomarker noise realization (seed 205) is pinned so
the 9-dimensional joint fit resumes escalation at the third cohort.
"""

import numpy as np
import pytest
from scipy import special

from jointcrm.numerics import RngStream
from jointcrm.profiles import (
    GenerationParams,
    LatentProfile,
    Scenario,
    _latent_factor,
)

REPLAY_TOX = (0.05, 0.08, 0.10, 0.15, 0.30)
REPLAY_BIO_SEED = 205

# toxicity uniforms for the 21 handcrafted patients: patient 6 toxic at the
# second dose, patient 12 at the third, patient 20 at the fifth
PINNED_U_B = [
    0.50, 0.62, 0.71,
    0.55, 0.81, 0.07,
    0.66, 0.44, 0.90,
    0.58, 0.73, 0.09,
    0.52, 0.68, 0.85,
    0.61, 0.49, 0.77,
    0.56, 0.22, 0.83,
]


def build_replay_stream(bio_seed: int = REPLAY_BIO_SEED):
    """60 latent profiles with handcrafted toxicity uniforms and pure-noise
    biomarkers (zero latent association)."""
    u_b = list(PINNED_U_B)
    uniform = RngStream(900 + bio_seed).generator.uniform
    for _ in range(13):
        u_b.extend([uniform(0.32, 0.95), uniform(0.16, 0.29), uniform(0.32, 0.95)])
    gen = GenerationParams(rho_b=0.0, rho_c=0.4)
    rng = RngStream(bio_seed)
    factor = _latent_factor(gen.rho_b, gen.rho_c)
    latents = [
        LatentProfile(
            u_c=special.ndtr((factor @ rng.standard_normal(9))[:8]), u_b=float(ub)
        )
        for ub in u_b
    ]
    return gen, latents


@pytest.fixture(scope="session")
def replay_stream():
    return build_replay_stream()


@pytest.fixture(scope="session")
def replay_scenario():
    return Scenario.from_probs("replay", REPLAY_TOX)
