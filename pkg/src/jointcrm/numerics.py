"""Numerical primitives: normal distribution, Cholesky, MVN conditioning, RNG streams."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import special


class NotPositiveDefinite(ValueError):
    """Raised when a matrix required to be positive definite is not."""


def normal_cdf(z):
    """Standard normal CDF, exact to double precision via the complementary
    error function. Accepts scalars or arrays; saturates at 0/1 in the tails.
    """
    return special.ndtr(z)


def log_normal_cdf(z):
    """log Phi(z), stable far into the lower tail (no underflow for finite z)."""
    return special.log_ndtr(z)


def normal_quantile(p):
    """Inverse standard normal CDF.

    Raises ValueError for p outside the open interval (0, 1).
    """
    arr = np.asarray(p, dtype=float)
    if np.any(arr <= 0.0) or np.any(arr >= 1.0):
        raise ValueError(f"normal_quantile requires p in (0, 1), got {p!r}")
    out = special.ndtri(arr)
    return float(out) if np.isscalar(p) or arr.ndim == 0 else out


def _check_symmetric(m: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    scale = max(1.0, float(np.max(np.abs(m))))
    if np.max(np.abs(m - m.T)) > tol * scale:
        raise ValueError("matrix is not symmetric")
    return m


def cholesky(m) -> np.ndarray:
    """Lower-triangular factor L with L @ L.T == m.

    Raises NotPositiveDefinite when the (symmetric) input has a non-positive
    pivot, which is the positive-definiteness test used throughout.
    """
    m = _check_symmetric(m)
    try:
        return np.linalg.cholesky(m)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from exc


def is_positive_definite(m) -> bool:
    try:
        cholesky(m)
    except (NotPositiveDefinite, ValueError):
        return False
    return True


@dataclass(frozen=True)
class ConditionalGaussian:
    """Regression of one MVN coordinate on a conditioning block.

    coefficients[k] multiplies (y_given[k] - mean_given[k]); conditional_variance
    is the Schur complement of the conditioning block.
    """

    coefficients: np.ndarray
    conditional_variance: float


def condition_gaussian(cov, target_index: int, given_indices) -> ConditionalGaussian:
    """Condition coordinate `target_index` of an MVN on the `given_indices` block.

    coefficients = Sigma_tg @ Sigma_gg^-1 and
    conditional_variance = Sigma_tt - Sigma_tg @ Sigma_gg^-1 @ Sigma_gt.
    """
    cov = _check_symmetric(cov)
    given = np.asarray(list(given_indices), dtype=int)
    if target_index in given:
        raise ValueError("target index cannot appear in the conditioning block")
    sigma_gg = cov[np.ix_(given, given)]
    sigma_tg = cov[target_index, given]
    try:
        l_gg = np.linalg.cholesky(sigma_gg)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from exc
    # solve Sigma_gg w = Sigma_gt via the factor
    half = np.linalg.solve(l_gg, sigma_tg)
    coeffs = np.linalg.solve(l_gg.T, half)
    cond_var = float(cov[target_index, target_index] - sigma_tg @ coeffs)
    if cond_var <= 0.0:
        raise NotPositiveDefinite(
            f"conditional variance {cond_var:.3e} is not positive"
        )
    return ConditionalGaussian(coefficients=coeffs, conditional_variance=cond_var)


@dataclass
class RngStream:
    """Counter-keyed random stream.

    Streams with distinct (seed, stream_index) are statistically independent;
    identical keys reproduce byte-identical draws across runs and processes.
    """

    seed: int
    stream_index: int = 0
    _gen: np.random.Generator | None = field(default=None, repr=False, compare=False)

    @property
    def generator(self) -> np.random.Generator:
        if self._gen is None:
            ss = np.random.SeedSequence(
                entropy=self.seed, spawn_key=(self.stream_index,)
            )
            self._gen = np.random.Generator(np.random.PCG64(ss))
        return self._gen

    def standard_normal(self, size=None):
        return self.generator.standard_normal(size)

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self.generator.normal(loc, scale, size)


def sample_mvn(mean, cov, rng: RngStream, size: int | None = None) -> np.ndarray:
    """Draw from N(mean, cov) using the stream's generator.

    Returns a vector, or a (size, dim) matrix when size is given.
    """
    mean = np.asarray(mean, dtype=float)
    factor = cholesky(cov)
    if size is None:
        z = rng.standard_normal(mean.shape[0])
        return mean + factor @ z
    z = rng.standard_normal((size, mean.shape[0]))
    return mean + z @ factor.T
