"""Box-constrained local minimizer: BFGS with numeric gradients, Nelder-Mead polish.

Constrained parameters are mapped to an unbounded working scale through
per-parameter transforms (log for positive parameters, scaled atanh for
interval parameters), optimized there, and mapped back for reporting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .numerics import RngStream

# Shared line-search / convergence constants (mirrored by the compiled kernels).
ARMIJO_C1 = 1e-4
BACKTRACK_FACTOR = 0.5
MAX_BACKTRACKS = 40
GRAD_STEP = 1e-6
# relative function-decrease plateau stop, as quasi-Newton black boxes use;
# without it a separated likelihood "fails" convergence while crawling along
# its asymptote and callers would wrongly discard the fitted direction
RELATIVE_STOP = 1e-10
NM_REFLECT, NM_EXPAND, NM_CONTRACT, NM_SHRINK = 1.0, 2.0, 0.5, 0.5


class NonFiniteObjective(RuntimeError):
    """Raised when the objective is non-finite at the starting point."""


@dataclass(frozen=True)
class Transform:
    """Bijection between a constrained parameter and an unbounded working value."""

    name: str
    to_unbounded: Callable[[float], float]
    to_constrained: Callable[[float], float]


IDENTITY = Transform("identity", lambda x: x, lambda z: z)
LOG_POSITIVE = Transform("log_positive", math.log, math.exp)


def interval(lo: float = -1.0, hi: float = 1.0) -> Transform:
    """Transform for a parameter constrained to the open interval (lo, hi)."""
    width = hi - lo

    def fwd(x: float) -> float:
        return math.atanh(2.0 * (x - lo) / width - 1.0)

    def inv(z: float) -> float:
        return lo + width * 0.5 * (math.tanh(z) + 1.0)

    return Transform(f"interval({lo},{hi})", fwd, inv)


@dataclass(frozen=True)
class OptimizerSpec:
    """Iteration budget, tolerance, restart policy, and bounds transforms."""

    max_iterations: int = 200
    tolerance: float = 1e-8
    restart_count: int = 2
    transforms: tuple[Transform, ...] | None = None
    jitter_seed: int = 0
    jitter_sd: float = 0.5


@dataclass(frozen=True)
class MinimizeResult:
    x: np.ndarray
    value: float
    converged: bool
    iterations: int
    restarts_used: int


def numeric_gradient(f, x, h: float = GRAD_STEP) -> np.ndarray:
    """Central-difference gradient with per-coordinate step h * max(1, |x_i|)."""
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        step = h * max(1.0, abs(x[i]))
        xp = x.copy()
        xm = x.copy()
        xp[i] += step
        xm[i] -= step
        g[i] = (f(xp) - f(xm)) / (2.0 * step)
    return g


def _protected(f):
    def wrapped(x):
        v = f(x)
        return v if math.isfinite(v) else math.inf

    return wrapped


def _bfgs(f, x0, tol, max_iter):
    n = x0.size
    x = x0.copy()
    fx = f(x)
    hinv = np.eye(n)
    g = numeric_gradient(f, x)
    iters = 0
    for iters in range(1, max_iter + 1):
        if not np.all(np.isfinite(g)):
            return x, fx, False, iters
        if np.max(np.abs(g)) <= tol * (1.0 + abs(fx)):
            return x, fx, True, iters
        direction = -hinv @ g
        slope = float(direction @ g)
        if slope >= 0.0:  # lost curvature; reset to steepest descent
            hinv = np.eye(n)
            direction = -g
            slope = float(direction @ g)
        alpha = 1.0
        fnew = math.inf
        for _ in range(MAX_BACKTRACKS):
            xnew = x + alpha * direction
            fnew = f(xnew)
            if math.isfinite(fnew) and fnew <= fx + ARMIJO_C1 * alpha * slope:
                break
            alpha *= BACKTRACK_FACTOR
        else:
            return x, fx, True, iters  # no descent possible: stationary enough
        if fx - fnew <= RELATIVE_STOP * (abs(fnew) + RELATIVE_STOP):
            return xnew, fnew, True, iters
        gnew = numeric_gradient(f, xnew)
        s = xnew - x
        yvec = gnew - g
        sy = float(s @ yvec)
        if sy > 1e-12 and np.all(np.isfinite(s)) and np.all(np.isfinite(yvec)):
            rho = 1.0 / sy
            eye = np.eye(n)
            left = eye - rho * np.outer(s, yvec)
            hinv = left @ hinv @ left.T + rho * np.outer(s, s)
        x, fx, g = xnew, fnew, gnew
        if np.max(np.abs(s)) <= 1e-12 * (1.0 + np.max(np.abs(x))):
            return x, fx, True, iters
    return x, fx, False, iters


def _nelder_mead(f, x0, tol, max_iter):
    n = x0.size
    simplex = [x0.copy()]
    for i in range(n):
        vertex = x0.copy()
        vertex[i] += 0.05 * max(abs(vertex[i]), 0.25)
        simplex.append(vertex)
    values = [f(v) for v in simplex]
    for it in range(max_iter):
        order = np.argsort(values, kind="stable")
        simplex = [simplex[i] for i in order]
        values = [values[i] for i in order]
        best, worst = values[0], values[-1]
        spread = max(abs(worst - best), float(np.max(np.abs(simplex[-1] - simplex[0]))))
        if spread <= tol * (1.0 + abs(best)):
            return simplex[0], values[0], True, it
        centroid = np.mean(simplex[:-1], axis=0)
        reflected = centroid + NM_REFLECT * (centroid - simplex[-1])
        fr = f(reflected)
        if fr < values[0]:
            expanded = centroid + NM_EXPAND * (reflected - centroid)
            fe = f(expanded)
            if fe < fr:
                simplex[-1], values[-1] = expanded, fe
            else:
                simplex[-1], values[-1] = reflected, fr
        elif fr < values[-2]:
            simplex[-1], values[-1] = reflected, fr
        else:
            contracted = centroid + NM_CONTRACT * (simplex[-1] - centroid)
            fc = f(contracted)
            if fc < values[-1]:
                simplex[-1], values[-1] = contracted, fc
            else:
                for i in range(1, n + 1):
                    simplex[i] = simplex[0] + NM_SHRINK * (simplex[i] - simplex[0])
                    values[i] = f(simplex[i])
    return simplex[0], values[0], False, max_iter


def minimize(objective, start, spec: OptimizerSpec | None = None) -> MinimizeResult:
    """Minimize `objective` from `start`, honoring the spec's transforms.

    Runs a BFGS attempt followed by a Nelder-Mead polish; on non-convergence,
    retries from jittered starts up to spec.restart_count times and keeps the
    best point seen. `converged=False` marks a fit the caller should treat as
    diagnostic-only.
    """
    spec = spec or OptimizerSpec()
    start = np.asarray(start, dtype=float)
    transforms = spec.transforms or tuple(IDENTITY for _ in range(start.size))
    if len(transforms) != start.size:
        raise ValueError("one transform per parameter is required")

    def to_z(x):
        return np.array([t.to_unbounded(v) for t, v in zip(transforms, x)])

    def to_x(z):
        return np.array([t.to_constrained(v) for t, v in zip(transforms, z)])

    raw = _protected(lambda z: float(objective(to_x(z))))
    z0 = to_z(start)
    f0 = raw(z0)
    if not math.isfinite(f0):
        raise NonFiniteObjective("objective is not finite at the starting point")

    best_z, best_f, best_conv = z0, f0, False
    iterations = 0
    restarts_used = 0
    for attempt in range(spec.restart_count + 1):
        if attempt == 0:
            z_start = z0
        else:
            restarts_used += 1
            jitter = RngStream(spec.jitter_seed, attempt).normal(
                0.0, spec.jitter_sd, z0.size
            )
            z_start = z0 + jitter
            if not math.isfinite(raw(z_start)):
                continue
        z1, f1, conv1, it1 = _bfgs(raw, z_start, spec.tolerance, spec.max_iterations)
        iterations += it1
        if not conv1:
            # polish only a stalled BFGS result (mirrors the compiled twin)
            z2, f2, conv2, it2 = _nelder_mead(
                raw, z1, spec.tolerance, 80 * max(2, z0.size)
            )
            iterations += it2
            if f2 <= f1:
                z1, f1 = z2, f2
            conv1 = conv1 or conv2
        conv = conv1
        if f1 < best_f or (f1 == best_f and conv and not best_conv):
            best_z, best_f, best_conv = z1, f1, conv
        if best_conv:
            break
    return MinimizeResult(
        x=to_x(best_z),
        value=best_f,
        converged=best_conv,
        iterations=iterations,
        restarts_used=restarts_used,
    )
