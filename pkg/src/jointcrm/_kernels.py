"""Compiled likelihood and optimizer kernels for the simulation hot path.

Mirrors the algorithm in `optimize.py` (BFGS with central-difference
gradients, Armijo backtracking, Nelder-Mead polish) so batch simulation runs
at compiled speed. Log-likelihoods take a packed covariate matrix X, the
binary outcome vector y, and a constants vector, and are evaluated on the
unbounded working scale (log / atanh transforms applied inside).

Parameter layouts (working scale):
    probit2:  (b0, b1)                          X[:, 0] = dose label
    probit1:  (b1,)            consts = (a0,)   X[:, 0] = dose label
    empiric:  (b1,)                             X[:, 0] = skeleton label in (0,1)
    joint2d:  (b0, b1, c0, c1, tau, log_sigma)  X = [label, yc8]
    joint9d:  (b0, b1, c0, c1, a_t, atanh_rb, atanh_rc, log_sigma)
                                                X = [label, yc1..yc8]
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from .optimize import (
    ARMIJO_C1,
    BACKTRACK_FACTOR,
    GRAD_STEP,
    MAX_BACKTRACKS,
    NM_CONTRACT,
    NM_EXPAND,
    NM_REFLECT,
    NM_SHRINK,
    RELATIVE_STOP,
)

INF = np.inf
_SQRT2 = math.sqrt(2.0)
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)

JIT_OPTS = dict(cache=True, fastmath=False, nogil=True)


@njit(**JIT_OPTS)
def ndtr(z):
    return 0.5 * math.erfc(-z / _SQRT2)


@njit(**JIT_OPTS)
def log_ndtr(z):
    if z > -1.0:
        return math.log1p(-0.5 * math.erfc(z / _SQRT2))
    if z > -36.0:
        return math.log(0.5 * math.erfc(-z / _SQRT2))
    # asymptotic lower tail: Phi(z) ~ phi(z)/(-z) * (1 - 1/z^2 + 3/z^4 - 15/z^6)
    z2 = z * z
    series = -1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2)
    return -0.5 * z2 - math.log(-z) - _LOG_SQRT_2PI + math.log1p(series)


@njit(**JIT_OPTS)
def cholesky_flag(a):
    """Lower Cholesky factor with a success flag instead of an exception."""
    n = a.shape[0]
    lower = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1):
            acc = a[i, j]
            for k in range(j):
                acc -= lower[i, k] * lower[j, k]
            if i == j:
                if acc <= 0.0:
                    return lower, False
                lower[i, j] = math.sqrt(acc)
            else:
                lower[i, j] = acc / lower[j, j]
    return lower, True


@njit(**JIT_OPTS)
def solve_lower(lower, b):
    n = b.shape[0]
    out = np.empty(n)
    for i in range(n):
        acc = b[i]
        for k in range(i):
            acc -= lower[i, k] * out[k]
        out[i] = acc / lower[i, i]
    return out


@njit(**JIT_OPTS)
def solve_upper_from_lower(lower, b):
    """Solve L^T x = b given the lower factor L."""
    n = b.shape[0]
    out = np.empty(n)
    for i in range(n - 1, -1, -1):
        acc = b[i]
        for k in range(i + 1, n):
            acc -= lower[k, i] * out[k]
        out[i] = acc / lower[i, i]
    return out


@njit(**JIT_OPTS)
def ar1_matrix(sigma, rho, dim):
    out = np.empty((dim, dim))
    s2 = sigma * sigma
    for i in range(dim):
        for j in range(dim):
            out[i, j] = s2 * rho ** abs(i - j)
    return out


@njit(**JIT_OPTS)
def joint9d_weights(rho_b, rho_c, sigma_c):
    """Conditioning weights, conditional variance, and validity for the 9-dim model.

    Returns (w, cond_var, ok): w solves Sigma_c w = cross, cond_var is the
    Schur complement 1 - cross . w. ok is False when the implied 9x9
    covariance is not positive definite.
    """
    sig = ar1_matrix(sigma_c, rho_c, 8)
    cross = np.empty(8)
    for t in range(8):
        cross[t] = -(rho_b ** (8 - t)) * sigma_c
    lower, ok = cholesky_flag(sig)
    if not ok:
        return cross, 0.0, False
    half = solve_lower(lower, cross)
    w = solve_upper_from_lower(lower, half)
    cond_var = 1.0
    for t in range(8):
        cond_var -= cross[t] * w[t]
    if cond_var <= 1e-12:
        return w, cond_var, False
    return w, cond_var, True


@njit(**JIT_OPTS)
def bernoulli_probit_term(eta, y):
    if y > 0.5:
        return log_ndtr(eta)
    return log_ndtr(-eta)


@njit(**JIT_OPTS)
def nll_probit2(params, x_mat, y, consts):
    b0 = params[0]
    slope = math.exp(params[1])
    total = 0.0
    for i in range(y.shape[0]):
        eta = b0 + slope * x_mat[i, 0]
        total += bernoulli_probit_term(eta, y[i])
    return -total


@njit(**JIT_OPTS)
def nll_probit1(params, x_mat, y, consts):
    a0 = consts[0]
    slope = math.exp(params[0])
    total = 0.0
    for i in range(y.shape[0]):
        eta = a0 + slope * x_mat[i, 0]
        total += bernoulli_probit_term(eta, y[i])
    return -total


@njit(**JIT_OPTS)
def nll_empiric(params, x_mat, y, consts):
    power = math.exp(params[0])
    total = 0.0
    for i in range(y.shape[0]):
        log_p = power * math.log(x_mat[i, 0])
        if y[i] > 0.5:
            total += log_p
        else:
            one_minus = -math.expm1(log_p)
            if one_minus < 1e-300:
                one_minus = 1e-300
            total += math.log(one_minus)
    return -total


@njit(**JIT_OPTS)
def nll_joint2d(params, x_mat, y, consts):
    b0, b1, c0, c1, tau, log_sigma = (
        params[0],
        params[1],
        params[2],
        params[3],
        params[4],
        params[5],
    )
    slope = math.exp(b1)
    sigma = math.exp(log_sigma)
    if sigma <= 0.0 or not math.isfinite(sigma):
        return INF
    total = 0.0
    for i in range(y.shape[0]):
        x = x_mat[i, 0]
        resid = x_mat[i, 1] - (c0 + c1 * x)
        zed = resid / sigma
        total += -0.5 * zed * zed - math.log(sigma) - _LOG_SQRT_2PI
        eta = b0 + slope * x + tau * resid
        total += bernoulli_probit_term(eta, y[i])
    return -total


@njit(**JIT_OPTS)
def nll_joint9d_fixed_rc(params, x_mat, y, consts):
    """Seven-parameter variant: the AR(1) correlation is a design constant
    (consts[0]) rather than a fitted quantity, matching the method's
    parameter list (b0, b1, c0, c1, a_t, association, log sigma)."""
    full = np.empty(8)
    for i in range(6):
        full[i] = params[i]
    full[6] = math.atanh(consts[0])
    full[7] = params[6]
    return nll_joint9d(full, x_mat, y, consts)


@njit(**JIT_OPTS)
def nll_joint9d(params, x_mat, y, consts):
    b0, b1 = params[0], params[1]
    c0, c1, a_t = params[2], params[3], params[4]
    rho_b = abs(math.tanh(params[5]))
    rho_c = math.tanh(params[6])
    sigma = math.exp(params[7])
    if sigma <= 0.0 or not math.isfinite(sigma):
        return INF
    slope = math.exp(b1)

    lower, ok = cholesky_flag(ar1_matrix(sigma, rho_c, 8))
    if not ok:
        return INF
    # conditioning weights of the latent toxicity coordinate on the biomarkers
    cross = np.empty(8)
    rb_pow = rho_b
    for t in range(7, -1, -1):
        cross[t] = -rb_pow * sigma
        rb_pow *= rho_b
    half = solve_lower(lower, cross)
    w = solve_upper_from_lower(lower, half)
    cond_var = 1.0
    for t in range(8):
        cond_var -= cross[t] * w[t]
    if cond_var <= 1e-12:
        return INF
    inv_sqrt_cv = 1.0 / math.sqrt(cond_var)
    logdet = 0.0
    for t in range(8):
        logdet += 2.0 * math.log(lower[t, t])

    total = 0.0
    resid = np.empty(8)
    buf = np.empty(8)
    for i in range(y.shape[0]):
        x = x_mat[i, 0]
        base = c0 + c1 * x
        for t in range(8):
            resid[t] = x_mat[i, 1 + t] - (base + a_t * (t + 1.0))
        qform = 0.0
        lin = 0.0
        for t in range(8):
            acc = resid[t]
            for k in range(t):
                acc -= lower[t, k] * buf[k]
            buf[t] = acc / lower[t, t]
            qform += buf[t] * buf[t]
            lin += w[t] * resid[t]
        total += -0.5 * (qform + logdet) - 8.0 * _LOG_SQRT_2PI
        eta = b0 + slope * x + inv_sqrt_cv * lin
        total += bernoulli_probit_term(eta, y[i])
    return -total


# ---------------------------------------------------------------------------
# Minimizer (compiled twin of optimize._bfgs / optimize._nelder_mead)
# ---------------------------------------------------------------------------
# Objectives are selected by an integer code so every compiled function is a
# concrete global (first-class function arguments defeat numba's disk cache).

PROBIT2, PROBIT1, EMPIRIC, JOINT2D, JOINT9D, JOINT9D_FIXED_RC = 0, 1, 2, 3, 4, 5


@njit(**JIT_OPTS)
def nll_eval(code, params, x_mat, y, consts):
    if code == 0:
        return nll_probit2(params, x_mat, y, consts)
    if code == 1:
        return nll_probit1(params, x_mat, y, consts)
    if code == 2:
        return nll_empiric(params, x_mat, y, consts)
    if code == 3:
        return nll_joint2d(params, x_mat, y, consts)
    if code == 4:
        return nll_joint9d(params, x_mat, y, consts)
    return nll_joint9d_fixed_rc(params, x_mat, y, consts)


@njit(**JIT_OPTS)
def _gradient(code, x, x_mat, y, consts):
    n = x.shape[0]
    g = np.empty(n)
    xp = x.copy()
    for i in range(n):
        step = GRAD_STEP * max(1.0, abs(x[i]))
        orig = x[i]
        xp[i] = orig + step
        fp = nll_eval(code, xp, x_mat, y, consts)
        xp[i] = orig - step
        fm = nll_eval(code, xp, x_mat, y, consts)
        xp[i] = orig
        g[i] = (fp - fm) / (2.0 * step)
    return g


@njit(**JIT_OPTS)
def _bfgs_nb(code, x0, x_mat, y, consts, tol, max_iter):
    n = x0.shape[0]
    x = x0.copy()
    fx = nll_eval(code, x, x_mat, y, consts)
    hinv = np.eye(n)
    g = _gradient(code, x, x_mat, y, consts)
    for _ in range(max_iter):
        finite = True
        for i in range(n):
            if not math.isfinite(g[i]):
                finite = False
        if not finite:
            return x, fx, False
        gmax = 0.0
        for i in range(n):
            if abs(g[i]) > gmax:
                gmax = abs(g[i])
        if gmax <= tol * (1.0 + abs(fx)):
            return x, fx, True
        direction = -(hinv @ g)
        slope = 0.0
        for i in range(n):
            slope += direction[i] * g[i]
        if slope >= 0.0:
            hinv = np.eye(n)
            direction = -g
            slope = 0.0
            for i in range(n):
                slope += direction[i] * g[i]
        alpha = 1.0
        fnew = INF
        xnew = x
        ok = False
        for _ in range(MAX_BACKTRACKS):
            xnew = x + alpha * direction
            fnew = nll_eval(code, xnew, x_mat, y, consts)
            if math.isfinite(fnew) and fnew <= fx + ARMIJO_C1 * alpha * slope:
                ok = True
                break
            alpha *= BACKTRACK_FACTOR
        if not ok:
            return x, fx, True
        if fx - fnew <= RELATIVE_STOP * (abs(fnew) + RELATIVE_STOP):
            return xnew, fnew, True
        gnew = _gradient(code, xnew, x_mat, y, consts)
        s = xnew - x
        yvec = gnew - g
        sy = 0.0
        update_ok = True
        for i in range(n):
            sy += s[i] * yvec[i]
            if not (math.isfinite(s[i]) and math.isfinite(yvec[i])):
                update_ok = False
        if update_ok and sy > 1e-12:
            rho = 1.0 / sy
            left = np.eye(n) - rho * (s.reshape(n, 1) * yvec.reshape(1, n))
            hinv = left @ hinv @ left.T + rho * (s.reshape(n, 1) * s.reshape(1, n))
        x, fx, g = xnew, fnew, gnew
        smax = 0.0
        xmax = 0.0
        for i in range(n):
            if abs(s[i]) > smax:
                smax = abs(s[i])
            if abs(x[i]) > xmax:
                xmax = abs(x[i])
        if smax <= 1e-12 * (1.0 + xmax):
            return x, fx, True
    return x, fx, False


@njit(**JIT_OPTS)
def _stable_order(values):
    n = values.shape[0]
    idx = np.empty(n, dtype=np.int64)
    for i in range(n):
        idx[i] = i
    for i in range(1, n):
        key_i = idx[i]
        key_v = values[key_i]
        j = i - 1
        while j >= 0 and values[idx[j]] > key_v:
            idx[j + 1] = idx[j]
            j -= 1
        idx[j + 1] = key_i
    return idx


@njit(**JIT_OPTS)
def _nelder_mead_nb(code, x0, x_mat, y, consts, tol, max_iter):
    n = x0.shape[0]
    simplex = np.empty((n + 1, n))
    values = np.empty(n + 1)
    simplex[0] = x0
    values[0] = nll_eval(code, x0, x_mat, y, consts)
    for i in range(n):
        vertex = x0.copy()
        vertex[i] += 0.05 * max(abs(vertex[i]), 0.25)
        simplex[i + 1] = vertex
        values[i + 1] = nll_eval(code, vertex, x_mat, y, consts)
    for it in range(max_iter):
        order = _stable_order(values)
        simplex = simplex[order].copy()
        values = values[order].copy()
        best = values[0]
        worst = values[n]
        xspread = 0.0
        for i in range(n):
            d = abs(simplex[n, i] - simplex[0, i])
            if d > xspread:
                xspread = d
        spread = max(abs(worst - best), xspread)
        if spread <= tol * (1.0 + abs(best)):
            return simplex[0], values[0], True
        centroid = np.zeros(n)
        for i in range(n):
            for j in range(n):
                centroid[j] += simplex[i, j]
        centroid /= n
        reflected = centroid + NM_REFLECT * (centroid - simplex[n])
        fr = nll_eval(code, reflected, x_mat, y, consts)
        if fr < values[0]:
            expanded = centroid + NM_EXPAND * (reflected - centroid)
            fe = nll_eval(code, expanded, x_mat, y, consts)
            if fe < fr:
                simplex[n], values[n] = expanded, fe
            else:
                simplex[n], values[n] = reflected, fr
        elif fr < values[n - 1]:
            simplex[n], values[n] = reflected, fr
        else:
            contracted = centroid + NM_CONTRACT * (simplex[n] - centroid)
            fc = nll_eval(code, contracted, x_mat, y, consts)
            if fc < values[n]:
                simplex[n], values[n] = contracted, fc
            else:
                for i in range(1, n + 1):
                    simplex[i] = simplex[0] + NM_SHRINK * (simplex[i] - simplex[0])
                    values[i] = nll_eval(code, simplex[i], x_mat, y, consts)
    return simplex[0], values[0], False


@njit(**JIT_OPTS)
def minimize_core(code, start, x_mat, y, consts, tol, max_iter, jitters, base=True):
    """BFGS + Nelder-Mead polish with precomputed jittered restarts.

    jitters has one row per allowed restart; restarts engage only while no
    attempt has converged. With base=False the unjittered attempt is skipped
    (used when the caller already ran it). Returns
    (x, value, converged, restarts_used).
    """
    f0 = nll_eval(code, start, x_mat, y, consts)
    if not math.isfinite(f0):
        return start, INF, False, 0
    best_x = start.copy()
    best_f = f0
    best_conv = False
    restarts_used = 0
    n_attempts = jitters.shape[0] + 1
    for attempt in range(n_attempts):
        if attempt == 0:
            if not base:
                continue
            x_start = start.copy()
        else:
            restarts_used += 1
            x_start = start + jitters[attempt - 1]
            if not math.isfinite(nll_eval(code, x_start, x_mat, y, consts)):
                continue
        x1, f1, conv1 = _bfgs_nb(code, x_start, x_mat, y, consts, tol, max_iter)
        if not conv1:
            # polish engages only when BFGS stalls; a converged quasi-Newton
            # result gains nothing and a simplex would wander divergent ridges
            x2, f2, conv2 = _nelder_mead_nb(
                code, x1, x_mat, y, consts, tol, 80 * max(2, start.shape[0])
            )
            if f2 <= f1:
                x1, f1 = x2, f2
            conv1 = conv1 or conv2
        if f1 < best_f or (f1 == best_f and conv1 and not best_conv):
            best_x, best_f, best_conv = x1.copy(), f1, conv1
        if best_conv:
            break
    return best_x, best_f, best_conv, restarts_used


NLL_KERNELS = {
    "probit2": PROBIT2,
    "probit1": PROBIT1,
    "empiric": EMPIRIC,
    "joint2d": JOINT2D,
    "joint9d": JOINT9D,
    "joint9d_fixed_rc": JOINT9D_FIXED_RC,
}


def warmup() -> None:
    """Force compilation of the kernel stack (slow only on a cold disk cache)."""
    x_mat = np.ascontiguousarray(
        [[-0.5, 1.0, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3]]
    )
    y = np.array([1.0])
    consts = np.array([0.0])
    starts = {
        PROBIT2: np.zeros(2),
        PROBIT1: np.zeros(1),
        EMPIRIC: np.zeros(1),
        JOINT2D: np.zeros(6),
        JOINT9D: np.array([0.0, 0.0, 0.0, 0.0, 0.0, 0.1, 0.2, 0.0]),
        JOINT9D_FIXED_RC: np.array([0.0, 0.0, 0.0, 0.0, 0.0, 0.1, 0.0]),
    }
    cols = {PROBIT2: 1, PROBIT1: 1, EMPIRIC: 1, JOINT2D: 2, JOINT9D: 9, JOINT9D_FIXED_RC: 9}
    consts_by = {JOINT9D_FIXED_RC: np.array([0.4, 0.0])}
    for code, start in starts.items():
        x_use = np.ascontiguousarray(x_mat[:, : cols[code]])
        if code == EMPIRIC:
            x_use = np.array([[0.25]])
        minimize_core(
            code,
            start,
            x_use,
            y,
            consts_by.get(code, consts),
            1e-6,
            5,
            np.zeros((0, start.size)),
        )
