import math

import numpy as np
import pytest

from jointcrm import _kernels
from jointcrm.optimize import (
    LOG_POSITIVE,
    NonFiniteObjective,
    OptimizerSpec,
    interval,
    minimize,
    numeric_gradient,
)


class TestMinimize:
    def test_quadratic(self):
        res = minimize(lambda v: (v[0] - 3.0) ** 2, [0.0])
        assert res.converged
        assert abs(res.x[0] - 3.0) <= 1e-6

    def test_rosenbrock(self):
        def rosen(v):
            return 100.0 * (v[1] - v[0] ** 2) ** 2 + (1.0 - v[0]) ** 2

        res = minimize(rosen, [-1.2, 1.0], OptimizerSpec(max_iterations=500))
        assert res.converged
        assert np.allclose(res.x, [1.0, 1.0], atol=1e-4)

    def test_value_never_worse_than_start(self):
        def bumpy(v):
            return math.sin(5 * v[0]) + 0.1 * v[0] ** 2

        res = minimize(bumpy, [2.0])
        assert res.value <= bumpy(np.array([2.0]))

    def test_non_finite_start_raises(self):
        with pytest.raises(NonFiniteObjective):
            minimize(lambda v: float("nan"), [0.0])

    def test_restarts_used_on_hard_objective(self):
        # discontinuous spike traps the first attempt; jitters must engage
        def nasty(v):
            return float("inf") if abs(v[0] - 0.001) < 1e-4 else (v[0] - 2.0) ** 2

        res = minimize(nasty, [0.0], OptimizerSpec(restart_count=3))
        assert res.value <= 1.0


class TestTransforms:
    def test_log_positive_roundtrip(self):
        for x in (1e-6, 0.5, 7.0):
            assert LOG_POSITIVE.to_constrained(
                LOG_POSITIVE.to_unbounded(x)
            ) == pytest.approx(x)

    def test_interval_roundtrip(self):
        tr = interval(-1.0, 1.0)
        for x in (-0.99, -0.2, 0.0, 0.7):
            assert tr.to_constrained(tr.to_unbounded(x)) == pytest.approx(x)

    def test_constrained_minimize_stays_feasible(self):
        # minimize (log sigma)^2 + (rho - 0.3)^2 over sigma > 0, rho in (-1, 1)
        spec = OptimizerSpec(transforms=(LOG_POSITIVE, interval()))

        def objective(v):
            sigma, rho = v
            return math.log(sigma) ** 2 + (rho - 0.3) ** 2

        res = minimize(objective, [0.5, -0.5], spec)
        assert res.converged
        assert res.x[0] == pytest.approx(1.0, abs=1e-5)
        assert res.x[1] == pytest.approx(0.3, abs=1e-5)
        assert res.x[0] > 0 and -1 < res.x[1] < 1


class TestNumericGradient:
    def test_cubic_gradient(self):
        def f(v):
            return v[0] ** 3 + 2.0 * v[0] * v[1] ** 2

        g = numeric_gradient(f, np.array([1.5, -2.0]))
        assert g[0] == pytest.approx(3 * 1.5**2 + 2 * 4.0, rel=1e-6)
        assert g[1] == pytest.approx(2 * 1.5 * 2 * -2.0, rel=1e-6)


class TestKernelParity:
    def test_probit_fit_matches_reference_optimizer(self):
        # overlap dataset: interior optimum both paths must agree on
        x = np.array([-0.674, -0.674, -0.674, -0.385, -0.385, -0.385])
        y = np.array([0.0, 1.0, 0.0, 1.0, 1.0, 0.0])
        x_mat = np.ascontiguousarray(x.reshape(-1, 1))
        consts = np.zeros(1)

        def objective(v):
            return _kernels.nll_probit2(np.asarray(v, dtype=float), x_mat, y, consts)

        ref = minimize(objective, [0.0, 0.0], OptimizerSpec(max_iterations=150))
        xk, vk, ck, _ = _kernels.minimize_core(
            _kernels.PROBIT2, np.zeros(2), x_mat, y, consts, 1e-8, 150, np.zeros((0, 2))
        )
        assert ck and ref.converged
        assert vk == pytest.approx(ref.value, abs=1e-8)
        assert np.allclose(xk, ref.x, atol=1e-4)

    def test_log_ndtr_matches_scipy(self):
        from scipy import special

        zs = np.linspace(-80, 8, 1500)
        mine = np.array([_kernels.log_ndtr(z) for z in zs])
        ref = special.log_ndtr(zs)
        assert np.max(np.abs(mine - ref) / np.maximum(1.0, np.abs(ref))) < 1e-11
