import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jointcrm import _kernels
from jointcrm.fitting import (
    SeparationClass,
    TrialData,
    classify_separation,
    early_stop_posterior,
    fit,
)
from jointcrm.models import (
    DEFAULT_SKELETON,
    WorkingModel,
    backward_fit_labels,
    select_target,
)
from jointcrm.numerics import RngStream

LABELS = backward_fit_labels(DEFAULT_SKELETON, WorkingModel.probit2())
X1, X2 = LABELS.values[0], LABELS.values[1]


def pairs(label, tox, non):
    return [(label, 1)] * tox + [(label, 0)] * non


class TestClassifySeparation:
    def test_complete(self):
        data = pairs(X1, 0, 3) + pairs(X2, 3, 0)
        assert classify_separation(data) is SeparationClass.COMPLETE

    def test_quasi_complete(self):
        data = pairs(X1, 0, 3) + pairs(X2, 3, 3)
        assert classify_separation(data) is SeparationClass.QUASI

    def test_overlap(self):
        data = pairs(X1, 3, 3) + pairs(X2, 3, 3)
        assert classify_separation(data) is SeparationClass.OVERLAP

    def test_single_class_is_complete(self):
        assert classify_separation(pairs(X1, 0, 3)) is SeparationClass.COMPLETE
        assert classify_separation(pairs(X2, 3, 0)) is SeparationClass.COMPLETE

    def test_reversed_orientation_detected(self):
        data = pairs(X1, 3, 0) + pairs(X2, 0, 3)
        assert classify_separation(data) is SeparationClass.COMPLETE

    @settings(max_examples=100, deadline=None)
    @given(
        st.lists(
            st.tuples(st.integers(0, 4), st.integers(0, 1)), min_size=1, max_size=12
        )
    )
    def test_exactly_one_class_assigned(self, raw):
        data = [(LABELS.values[d], y) for d, y in raw]
        cls = classify_separation(data)
        assert cls in (
            SeparationClass.COMPLETE,
            SeparationClass.QUASI,
            SeparationClass.OVERLAP,
        )

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 10_000))
    def test_monotone_label_map_preserves_class(self, seed):
        rng = np.random.default_rng(seed)
        raw = [
            (int(rng.integers(0, 5)), int(rng.integers(0, 2)))
            for _ in range(int(rng.integers(2, 12)))
        ]
        data = [(LABELS.values[d], y) for d, y in raw]
        squeezed = [(math.tanh(x), y) for x, y in data]  # strictly monotone map
        assert classify_separation(data) is classify_separation(squeezed)


class TestEarlyStopPosterior:
    def test_two_of_three_continues(self):
        # Beta(3,2): P(p > 0.3) = 1 - 0.3^3 (4 - 3 * 0.3) = 0.9163
        assert not early_stop_posterior(2, 3, 0.3)
        from scipy import stats

        assert stats.beta.sf(0.3, 3, 2) == pytest.approx(
            1 - 0.3**3 * (4 - 3 * 0.3), abs=1e-12
        )

    def test_three_of_three_stops(self):
        # Beta(4,1): P(p > 0.3) = 1 - 0.3^4 = 0.9919
        assert early_stop_posterior(3, 3, 0.3)
        assert 1 - 0.3**4 >= 0.95

    def test_single_toxicity_never_stops(self):
        assert not early_stop_posterior(1, 3, 0.3)
        assert not early_stop_posterior(1, 1, 0.3)  # posterior high but gate unmet

    def test_invalid_counts(self):
        with pytest.raises(ValueError):
            early_stop_posterior(4, 3, 0.3)


def quasi_data():
    data = TrialData()
    data.add_cohort(0, [0, 0, 0])
    data.add_cohort(1, [0, 0, 1])
    return data


def overlap_data():
    data = TrialData()
    data.add_cohort(0, [1, 1, 1, 0, 0, 0])
    data.add_cohort(1, [1, 1, 1, 0, 0, 0])
    return data


class TestProbitFit:
    def test_quasi_separated_step_curve(self):
        result = fit("probit", WorkingModel.probit2(), LABELS, quasi_data())
        assert result.diagnostics.separation
        assert result.diagnostics.boundary_parameter
        assert np.all(result.curve[2:] >= 1 - 1e-4)
        assert result.curve[0] <= 1e-4
        assert select_target(result.curve, 0.3) == 1

    def test_overlap_interior_estimates(self):
        result = fit("probit", WorkingModel.probit2(), LABELS, overlap_data())
        assert result.converged
        assert not result.diagnostics.separation
        assert not result.diagnostics.boundary_parameter
        assert np.all((result.curve > 1e-4) & (result.curve < 1 - 1e-4))

    def test_overlap_beats_grid_oracle(self):
        data = overlap_data()
        result = fit("probit", WorkingModel.probit2(), LABELS, data)
        x = LABELS.as_array()[np.asarray(data.dose_idx)]
        x_mat = np.ascontiguousarray(x.reshape(-1, 1))
        y = np.asarray(data.y, dtype=float)
        grid_best = min(
            _kernels.nll_probit2(np.array([b0, b1]), x_mat, y, np.zeros(1))
            for b0 in np.linspace(-3, 3, 61)
            for b1 in np.linspace(-4, 3, 71)
        )
        assert -result.loglik <= grid_best + 1e-9

    def test_complete_separation_flags_fire(self):
        data = TrialData()
        data.add_cohort(0, [0, 0, 0])
        data.add_cohort(1, [1, 1, 1])
        result = fit("probit", WorkingModel.probit2(), LABELS, data)
        assert classify_separation(
            [(LABELS.values[d], y) for d, y in zip(data.dose_idx, data.y)]
        ) is SeparationClass.COMPLETE
        assert result.diagnostics.separation

    def test_deterministic(self):
        a = fit("probit", WorkingModel.probit2(), LABELS, quasi_data())
        b = fit("probit", WorkingModel.probit2(), LABELS, quasi_data())
        assert a.curve.tobytes() == b.curve.tobytes()
        assert a.diagnostics == b.diagnostics

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000))
    def test_overlap_property_interior_fit(self, seed):
        # random overlap datasets (n <= 12) keep the fit off the boundary
        rng = np.random.default_rng(seed)
        while True:
            n = int(rng.integers(4, 13))
            doses = rng.integers(0, 5, n)
            y = rng.integers(0, 2, n)
            data = [(LABELS.values[d], int(v)) for d, v in zip(doses, y)]
            if classify_separation(data) is SeparationClass.OVERLAP:
                break
        trial = TrialData()
        for d, v in zip(doses, y):
            trial.add_cohort(int(d), [int(v)])
        result = fit("probit", WorkingModel.probit2(), LABELS, trial)
        assert not result.diagnostics.separation
        assert not result.diagnostics.boundary_parameter
        assert abs(result.params.intercept) < 8.0


class TestJointFits:
    def make_joint_data(self, seed=0, rho_b=0.0):
        from jointcrm.profiles import (
            SCENARIOS,
            GenerationParams,
            ProfileRealizer,
            draw_latent,
        )

        gen = GenerationParams(rho_b=rho_b)
        realizer = ProfileRealizer(SCENARIOS["S2"], gen, LABELS)
        data = TrialData()
        for i in range(18):
            prof = realizer.realize(draw_latent(gen, RngStream(seed, i)))
            dose = i % 5
            data.add_cohort(dose, [int(prof.y_b[dose])], [prof.y_c[dose]])
        return data

    def test_joint2d_zero_association_matches_probit_selection(self):
        data = self.make_joint_data(seed=3)
        probit = fit("probit", WorkingModel.probit2(), LABELS, data)
        joint = fit("joint2d", WorkingModel.probit2(), LABELS, data)
        assert select_target(joint.curve, 0.3) == select_target(probit.curve, 0.3)

    def test_joint2d_quasi_binary_with_noise_biomarker_keeps_step(self):
        from jointcrm.profiles import GenerationParams

        data = quasi_data()
        rng = RngStream(11)
        gen = GenerationParams(rho_b=0.0)
        data.biomarkers = [
            gen.mean_matrix(LABELS)[d] + rng.standard_normal(8)
            for d in data.dose_idx
        ]
        probit = fit("probit", WorkingModel.probit2(), LABELS, data)
        joint = fit("joint2d", WorkingModel.probit2(), LABELS, data)
        assert select_target(joint.curve, 0.3) == select_target(probit.curve, 0.3) == 1

    def test_joint9d_fit_recovers_association_sign(self):
        data = self.make_joint_data(seed=5, rho_b=0.8)
        result = fit("joint9d", WorkingModel.probit2(), LABELS, data)
        assert 0.0 <= result.params.association < 1.0
        assert result.params.biomarker.sigma > 0
        assert -1.0 < result.params.biomarker.rho_time < 1.0

    def test_joint_fit_requires_biomarkers(self):
        with pytest.raises(ValueError):
            fit("joint2d", WorkingModel.probit2(), LABELS, quasi_data())

    def test_diagnostics_are_curve_functions(self):
        data = self.make_joint_data(seed=7)
        a = fit("joint9d", WorkingModel.probit2(), LABELS, data)
        b = fit("joint9d", WorkingModel.probit2(), LABELS, data)
        assert np.allclose(a.curve, b.curve)
        assert a.diagnostics == b.diagnostics


class TestOneParameterFits:
    def test_empiric_fit_matches_closed_form(self):
        # empiric MLE: sum y log p^s + (1-y) log(1-p^s); single dose closes over s
        labels = backward_fit_labels(DEFAULT_SKELETON, WorkingModel.empiric())
        data = TrialData()
        data.add_cohort(2, [1, 0, 0, 0, 0, 0])  # 1/6 at p0 = 0.45
        result = fit("empiric", WorkingModel.empiric(), labels, data)
        # pi(d3) should equal the empirical rate 1/6 at the optimum
        assert result.curve[2] == pytest.approx(1 / 6, abs=1e-4)

    def test_probit1_curve_respects_reference_dose(self):
        labels = backward_fit_labels(DEFAULT_SKELETON, WorkingModel.probit1(0.0))
        data = TrialData()
        data.add_cohort(0, [0, 0, 1])
        data.add_cohort(1, [1, 0, 0])
        result = fit("probit1", WorkingModel.probit1(0.0), labels, data)
        assert np.all(result.curve[np.asarray(labels.values) < 0] < 0.5)
        assert np.all(result.curve[np.asarray(labels.values) > 0] > 0.5)
