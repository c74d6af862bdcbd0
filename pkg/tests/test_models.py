import numpy as np
import pytest

from jointcrm.models import (
    DEFAULT_SKELETON,
    DoseLabels,
    Skeleton,
    ToxicityParams,
    WorkingModel,
    backward_fit_labels,
    select_target,
    toxicity_prob,
)
from jointcrm.numerics import normal_cdf


class TestBackwardFitLabels:
    def test_empiric_labels_are_skeleton(self):
        labels = backward_fit_labels(DEFAULT_SKELETON, WorkingModel.empiric())
        assert labels.values == DEFAULT_SKELETON.probs

    def test_probit2_labels(self):
        labels = backward_fit_labels(DEFAULT_SKELETON, WorkingModel.probit2())
        expected = (-0.6745, -0.3853, -0.1257, 0.1257, 0.3853)
        assert np.allclose(labels.values, expected, atol=1e-4)

    def test_probit1_labels_are_shifted(self):
        base = backward_fit_labels(DEFAULT_SKELETON, WorkingModel.probit2())
        shifted = backward_fit_labels(DEFAULT_SKELETON, WorkingModel.probit1(0.5))
        assert np.allclose(
            np.asarray(shifted.values), np.asarray(base.values) - 0.5, atol=1e-12
        )

    @pytest.mark.parametrize(
        "model",
        [WorkingModel.empiric(), WorkingModel.probit1(0.5), WorkingModel.probit2()],
    )
    def test_roundtrip_reproduces_skeleton(self, model):
        labels = backward_fit_labels(DEFAULT_SKELETON, model)
        probs = [
            toxicity_prob(model, ToxicityParams(0.0, 0.0), x) for x in labels.values
        ]
        assert np.allclose(probs, DEFAULT_SKELETON.probs, atol=1e-10)

    def test_labels_strictly_increasing(self):
        for model in (WorkingModel.empiric(), WorkingModel.probit1(3.0), WorkingModel.probit2()):
            labels = backward_fit_labels(DEFAULT_SKELETON, model)
            assert np.all(np.diff(labels.values) > 0)


class TestToxicityProb:
    def test_probit2_at_origin(self):
        assert toxicity_prob(WorkingModel.probit2(), ToxicityParams(0.0, 0.0), 0.0) == 0.5

    def test_probit1_reference_dose(self):
        for slope_log in (-1.0, 0.0, 2.0):
            p = toxicity_prob(
                WorkingModel.probit1(0.5), ToxicityParams(0.0, slope_log), 0.0
            )
            assert abs(p - 0.691) <= 5e-4

    def test_empiric_identity_at_initial_guess(self):
        assert toxicity_prob(
            WorkingModel.empiric(), ToxicityParams(0.0, 0.0), 0.25
        ) == pytest.approx(0.25)

    def test_nondecreasing_in_label(self):
        xs = np.linspace(-2, 2, 50)
        for model in (WorkingModel.probit2(), WorkingModel.probit1(1.0)):
            for slope_log in (-2.0, 0.0, 1.5):
                probs = toxicity_prob(model, ToxicityParams(0.3, slope_log), xs)
                assert np.all(np.diff(probs) >= 0)


class TestProbit1Dichotomization:
    def test_reference_dose_divides_curve(self):
        # fitted probability sits below Phi(a0) exactly when the label is negative
        for a0 in (0.0, 0.5, 1.0, 3.0):
            model = WorkingModel.probit1(a0)
            pivot = normal_cdf(a0)
            for slope_log in (-3.0, -1.0, 0.0, 1.0, 2.5):
                params = ToxicityParams(0.0, slope_log)
                for x in (-2.0, -0.3, -1e-9, 1e-9, 0.4, 2.0):
                    p = toxicity_prob(model, params, x)
                    assert (p < pivot) == (x < 0)


class TestSelectTarget:
    def test_simple_argmin(self):
        assert select_target([0.1, 0.3, 0.5, 0.7, 0.9], 0.3) == 1

    def test_tie_breaks_to_lower_dose(self):
        assert select_target([0.2, 0.4, 0.6, 0.8, 0.9], 0.3) == 0

    def test_step_curve_anchors_at_second_dose(self):
        # anchored step fit: lowest dose pinned near 0, upper doses near 1
        assert select_target([0.001, 0.12, 0.9999, 1.0, 1.0], 0.3) == 1

    def test_depends_only_on_curve_values(self):
        curve = [0.05, 0.22, 0.41, 0.58, 0.83]
        assert select_target(curve, 0.3) == select_target(list(curve), 0.3) == 1


class TestValidation:
    def test_skeleton_must_increase(self):
        with pytest.raises(ValueError):
            Skeleton((0.3, 0.2, 0.5))

    def test_skeleton_must_be_probabilities(self):
        with pytest.raises(ValueError):
            Skeleton((0.0, 0.5))

    def test_labels_must_increase(self):
        with pytest.raises(ValueError):
            DoseLabels((0.1, 0.1, 0.3))
