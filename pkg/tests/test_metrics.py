import json
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clickbait_hybrid.metrics import compute_metrics

from reference import confusion_reference


FIXTURE_PROBS = [0.9, 0.8, 0.2, 0.7] + [0.1] * 6
FIXTURE_LABELS = [1, 1, 1, 0] + [0] * 6


class TestExactValues:
    def test_hand_computed_fixture(self):
        report = compute_metrics(FIXTURE_PROBS, FIXTURE_LABELS, threshold=0.5)
        assert (report.tp, report.fp, report.tn, report.fn) == (2, 1, 6, 1)
        assert report.precision == pytest.approx(2.0 / 3.0)
        assert report.recall == pytest.approx(2.0 / 3.0)
        assert report.f1 == pytest.approx(2.0 / 3.0)
        assert report.accuracy == pytest.approx(0.8)

    def test_mse_is_mean_squared_error_on_raw_probabilities(self):
        report = compute_metrics([0.9, 0.2], [1, 0], threshold=0.5)
        assert report.mse == pytest.approx((0.1**2 + 0.2**2) / 2.0)

    def test_probability_equal_to_threshold_is_positive(self):
        report = compute_metrics([0.5], [1], threshold=0.5)
        assert report.tp == 1 and report.fn == 0

    def test_perfect_predictions(self):
        report = compute_metrics([0.99, 0.01], [1, 0])
        assert report.precision == report.recall == report.f1 == report.accuracy == 1.0

    def test_f1_is_harmonic_mean_of_precision_and_recall(self):
        report = compute_metrics(FIXTURE_PROBS, FIXTURE_LABELS)
        expected = 2 * report.precision * report.recall / (report.precision + report.recall)
        assert report.f1 == pytest.approx(expected, abs=1e-15)


class TestAgainstBruteForceOracle:
    def test_thousand_random_cases(self):
        generator = np.random.default_rng(50)
        for _ in range(1000):
            n = int(generator.integers(1, 30))
            probs = generator.uniform(0, 1, n).tolist()
            labels = generator.integers(0, 2, n).tolist()
            threshold = float(generator.uniform(0.1, 0.9))
            expected = confusion_reference(probs, labels, threshold)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                report = compute_metrics(probs, labels, threshold=threshold)
            assert (report.tp, report.fp, report.tn, report.fn) == (
                expected["tp"],
                expected["fp"],
                expected["tn"],
                expected["fn"],
            )
            total = expected["tp"] + expected["fp"] + expected["tn"] + expected["fn"]
            assert total == n
            assert report.accuracy == pytest.approx((expected["tp"] + expected["tn"]) / n)


class TestProperties:
    @settings(max_examples=40, deadline=None)
    @given(
        st.lists(
            st.tuples(st.floats(min_value=0, max_value=1), st.integers(0, 1)),
            min_size=1,
            max_size=25,
        ),
        st.randoms(use_true_random=False),
    )
    def test_permutation_invariance(self, pairs, shuffler):
        probs = [p for p, _ in pairs]
        labels = [label for _, label in pairs]
        shuffled = pairs[:]
        shuffler.shuffle(shuffled)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            a = compute_metrics(probs, labels)
            b = compute_metrics([p for p, _ in shuffled], [label for _, label in shuffled])
        assert (a.tp, a.fp, a.tn, a.fn) == (b.tp, b.fp, b.tn, b.fn)
        assert a.f1 == pytest.approx(b.f1) and a.mse == pytest.approx(b.mse)

    def test_threshold_preserving_rescale_keeps_classification_metrics(self):
        # shrink every probability toward the threshold without crossing it:
        # confusion counts cannot change, but MSE must
        threshold = 0.5
        rescaled = [threshold + (p - threshold) * 0.5 for p in FIXTURE_PROBS]
        base = compute_metrics(FIXTURE_PROBS, FIXTURE_LABELS, threshold=threshold)
        moved = compute_metrics(rescaled, FIXTURE_LABELS, threshold=threshold)
        assert (base.tp, base.fp, base.tn, base.fn) == (moved.tp, moved.fp, moved.tn, moved.fn)
        assert base.f1 == pytest.approx(moved.f1)
        assert base.accuracy == pytest.approx(moved.accuracy)
        assert base.mse != pytest.approx(moved.mse)


class TestDegenerateCases:
    def test_no_predicted_positives_warns_and_reports_zero_precision(self):
        with pytest.warns(UserWarning):
            report = compute_metrics([0.1, 0.2], [1, 0])
        assert report.precision == 0.0 and report.f1 == 0.0

    def test_no_actual_positives_warns_and_reports_zero_recall(self):
        with pytest.warns(UserWarning):
            report = compute_metrics([0.9, 0.1], [0, 0])
        assert report.recall == 0.0

    def test_all_correct_negatives_still_warn_for_f1(self):
        with pytest.warns(UserWarning):
            report = compute_metrics([0.1, 0.2], [0, 0])
        assert report.accuracy == 1.0 and report.f1 == 0.0


class TestValidation:
    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            compute_metrics([0.5], [1, 0])

    def test_empty_inputs(self):
        with pytest.raises(ValueError):
            compute_metrics([], [])

    def test_label_outside_binary(self):
        with pytest.raises(ValueError):
            compute_metrics([0.5], [2])

    def test_probability_outside_unit_interval(self):
        with pytest.raises(ValueError):
            compute_metrics([1.5], [1])


class TestReportOutput:
    def test_to_dict_structure_and_json_serializable(self):
        report = compute_metrics(FIXTURE_PROBS, FIXTURE_LABELS)
        payload = report.to_dict()
        assert payload["counts"] == {"tp": 2, "fp": 1, "tn": 6, "fn": 1}
        for key in ("precision", "recall", "f1", "accuracy", "mse"):
            assert key in payload
        json.dumps(payload)  # must not raise

    def test_to_text_mentions_every_metric(self):
        text = compute_metrics(FIXTURE_PROBS, FIXTURE_LABELS).to_text()
        for key in ("precision", "recall", "f1", "accuracy", "mse", "tp", "fn"):
            assert key in text
        assert "0.666667" in text  # six decimals
