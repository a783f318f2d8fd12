import logging
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from litriage.metrics import (
    auc_aggregate,
    auc_binary,
    confusion_matrix,
    evaluate_multiclass,
    evaluate_multilabel,
    load_report,
    multiclass_metrics,
    multilabel_micro_metrics,
    save_report,
)


def pairwise_auc_oracle(scores, gold):
    """O(n^2) concordance count: ties worth one half."""
    positives = [s for s, g in zip(scores, gold) if g == 1]
    negatives = [s for s, g in zip(scores, gold) if g == 0]
    total = 0.0
    for p in positives:
        for n in negatives:
            if p > n:
                total += 1.0
            elif p == n:
                total += 0.5
    return total / (len(positives) * len(negatives))


class TestConfusion:
    def test_perfect_predictions_are_diagonal(self):
        matrix = confusion_matrix([0, 1, 2, 1], [0, 1, 2, 1], 3)
        assert np.array_equal(matrix, np.diag([1, 2, 1]))

    def test_hand_counted_fixture(self):
        matrix = confusion_matrix([0, 0, 1, 1], [0, 1, 1, 1], 2)
        assert matrix.tolist() == [[1, 1], [0, 2]]

    def test_entries_sum_to_record_count(self):
        rng = random.Random(0)
        gold = [rng.randrange(4) for _ in range(50)]
        pred = [rng.randrange(4) for _ in range(50)]
        assert confusion_matrix(gold, pred, 4).sum() == 50

    def test_empty_input_gives_zero_matrix_and_metrics_error(self):
        matrix = confusion_matrix([], [], 3)
        assert matrix.sum() == 0
        with pytest.raises(ValueError):
            multiclass_metrics(matrix)

    def test_out_of_range_label_names_record(self):
        with pytest.raises(ValueError, match="record 1"):
            confusion_matrix([0, 5], [0, 0], 2)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            confusion_matrix([0], [0, 1], 2)


class TestMulticlassMetrics:
    def test_perfect_predictions_all_ones(self):
        report = multiclass_metrics(np.diag([3, 4]))
        assert report.accuracy == report.precision == report.recall == report.f1 == 1.0

    def test_reference_fixture(self):
        report = multiclass_metrics([[1, 1], [0, 2]])
        assert report.accuracy == pytest.approx(0.75, abs=1e-9)
        label0, label1 = report.per_label
        assert (label0.precision, label0.recall) == (1.0, 0.5)
        assert label0.f1 == pytest.approx(2 / 3, abs=1e-9)
        assert label1.precision == pytest.approx(2 / 3, abs=1e-9)
        assert label1.recall == 1.0
        assert label1.f1 == pytest.approx(0.8, abs=1e-9)

    def test_zero_support_label_scores_zero_with_zero_weight(self):
        # Gold never contains label 2; a stray prediction lands there.
        report = multiclass_metrics([[2, 0, 1], [0, 3, 0], [0, 0, 0]])
        stray = report.per_label[2]
        assert (stray.precision, stray.recall, stray.f1) == (0.0, 0.0, 0.0)
        assert stray.support == 0
        expected = (3 / 6) * report.per_label[0].f1 + (3 / 6) * report.per_label[1].f1
        assert report.f1 == pytest.approx(expected, abs=1e-12)

    def test_macro_average_available(self):
        weighted = multiclass_metrics([[5, 0], [2, 1]], average="weighted")
        macro = multiclass_metrics([[5, 0], [2, 1]], average="macro")
        assert weighted.f1 != macro.f1

    def test_supports_sum_to_record_count(self):
        report = multiclass_metrics([[1, 2], [3, 4]])
        assert sum(m.support for m in report.per_label) == report.record_count == 10

    @settings(max_examples=100)
    @given(
        pairs=st.lists(
            st.tuples(st.integers(0, 3), st.integers(0, 3)), min_size=1, max_size=60
        )
    )
    def test_f1_bounded_by_precision_and_recall(self, pairs):
        # Harmonic mean lies between min and max of the pair.
        gold, pred = zip(*pairs)
        report = multiclass_metrics(confusion_matrix(gold, pred, 4))
        for m in report.per_label:
            if m.precision > 0 and m.recall > 0:
                assert m.f1 <= max(m.precision, m.recall) + 1e-12
                assert m.f1 >= min(m.precision, m.recall) - 1e-12


class TestMicro:
    def test_identical_sets_all_ones(self):
        sets = [{0, 1}, {2}, set(), {1}]
        assert multilabel_micro_metrics(sets, sets, 3) == (1.0, 1.0, 1.0)

    def test_pooled_fixture(self):
        # TP=2, FP=0, FN=1 by hand.
        precision, recall, f1 = multilabel_micro_metrics([{0}, {1}], [{0, 1}, {1}], 2)
        assert precision == 1.0
        assert recall == pytest.approx(2 / 3, abs=1e-9)
        assert f1 == pytest.approx(0.8, abs=1e-9)

    def test_zero_over_zero_is_zero_with_warning(self, caplog):
        with caplog.at_level(logging.WARNING, logger="litriage.metrics"):
            assert multilabel_micro_metrics([set()], [set()], 2) == (0.0, 0.0, 0.0)
        assert any("0/0" in m for m in caplog.messages)

    @settings(max_examples=100)
    @given(
        pairs=st.lists(
            st.tuples(st.integers(0, 4), st.integers(0, 4)), min_size=1, max_size=40
        )
    )
    def test_micro_f1_equals_accuracy_for_singleton_sets(self, pairs):
        gold, pred = zip(*pairs)
        accuracy = sum(g == p for g, p in pairs) / len(pairs)
        _, _, f1 = multilabel_micro_metrics([{p} for p in pred], [{g} for g in gold], 5)
        assert abs(f1 - accuracy) <= 1e-12


class TestAucBinary:
    def test_reference_fixture(self):
        assert auc_binary([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == 0.75

    def test_perfect_separation(self):
        assert auc_binary([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0

    def test_all_ties_give_half(self):
        assert auc_binary([0.5, 0.5, 0.5, 0.5], [0, 1, 0, 1]) == 0.5

    def test_single_class_undefined(self):
        with pytest.raises(ValueError, match="single class"):
            auc_binary([0.1, 0.9], [1, 1])

    def test_non_binary_gold_rejected(self):
        with pytest.raises(ValueError):
            auc_binary([0.1, 0.9], [0, 2])

    def test_matches_pairwise_oracle_randomized(self):
        rng = random.Random(5)
        for _ in range(50):
            n = rng.randint(4, 30)
            scores = [rng.choice([0.1, 0.3, 0.5, 0.7, 0.9]) for _ in range(n)]
            gold = [rng.randint(0, 1) for _ in range(n)]
            if len(set(gold)) < 2:
                continue
            assert auc_binary(scores, gold) == pytest.approx(
                pairwise_auc_oracle(scores, gold), abs=1e-12
            )

    def test_invariant_under_strictly_increasing_transform(self):
        rng = random.Random(9)
        scores = [rng.random() for _ in range(30)]
        gold = [rng.randint(0, 1) for _ in range(30)]
        gold[0], gold[1] = 0, 1
        base = auc_binary(scores, gold)
        assert auc_binary([3.0 * s + 1.0 for s in scores], gold) == base
        assert auc_binary([s**3 for s in scores], gold) == base

    def test_swapping_classes_complements(self):
        rng = random.Random(3)
        scores = [rng.choice([0.2, 0.5, 0.8]) for _ in range(20)]
        gold = [rng.randint(0, 1) for _ in range(20)]
        gold[0], gold[1] = 0, 1
        swapped = [1 - g for g in gold]
        assert auc_binary(scores, swapped) == pytest.approx(
            1.0 - auc_binary(scores, gold), abs=1e-12
        )


class TestAucAggregate:
    def test_two_class_macro_reduces_to_binary(self):
        rows = [[0.8, 0.2], [0.3, 0.7], [0.6, 0.4], [0.1, 0.9]]
        gold = [0, 1, 0, 1]
        value, per_label = auc_aggregate(rows, gold, "multiclass")
        direct = auc_binary([row[1] for row in rows], gold)
        assert per_label[1] == direct
        assert value == pytest.approx(direct, abs=1e-12)  # complement symmetry

    def test_single_class_labels_skipped_with_warning(self, caplog):
        rows = [[0.5, 0.3, 0.2], [0.2, 0.5, 0.3], [0.4, 0.4, 0.2]]
        gold = [0, 1, 0]  # label 2 never appears
        with caplog.at_level(logging.WARNING, logger="litriage.metrics"):
            _, per_label = auc_aggregate(rows, gold, "multiclass")
        assert per_label[2] is None
        assert any("single-class" in m for m in caplog.messages)

    def test_all_single_class_is_error(self):
        with pytest.raises(ValueError):
            auc_aggregate([[1.0, 0.0]], [0], "multiclass")

    def test_multilabel_micro_pools_record_label_pairs(self):
        rows = [[0.9, 0.1], [0.2, 0.8]]
        gold = [{0}, {1}]
        value, _ = auc_aggregate(rows, gold, "multilabel")
        flat_scores = [0.9, 0.1, 0.2, 0.8]
        flat_gold = [1, 0, 0, 1]
        assert value == auc_binary(flat_scores, flat_gold)

    def test_multiclass_matches_per_label_oracle_randomized(self):
        rng = random.Random(21)
        for _ in range(20):
            n, c = rng.randint(6, 25), rng.randint(2, 5)
            rows = [[rng.random() for _ in range(c)] for _ in range(n)]
            gold = [rng.randrange(c) for _ in range(n)]
            try:
                _, per_label = auc_aggregate(rows, gold, "multiclass")
            except ValueError:
                continue
            for j in range(c):
                binary_gold = [1 if g == j else 0 for g in gold]
                if len(set(binary_gold)) < 2:
                    assert per_label[j] is None
                else:
                    expected = pairwise_auc_oracle([row[j] for row in rows], binary_gold)
                    assert per_label[j] == pytest.approx(expected, abs=1e-12)


class TestComposersAndIO:
    def test_multiclass_report_round_trip(self, tmp_path):
        report = evaluate_multiclass(
            [0, 1, 1, 0], [0, 1, 0, 0], ["x", "y"],
            score_rows=[[0.8, 0.2], [0.3, 0.7], [0.6, 0.4], [0.9, 0.1]],
        )
        path = tmp_path / "report.json"
        save_report(report, path)
        assert load_report(path) == report

    def test_multilabel_report_has_micro_values(self):
        report = evaluate_multilabel([{0, 1}, {1}], [{0}, {1}], ["x", "y"])
        assert report.accuracy is None
        assert report.precision == 1.0
        assert report.f1 == pytest.approx(0.8, abs=1e-9)
        assert report.confusion is None
