"""Metric computations against hand confusion matrices; comparison tables."""

import numpy as np
import pytest

from seqdx.episode import EpisodeRecord
from seqdx.errors import EmptyRecords
from seqdx.metrics import compare_reports, compute_metrics, histogram_csv


def _record(true, pred, steps=1, cid="c"):
    return EpisodeRecord(case_id=cid, true_label=true, predicted=pred,
                         steps_taken=steps, actions=("t",) * steps,
                         stop_reason="horizon", confidence_at_stop=0.5)


def test_perfect_predictions():
    records = [_record(k, k) for k in (0, 1, 0, 1)]
    report = compute_metrics(records, num_classes=2)
    assert report.overall_accuracy == 1.0
    assert report.per_class_accuracy == (1.0, 1.0)
    assert report.macro_f1 == 1.0 and report.weighted_f1 == 1.0


def test_hand_confusion_matrix():
    # labels [A,A,B,B], preds [A,A,A,B]
    records = [_record(0, 0), _record(0, 0), _record(1, 0), _record(1, 1)]
    report = compute_metrics(records, num_classes=2)
    assert report.overall_accuracy == pytest.approx(0.75)
    assert report.per_class_accuracy[0] == pytest.approx(1.0)
    assert report.per_class_accuracy[1] == pytest.approx(0.5)
    # F1(A): precision 2/3, recall 1 -> 0.8; F1(B): precision 1, recall 0.5 -> 2/3
    assert report.macro_f1 == pytest.approx((0.8 + 2 / 3) / 2, abs=1e-12)
    assert report.macro_f1 == pytest.approx(0.7333, abs=1e-4)
    assert report.weighted_f1 == pytest.approx((0.8 * 2 + (2 / 3) * 2) / 4, abs=1e-12)


def test_histogram_and_mean_tests():
    records = [_record(0, 0, steps=s, cid=f"c{i}")
               for i, s in enumerate((1, 1, 2, 3))]
    report = compute_metrics(records, num_classes=2)
    assert report.termination_histogram == {1: 2, 2: 1, 3: 1}
    assert sum(report.termination_histogram.values()) == report.n_cases == 4
    assert report.mean_tests_per_case == pytest.approx(1.75)


def test_absent_class_scores_zero():
    records = [_record(0, 0), _record(0, 0)]
    report = compute_metrics(records, num_classes=3)
    assert report.per_class_accuracy[1] == 0.0
    assert report.per_class_accuracy[2] == 0.0
    assert report.overall_accuracy == 1.0


def test_overall_equals_support_weighted_per_class():
    rng = np.random.default_rng(0)
    records = [_record(int(rng.integers(3)), int(rng.integers(3)), cid=str(i))
               for i in range(200)]
    report = compute_metrics(records, num_classes=3)
    support = np.bincount([r.true_label for r in records], minlength=3)
    weighted = sum(s * a for s, a in zip(support, report.per_class_accuracy)) / 200
    assert report.overall_accuracy == pytest.approx(weighted, abs=1e-12)


def test_macro_f1_invariant_to_relabeling():
    rng = np.random.default_rng(1)
    records = [_record(int(rng.integers(3)), int(rng.integers(3)), cid=str(i))
               for i in range(300)]
    report = compute_metrics(records, num_classes=3)
    perm = {0: 2, 1: 0, 2: 1}
    permuted = [_record(perm[r.true_label], perm[r.predicted], cid=r.case_id)
                for r in records]
    report_p = compute_metrics(permuted, num_classes=3)
    assert report.macro_f1 == pytest.approx(report_p.macro_f1, abs=1e-12)
    assert report.macro_accuracy == pytest.approx(report_p.macro_accuracy, abs=1e-12)


def test_concatenation_equals_merged_counts():
    rng = np.random.default_rng(2)
    part_a = [_record(int(rng.integers(2)), int(rng.integers(2)), cid=f"a{i}")
              for i in range(50)]
    part_b = [_record(int(rng.integers(2)), int(rng.integers(2)), cid=f"b{i}")
              for i in range(70)]
    merged = compute_metrics(part_a + part_b, num_classes=2)
    ra = compute_metrics(part_a, num_classes=2)
    rb = compute_metrics(part_b, num_classes=2)
    total_correct = ra.overall_accuracy * 50 + rb.overall_accuracy * 70
    assert merged.overall_accuracy == pytest.approx(total_correct / 120, abs=1e-12)
    assert merged.n_cases == 120


def test_empty_records_raises():
    with pytest.raises(EmptyRecords):
        compute_metrics([], num_classes=2)


def test_compare_identical_reports_no_strict_best():
    records = [_record(0, 0), _record(1, 0)]
    report = compute_metrics(records, num_classes=2)
    table = compare_reports([("x", report), ("y", report)])
    assert not table.best.any()


def test_compare_row_order_and_best_flags():
    good = compute_metrics([_record(0, 0), _record(1, 1)], num_classes=2)
    bad = compute_metrics([_record(0, 1), _record(1, 0)], num_classes=2)
    mid = compute_metrics([_record(0, 0), _record(1, 0)], num_classes=2)
    table = compare_reports([("LDTL", good), ("w/o LP", mid), ("RS", bad)])
    assert table.names == ("LDTL", "w/o LP", "RS")
    assert "overall_accuracy" in table.metric_names
    col = table.metric_names.index("overall_accuracy")
    assert table.best[0, col] and not table.best[1, col] and not table.best[2, col]
    csv = table.to_csv()
    assert csv.splitlines()[0].startswith("method,overall_accuracy")
    assert "LDTL" in csv and "RS" in csv
    text = table.to_text()
    assert "LDTL" in text and "*" in text


def test_mean_tests_column_prefers_fewer():
    fast = compute_metrics([_record(0, 0, steps=1)], num_classes=2)
    slow = compute_metrics([_record(0, 0, steps=3)], num_classes=2)
    table = compare_reports([("fast", fast), ("slow", slow)])
    col = table.metric_names.index("mean_tests_per_case")
    assert table.best[0, col] and not table.best[1, col]


def test_histogram_csv_shape():
    a = compute_metrics([_record(0, 0, steps=1), _record(0, 0, steps=2, cid="d")],
                        num_classes=2)
    b = compute_metrics([_record(0, 0, steps=3)], num_classes=2)
    csv = histogram_csv([("m1", a), ("m2", b)])
    lines = csv.strip().splitlines()
    assert lines[0] == "method,steps,count"
    assert "m1,1,1" in lines and "m1,2,1" in lines and "m2,3,1" in lines
    assert len(lines) == 1 + 2 + 1  # one row per (method, step)
