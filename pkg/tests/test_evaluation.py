"""Metric arithmetic and k-NN label projection against brute force."""

import numpy as np
import pytest

from protomap import (
    Confusion,
    ValidationError,
    confusion,
    format_report,
    metrics,
    project_labels_knn,
)


def knn_oracle(gt_points, gt_labels, targets, k):
    """All-pairs distances, majority vote, ties to the smallest label."""
    out = np.empty(len(targets), np.int64)
    for i, t in enumerate(targets):
        dists = np.linalg.norm(gt_points - t, axis=1)
        nearest = np.argsort(dists, kind="stable")[: min(k, len(gt_points))]
        votes = {}
        for j in nearest:
            votes[gt_labels[j]] = votes.get(gt_labels[j], 0) + 1
        best = max(votes.values())
        out[i] = min(lab for lab, v in votes.items() if v == best)
    return out


def test_hand_case_confusion_and_metrics():
    m = metrics(Confusion(tp=3, fp=1, fn=1, tn=0))
    assert m.iou == pytest.approx(0.60)
    assert m.pre == pytest.approx(0.75)
    assert m.rec == pytest.approx(0.75)
    assert m.fsc == pytest.approx(0.75)


def test_perfect_prediction_scores_ones():
    rng = np.random.default_rng(0)
    pred = rng.random((10, 10)) > 0.5
    m = metrics(confusion(pred, pred.copy()))
    assert (m.iou, m.fsc, m.pre, m.rec) == (1.0, 1.0, 1.0, 1.0)


def test_all_zero_counts_define_metrics_as_zero():
    m = metrics(Confusion(tp=0, fp=0, fn=0, tn=25))
    assert (m.iou, m.fsc, m.pre, m.rec) == (0.0, 0.0, 0.0, 0.0)


def test_all_false_positives():
    pred = np.ones(4, bool)
    gt = np.zeros(4, bool)
    c = confusion(pred, gt)
    assert (c.tp, c.fp, c.fn, c.tn) == (0, 4, 0, 0)


def test_confusion_matches_elementwise_recount():
    rng = np.random.default_rng(1)
    pred = rng.random(200) > 0.4
    gt = rng.random(200) > 0.6
    c = confusion(pred, gt)
    tp = sum(1 for p, g in zip(pred, gt) if p and g)
    fp = sum(1 for p, g in zip(pred, gt) if p and not g)
    fn = sum(1 for p, g in zip(pred, gt) if not p and g)
    tn = sum(1 for p, g in zip(pred, gt) if not p and not g)
    assert (c.tp, c.fp, c.fn, c.tn) == (tp, fp, fn, tn)
    assert c.total == 200


def test_metrics_permutation_invariant():
    rng = np.random.default_rng(2)
    pred = rng.random(100) > 0.5
    gt = rng.random(100) > 0.5
    perm = rng.permutation(100)
    assert metrics(confusion(pred, gt)) == metrics(confusion(pred[perm], gt[perm]))


def test_iou_never_exceeds_precision_or_recall():
    rng = np.random.default_rng(3)
    for trial in range(50):
        pred = rng.random(60) > rng.random()
        gt = rng.random(60) > rng.random()
        m = metrics(confusion(pred, gt))
        if m.pre > 0 or m.rec > 0:
            assert m.iou <= min(p for p in (m.pre, m.rec) if p > 0) + 1e-12
        assert m.iou <= m.fsc + 1e-12


def test_confusion_rejects_shape_mismatch():
    with pytest.raises(ValidationError):
        confusion(np.ones((2, 3), bool), np.ones((3, 2), bool))


def test_knn_projection_matches_oracle_on_100_points():
    rng = np.random.default_rng(4)
    gt_points = rng.standard_normal((100, 3))
    gt_labels = rng.integers(0, 4, 100)
    targets = rng.standard_normal((100, 3))
    got = project_labels_knn(gt_points, gt_labels, targets, k=5)
    assert np.array_equal(got, knn_oracle(gt_points, gt_labels, targets, 5))


def test_knn_majority_simple_case():
    # five gt points stacked near the target: labels 1,1,1,2,2
    gt_points = np.array(
        [[0.1, 0, 0], [0.2, 0, 0], [0.3, 0, 0], [0.4, 0, 0], [0.5, 0, 0]], np.float64
    )
    gt_labels = np.array([1, 1, 1, 2, 2])
    out = project_labels_knn(gt_points, gt_labels, np.zeros((1, 3)), k=5)
    assert out[0] == 1


def test_knn_vote_tie_breaks_to_smaller_label():
    gt_points = np.array([[1.0, 0, 0], [2.0, 0, 0], [3.0, 0, 0], [4.0, 0, 0]], np.float64)
    gt_labels = np.array([3, 3, 1, 1])
    out = project_labels_knn(gt_points, gt_labels, np.zeros((1, 3)), k=4)
    assert out[0] == 1


def test_knn_clamps_k_to_available_points():
    gt_points = np.array([[0.0, 0, 0], [1.0, 0, 0]], np.float64)
    gt_labels = np.array([1, 1])
    out = project_labels_knn(gt_points, gt_labels, np.zeros((3, 3)), k=5)
    assert np.array_equal(out, [1, 1, 1])


def test_knn_k1_copies_nearest_label():
    rng = np.random.default_rng(5)
    gt_points = rng.standard_normal((20, 3))
    gt_labels = rng.integers(0, 5, 20)
    targets = rng.standard_normal((10, 3))
    got = project_labels_knn(gt_points, gt_labels, targets, k=1)
    assert np.array_equal(got, knn_oracle(gt_points, gt_labels, targets, 1))


def test_knn_rejects_empty_ground_truth_and_bad_k():
    with pytest.raises(ValidationError):
        project_labels_knn(np.zeros((0, 3)), np.zeros(0, int), np.zeros((1, 3)), k=5)
    with pytest.raises(ValidationError):
        project_labels_knn(np.zeros((2, 3)), np.zeros(2, int), np.zeros((1, 3)), k=0)


def test_format_report_shows_percentages():
    line = format_report("scene", metrics(Confusion(tp=3, fp=1, fn=1, tn=0)))
    assert line == "scene: iou=60.00 fsc=75.00 pre=75.00 rec=75.00"
