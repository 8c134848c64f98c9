import numpy as np
import pytest

import oracles
from maskflow import (
    DimensionError,
    aggregate,
    boundary_f_score,
    jaccard_per_class,
    pixel_accuracy,
    pixel_f_score,
    score_frame,
)

GT = np.array([[0, 0], [1, 1]])
PRED = np.array([[0, 1], [1, 1]])


def test_jaccard_hand_fixture():
    j = jaccard_per_class(PRED, GT, 2)
    assert j[0] == 0.5
    assert abs(j[1] - 2 / 3) < 1e-12
    assert abs(np.nanmean(j) - 7 / 12) < 1e-12  # 0.58333...


def test_jaccard_identity_and_disjoint():
    assert np.allclose(jaccard_per_class(GT, GT, 2), [1.0, 1.0])
    a = np.zeros((2, 2), int)
    b = np.ones((2, 2), int)
    j = jaccard_per_class(a, b, 2)
    assert j[0] == 0.0 and j[1] == 0.0


def test_jaccard_excludes_absent_class():
    j = jaccard_per_class(GT, GT, 5)
    assert np.isnan(j[2:]).all()


def test_f1_hand_fixture():
    f = pixel_f_score(PRED, GT, 2)
    assert abs(f[0] - 2 / 3) < 1e-12
    assert abs(f[1] - 0.8) < 1e-12
    assert abs(np.nanmean(f) - 11 / 15) < 1e-12  # 0.73333...


def test_f1_perfect_and_missing():
    assert np.allclose(pixel_f_score(GT, GT, 2), [1.0, 1.0])
    pred = np.zeros((2, 2), int)  # class 1 predicted nowhere
    f = pixel_f_score(pred, GT, 2)
    assert f[1] == 0.0


def test_pixel_accuracy_fixture():
    assert pixel_accuracy(PRED, GT) == 0.75
    assert pixel_accuracy(GT, GT) == 1.0
    assert pixel_accuracy(1 - GT, GT) == 0.0


def test_metrics_match_set_oracle_on_random_masks():
    rng = np.random.default_rng(0)
    for _ in range(20):
        k = int(rng.integers(2, 5))
        pred = rng.integers(0, k, (6, 7))
        gt = rng.integers(0, k, (6, 7))
        got_j = jaccard_per_class(pred, gt, k)
        want_j = oracles.jaccard(pred, gt, k)
        np.testing.assert_allclose(got_j, want_j, atol=1e-12)
        got_f = pixel_f_score(pred, gt, k)
        want_f = oracles.f1(pred, gt, k)
        np.testing.assert_allclose(got_f, want_f, atol=1e-12)


def test_dim_mismatch():
    with pytest.raises(DimensionError):
        jaccard_per_class(np.zeros((2, 2), int), np.zeros((3, 2), int), 2)
    with pytest.raises(DimensionError):
        pixel_accuracy(np.zeros((2, 2), int), np.zeros((2, 3), int))


# ------------------------------------------------------------ boundary F

def _split_mask(col):
    m = np.zeros((8, 8), int)
    m[:, col:] = 1
    return m


def test_boundary_identity_any_tolerance():
    m = _split_mask(4)
    for tol in (0, 1, 3):
        f = boundary_f_score(m, m, 2, tol)
        assert np.allclose(f, [1.0, 1.0])


def test_boundary_offset_by_one_pixel():
    gt = _split_mask(4)    # gt boundary at cols 3|4
    pred = _split_mask(5)  # pred boundary at cols 4|5
    f1 = boundary_f_score(pred, gt, 2, tolerance_px=1)
    assert np.allclose(f1, [1.0, 1.0])
    f0 = boundary_f_score(pred, gt, 2, tolerance_px=0)
    assert np.allclose(f0, [0.0, 0.0])


def test_boundary_single_class_excluded():
    m = np.zeros((5, 5), int)
    f = boundary_f_score(m, m, 2, 1)
    assert np.isnan(f[0]) and np.isnan(f[1])


def test_boundary_matches_loop_oracle():
    rng = np.random.default_rng(1)
    for _ in range(5):
        k = 3
        pred = rng.integers(0, k, (7, 6))
        gt = rng.integers(0, k, (7, 6))
        for tol in (0, 1, 2):
            got = boundary_f_score(pred, gt, k, tol)
            want = oracles.boundary_f(pred, gt, k, tol)
            np.testing.assert_allclose(got, want, atol=1e-12)


# --------------------------------------------------------------- invariants

def test_permutation_invariance():
    rng = np.random.default_rng(2)
    k = 4
    pred = rng.integers(0, k, (8, 8))
    gt = rng.integers(0, k, (8, 8))
    perm = rng.permutation(k)
    j1 = jaccard_per_class(pred, gt, k)
    j2 = jaccard_per_class(perm[pred], perm[gt], k)
    np.testing.assert_allclose(np.sort(j1), np.sort(j2), atol=1e-12)
    assert pixel_accuracy(pred, gt) == pixel_accuracy(perm[pred], perm[gt])


def test_jaccard_below_f1():
    rng = np.random.default_rng(3)
    for _ in range(30):
        k = int(rng.integers(2, 5))
        pred = rng.integers(0, k, (6, 6))
        gt = rng.integers(0, k, (6, 6))
        j = jaccard_per_class(pred, gt, k)
        f = pixel_f_score(pred, gt, k)
        ok = np.isnan(j) | (j <= f + 1e-12)
        assert ok.all()


def test_symmetry_under_pred_gt_swap():
    rng = np.random.default_rng(4)
    pred = rng.integers(0, 3, (6, 6))
    gt = rng.integers(0, 3, (6, 6))
    np.testing.assert_allclose(jaccard_per_class(pred, gt, 3),
                               jaccard_per_class(gt, pred, 3), atol=1e-12)
    np.testing.assert_allclose(pixel_f_score(pred, gt, 3),
                               pixel_f_score(gt, pred, 3), atol=1e-12)


def test_all_one_iff_equal():
    rng = np.random.default_rng(5)
    pred = rng.integers(0, 3, (5, 5))
    j = jaccard_per_class(pred, pred, 3)
    assert np.nanmin(j) == 1.0
    pred2 = pred.copy()
    pred2[0, 0] = (pred2[0, 0] + 1) % 3
    j2 = jaccard_per_class(pred2, pred, 3)
    assert np.nanmin(j2) < 1.0


# -------------------------------------------------------------- aggregation

def test_aggregate_single_video_mean():
    frames = [
        score_frame(GT, GT, 2, video_id="v", frame_index=2),    # J = 1.0
        score_frame(PRED, GT, 2, video_id="v", frame_index=3),  # J = 7/12
    ]
    report = aggregate(frames)
    assert abs(report.jaccard_mean - (1.0 + 7 / 12) / 2) < 1e-12
    assert report.videos["v"].frames_scored == 2


def test_aggregate_videos_weighted_equally():
    a = [score_frame(GT, GT, 2, video_id="a", frame_index=i) for i in (2, 3, 4)]
    b = [score_frame(PRED, GT, 2, video_id="b", frame_index=2)]
    report = aggregate(a + b)
    va, vb = report.videos["a"].jaccard_mean, report.videos["b"].jaccard_mean
    assert abs(report.jaccard_mean - (va + vb) / 2) < 1e-12


def test_aggregate_drops_frame_one_with_warning():
    frames = [
        score_frame(GT, GT, 2, video_id="v", frame_index=1),
        score_frame(PRED, GT, 2, video_id="v", frame_index=2),
    ]
    with pytest.warns(UserWarning, match="frame 1"):
        report = aggregate(frames)
    assert report.frames_scored == 1


def test_aggregate_only_frame_one_errors():
    frames = [score_frame(GT, GT, 2, video_id="v", frame_index=1)]
    with pytest.warns(UserWarning):
        with pytest.raises(DimensionError, match="nothing evaluated"):
            aggregate(frames)


def test_aggregate_empty_errors():
    with pytest.raises(DimensionError):
        aggregate([])


def test_report_json_shape():
    report = aggregate([score_frame(PRED, GT, 2, video_id="v", frame_index=2)],
                       config={"f_variant": "pixel"})
    doc = report.to_json_dict()
    assert set(doc) == {"dataset", "videos", "frames", "config"}
    assert doc["dataset"]["frames_scored"] == 1
    assert doc["config"]["f_variant"] == "pixel"
