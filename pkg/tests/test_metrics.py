"""Depth evaluation metrics against hand-computed fixtures."""

import numpy as np
import pytest

from evdepth.metrics import METRIC_COLUMNS, aggregate_reports, evaluate


def const_maps(pred_value, truth_value, shape=(2, 5)):
    return (np.full(shape, pred_value, dtype=np.float64),
            np.full(shape, truth_value, dtype=np.float64))


class TestHandValues:
    def test_uniform_one_meter_error(self):
        pred, truth = const_maps(11.0, 10.0)
        r = evaluate(pred, truth)
        assert abs(r.abs_rel - 0.1) < 1e-12
        assert abs(r.sq_rel - 0.1) < 1e-12
        assert abs(r.rmse - 1.0) < 1e-12
        assert abs(r.epe - 1.0) < 1e-12
        assert abs(r.rmse_log - np.log(1.1)) < 1e-12
        assert r.delta1 == 1.0
        assert r.n_eval == 10

    def test_delta_bands(self):
        pred, truth = const_maps(13.0, 10.0)
        r = evaluate(pred, truth)
        assert r.delta1 == 0.0       # 1.3 > 1.25
        assert r.delta2 == 1.0       # 1.3 < 1.5625
        assert r.delta3 == 1.0

    def test_delta_threshold_is_strict(self):
        pred, truth = const_maps(12.5, 10.0)
        r = evaluate(pred, truth)
        assert r.delta1 == 0.0       # ratio exactly 1.25 does not count

    def test_ratio_is_symmetric(self):
        # under-estimates are judged by the inverse ratio: 10/8 is exactly
        # 1.25, so the strict threshold rejects it just like 12.5/10
        pred, truth = const_maps(8.0, 10.0)
        r = evaluate(pred, truth)
        assert r.delta1 == 0.0
        assert r.delta2 == 1.0

    def test_mixed_errors(self):
        pred = np.array([[10.0, 20.0]])
        truth = np.array([[10.0, 10.0]])
        r = evaluate(pred, truth)
        np.testing.assert_allclose(r.abs_rel, 0.5)
        np.testing.assert_allclose(r.rmse, np.sqrt(50.0))
        np.testing.assert_allclose(r.epe, 5.0)
        np.testing.assert_allclose(r.delta1, 0.5)


class TestCutoffs:
    def test_cutoffs_filter_ground_truth_only(self):
        pred = np.array([[12.0, 50.0, 28.0]])
        truth = np.array([[8.0, 15.0, 25.0]])
        r = evaluate(pred, truth)
        # <= 10 m: only the first pixel
        np.testing.assert_allclose(r.cutoff_10m, 4.0)
        # <= 20 m: first two, mean(4, 35)
        np.testing.assert_allclose(r.cutoff_20m, 19.5)
        # <= 30 m: all three, mean(4, 35, 3)
        np.testing.assert_allclose(r.cutoff_30m, 14.0)

    def test_empty_cutoff_is_nan(self):
        pred, truth = const_maps(30.0, 28.0)
        r = evaluate(pred, truth)
        assert np.isnan(r.cutoff_10m)
        assert np.isnan(r.cutoff_20m)
        assert not np.isnan(r.cutoff_30m)

    def test_max_depth_excludes_far_truth(self):
        pred = np.array([[10.0, 10.0]])
        truth = np.array([[10.0, 100.0]])
        r = evaluate(pred, truth, max_depth=80.0)
        assert r.n_eval == 1
        assert r.abs_rel == 0.0


class TestValidity:
    def test_default_validity_skips_sentinels(self):
        pred = np.array([[-1.0, 10.0]])
        truth = np.array([[10.0, 10.0]])
        r = evaluate(pred, truth)
        assert r.n_eval == 1

    def test_explicit_masks_intersect(self):
        pred = np.array([[10.0, 10.0, 10.0]])
        truth = np.array([[10.0, 20.0, 30.0]])
        r = evaluate(pred, truth,
                     pred_valid=np.array([[True, True, False]]),
                     truth_valid=np.array([[False, True, True]]))
        assert r.n_eval == 1
        assert abs(r.abs_rel - 0.5) < 1e-12

    def test_nonpositive_predictions_warn_and_skip_log(self):
        pred = np.array([[-2.0, 10.0]])
        truth = np.array([[10.0, 10.0]])
        with pytest.warns(RuntimeWarning):
            r = evaluate(pred, truth,
                         pred_valid=np.ones((1, 2), dtype=bool))
        assert r.n_nonpositive_pred == 1
        assert r.rmse_log == 0.0     # only the positive prediction remains
        assert r.n_eval == 2

    def test_no_overlap_raises(self):
        pred = np.array([[-1.0, -1.0]])
        truth = np.array([[10.0, 10.0]])
        with pytest.raises(ValueError):
            evaluate(pred, truth)

    def test_shape_mismatch_raises(self):
        with pytest.raises(ValueError):
            evaluate(np.zeros((2, 2)), np.zeros((2, 3)))

    def test_zero_truth_excluded(self):
        pred = np.array([[10.0, 10.0]])
        truth = np.array([[0.0, 10.0]])
        r = evaluate(pred, truth)
        assert r.n_eval == 1


class TestAggregate:
    def test_pixel_weighted_mean(self):
        a = evaluate(*const_maps(11.0, 10.0, shape=(1, 1)))     # abs_rel 0.1
        b = evaluate(*const_maps(13.0, 10.0, shape=(1, 3)))     # abs_rel 0.3
        agg = aggregate_reports([a, b])
        np.testing.assert_allclose(agg.abs_rel, (0.1 + 3 * 0.3) / 4.0)
        assert agg.n_eval == 4

    def test_nan_cutoffs_skipped(self):
        near = evaluate(*const_maps(6.0, 5.0, shape=(1, 2)))    # cutoff_10m 1.0
        far = evaluate(*const_maps(30.0, 28.0, shape=(1, 2)))   # cutoff_10m nan
        agg = aggregate_reports([near, far])
        np.testing.assert_allclose(agg.cutoff_10m, 1.0)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            aggregate_reports([])


class TestReportOutput:
    def test_table_lists_all_columns(self):
        r = evaluate(*const_maps(11.0, 10.0))
        head, body = r.table().splitlines()
        assert head.split() == list(METRIC_COLUMNS)
        assert len(body.split()) == len(METRIC_COLUMNS)

    def test_json_round_trips(self):
        import json

        r = evaluate(*const_maps(11.0, 10.0))
        data = json.loads(r.to_json())
        assert data["n_eval"] == 10
        np.testing.assert_allclose(data["abs_rel"], 0.1)
