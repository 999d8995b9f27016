"""
Test precision_auc function
from metrics.py file
"""
import math

import numpy as np
import pytest

from fusetrack.exceptions import UndefinedMetricError
from fusetrack.geometry import BBox, FrameGeometry, center_distance
from fusetrack.metrics import FramePair, precision_auc

FRAME = FrameGeometry(300.0, 400.0)  # diagonal 500
GT = BBox(0.0, 0.0, 10.0, 10.0)


def test_center_error_of_25_pixels():
    """Thresholds 0..25 are met: P = 26/51"""
    score, curve = precision_auc([FramePair(0, GT, BBox(25.0, 0.0, 10.0, 10.0))], FRAME)
    assert score == 26 / 51
    assert curve.thresholds.tolist() == [float(i) for i in range(51)]


def test_normalised_center_error():
    """25 px on a 500 px diagonal is 0.05: thresholds 0.05..0.50 are met"""
    score, curve = precision_auc([FramePair(0, GT, BBox(25.0, 0.0, 10.0, 10.0))], FRAME,
                                 normalized=True)
    assert score == 46 / 51
    assert curve.thresholds.tolist() == [i / 100 for i in range(51)]


def test_perfect_predictions():
    """Zero error meets every threshold"""
    pairs = [FramePair(i, GT, GT) for i in range(5)]
    assert precision_auc(pairs, FRAME)[0] == 1.0
    assert precision_auc(pairs, FRAME, normalized=True)[0] == 1.0


def test_missing_prediction():
    """A missing prediction never meets a threshold"""
    assert precision_auc([FramePair(0, GT, None)], FRAME)[0] == 0.0


def test_no_ground_truth_raises():
    """P_norm is undefined without ground truth"""
    with pytest.raises(UndefinedMetricError, match="P_norm"):
        precision_auc([FramePair(0, None, GT)], FRAME, normalized=True)


@pytest.mark.parametrize("normalized", [False, True])
def test_matches_double_loop(normalized):
    """50 random 200-frame instances equal a direct enumeration exactly"""
    rng = np.random.default_rng(31)
    grid = [i / 100 for i in range(51)] if normalized else [float(i) for i in range(51)]
    for _ in range(50):
        pairs = []
        for i in range(200):
            gt = BBox(*rng.uniform(0, 250, 2), *rng.uniform(5, 40, 2)) if rng.random() > 0.1 else None
            pred = BBox(*rng.uniform(0, 250, 2), *rng.uniform(5, 40, 2)) if rng.random() > 0.1 else None
            pairs.append(FramePair(i, gt, pred))
        frames = [p for p in pairs if p.gt is not None]
        expected = []
        for delta in grid:
            hits = 0
            for pair in frames:
                if pair.pred is None:
                    error = math.inf
                else:
                    error = center_distance(pair.pred, pair.gt, FRAME if normalized else None)
                if error <= delta:
                    hits += 1
            expected.append(hits / len(frames))
        score, curve = precision_auc(pairs, FRAME, normalized)
        assert curve.values.tolist() == expected
        assert score == float(np.mean(np.array(expected)))


def test_normalised_precision_is_scale_invariant():
    """Doubling every box and the frame leaves P_norm unchanged"""
    rng = np.random.default_rng(8)
    pairs, doubled = [], []
    for i in range(300):
        gt = BBox(*rng.uniform(0, 250, 2), *rng.uniform(5, 40, 2))
        pred = BBox(*rng.uniform(0, 250, 2), *rng.uniform(5, 40, 2))
        pairs.append(FramePair(i, gt, pred))
        doubled.append(FramePair(i, BBox(*(2.0 * v for v in gt)), BBox(*(2.0 * v for v in pred))))
    score, _ = precision_auc(pairs, FRAME, normalized=True)
    doubled_score, _ = precision_auc(doubled, FrameGeometry(600.0, 800.0), normalized=True)
    assert doubled_score == score
