"""
Test detection_metrics, evaluate_sequence and average_reports functions
from metrics.py file
"""
import numpy as np
import pytest

from fusetrack.exceptions import EmptyInputError, FrameAlignmentError, UndefinedMetricError
from fusetrack.geometry import BBox, FrameGeometry, iou
from fusetrack.metrics import (
    COCO_IOU_THRESHOLDS,
    FramePair,
    MetricOptions,
    average_precision,
    average_reports,
    detection_metrics,
    evaluate_sequence,
    pairs_from_streams,
)

GT = BBox(0.0, 0.0, 10.0, 10.0)
MISS = BBox(100.0, 100.0, 10.0, 10.0)
FRAME = FrameGeometry(640.0, 480.0)


@pytest.fixture
def perfect_pairs():
    """Ten frames predicted exactly"""
    return [FramePair(i, GT, GT, 0.9) for i in range(10)]


@pytest.fixture
def ranked_pairs():
    """Four ground-truth frames: hits at confidences 0.9 and 0.7, misses at 0.8 and 0.6"""
    return [
        FramePair(0, GT, GT, 0.9),
        FramePair(1, GT, MISS, 0.8),
        FramePair(2, GT, GT, 0.7),
        FramePair(3, GT, MISS, 0.6),
    ]


# pylint: disable=W0621
def test_perfect_predictions(perfect_pairs):
    """AP is 1 everywhere, no false negatives or discoveries"""
    result = detection_metrics(perfect_pairs)
    assert set(result.ap) == {0.25} | set(COCO_IOU_THRESHOLDS)
    for value in result.ap.values():
        assert value == pytest.approx(1.0)
    assert (result.fnr, result.fdr, result.tp, result.fp, result.fn) == (0.0, 0.0, 10, 0, 0)


def test_all_point_average_precision(ranked_pairs):
    """Interpolated precision envelope: 0.25 * 1 + 0.25 * 2/3"""
    assert average_precision(ranked_pairs, 0.5) == pytest.approx(5.0 / 12.0)


def test_ranking_uses_confidence(ranked_pairs):
    """Swapping confidences so misses rank first lowers AP"""
    swapped = [p._replace(pred_confidence=1.0 - p.pred_confidence) for p in ranked_pairs]
    assert average_precision(swapped, 0.5) < average_precision(ranked_pairs, 0.5)


def test_101_point_interpolation(perfect_pairs, ranked_pairs):
    """The 101-point variant is 1 on perfect input and bounded by the all-point value otherwise"""
    assert average_precision(perfect_pairs, 0.5, "101-point") == 1.0
    assert 0.0 < average_precision(ranked_pairs, 0.5, "101-point") <= 0.5


def test_error_rates(ranked_pairs):
    """Two hits and two misses"""
    result = detection_metrics(ranked_pairs)
    assert (result.tp, result.fp, result.fn) == (2, 2, 2)
    assert result.fnr == 0.5 and result.fdr == 0.5


def test_prediction_without_ground_truth_is_a_false_positive():
    """Target-absent frames still count predictions"""
    result = detection_metrics([FramePair(0, GT, GT, 0.9), FramePair(1, None, GT, 0.5)])
    assert (result.tp, result.fp, result.fn) == (1, 1, 0)
    assert result.fdr == 0.5
    assert result.ap[0.5] == pytest.approx(1.0)


def test_no_predictions(caplog):
    """FDR is reported as 0 and flagged"""
    result = detection_metrics([FramePair(0, GT, None), FramePair(1, GT, None)])
    assert result.fnr == 1.0
    assert result.fdr == 0.0 and result.fdr_undefined
    assert result.ap[0.5] == 0.0
    assert "FDR undefined" in caplog.text


def test_match_threshold():
    """A loose match threshold turns a partial overlap into a hit"""
    pairs = [FramePair(0, GT, BBox(5.0, 0.0, 10.0, 10.0), 0.9)]
    assert detection_metrics(pairs, match_threshold=0.5).fn == 1
    assert detection_metrics(pairs, match_threshold=0.3).tp == 1


def test_empty_and_undefined_inputs():
    """No frame, or no ground truth at all"""
    with pytest.raises(EmptyInputError):
        detection_metrics([])
    with pytest.raises(UndefinedMetricError, match="mAP"):
        detection_metrics([FramePair(0, None, GT, 0.5)])
    with pytest.raises(ValueError, match="interpolation"):
        detection_metrics([FramePair(0, GT, GT, 0.5)], interpolation="11-point")


def test_evaluate_sequence_perfect(perfect_pairs):
    """Perfect predictions: S = P = P_norm = 1 and FNR = FDR = 0"""
    report = evaluate_sequence(perfect_pairs, FRAME)
    report.validate()
    assert (report.S, report.P, report.P_norm) == (1.0, 1.0, 1.0)
    assert (report.FNR, report.FDR) == (0.0, 0.0)
    assert report.mAP5095 == pytest.approx(1.0)
    assert set(report.curves) == {"success", "precision", "precision_norm"}
    assert len(report.scalars()) == 8


def test_evaluate_sequence_options(ranked_pairs):
    """Options flow into the detection metrics"""
    report = evaluate_sequence(ranked_pairs, FRAME, MetricOptions(match_threshold=0.0))
    assert report.FNR == 0.0
    with pytest.raises(ValueError, match="interpolation"):
        evaluate_sequence(ranked_pairs, FRAME, MetricOptions(interpolation="11-point"))


def test_average_reports(perfect_pairs, ranked_pairs):
    """Scalars and curves are averaged per sequence"""
    first = evaluate_sequence(perfect_pairs, FRAME)
    second = evaluate_sequence(ranked_pairs, FRAME)
    mean = average_reports([first, second])
    assert mean.S == pytest.approx((first.S + second.S) / 2)
    assert mean.FNR == pytest.approx(0.25)
    assert mean.curves["success"].values[50] == pytest.approx(0.75)
    with pytest.raises(EmptyInputError):
        average_reports([])


def test_pairs_from_streams():
    """Streams are zipped frame by frame and must align"""
    pairs = pairs_from_streams([GT, None], [None, (GT, 0.4)])
    assert pairs == [FramePair(0, GT, None, 0.0), FramePair(1, None, GT, 0.4)]
    with pytest.raises(FrameAlignmentError, match="differ in length"):
        pairs_from_streams([GT], [])


def test_average_precision_matches_ranked_list_oracle():
    """All-point AP equals the sum of interpolated precisions at each true positive"""
    rng = np.random.default_rng(12)
    for _ in range(200):
        pairs = []
        for i in range(int(rng.integers(5, 40))):
            gt = GT if rng.random() > 0.2 else None
            pred = None
            if rng.random() > 0.1:
                pred = BBox(float(rng.uniform(0, 6)), float(rng.uniform(0, 6)), 10.0, 10.0)
            pairs.append(FramePair(i, gt, pred, float(rng.random())))
        if not any(p.gt is not None for p in pairs):
            continue
        positives = sum(p.gt is not None for p in pairs)
        ranked = sorted((p for p in pairs if p.pred is not None), key=lambda p: -p.pred_confidence)
        hits = [p.gt is not None and iou(p.pred, p.gt) >= 0.5 for p in ranked]
        precisions = [sum(hits[:k + 1]) / (k + 1) for k in range(len(hits))]
        expected = sum(max(precisions[k:]) / positives for k, hit in enumerate(hits) if hit)
        assert average_precision(pairs, 0.5) == pytest.approx(expected, abs=1e-9)
