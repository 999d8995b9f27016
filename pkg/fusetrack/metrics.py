"""
Single-object tracking and detection metrics.

Tracking metrics (success, precision, normalised precision) are areas under
curves sampled on fixed uniform grids; frames without ground truth are left out
of them. Detection metrics treat the per-frame prediction as a detection ranked
by its confidence, and do count predictions on frames without ground truth as
false positives.
"""
import logging
import math
from dataclasses import dataclass
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from fusetrack.exceptions import EmptyInputError, FrameAlignmentError, UndefinedMetricError
from fusetrack.geometry import BBox, FrameGeometry, center_distance, iou

logger = logging.getLogger(__name__)

METRIC_VERSION = "1"
METRIC_KEYS = ("S", "P", "P_norm", "mAP25", "mAP50", "mAP5095", "FNR", "FDR")

SUCCESS_THRESHOLDS = np.array([i / 100 for i in range(101)])
PRECISION_THRESHOLDS = np.array([float(i) for i in range(51)])
NORM_PRECISION_THRESHOLDS = np.array([i / 100 for i in range(51)])
COCO_IOU_THRESHOLDS = tuple(round(0.5 + 0.05 * i, 2) for i in range(10))
INTERPOLATIONS = ("all-point", "101-point")


class FramePair(NamedTuple):
    """
    Ground truth and prediction of one frame.

    Attributes:
        frame_index (int): Frame index.
        gt (BBox | None): Ground-truth box, None when the target is absent.
        pred (BBox | None): Predicted box, None when nothing was predicted.
        pred_confidence (float): Ranking confidence of the prediction.
    """
    frame_index: int
    gt: Optional[BBox]
    pred: Optional[BBox]
    pred_confidence: float = 0.0


class Curve(NamedTuple):
    """A metric curve sampled on a threshold grid."""
    thresholds: np.ndarray
    values: np.ndarray


@dataclass(frozen=True)
class MetricOptions:
    """
    Evaluation options.

    Attributes:
        match_threshold (float): IoU at which a prediction counts as a true positive
            for FNR / FDR.
        interpolation (str): AP interpolation, ``'all-point'`` or ``'101-point'``.
    """
    match_threshold: float = 0.5
    interpolation: str = "all-point"

    def validate(self) -> None:
        """
        Raises:
            ValueError: If the match threshold leaves [0, 1] or the interpolation is unknown.
        """
        if not 0.0 <= self.match_threshold <= 1.0:
            raise ValueError("The 'match_threshold' must lie in [0, 1].")
        if self.interpolation not in INTERPOLATIONS:
            raise ValueError(f"The 'interpolation' must be one of {INTERPOLATIONS}.")


class DetectionResult(NamedTuple):
    """AP per IoU threshold plus the error counts at the match threshold."""
    ap: Dict[float, float]
    fnr: float
    fdr: float
    tp: int
    fp: int
    fn: int
    fdr_undefined: bool = False


class MetricReport(NamedTuple):
    """
    The eight scalar metrics of a sequence and its sampled curves.

    Attributes:
        S (float): Success AUC.
        P (float): Precision AUC (pixels).
        P_norm (float): Normalised precision AUC.
        mAP25 (float): AP at IoU 0.25.
        mAP50 (float): AP at IoU 0.5.
        mAP5095 (float): AP averaged over IoU 0.50:0.05:0.95.
        FNR (float): False negative rate.
        FDR (float): False discovery rate.
        curves (dict): ``success``, ``precision`` and ``precision_norm`` curves.
        fdr_undefined (bool): No prediction at all, FDR reported as 0.
    """
    # pylint: disable=C0103
    S: float
    P: float
    P_norm: float
    mAP25: float
    mAP50: float
    mAP5095: float
    FNR: float
    FDR: float
    curves: Dict[str, Curve]
    fdr_undefined: bool = False

    def scalars(self) -> Dict[str, float]:
        """The eight scalar metrics keyed by name."""
        return {key: float(getattr(self, key)) for key in METRIC_KEYS}

    def validate(self) -> None:
        """
        Raises:
            ValueError: If a score leaves [0, 1] or a curve breaks its monotonicity.
        """
        for key, value in self.scalars().items():
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"Metric '{key}' = {value} lies outside [0, 1].")
        if np.any(np.diff(self.curves["success"].values) > 0):
            raise ValueError("Success curve must be non-increasing.")
        for name in ("precision", "precision_norm"):
            if np.any(np.diff(self.curves[name].values) < 0):
                raise ValueError(f"Curve '{name}' must be non-decreasing.")


def _gt_frames(pairs: Sequence[FramePair], metric: str) -> List[FramePair]:
    frames = [p for p in pairs if p.gt is not None]
    if not frames:
        raise UndefinedMetricError(metric, "no frame carries a ground-truth box")
    return frames


def success_auc(pairs: Sequence[FramePair]) -> Tuple[float, Curve]:
    """
    Success curve over IoU thresholds ``0.00, 0.01, ..., 1.00`` and its AUC.

    Each sample is the fraction of ground-truth frames with
    ``IoU(pred, gt) >= tau``; a missing prediction counts as IoU 0. The AUC is the
    mean of the 101 samples.

    Args:
        pairs (Sequence[FramePair]): Frames of a sequence.

    Returns:
        Tuple[float, Curve]: ``S`` and the sampled curve.

    Raises:
        UndefinedMetricError: If no frame has a ground-truth box.
    """
    frames = _gt_frames(pairs, "S")
    overlaps = np.array([iou(p.pred, p.gt) if p.pred is not None else 0.0 for p in frames])
    values = np.array([np.count_nonzero(overlaps >= tau) / len(overlaps)
                       for tau in SUCCESS_THRESHOLDS])
    return float(np.mean(values)), Curve(SUCCESS_THRESHOLDS.copy(), values)


def precision_auc(
    pairs: Sequence[FramePair],
    frame: FrameGeometry,
    normalized: bool = False,
) -> Tuple[float, Curve]:
    """
    Precision curve over center-error thresholds and its AUC.

    Pixel mode samples ``delta = 0, 1, ..., 50`` px; normalised mode divides the
    center error by the frame diagonal and samples ``0.00, 0.01, ..., 0.50``. Each
    sample is the fraction of ground-truth frames with error ``<= delta``; a missing
    prediction has infinite error.

    Args:
        pairs (Sequence[FramePair]): Frames of a sequence.
        frame (FrameGeometry): Image size, used in normalised mode.
        normalized (bool): Normalise by the frame diagonal.

    Returns:
        Tuple[float, Curve]: ``P`` (or ``P_norm``) and the sampled curve.

    Raises:
        UndefinedMetricError: If no frame has a ground-truth box.
    """
    frames = _gt_frames(pairs, "P_norm" if normalized else "P")
    norm = frame if normalized else None
    errors = np.array([center_distance(p.pred, p.gt, norm) if p.pred is not None else math.inf
                       for p in frames])
    thresholds = NORM_PRECISION_THRESHOLDS if normalized else PRECISION_THRESHOLDS
    values = np.array([np.count_nonzero(errors <= delta) / len(errors) for delta in thresholds])
    return float(np.mean(values)), Curve(thresholds.copy(), values)


def voc_ap(recall: np.ndarray, precision: np.ndarray) -> float:
    """
    All-point interpolated average precision.

    The precision envelope is made monotone from the right, then integrated over
    the points where recall changes.
    """
    mrec = np.concatenate(([0.0], recall, [1.0]))
    mpre = np.concatenate(([0.0], precision, [0.0]))
    for i in range(mpre.size - 1, 0, -1):
        mpre[i - 1] = max(mpre[i - 1], mpre[i])
    changes = np.where(mrec[1:] != mrec[:-1])[0]
    return float(np.sum((mrec[changes + 1] - mrec[changes]) * mpre[changes + 1]))


def coco_ap(recall: np.ndarray, precision: np.ndarray) -> float:
    """101-point interpolated average precision."""
    samples = []
    for level in np.linspace(0.0, 1.0, 101):
        reached = precision[recall >= level]
        samples.append(float(np.max(reached)) if reached.size else 0.0)
    return float(np.mean(samples))


def average_precision(
    pairs: Sequence[FramePair],
    iou_threshold: float,
    interpolation: str = "all-point",
) -> float:
    """
    Single-class AP of the per-frame predictions at one IoU threshold.

    Predictions are ranked by confidence (descending, earlier frame first on
    ties); a prediction is a true positive when its frame has a ground-truth box
    it overlaps with ``IoU >= iou_threshold``.

    Raises:
        UndefinedMetricError: If no frame has a ground-truth box.
    """
    positives = len(_gt_frames(pairs, "mAP"))
    ranked = sorted((p for p in pairs if p.pred is not None),
                    key=lambda p: (-p.pred_confidence, p.frame_index))
    if not ranked:
        return 0.0
    hits = np.array([p.gt is not None and iou(p.pred, p.gt) >= iou_threshold for p in ranked],
                    dtype=float)
    tp = np.cumsum(hits)
    fp = np.cumsum(1.0 - hits)
    recall = tp / positives
    precision = tp / (tp + fp)
    if interpolation == "101-point":
        return coco_ap(recall, precision)
    return voc_ap(recall, precision)


def detection_metrics(
    pairs: Sequence[FramePair],
    iou_thresholds: Sequence[float] = (0.25,) + COCO_IOU_THRESHOLDS,
    match_threshold: float = 0.5,
    interpolation: str = "all-point",
) -> DetectionResult:
    """
    AP per IoU threshold, FNR and FDR.

    At ``match_threshold`` each frame contributes: a prediction overlapping the
    ground truth with ``IoU >= match_threshold`` is a TP; any other prediction is
    an FP (including predictions on frames without ground truth); a ground-truth
    box without a TP is an FN. ``FNR = FN / (FN + TP)``, ``FDR = FP / (FP + TP)``.

    Args:
        pairs (Sequence[FramePair]): Frames of a sequence.
        iou_thresholds (Sequence[float]): Thresholds to compute AP at.
        match_threshold (float): Threshold for the TP/FP/FN counts.
        interpolation (str): ``'all-point'`` or ``'101-point'``.

    Returns:
        DetectionResult: AP per threshold and the error rates. When there is no
        prediction at all FDR is 0.0 and ``fdr_undefined`` is set.

    Raises:
        EmptyInputError: If ``pairs`` is empty.
        UndefinedMetricError: If no frame has a ground-truth box.
    """
    if not pairs:
        raise EmptyInputError("Detection metrics need at least one frame.")
    if interpolation not in INTERPOLATIONS:
        raise ValueError(f"Unknown interpolation '{interpolation}'. Expected one of {INTERPOLATIONS}.")
    ap = {float(t): average_precision(pairs, t, interpolation) for t in iou_thresholds}

    tp = fp = fn = 0
    for pair in pairs:
        hit = (pair.pred is not None and pair.gt is not None
               and iou(pair.pred, pair.gt) >= match_threshold)
        if hit:
            tp += 1
        elif pair.pred is not None:
            fp += 1
        if pair.gt is not None and not hit:
            fn += 1

    if tp + fn == 0:
        raise UndefinedMetricError("FNR", "no ground-truth box to miss")
    fnr = fn / (fn + tp)
    fdr_undefined = tp + fp == 0
    if fdr_undefined:
        logger.warning("FDR undefined: no prediction on any frame; reporting 0.0")
        fdr = 0.0
    else:
        fdr = fp / (fp + tp)
    return DetectionResult(ap, fnr, fdr, tp, fp, fn, fdr_undefined)


def evaluate_sequence(
    pairs: Sequence[FramePair],
    frame: FrameGeometry,
    options: MetricOptions = MetricOptions(),
) -> MetricReport:
    """
    Computes every scalar metric and curve of a sequence.

    Args:
        pairs (Sequence[FramePair]): Frames of the sequence.
        frame (FrameGeometry): Image size.
        options (MetricOptions): Match threshold and AP interpolation.

    Returns:
        MetricReport: The sequence report.
    """
    options.validate()
    s_score, success = success_auc(pairs)
    p_score, precision = precision_auc(pairs, frame, normalized=False)
    pn_score, precision_norm = precision_auc(pairs, frame, normalized=True)
    detection = detection_metrics(pairs, match_threshold=options.match_threshold,
                                  interpolation=options.interpolation)
    map5095 = float(np.mean([detection.ap[t] for t in COCO_IOU_THRESHOLDS]))
    return MetricReport(
        S=s_score, P=p_score, P_norm=pn_score,
        mAP25=detection.ap[0.25], mAP50=detection.ap[0.5], mAP5095=map5095,
        FNR=detection.fnr, FDR=detection.fdr,
        curves={"success": success, "precision": precision, "precision_norm": precision_norm},
        fdr_undefined=detection.fdr_undefined)


def average_reports(reports: Sequence[MetricReport]) -> MetricReport:
    """
    Dataset-level report: the mean of the per-sequence scalars and curves.

    Raises:
        EmptyInputError: If ``reports`` is empty.
    """
    if not reports:
        raise EmptyInputError("Cannot average an empty list of reports.")
    scalars = {key: float(np.mean([getattr(r, key) for r in reports])) for key in METRIC_KEYS}
    curves = {}
    for name, curve in reports[0].curves.items():
        curves[name] = Curve(curve.thresholds.copy(),
                             np.mean([r.curves[name].values for r in reports], axis=0))
    return MetricReport(**scalars, curves=curves,
                        fdr_undefined=any(r.fdr_undefined for r in reports))


def pairs_from_streams(
    gt: Sequence[Optional[BBox]],
    predictions: Sequence[Optional[Tuple[BBox, float]]],
) -> List[FramePair]:
    """
    Zips a ground-truth stream and a prediction stream of equal length.

    Raises:
        FrameAlignmentError: If the streams differ in length.
    """
    if len(gt) != len(predictions):
        raise FrameAlignmentError(f"Streams differ in length: {len(gt)} ground-truth frames, "
                         f"{len(predictions)} prediction frames.")
    pairs = []
    for frame_index, (gt_box, pred) in enumerate(zip(gt, predictions)):
        if pred is None:
            pairs.append(FramePair(frame_index, gt_box, None, 0.0))
        else:
            pairs.append(FramePair(frame_index, gt_box, pred[0], float(pred[1])))
    return pairs


def pairs_from_decisions(gt: Sequence[Optional[BBox]], decisions) -> List[FramePair]:
    """Pairs a ground-truth stream with fusion decisions (their outputs and confidences)."""
    return pairs_from_streams(
        gt, [(d.output, d.output_confidence) if d.output is not None else None for d in decisions])
