"""
On-disk contracts: ground-truth, detection, tracker and prediction streams,
sequence metadata, decision logs, metric summaries and curve exports.

All streams are CSV with a ``frame`` column first. Floats are written with their
shortest round-trip representation and read back with pandas' round-trip
parser, so loading a written stream reproduces it exactly.
"""
import io
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from fusetrack.exceptions import (
    FrameAlignmentError,
    InvalidGeometryError,
    StreamParseError,
    StreamValidationError,
)
from fusetrack.fusion import Detection, FusionDecision
from fusetrack.geometry import BBox, FrameGeometry
from fusetrack.metrics import METRIC_KEYS, METRIC_VERSION, Curve, MetricReport
from fusetrack.tracker import TrackerOutput

logger = logging.getLogger(__name__)

GT_COLUMNS = ("frame", "x", "y", "w", "h")
DETECTION_COLUMNS = ("frame", "x", "y", "w", "h", "conf")
TRACKER_COLUMNS = ("frame", "x", "y", "w", "h", "objectness")
PREDICTION_COLUMNS = DETECTION_COLUMNS
DECISION_PREDICTION_COLUMNS = ("frame", "x", "y", "w", "h", "confidence")
DECISION_COLUMNS = (
    "frame", "gate_confidence", "gate_alignment", "gate_proximity", "reliable",
    "prompted", "averaged", "source", "x", "y", "w", "h", "confidence",
    "tracker_x", "tracker_y", "tracker_w", "tracker_h",
    "det_x", "det_y", "det_w", "det_h", "det_conf",
    "frames_since_prompt", "cadence_ok",
)
CURVE_COLUMNS = ("curve", "threshold", "value")
CURVE_NAMES = ("success", "precision", "precision_norm")


class SequenceMeta(NamedTuple):
    """
    Sequence metadata stored in ``meta.json``.

    Attributes:
        name (str): Sequence name.
        width (float): Frame width in pixels.
        height (float): Frame height in pixels.
        fps (float): Frame rate.
        frame_count (int): Number of frames.
    """
    name: str
    width: float
    height: float
    fps: float
    frame_count: int

    @property
    def frame(self) -> FrameGeometry:
        """Image size of the sequence."""
        return FrameGeometry(self.width, self.height)

    def validate(self) -> None:
        """
        Raises:
            StreamValidationError: If a dimension or the frame rate is not positive,
                or the frame count is below 1.
        """
        if not isinstance(self.name, str) or not self.name:
            raise StreamValidationError("Sequence metadata needs a non-empty 'name'.")
        if not (self.width > 0 and self.height > 0 and self.fps > 0):
            raise StreamValidationError(
                f"Sequence '{self.name}' needs positive width, height and fps.")
        if not isinstance(self.frame_count, int) or self.frame_count < 1:
            raise StreamValidationError(f"Sequence '{self.name}' needs frame_count >= 1.")

    def to_dict(self) -> Dict[str, Any]:
        """Converts the metadata to a dictionary."""
        return self._asdict()


def _dump_json(payload: Dict[str, Any], path) -> None:
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def write_meta(meta: SequenceMeta, path) -> None:
    """Writes ``meta.json``."""
    meta.validate()
    _dump_json(meta.to_dict(), path)


def _integer_field(payload: Dict[str, Any], name: str) -> int:
    value = payload[name]
    if isinstance(value, bool) or not isinstance(value, (int, float)) or value != int(value):
        raise ValueError(f"'{name}' must be an integer, got {value!r}")
    return int(value)


def load_meta(path) -> SequenceMeta:
    """
    Reads ``meta.json``.

    Raises:
        StreamParseError: If the file is not UTF-8 JSON, misses a key or has a
            non-integer frame count.
        StreamValidationError: If the values break the metadata invariants.
    """
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        meta = SequenceMeta(
            name=str(payload["name"]), width=float(payload["width"]),
            height=float(payload["height"]), fps=float(payload["fps"]),
            frame_count=_integer_field(payload, "frame_count"))
    except json.JSONDecodeError as exc:
        raise StreamParseError(path, exc.lineno, exc.msg) from exc
    except (KeyError, TypeError, ValueError, OverflowError) as exc:
        raise StreamParseError(path, None, f"missing or invalid metadata field ({exc})") from exc
    meta.validate()
    return meta


def _numbered_lines(path) -> List[Tuple[int, str]]:
    """Non-blank lines of a text file with their 1-based physical line numbers."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise StreamParseError(path, None,
                               f"not UTF-8 text ({exc.reason} at byte {exc.start})") from exc
    return [(number, line) for number, line in enumerate(text.splitlines(), start=1)
            if line.strip()]


def _frame_from_lines(path, lines: List[Tuple[int, str]], header=None) -> pd.DataFrame:
    data = "\n".join(line for _, line in lines)
    try:
        return pd.read_csv(io.StringIO(data), header=None, names=header,
                           float_precision="round_trip", skip_blank_lines=False)
    except pd.errors.ParserError as exc:
        raise StreamParseError(path, None, str(exc)) from exc


def _read_stream(path, columns: Sequence[str]) -> Tuple[pd.DataFrame, List[int]]:
    """
    Reads a headerless-or-headed CSV stream into a DataFrame with ``columns``.

    Returns the frame and the file line number of each of its rows; blank lines
    are skipped but still counted.
    """
    path = Path(path)
    content = _numbered_lines(path)
    if not content:
        return pd.DataFrame(columns=list(columns)), []
    header_line, first = content[0]
    has_header = first.split(",")[0].strip() == columns[0]
    if has_header and [c.strip() for c in first.split(",")] != list(columns):
        raise StreamParseError(path, header_line, f"expected header '{','.join(columns)}'")
    rows = content[1:] if has_header else content
    if not rows:
        return pd.DataFrame(columns=list(columns)), []
    for line_number, line in rows:
        found = len(line.split(","))
        if found != len(columns):
            raise StreamParseError(path, line_number, f"expected {len(columns)} fields, found {found}")
    df = _frame_from_lines(path, rows, list(columns))
    line_numbers = [line_number for line_number, _ in rows]
    for column in columns:
        numeric = pd.to_numeric(df[column], errors="coerce")
        bad = numeric.isna() & df[column].notna()
        if bad.any():
            row = int(np.flatnonzero(bad.to_numpy())[0])
            raise StreamParseError(path, line_numbers[row], f"non-numeric value in '{column}'")
        df[column] = numeric
    return df, line_numbers


def _frame_index(path, value, line_number: int) -> int:
    if not np.isfinite(value) or float(value) != int(value) or value < 0:
        raise StreamParseError(path, line_number, f"frame index {value} is not a non-negative integer")
    return int(value)


def _box(path, row, line_number: int) -> BBox:
    box = BBox(float(row.x), float(row.y), float(row.w), float(row.h))
    try:
        box.validate()
    except InvalidGeometryError as exc:
        raise StreamParseError(path, line_number, exc.reason) from exc
    return box


def _stream_length(path, frames: List[int], frame_count: Optional[int]) -> int:
    if frame_count is None:
        return (max(frames) + 1) if frames else 0
    if frames and max(frames) >= frame_count:
        raise FrameAlignmentError(
            f"{path} has frame {max(frames)} but the sequence has {frame_count} frames.")
    return frame_count


def _unit_score(path, value: float, name: str, line_number: int) -> float:
    if not 0.0 <= value <= 1.0:
        raise StreamValidationError(f"{path}:{line_number}: {name} {value} lies outside [0, 1].")
    return float(value)


def _strictly_increasing(path, frames: List[int], line_numbers: List[int]) -> None:
    for i in range(1, len(frames)):
        if frames[i] == frames[i - 1]:
            raise StreamValidationError(f"{path}:{line_numbers[i]}: duplicate frame {frames[i]}.")
        if frames[i] < frames[i - 1]:
            raise StreamValidationError(f"{path}:{line_numbers[i]}: frame {frames[i]} after {frames[i - 1]}.")


def load_ground_truth(path, frame_count: Optional[int] = None) -> List[Optional[BBox]]:
    """
    Loads a ``frame,x,y,w,h`` ground-truth file.

    Frames absent from the file are target-absent (None).

    Args:
        path: File to read.
        frame_count (int, optional): Sequence length. Defaults to the last frame + 1.

    Returns:
        List[Optional[BBox]]: One entry per frame.

    Raises:
        StreamParseError: On a malformed line, a degenerate box or a file that is
            not UTF-8, with the line number when there is one.
        StreamValidationError: On duplicate or decreasing frames.
        FrameAlignmentError: If a frame lies beyond ``frame_count``.
    """
    df, line_numbers = _read_stream(path, GT_COLUMNS)
    frames, boxes = [], []
    for row, line_number in zip(df.itertuples(index=False), line_numbers):
        frames.append(_frame_index(path, row.frame, line_number))
        boxes.append(_box(path, row, line_number))
    _strictly_increasing(path, frames, line_numbers)
    stream: List[Optional[BBox]] = [None] * _stream_length(path, frames, frame_count)
    for frame_index, box in zip(frames, boxes):
        stream[frame_index] = box
    return stream


def load_detections(path, frame_count: Optional[int] = None) -> List[List[Detection]]:
    """
    Loads a ``frame,x,y,w,h,conf`` detection file; several lines may share a frame.

    Raises:
        StreamParseError: On a malformed line or a degenerate box.
        StreamValidationError: If a confidence lies outside [0, 1].
        FrameAlignmentError: If a frame lies beyond ``frame_count``.
    """
    df, line_numbers = _read_stream(path, DETECTION_COLUMNS)
    detections = []
    for row, line_number in zip(df.itertuples(index=False), line_numbers):
        frame_index = _frame_index(path, row.frame, line_number)
        confidence = _unit_score(path, row.conf, "confidence", line_number)
        detections.append(Detection(frame_index, _box(path, row, line_number), confidence))
    stream: List[List[Detection]] = [
        [] for _ in range(_stream_length(path, [d.frame_index for d in detections], frame_count))]
    for det in detections:
        stream[det.frame_index].append(det)
    return stream


def load_tracker_stream(path, frame_count: Optional[int] = None) -> List[Optional[TrackerOutput]]:
    """Loads a recorded ``frame,x,y,w,h,objectness`` tracker stream; absent frames are lost frames."""
    df, line_numbers = _read_stream(path, TRACKER_COLUMNS)
    frames, outputs = [], []
    for row, line_number in zip(df.itertuples(index=False), line_numbers):
        frames.append(_frame_index(path, row.frame, line_number))
        objectness = _unit_score(path, row.objectness, "objectness", line_number)
        outputs.append(TrackerOutput(_box(path, row, line_number), objectness))
    _strictly_increasing(path, frames, line_numbers)
    stream: List[Optional[TrackerOutput]] = [None] * _stream_length(path, frames, frame_count)
    for frame_index, output in zip(frames, outputs):
        stream[frame_index] = output
    return stream


def _read_decision_predictions(path, content: List[Tuple[int, str]]
                                ) -> Tuple[pd.DataFrame, List[int]]:
    header_line, header = content[0]
    columns = [c.strip() for c in header.split(",")]
    missing = [c for c in DECISION_PREDICTION_COLUMNS if c not in columns]
    if missing:
        raise StreamParseError(path, header_line, f"decisions file lacks columns {missing}")
    rows = content[1:]
    for line_number, line in rows:
        found = len(line.split(","))
        if found != len(columns):
            raise StreamParseError(path, line_number, f"expected {len(columns)} fields, found {found}")
    if not rows:
        return pd.DataFrame(columns=list(PREDICTION_COLUMNS)), []
    df = _frame_from_lines(path, rows, columns)
    df = df.rename(columns={"confidence": "conf"})[list(PREDICTION_COLUMNS)]
    return df, [line_number for line_number, _ in rows]


def load_predictions(path, frame_count: Optional[int] = None) -> List[Optional[Tuple[BBox, float]]]:
    """
    Loads per-frame predictions for evaluation.

    Accepts either a ``decisions.csv`` written by ``fuse`` (recognised by its
    header) or an external ``frame,x,y,w,h,conf`` dump. Rows with empty box
    fields, and frames absent from the file, carry no prediction.

    Returns:
        List[Optional[Tuple[BBox, float]]]: ``(box, confidence)`` or None per frame.

    Raises:
        StreamParseError: On a malformed line, a decisions header missing the
            box columns, or a file that is not UTF-8.
    """
    path = Path(path)
    content = _numbered_lines(path)
    if content and content[0][1].split(",")[:2] == ["frame", "gate_confidence"]:
        df, line_numbers = _read_decision_predictions(path, content)
    else:
        df, line_numbers = _read_stream(path, PREDICTION_COLUMNS)

    frames, kept_lines, predictions = [], [], []
    for row, line_number in zip(df.itertuples(index=False), line_numbers):
        frame_index = _frame_index(path, row.frame, line_number)
        if any(pd.isna(v) for v in (row.x, row.y, row.w, row.h)):
            continue
        confidence = 0.0 if pd.isna(row.conf) else _unit_score(path, row.conf, "confidence", line_number)
        frames.append(frame_index)
        kept_lines.append(line_number)
        predictions.append((_box(path, row, line_number), confidence))
    _strictly_increasing(path, frames, kept_lines)
    stream: List[Optional[Tuple[BBox, float]]] = [None] * _stream_length(path, frames, frame_count)
    for frame_index, prediction in zip(frames, predictions):
        stream[frame_index] = prediction
    return stream


def _write_csv(df: pd.DataFrame, path) -> None:
    df.to_csv(path, index=False, lineterminator="\n")


def write_ground_truth(gt: Sequence[Optional[BBox]], path) -> None:
    """Writes the visible frames of a ground-truth stream."""
    rows = [(i, box.x, box.y, box.w, box.h) for i, box in enumerate(gt) if box is not None]
    _write_csv(pd.DataFrame(rows, columns=list(GT_COLUMNS)), path)


def write_detections(detections: Sequence[Sequence[Detection]], path) -> None:
    """Writes a detection stream, one line per detection."""
    rows = [(d.frame_index, d.box.x, d.box.y, d.box.w, d.box.h, d.confidence)
            for frame_dets in detections for d in frame_dets]
    _write_csv(pd.DataFrame(rows, columns=list(DETECTION_COLUMNS)), path)


def write_tracker_stream(stream: Sequence[Optional[TrackerOutput]], path) -> None:
    """Writes the non-lost frames of a tracker stream."""
    rows = [(i, o.box.x, o.box.y, o.box.w, o.box.h, o.objectness)
            for i, o in enumerate(stream) if o is not None]
    _write_csv(pd.DataFrame(rows, columns=list(TRACKER_COLUMNS)), path)


def write_decisions(decisions: Sequence[FusionDecision], path) -> None:
    """Writes ``decisions.csv``: one row per frame, booleans as 0/1, absent boxes empty."""
    df = pd.DataFrame([d.to_dict() for d in decisions], columns=list(DECISION_COLUMNS))
    df["frames_since_prompt"] = df["frames_since_prompt"].astype("Int64")
    _write_csv(df, path)


def load_decisions(path) -> pd.DataFrame:
    """Reads ``decisions.csv`` back as a DataFrame (for audits)."""
    df = pd.read_csv(path, float_precision="round_trip")
    if tuple(df.columns) != DECISION_COLUMNS:
        raise StreamParseError(path, 1, f"expected header '{','.join(DECISION_COLUMNS)}'")
    return df


def summary_payload(report: MetricReport, sequence: str) -> Dict[str, Any]:
    """The ``summary.json`` document of a report."""
    return {
        "version": METRIC_VERSION,
        "sequence": sequence,
        "metrics": report.scalars(),
        "flags": {"fdr_undefined": bool(report.fdr_undefined)},
    }


def write_summary(report: MetricReport, path, sequence: str) -> None:
    """Writes ``summary.json`` with sorted keys and a 2-space indent."""
    _dump_json(summary_payload(report, sequence), path)


def load_summary(path) -> Dict[str, Any]:
    """
    Reads ``summary.json``.

    Raises:
        StreamParseError: If the document is not JSON or lacks the metric keys.
    """
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise StreamParseError(path, exc.lineno, exc.msg) from exc
    except UnicodeDecodeError as exc:
        raise StreamParseError(path, None,
                               f"not UTF-8 text ({exc.reason} at byte {exc.start})") from exc
    if "version" not in payload or set(payload.get("metrics", {})) != set(METRIC_KEYS):
        raise StreamParseError(path, None, "not a metric summary (version or metrics missing)")
    return payload


def curves_frame(report: MetricReport) -> pd.DataFrame:
    """The curves of a report as a long ``curve,threshold,value`` table."""
    rows = []
    for name in CURVE_NAMES:
        curve = report.curves[name]
        rows.extend((name, float(t), float(v)) for t, v in zip(curve.thresholds, curve.values))
    return pd.DataFrame(rows, columns=list(CURVE_COLUMNS))


def write_curves(report: MetricReport, path) -> None:
    """Writes ``curves.csv``."""
    _write_csv(curves_frame(report), path)


def load_curves(path) -> Dict[str, Curve]:
    """Reads ``curves.csv`` back into curves keyed by name."""
    df = pd.read_csv(path, float_precision="round_trip")
    if tuple(df.columns) != CURVE_COLUMNS:
        raise StreamParseError(path, 1, f"expected header '{','.join(CURVE_COLUMNS)}'")
    return {name: Curve(group["threshold"].to_numpy(), group["value"].to_numpy())
            for name, group in df.groupby("curve", sort=False)}


def write_results(decisions: Optional[Sequence[FusionDecision]], report: MetricReport,
                  out_dir, sequence: str) -> List[Path]:
    """
    Writes the results of a run: ``decisions.csv`` (when decisions are given),
    ``summary.json`` and ``curves.csv``.

    Args:
        decisions (Sequence[FusionDecision], optional): Per-frame decisions.
        report (MetricReport): Metrics of the run.
        out_dir: Output directory, created if missing.
        sequence (str): Sequence name recorded in the summary.

    Returns:
        List[Path]: Written files.

    Raises:
        OSError: If the directory cannot be written.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    if decisions is not None:
        write_decisions(decisions, out_dir / "decisions.csv")
        written.append(out_dir / "decisions.csv")
    write_summary(report, out_dir / "summary.json", sequence)
    write_curves(report, out_dir / "curves.csv")
    written.extend([out_dir / "summary.json", out_dir / "curves.csv"])
    logger.info("Wrote %s", ", ".join(str(p) for p in written))
    return written
