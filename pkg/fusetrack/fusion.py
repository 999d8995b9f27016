"""
Prediction fusion: reliability gating of detections, prompt issuance,
enclosure averaging and tracker fallback.
"""
# pylint: disable=C0301
import logging
from collections import deque
from dataclasses import dataclass
from typing import Any, Deque, Dict, List, NamedTuple, Optional, Sequence, Tuple

from fusetrack.exceptions import InitializationError, UninitializedError
from fusetrack.geometry import BBox, FrameGeometry, center_distance, ciou, encloses, iou, mean_box
from fusetrack.tracker import TrackerOutput

logging.basicConfig(
    level=logging.INFO,
    format='[%(levelname)s] %(asctime)s - %(module)s.%(funcName)s: %(message)s',
    datefmt='%Y-%m-%d %H:%M:%S')

logger = logging.getLogger(__name__)

MODES = ("tracker-only", "augmented", "detector-only")
INIT_STRATEGIES = ("gt", "detector")
SOURCES = ("tracker", "detector_prompted", "averaged", "detector", "none")


class Detection(NamedTuple):
    """
    A detector output for one frame.

    Attributes:
        frame_index (int): Frame the detection belongs to.
        box (BBox): Detected box.
        confidence (float): Detector confidence in [0, 1].
    """
    frame_index: int
    box: BBox
    confidence: float

    def validate(self) -> None:
        """
        Raises:
            InvalidGeometryError: If the box is degenerate.
            ValueError: If the confidence lies outside [0, 1].
        """
        self.box.validate()
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"Detection confidence {self.confidence} lies outside [0, 1].")


@dataclass(frozen=True)
class FusionConfig:
    """
    Parameters of the prediction fusion module.

    Attributes:
        conf_threshold (float): Confidence gate (strict ``>``).
        ciou_threshold (float): Tracker/detection alignment gate on CIoU (strict ``>``).
        proximity_iou (float): IoU gate against the most recent output (strict ``>``).
        proximity_center_dist (float): Normalised center-distance gate against the
            recent outputs (strict ``<``).
        window (int): Temporal window of the trajectory history, in frames.
        prompt_cadence (int): Maximum number of frames between two prompts.
        center_dist_norm (str): ``'diagonal'`` or ``'maxdim'``.
        prompt_policy (str): ``'eager'`` prompts on every reliable detection;
            ``'cadence'`` prompts once the cadence is due or the tracker is lost.
        average_requires_reliable (bool): Only average enclosed boxes when the
            detection is reliable.
        reseed_with_output (bool): Re-seed the tracker with the fused output box
            instead of the raw detection.
    """
    conf_threshold: float = 0.75
    ciou_threshold: float = 0.7
    proximity_iou: float = 0.8
    proximity_center_dist: float = 0.05
    window: int = 10
    prompt_cadence: int = 30
    center_dist_norm: str = "diagonal"
    prompt_policy: str = "eager"
    average_requires_reliable: bool = False
    reseed_with_output: bool = False

    def validate(self) -> None:
        """
        Raises:
            ValueError: If a threshold leaves [0, 1], a window is not a positive
                integer, or an enum field holds an unknown value.
        """
        for name in ("conf_threshold", "ciou_threshold", "proximity_iou", "proximity_center_dist"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"The '{name}' must lie in [0, 1].")
        for name in ("window", "prompt_cadence"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise ValueError(f"The '{name}' must be an integer >= 1.")
        if self.center_dist_norm not in ("diagonal", "maxdim"):
            raise ValueError("The 'center_dist_norm' must be 'diagonal' or 'maxdim'.")
        if self.prompt_policy not in ("eager", "cadence"):
            raise ValueError("The 'prompt_policy' must be 'eager' or 'cadence'.")


class GateResult(NamedTuple):
    """Outcome of the three reliability gates."""
    confidence: bool = False
    alignment: bool = False
    proximity: bool = False

    @property
    def reliable(self) -> bool:
        """True when at least one gate passed."""
        return self.confidence or self.alignment or self.proximity


class FusionDecision(NamedTuple):
    """
    Per-frame record of the fusion module.

    Attributes:
        frame_index (int): Frame index.
        gates (GateResult): Gate evaluations (all False without a detection).
        reliable (bool): OR of the gates.
        prompted (bool): A prompt was issued to the tracker.
        averaged (bool): The output is the mean of the tracker and detection boxes.
        output (BBox | None): Final box for the frame.
        output_confidence (float): Detector confidence for detection-derived
            outputs, tracker objectness otherwise, 0.0 without output.
        source (str): One of ``tracker``, ``detector_prompted``, ``averaged``,
            ``detector`` (detector-only mode) or ``none``.
        tracker_box (BBox | None): Tracker output the decision was based on.
        detection (Detection | None): The frame's candidate detection.
        frames_since_prompt (int | None): Frames since the last prompt, after this frame.
        cadence_ok (bool): Whether the prompt cadence bound still holds.
        prompt (BBox | None): Box forwarded to the tracker for the next frame.
    """
    frame_index: int
    gates: GateResult
    reliable: bool
    prompted: bool
    averaged: bool
    output: Optional[BBox]
    output_confidence: float
    source: str
    tracker_box: Optional[BBox] = None
    detection: Optional[Detection] = None
    frames_since_prompt: Optional[int] = None
    cadence_ok: bool = True
    prompt: Optional[BBox] = None

    def to_dict(self) -> Dict[str, Any]:
        """
        Flattens the decision into a ``decisions.csv`` row.

        Booleans become 0/1 and absent boxes become None.

        Returns:
            Dict[str, Any]: Row keyed by the ``decisions.csv`` columns.
        """
        def box_fields(prefix: str, box: Optional[BBox]) -> Dict[str, Optional[float]]:
            values = box if box is not None else (None, None, None, None)
            return {f"{prefix}{k}": v for k, v in zip(("x", "y", "w", "h"), values)}

        row = {
            "frame": self.frame_index,
            "gate_confidence": int(self.gates.confidence),
            "gate_alignment": int(self.gates.alignment),
            "gate_proximity": int(self.gates.proximity),
            "reliable": int(self.reliable),
            "prompted": int(self.prompted),
            "averaged": int(self.averaged),
            "source": self.source,
        }
        row.update(box_fields("", self.output))
        row["confidence"] = self.output_confidence
        row.update(box_fields("tracker_", self.tracker_box))
        row.update(box_fields("det_", self.detection.box if self.detection else None))
        row["det_conf"] = self.detection.confidence if self.detection else None
        row["frames_since_prompt"] = self.frames_since_prompt
        row["cadence_ok"] = int(self.cadence_ok)
        return row


class TrajectoryHistory:
    """
    Ring buffer of the last ``window`` output boxes with their frame indices.

    Entries are appended in frame order; appending beyond ``window`` drops the
    oldest entry.
    """

    def __init__(self, window: int):
        if window < 1:
            raise ValueError("The history window must be >= 1.")
        self.window = window
        self._entries: Deque[Tuple[int, BBox]] = deque(maxlen=window)

    def __len__(self) -> int:
        return len(self._entries)

    def push(self, frame_index: int, box: BBox) -> None:
        """Appends an output box."""
        if self._entries and frame_index <= self._entries[-1][0]:
            raise ValueError(
                f"History frames must increase: {frame_index} after {self._entries[-1][0]}.")
        self._entries.append((frame_index, box))

    def clear(self) -> None:
        """Drops every entry."""
        self._entries.clear()

    def entries(self) -> List[Tuple[int, BBox]]:
        """All entries, oldest first."""
        return list(self._entries)

    def recent(self, frame_index: int) -> List[Tuple[int, BBox]]:
        """Entries no more than ``window`` frames older than ``frame_index``."""
        return [(f, box) for f, box in self._entries if 0 < frame_index - f <= self.window]


def _normalised_distance(a: BBox, b: BBox, frame: FrameGeometry, mode: str) -> float:
    if mode == "maxdim":
        frame.validate()
        return center_distance(a, b) / frame.max_dimension
    return center_distance(a, b, frame)


def is_reliable(
    det: Detection,
    tracker_box: Optional[BBox],
    history: TrajectoryHistory,
    frame: FrameGeometry,
    cfg: FusionConfig,
    frame_index: Optional[int] = None,
) -> Tuple[bool, GateResult]:
    """
    Evaluates the three reliability gates of a detection.

    - confidence: ``det.confidence > conf_threshold``
    - alignment: a tracker box exists and ``ciou(tracker_box, det.box) > ciou_threshold``
    - proximity: the IoU with the most recent output in the window exceeds
      ``proximity_iou``, or the minimum normalised center distance to the outputs
      in the window is below ``proximity_center_dist``

    Args:
        det (Detection): Candidate detection.
        tracker_box (BBox, optional): Tracker output for the same frame.
        history (TrajectoryHistory): Recent output boxes.
        frame (FrameGeometry): Image size for distance normalisation.
        cfg (FusionConfig): Thresholds.
        frame_index (int, optional): Current frame; defaults to ``det.frame_index``.

    Returns:
        Tuple[bool, GateResult]: Reliability and the individual gate results.
    """
    det.validate()
    current = det.frame_index if frame_index is None else frame_index
    confidence_gate = det.confidence > cfg.conf_threshold
    alignment_gate = tracker_box is not None and ciou(tracker_box, det.box) > cfg.ciou_threshold

    proximity_gate = False
    recent = history.recent(current)
    if recent:
        _, latest = recent[-1]
        if iou(det.box, latest) > cfg.proximity_iou:
            proximity_gate = True
        else:
            nearest = min(_normalised_distance(det.box, box, frame, cfg.center_dist_norm)
                          for _, box in recent)
            proximity_gate = nearest < cfg.proximity_center_dist

    gates = GateResult(confidence_gate, alignment_gate, proximity_gate)
    return gates.reliable, gates


class FusionEngine:
    """
    Stateful fusion module for one sequence.

    Args:
        cfg (FusionConfig): Fusion parameters.
        frame (FrameGeometry): Image size of the sequence.
    """

    def __init__(self, cfg: FusionConfig, frame: FrameGeometry):
        cfg.validate()
        frame.validate()
        self.cfg = cfg
        self.frame = frame
        self.history = TrajectoryHistory(cfg.window)
        self._last_prompt: Optional[int] = None

    @property
    def initialized(self) -> bool:
        """True once ``initialize`` has been called."""
        return self._last_prompt is not None

    def initialize(self, frame_index: int, box: Optional[BBox] = None) -> None:
        """
        Starts the engine; the initial box prompt counts as a prompt on ``frame_index``.
        """
        self.history.clear()
        self._last_prompt = frame_index
        logger.debug("Fusion engine initialised at frame %s with %s", frame_index, box)

    def fuse_frame(
        self,
        frame_index: int,
        tracker_out: Optional[TrackerOutput],
        det: Optional[Detection],
    ) -> FusionDecision:
        """
        Fuses the tracker output and the detection of one frame.

        Order of the rules: a reliable detection issues a prompt (subject to the
        prompt policy); a tracker box fully enclosed by the detection is averaged
        with it; otherwise a prompted detection is output as is; otherwise the
        tracker box (or nothing) is output.

        Args:
            frame_index (int): Current frame; frames must be fused in order.
            tracker_out (TrackerOutput, optional): Tracker output, None when lost.
            det (Detection, optional): The frame's candidate detection.

        Returns:
            FusionDecision: The frame's decision.

        Raises:
            UninitializedError: If called before ``initialize``.
        """
        if not self.initialized:
            raise UninitializedError("FusionEngine")
        cfg = self.cfg
        tracker_box = tracker_out.box if tracker_out is not None else None

        reliable, gates = False, GateResult()
        if det is not None:
            reliable, gates = is_reliable(det, tracker_box, self.history, self.frame, cfg, frame_index)

        since = frame_index - self._last_prompt
        if not reliable:
            prompted = False
        elif cfg.prompt_policy == "eager":
            prompted = True
        else:
            prompted = since >= cfg.prompt_cadence or tracker_box is None

        averaged = (det is not None and tracker_box is not None
                    and (reliable or not cfg.average_requires_reliable)
                    and encloses(det.box, tracker_box))

        if averaged:
            output, confidence, source = mean_box(tracker_box, det.box), det.confidence, "averaged"
        elif prompted:
            output, confidence, source = det.box, det.confidence, "detector_prompted"
        elif tracker_box is not None:
            output, confidence, source = tracker_box, tracker_out.objectness, "tracker"
        else:
            output, confidence, source = None, 0.0, "none"

        prompt = None
        if prompted:
            self._last_prompt = frame_index
            prompt = output if cfg.reseed_with_output else det.box
        frames_since_prompt = frame_index - self._last_prompt
        cadence_ok = frames_since_prompt < cfg.prompt_cadence
        if not cadence_ok and frames_since_prompt == cfg.prompt_cadence and cfg.prompt_policy == "cadence":
            logger.warning("No reliable detection to prompt with for %s frames (frame %s)",
                           frames_since_prompt, frame_index)

        if output is not None:
            self.history.push(frame_index, output)

        decision = FusionDecision(
            frame_index=frame_index, gates=gates, reliable=reliable, prompted=prompted,
            averaged=averaged, output=output, output_confidence=confidence, source=source,
            tracker_box=tracker_box, detection=det, frames_since_prompt=frames_since_prompt,
            cadence_ok=cadence_ok, prompt=prompt)
        logger.debug("Frame %s: %s", frame_index, decision)
        return decision


def best_detection(detections: Sequence[Detection]) -> Optional[Detection]:
    """Highest-confidence detection of a frame (first one on ties), or None."""
    best = None
    for det in detections:
        if best is None or det.confidence > best.confidence:
            best = det
    return best


def find_initialization(
    strategy: str,
    gt: Optional[Sequence[Optional[BBox]]] = None,
    detections: Optional[Sequence[Sequence[Detection]]] = None,
) -> Tuple[int, BBox]:
    """
    Finds the initialisation frame and box of a sequence.

    Args:
        strategy (str): ``'gt'`` for the first ground-truth box, ``'detector'`` for
            the highest-confidence detection of the first frame with any detection.
        gt (Sequence[Optional[BBox]], optional): Ground truth stream.
        detections (Sequence[Sequence[Detection]], optional): Detection stream.

    Returns:
        Tuple[int, BBox]: Frame index and box.

    Raises:
        ValueError: If the strategy is unknown.
        InitializationError: If no box is available anywhere in the sequence.
    """
    if strategy not in INIT_STRATEGIES:
        raise ValueError(f"Unknown initialisation strategy '{strategy}'. Expected one of {INIT_STRATEGIES}.")
    if strategy == "gt":
        for frame_index, box in enumerate(gt or []):
            if box is not None:
                return frame_index, box
    else:
        for frame_index, frame_dets in enumerate(detections or []):
            det = best_detection(frame_dets)
            if det is not None:
                return frame_index, det.box
    raise InitializationError(strategy)


def _idle_decision(frame_index: int) -> FusionDecision:
    return FusionDecision(frame_index, GateResult(), False, False, False, None, 0.0, "none",
                          frames_since_prompt=None, cadence_ok=True)


def run_sequence(
    tracker,
    detections: Sequence[Sequence[Detection]],
    frame: FrameGeometry,
    cfg: FusionConfig,
    frame_count: int,
    mode: str = "augmented",
    init: Optional[Tuple[int, BBox]] = None,
) -> List[FusionDecision]:
    """
    Runs the tracker and the fusion module over a whole sequence.

    Frames before the initialisation frame yield ``source='none'`` decisions. On
    the initialisation frame the tracker receives the initial box; from then on
    each frame's prompt (if any) is forwarded to the tracker on the next frame.

    Args:
        tracker: Any object with ``initialize(box, frame_index)`` and
            ``step(frame_index, prompt) -> Optional[TrackerOutput]``, e.g.
            ``SurrogateTracker`` or ``ReplayTracker``. Unused in detector-only mode.
        detections (Sequence[Sequence[Detection]]): Per-frame detection lists.
        frame (FrameGeometry): Image size.
        cfg (FusionConfig): Fusion parameters.
        frame_count (int): Number of frames in the sequence.
        mode (str): ``'tracker-only'`` (no prompt after initialisation),
            ``'augmented'`` (prediction fusion) or ``'detector-only'`` (the raw
            detector stream).
        init (Tuple[int, BBox], optional): Externally supplied initialisation
            (e.g. from ground truth). Defaults to the first detection.

    Returns:
        List[FusionDecision]: Exactly ``frame_count`` decisions.

    Raises:
        ValueError: If the mode is unknown.
        InitializationError: If no initialisation box exists.
    """
    if mode not in MODES:
        raise ValueError(f"Unknown mode '{mode}'. Expected one of {MODES}.")
    detections = list(detections)

    def frame_detections(frame_index: int) -> Sequence[Detection]:
        return detections[frame_index] if frame_index < len(detections) else ()

    if mode == "detector-only":
        decisions = []
        for frame_index in range(frame_count):
            det = best_detection(frame_detections(frame_index))
            if det is None:
                decisions.append(_idle_decision(frame_index))
            else:
                decisions.append(FusionDecision(
                    frame_index, GateResult(), False, False, False, det.box, det.confidence,
                    "detector", detection=det))
        logger.info("Detector-only run over %s frames", frame_count)
        return decisions

    init_frame, init_box = init if init is not None else find_initialization(
        "detector", detections=detections[:frame_count])
    engine = FusionEngine(cfg, frame)
    decisions = [_idle_decision(f) for f in range(min(init_frame, frame_count))]
    prompt = None
    for frame_index in range(init_frame, frame_count):
        if frame_index == init_frame:
            tracker.initialize(init_box, frame_index)
            engine.initialize(frame_index, init_box)
        tracker_out = tracker.step(frame_index, prompt)
        det = best_detection(frame_detections(frame_index)) if mode == "augmented" else None
        decision = engine.fuse_frame(frame_index, tracker_out, det)
        prompt = decision.prompt
        decisions.append(decision)

    logger.info("Fused %s frames in %s mode from frame %s: %s prompts, %s averaged",
                frame_count, mode, init_frame,
                sum(d.prompted for d in decisions), sum(d.averaged for d in decisions))
    return decisions
