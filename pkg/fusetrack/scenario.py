"""
Synthetic drone sequences: parametric trajectories with field-of-view exits,
scale variation and a stochastic detector with dropout bursts and clutter.
"""
# pylint: disable=C0301
import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, NamedTuple, Optional, Tuple

import numpy as np

from fusetrack.exceptions import StreamValidationError, UnknownPresetError
from fusetrack.fusion import Detection
from fusetrack.geometry import BBox, FrameGeometry
from fusetrack.tracker import SurrogateModel

logger = logging.getLogger(__name__)

TRAJECTORIES = ("linear", "sinusoidal", "waypoint")
MIN_DETECTION_SIZE = 1.0


@dataclass(frozen=True)
class ScenarioSpec:
    """
    Parameters of a synthetic sequence.

    Attributes:
        name (str): Sequence name.
        width (float): Frame width in pixels.
        height (float): Frame height in pixels.
        fps (float): Nominal frame rate, carried into the sequence metadata.
        length (int): Number of frames.
        trajectory (str): ``linear``, ``sinusoidal`` or ``waypoint``.
        area_ratio_min (float): Smallest object area as a fraction of the frame area.
        area_ratio_max (float): Largest object area as a fraction of the frame area.
        aspect_ratio (float): Object width over height.
        speed (float): Target speed in pixels per frame.
        scale_period (int): Frames per full small-large-small scale cycle.
        exit_segments (tuple): ``(start, end)`` half-open frame ranges where the
            target is outside the field of view.
        waypoints (tuple): ``(fx, fy)`` waypoints as fractions of the frame size,
            for the waypoint trajectory. Empty means random waypoints.
        seed (int): Seed of the sequence's random stream.
    """
    name: str = "synthetic"
    width: float = 1920.0
    height: float = 1080.0
    fps: float = 60.0
    length: int = 1000
    trajectory: str = "sinusoidal"
    area_ratio_min: float = 5e-4
    area_ratio_max: float = 3e-3
    aspect_ratio: float = 1.5
    speed: float = 3.0
    scale_period: int = 1200
    exit_segments: Tuple[Tuple[int, int], ...] = ()
    waypoints: Tuple[Tuple[float, float], ...] = ()
    seed: int = 0

    @property
    def frame(self) -> FrameGeometry:
        """Image size of the sequence."""
        return FrameGeometry(self.width, self.height)

    @property
    def max_area_ratio(self) -> float:
        """Largest area ratio whose box, at this aspect ratio, still fits the frame."""
        return min(self.width / (self.height * self.aspect_ratio),
                   self.height * self.aspect_ratio / self.width)

    def validate(self) -> None:
        """
        Checks the scenario's invariants.

        Raises:
            StreamValidationError: If the scenario is inconsistent.
        """
        try:
            self.frame.validate()
        except ValueError as exc:
            raise StreamValidationError(str(exc)) from exc
        problems = []
        if not isinstance(self.length, int) or self.length < 1:
            problems.append("length must be an integer >= 1")
        if self.trajectory not in TRAJECTORIES:
            problems.append(f"trajectory must be one of {TRAJECTORIES}")
        if not 0.0 < self.area_ratio_min <= self.area_ratio_max < 1.0:
            problems.append("area ratios must satisfy 0 < min <= max < 1")
        if self.aspect_ratio <= 0 or self.speed < 0 or self.scale_period < 1:
            problems.append("aspect_ratio must be > 0, speed >= 0 and scale_period >= 1")
        elif self.area_ratio_max > self.max_area_ratio:
            problems.append(f"'area_ratio_max' {self.area_ratio_max} at aspect ratio "
                            f"{self.aspect_ratio} gives a box larger than the frame "
                            f"(at most {self.max_area_ratio:.6g})")
        for start, end in self.exit_segments:
            if not 0 <= start < end <= self.length:
                problems.append(f"exit segment ({start}, {end}) must lie within [0, {self.length})")
        for fx, fy in self.waypoints:
            if not (0.0 <= fx <= 1.0 and 0.0 <= fy <= 1.0):
                problems.append(f"waypoint ({fx}, {fy}) must lie within the unit square")
        if problems:
            raise StreamValidationError(f"Invalid scenario '{self.name}': " + "; ".join(problems))

    def visible(self, frame_index: int) -> bool:
        """False inside an exit segment."""
        return not any(start <= frame_index < end for start, end in self.exit_segments)


@dataclass(frozen=True)
class DetectorModel:
    """
    Stochastic detector.

    Detection presence follows a two-state Markov chain whose stationary
    detection rate is ``detect_prob`` and whose mean miss-burst length is
    ``dropout_burst``. Confidence is ``clamp(1 - e / conf_scale + noise, 0, 1)``
    with ``e`` the localisation error in pixels.

    Attributes:
        detect_prob (float): Long-run fraction of visible frames with a detection.
        dropout_burst (float): Mean length of a run of missed frames (>= 1).
        loc_noise_sigma (float): Center jitter per axis, pixels.
        size_noise_ratio (float): Size jitter as a fraction of ``loc_noise_sigma``.
        conf_scale (float): Localisation error at which confidence reaches 0.
        conf_noise_sigma (float): Additive confidence noise.
        clutter_rate (float): Mean number of false detections per frame.
        clutter_conf_low (float): Lower bound of clutter confidence.
        clutter_conf_high (float): Upper bound of clutter confidence.
    """
    detect_prob: float = 0.9
    dropout_burst: float = 5.0
    loc_noise_sigma: float = 2.0
    size_noise_ratio: float = 0.5
    conf_scale: float = 10.0
    conf_noise_sigma: float = 0.0
    clutter_rate: float = 0.02
    clutter_conf_low: float = 0.05
    clutter_conf_high: float = 0.6

    def validate(self) -> None:
        """
        Raises:
            ValueError: If a probability leaves [0, 1] or a scale is negative.
        """
        for name in ("detect_prob", "clutter_conf_low", "clutter_conf_high"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"The '{name}' must lie in [0, 1].")
        if self.clutter_conf_low > self.clutter_conf_high:
            raise ValueError("The 'clutter_conf_low' must not exceed 'clutter_conf_high'.")
        if self.dropout_burst < 1.0:
            raise ValueError("The 'dropout_burst' must be >= 1 frame.")
        for name in ("loc_noise_sigma", "size_noise_ratio", "conf_noise_sigma", "clutter_rate"):
            if getattr(self, name) < 0:
                raise ValueError(f"The '{name}' must be >= 0.")
        if self.conf_scale <= 0:
            raise ValueError("The 'conf_scale' must be > 0.")

    def transition_probabilities(self) -> Tuple[float, float]:
        """
        Markov transition probabilities ``(p_detect_to_miss, p_miss_to_detect)``.

        An infeasible combination (a burst too short for the requested miss rate)
        is clamped with a warning.
        """
        p_recover = 1.0 / self.dropout_burst
        if self.detect_prob <= 0.0:
            return 1.0, 0.0
        p_drop = p_recover * (1.0 - self.detect_prob) / self.detect_prob
        if p_drop > 1.0:
            logger.warning("Dropout model infeasible (detect_prob=%s, dropout_burst=%s); clamping",
                           self.detect_prob, self.dropout_burst)
            p_drop = 1.0
        return p_drop, p_recover


class SimulationPreset(NamedTuple):
    """A registered scenario with the detector and tracker surrogates that go with it."""
    spec: ScenarioSpec
    detector: DetectorModel
    surrogate: SurrogateModel


def _box_size(area_ratio: float, spec: ScenarioSpec) -> Tuple[float, float]:
    area = area_ratio * spec.width * spec.height
    width = math.sqrt(area * spec.aspect_ratio)
    # rounding at the largest valid ratio can overshoot the frame by an ulp
    return min(width, spec.width), min(area / width, spec.height)


def _fold(value: float, low: float, high: float) -> float:
    # reflect into [low, high], continuous in value
    span = high - low
    if span <= 0:
        return (low + high) / 2.0
    offset = (value - low) % (2.0 * span)
    if offset > span:
        offset = 2.0 * span - offset
    return low + offset


def area_ratio_profile(spec: ScenarioSpec, phase: float = 0.0) -> np.ndarray:
    """Per-frame area ratio, oscillating geometrically between the scenario's bounds."""
    t = np.arange(spec.length)
    mix = 0.5 - 0.5 * np.cos(2.0 * math.pi * t / spec.scale_period + phase)
    ratios = spec.area_ratio_min * (spec.area_ratio_max / spec.area_ratio_min) ** mix
    return np.clip(ratios, spec.area_ratio_min, spec.area_ratio_max)


def _raw_path(spec: ScenarioSpec, rng: np.random.Generator) -> np.ndarray:
    t = np.arange(spec.length, dtype=float)
    start = np.array([rng.uniform(0.2, 0.8) * spec.width, rng.uniform(0.2, 0.8) * spec.height])
    angle = rng.uniform(0.0, 2.0 * math.pi)
    heading = np.array([math.cos(angle), math.sin(angle)])
    if spec.trajectory == "linear":
        return start + np.outer(t * spec.speed, heading)
    if spec.trajectory == "sinusoidal":
        amplitude = 0.1 * min(spec.width, spec.height)
        period = rng.uniform(180.0, 480.0)
        normal = np.array([-heading[1], heading[0]])
        along = np.outer(t * spec.speed, heading)
        across = np.outer(amplitude * np.sin(2.0 * math.pi * t / period), normal)
        return start + along + across

    if spec.waypoints:
        points = np.array(spec.waypoints, dtype=float)
    else:
        points = rng.uniform(0.1, 0.9, size=(5, 2))
    points = points * np.array([spec.width, spec.height])
    if len(points) == 1:
        return np.repeat(points, spec.length, axis=0)
    loop = np.vstack([points, points[:1]])
    seg_lengths = np.linalg.norm(np.diff(loop, axis=0), axis=1)
    cumulative = np.concatenate(([0.0], np.cumsum(seg_lengths)))
    total = cumulative[-1]
    if total == 0:
        return np.repeat(points[:1], spec.length, axis=0)
    travelled = (t * spec.speed) % total
    xs = np.interp(travelled, cumulative, loop[:, 0])
    ys = np.interp(travelled, cumulative, loop[:, 1])
    return np.column_stack([xs, ys])


def generate_ground_truth(spec: ScenarioSpec, rng: np.random.Generator) -> List[Optional[BBox]]:
    """
    Ground-truth stream of a scenario.

    The target keeps moving through exit segments (where its box is None), so it
    re-enters away from where it left. Visible boxes always lie inside the frame.
    """
    spec.validate()
    ratios = area_ratio_profile(spec, phase=rng.uniform(0.0, 2.0 * math.pi))
    path = _raw_path(spec, rng)
    boxes: List[Optional[BBox]] = []
    for frame_index in range(spec.length):
        w, h = _box_size(float(ratios[frame_index]), spec)
        cx = _fold(float(path[frame_index, 0]), w / 2.0, spec.width - w / 2.0)
        cy = _fold(float(path[frame_index, 1]), h / 2.0, spec.height - h / 2.0)
        box = BBox(min(max(cx - w / 2.0, 0.0), spec.width - w),
                   min(max(cy - h / 2.0, 0.0), spec.height - h), w, h)
        boxes.append(box if spec.visible(frame_index) else None)
    return boxes


def _clutter_box(spec: ScenarioSpec, rng: np.random.Generator) -> BBox:
    log_ratio = rng.uniform(math.log(spec.area_ratio_min), math.log(spec.area_ratio_max))
    w, h = _box_size(math.exp(log_ratio), spec)
    return BBox(rng.uniform(0.0, spec.width - w), rng.uniform(0.0, spec.height - h), w, h)


def simulate_detections(
    gt: List[Optional[BBox]],
    spec: ScenarioSpec,
    det_model: DetectorModel,
    rng: np.random.Generator,
) -> List[List[Detection]]:
    """
    Detection stream for a ground-truth stream.

    Each frame carries at most one true detection (while the target is visible
    and the dropout chain is in its detecting state) followed by Poisson clutter.
    """
    det_model.validate()
    p_drop, p_recover = det_model.transition_probabilities()
    detecting = rng.random() < det_model.detect_prob
    size_sigma = det_model.loc_noise_sigma * det_model.size_noise_ratio
    stream: List[List[Detection]] = []
    for frame_index, gt_box in enumerate(gt):
        if frame_index > 0:
            detecting = rng.random() >= p_drop if detecting else rng.random() < p_recover
        noise = rng.standard_normal(5)
        frame_dets = []
        if detecting and gt_box is not None:
            gcx, gcy = gt_box.center
            dx, dy = det_model.loc_noise_sigma * noise[0], det_model.loc_noise_sigma * noise[1]
            box = BBox.from_center(gcx + dx, gcy + dy,
                                   max(gt_box.w + size_sigma * noise[2], MIN_DETECTION_SIZE),
                                   max(gt_box.h + size_sigma * noise[3], MIN_DETECTION_SIZE))
            error = math.hypot(dx, dy)
            confidence = 1.0 - error / det_model.conf_scale + det_model.conf_noise_sigma * noise[4]
            frame_dets.append(Detection(frame_index, box, float(min(max(confidence, 0.0), 1.0))))
        for _ in range(rng.poisson(det_model.clutter_rate)):
            confidence = rng.uniform(det_model.clutter_conf_low, det_model.clutter_conf_high)
            frame_dets.append(Detection(frame_index, _clutter_box(spec, rng), float(confidence)))
        stream.append(frame_dets)
    return stream


def generate(spec: ScenarioSpec, det_model: DetectorModel) -> Tuple[List[Optional[BBox]], List[List[Detection]]]:
    """
    Generates a scenario's ground-truth and detection streams.

    Everything is drawn from ``numpy.random.default_rng(spec.seed)``, so the same
    scenario always yields the same streams.

    Args:
        spec (ScenarioSpec): Scenario parameters.
        det_model (DetectorModel): Detector parameters.

    Returns:
        Tuple[List[Optional[BBox]], List[List[Detection]]]: Per-frame ground truth
        and per-frame detection lists.

    Raises:
        StreamValidationError: If the scenario is inconsistent.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    gt = generate_ground_truth(spec, rng)
    detections = simulate_detections(gt, spec, det_model, rng)
    logger.info("Generated scenario '%s': %s frames, %s visible, %s detections",
                spec.name, spec.length, sum(b is not None for b in gt),
                sum(len(d) for d in detections))
    return gt, detections


def _custom_preset(name: str, length: int, exits, area_max: float, aspect: float, trajectory: str):
    def build(seed: int) -> SimulationPreset:
        spec = ScenarioSpec(
            name=name, width=2040.0, height=1086.0, fps=60.0, length=length,
            trajectory=trajectory, area_ratio_min=2.7e-4, area_ratio_max=area_max,
            aspect_ratio=aspect, speed=2.5, scale_period=1500,
            exit_segments=tuple(exits), seed=seed)
        detector = DetectorModel(detect_prob=0.85, dropout_burst=8.0, loc_noise_sigma=2.0,
                                 conf_scale=10.0, conf_noise_sigma=0.05, clutter_rate=0.05)
        surrogate = SurrogateModel(noise_sigma=1.0, drift_rate=0.08)
        return SimulationPreset(spec, detector, surrogate)
    return build


def _dut_preset(name: str, length: int, width: float, height: float, exits):
    def build(seed: int) -> SimulationPreset:
        spec = ScenarioSpec(
            name=name, width=width, height=height, fps=30.0, length=length,
            trajectory="waypoint", area_ratio_min=1e-3, area_ratio_max=0.01,
            aspect_ratio=1.8, speed=3.0, scale_period=900,
            exit_segments=tuple(exits), seed=seed)
        detector = DetectorModel(detect_prob=0.9, dropout_burst=4.0, loc_noise_sigma=2.0,
                                 conf_scale=12.0, conf_noise_sigma=0.05, clutter_rate=0.02)
        surrogate = SurrogateModel(noise_sigma=1.0, drift_rate=0.05)
        return SimulationPreset(spec, detector, surrogate)
    return build


PRESETS: Dict[str, Callable[[int], SimulationPreset]] = {
    "r1-pos3-like": _custom_preset(
        "r1-pos3-like", 6213, [(700, 790), (2100, 2230), (3500, 3560), (4800, 4920)],
        0.0045, 1.4, "sinusoidal"),
    "r1-pos7-like": _custom_preset(
        "r1-pos7-like", 6327, [(900, 1010), (2400, 2530), (3900, 3960), (5200, 5330)],
        0.0045, 1.4, "sinusoidal"),
    "r2-pos3-like": _custom_preset(
        "r2-pos3-like", 1484, [(500, 560), (1000, 1120)],
        0.002, 2.0, "waypoint"),
    "r2-pos7-like": _custom_preset(
        "r2-pos7-like", 4908, [(800, 880), (2000, 2110), (3300, 3420), (4200, 4260)],
        0.002, 2.0, "waypoint"),
    "dut-short-like": _dut_preset("dut-short-like", 83, 1280.0, 720.0, []),
    "dut-long-like": _dut_preset("dut-long-like", 2635, 1920.0, 1080.0, [(1200, 1290), (2000, 2060)]),
}


def long_duration_preset(name: str, seed: int = 0) -> SimulationPreset:
    """
    Looks up a registered scenario preset.

    Args:
        name (str): Preset name, e.g. ``'r1-pos7-like'``.
        seed (int): Seed placed in the returned scenario spec.

    Returns:
        SimulationPreset: Scenario spec, detector model and surrogate model.

    Raises:
        UnknownPresetError: If ``name`` is not registered.
    """
    if name not in PRESETS:
        raise UnknownPresetError(name, PRESETS.keys())
    return PRESETS[name](seed)

