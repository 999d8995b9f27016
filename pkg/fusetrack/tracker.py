"""
Surrogate tracker standing in for a promptable mask tracker.

The surrogate exposes the decision points of such a tracker (candidate boxes
with mask-affinity and objectness scores, prompts, a Kalman motion prior and a
motion-aware memory bank) without any neural network behind them. Candidates
are drawn around the scene ground truth while the tracker is locked on the
target, with a drift that accumulates between prompts; once the drift carries
the belief away from the target the surrogate keeps following the background.
"""
import logging
import math
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from fusetrack.exceptions import EmptyInputError, UninitializedError
from fusetrack.geometry import BBox, center_distance
from fusetrack.motion import KalmanConfig, KalmanState, kf_correct, kf_iou, kf_predict, state_from_box

logger = logging.getLogger(__name__)

MIN_CANDIDATE_SIZE = 1.0


class Candidate(NamedTuple):
    """
    A tracker-side hypothesis for one frame.

    Attributes:
        box (BBox): Mask-derived bounding box.
        affinity (float): Mask-affinity surrogate in [0, 1].
        objectness (float): Frame-level objectness surrogate in [0, 1].
    """
    box: BBox
    affinity: float
    objectness: float

    def validate(self) -> None:
        """
        Raises:
            ValueError: If a score lies outside [0, 1].
            InvalidGeometryError: If the box is degenerate.
        """
        self.box.validate()
        if not 0.0 <= self.affinity <= 1.0:
            raise ValueError("Invalid 'affinity': it must lie in [0, 1].")
        if not 0.0 <= self.objectness <= 1.0:
            raise ValueError("Invalid 'objectness': it must lie in [0, 1].")


class TrackerOutput(NamedTuple):
    """The box a tracker reports for a frame, with the scores that backed it."""
    box: BBox
    objectness: float
    affinity: float = 1.0


class MemoryEntry(NamedTuple):
    """
    A frame offered to the memory bank.

    Attributes:
        frame_index (int): Frame the entry comes from.
        box (BBox): Selected box of that frame.
        affinity (float): Mask-affinity score.
        objectness (float): Objectness score.
        kf_iou (float): Motion consistency (KF-IoU) score.
        composite_score (float): Weighted mean of the three scores.
    """
    frame_index: int
    box: BBox
    affinity: float
    objectness: float
    kf_iou: float
    composite_score: float

    def rank_key(self) -> Tuple[float, int]:
        """Ordering used for retention: higher score first, newer frame on ties."""
        return (self.composite_score, self.frame_index)


class MemoryBank(NamedTuple):
    """
    Bounded set of the best-scoring frames offered since the last reset.

    Attributes:
        capacity (int): Maximum number of entries.
        entries (tuple): Retained entries, ordered by frame index.
    """
    capacity: int
    entries: Tuple[MemoryEntry, ...] = ()

    def validate(self) -> None:
        """
        Raises:
            ValueError: If the capacity is not positive or is exceeded.
        """
        if not isinstance(self.capacity, int) or self.capacity <= 0:
            raise ValueError("Invalid 'capacity': it must be a positive integer.")
        if len(self.entries) > self.capacity:
            raise ValueError("Memory bank holds more entries than its capacity.")


@dataclass(frozen=True)
class SelectionConfig:
    """
    Candidate selection and memory scoring parameters.

    Attributes:
        alpha_kf (float): Weight of KF-IoU against mask affinity in candidate selection.
        memory_capacity (int): Number of frames kept in the memory bank.
        score_weights (tuple): Weights of (affinity, objectness, kf_iou) in the
            memory composite score.
    """
    alpha_kf: float = 0.15
    memory_capacity: int = 7
    score_weights: Tuple[float, float, float] = (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0)

    def validate(self) -> None:
        """
        Raises:
            ValueError: If any parameter breaks its invariant.
        """
        if not 0.0 <= self.alpha_kf <= 1.0:
            raise ValueError("The 'alpha_kf' weight must lie in [0, 1].")
        if not isinstance(self.memory_capacity, int) or self.memory_capacity <= 0:
            raise ValueError("The 'memory_capacity' must be a positive integer.")
        if len(self.score_weights) != 3 or any(w < 0 for w in self.score_weights):
            raise ValueError("The 'score_weights' must be three non-negative numbers.")
        if sum(self.score_weights) <= 0:
            raise ValueError("The 'score_weights' must not sum to zero.")


@dataclass(frozen=True)
class SurrogateModel:
    """
    Behaviour of the surrogate tracker.

    Attributes:
        noise_sigma (float): Candidate center jitter (pixels, per axis).
        drift_rate (float): Drift accumulated per un-prompted frame (pixels).
        candidate_count (int): Candidates produced per frame.
        affinity_scale (float): Center error, as a fraction of the target size
            ``sqrt(w * h)``, at which affinity falls to ``1/e``.
        size_noise_ratio (float): Size jitter as a fraction of ``noise_sigma``.
        visible_objectness (float): Mean objectness while the target is in view.
        absent_objectness (float): Mean objectness while the target is out of view.
        objectness_sigma (float): Objectness jitter.
        lost_threshold (float): Objectness below which no box is reported.
        capture_radius (float): Distance, as a multiple of the target size, within
            which the tracker stays locked on the target.
        gt_pull (float): Blend weight of the target against the internal belief
            while locked.
    """
    noise_sigma: float = 1.0
    drift_rate: float = 0.05
    candidate_count: int = 3
    affinity_scale: float = 0.5
    size_noise_ratio: float = 0.5
    visible_objectness: float = 0.9
    absent_objectness: float = 0.05
    objectness_sigma: float = 0.05
    lost_threshold: float = 0.3
    capture_radius: float = 1.0
    gt_pull: float = 1.0

    def validate(self) -> None:
        """
        Raises:
            ValueError: If any parameter breaks its invariant.
        """
        if not isinstance(self.candidate_count, int) or self.candidate_count < 1:
            raise ValueError("The 'candidate_count' must be an integer >= 1.")
        for name in ("noise_sigma", "drift_rate", "size_noise_ratio", "objectness_sigma"):
            if getattr(self, name) < 0:
                raise ValueError(f"The '{name}' must be >= 0.")
        for name in ("affinity_scale", "capture_radius"):
            if getattr(self, name) <= 0:
                raise ValueError(f"The '{name}' must be > 0.")
        for name in ("visible_objectness", "absent_objectness", "lost_threshold", "gt_pull"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"The '{name}' must lie in [0, 1].")


def _is_locked(belief: BBox, gt: BBox, model: SurrogateModel) -> bool:
    return center_distance(belief, gt) <= model.capture_radius * math.sqrt(gt.area)


def generate_candidates(
    gt: Optional[BBox],
    internal_belief: BBox,
    model: SurrogateModel,
    rng: np.random.Generator,
    drift: Sequence[float] = (0.0, 0.0),
) -> List[Candidate]:
    """
    Draws the per-frame candidates of the surrogate tracker.

    While the target is visible and the belief is within the capture radius,
    candidates are jittered around ``gt_pull`` times the drifted target plus
    ``1 - gt_pull`` times the belief. Otherwise they are jittered around the
    belief itself. Affinity decays exponentially with the candidate's center
    error to the target (0 without a target). Objectness is a frame-level score,
    kept strictly below ``lost_threshold`` while the target is out of view.

    The random stream is consumed identically whatever the inputs, so runs stay
    aligned across modes.

    Args:
        gt (BBox, optional): Scene ground truth, None when the target is out of view.
        internal_belief (BBox): The tracker's current belief.
        model (SurrogateModel): Surrogate parameters.
        rng (np.random.Generator): Seeded random stream.
        drift (Sequence[float]): Accumulated ``(dx, dy)`` drift since the last prompt.

    Returns:
        List[Candidate]: ``model.candidate_count`` candidates.
    """
    internal_belief.validate()
    bcx, bcy = internal_belief.center
    if gt is not None and _is_locked(internal_belief, gt, model):
        gcx, gcy = gt.center
        pull = model.gt_pull
        anchor_cx = pull * (gcx + drift[0]) + (1.0 - pull) * bcx
        anchor_cy = pull * (gcy + drift[1]) + (1.0 - pull) * bcy
        anchor_w = pull * gt.w + (1.0 - pull) * internal_belief.w
        anchor_h = pull * gt.h + (1.0 - pull) * internal_belief.h
    else:
        anchor_cx, anchor_cy = bcx, bcy
        anchor_w, anchor_h = internal_belief.w, internal_belief.h

    if gt is not None:
        base_objectness, ceiling = model.visible_objectness, 1.0
    else:
        base_objectness, ceiling = model.absent_objectness, 0.5 * model.lost_threshold
    objectness = float(np.clip(
        base_objectness + model.objectness_sigma * rng.standard_normal(),
        0.0, min(ceiling, 1.0)))

    size_sigma = model.noise_sigma * model.size_noise_ratio
    candidates = []
    for noise in rng.standard_normal((model.candidate_count, 4)):
        box = BBox.from_center(
            anchor_cx + model.noise_sigma * noise[0],
            anchor_cy + model.noise_sigma * noise[1],
            max(anchor_w + size_sigma * noise[2], MIN_CANDIDATE_SIZE),
            max(anchor_h + size_sigma * noise[3], MIN_CANDIDATE_SIZE),
        )
        if gt is not None:
            error = center_distance(box, gt)
            affinity = math.exp(-error / (model.affinity_scale * math.sqrt(gt.area)))
        else:
            affinity = 0.0
        candidates.append(Candidate(box, affinity, objectness))
    return candidates


def select_candidate(
    candidates: Sequence[Candidate],
    kf: KalmanState,
    cfg: SelectionConfig,
) -> Tuple[Candidate, float]:
    """
    Picks the candidate maximising ``alpha_kf * KF-IoU + (1 - alpha_kf) * affinity``.

    Ties go to the lower list index.

    Args:
        candidates (Sequence[Candidate]): Non-empty candidate list.
        kf (KalmanState): Predicted motion state.
        cfg (SelectionConfig): Selection weights.

    Returns:
        Tuple[Candidate, float]: The chosen candidate and its score.

    Raises:
        EmptyInputError: If ``candidates`` is empty.
    """
    if not candidates:
        raise EmptyInputError("Cannot select from an empty candidate list.")
    best, best_score = None, -math.inf
    for candidate in candidates:
        score = cfg.alpha_kf * kf_iou(kf, candidate.box) + (1.0 - cfg.alpha_kf) * candidate.affinity
        if score > best_score:
            best, best_score = candidate, score
    return best, best_score


def make_memory_entry(
    frame_index: int,
    candidate: Candidate,
    kf_iou_score: float,
    cfg: SelectionConfig,
) -> MemoryEntry:
    """Scores a selected candidate for the memory bank."""
    w_aff, w_obj, w_kf = cfg.score_weights
    composite = (w_aff * candidate.affinity + w_obj * candidate.objectness
                 + w_kf * kf_iou_score) / (w_aff + w_obj + w_kf)
    return MemoryEntry(frame_index, candidate.box, candidate.affinity,
                       candidate.objectness, kf_iou_score, composite)


def offer_to_memory(bank: MemoryBank, entry: MemoryEntry) -> MemoryBank:
    """
    Offers a frame to the memory bank.

    The entry is inserted; if the bank overflows, the entry with the lowest
    composite score is evicted (the older one on ties). Offering an entry that
    would itself be evicted returns the bank unchanged.

    Args:
        bank (MemoryBank): Current bank.
        entry (MemoryEntry): Offered frame.

    Returns:
        MemoryBank: The updated bank.
    """
    bank.validate()
    if len(bank.entries) < bank.capacity:
        kept = bank.entries + (entry,)
    else:
        weakest = min(bank.entries, key=MemoryEntry.rank_key)
        if entry.rank_key() <= weakest.rank_key():
            return bank
        kept = tuple(e for e in bank.entries if e is not weakest) + (entry,)
    return MemoryBank(bank.capacity, tuple(sorted(kept, key=lambda e: e.frame_index)))


class SurrogateTracker:
    """
    Stateful surrogate tracker for one sequence.

    The tracker observes the scene through ``gt_stream`` (one optional box per
    frame) and is strictly sequential. Distinct instances share nothing.

    Args:
        gt_stream (Sequence[Optional[BBox]]): Scene ground truth per frame.
        model (SurrogateModel): Surrogate parameters.
        kalman_cfg (KalmanConfig): Motion model configuration.
        selection_cfg (SelectionConfig): Selection and memory configuration.
        rng (np.random.Generator): Seeded random stream owned by this tracker.
    """

    def __init__(self, gt_stream, model: SurrogateModel, kalman_cfg: KalmanConfig,
                 selection_cfg: SelectionConfig, rng: np.random.Generator):
        model.validate()
        kalman_cfg.validate()
        selection_cfg.validate()
        self.gt_stream = list(gt_stream)
        self.model = model
        self.kalman_cfg = kalman_cfg
        self.selection_cfg = selection_cfg
        self.rng = rng
        self.memory = MemoryBank(selection_cfg.memory_capacity)
        self._belief: Optional[BBox] = None
        self._kf: Optional[KalmanState] = None
        self._drift = np.zeros(2)
        self._direction = np.zeros(2)
        self._frame_index = 0

    @property
    def initialized(self) -> bool:
        """True once an initial prompt has been received."""
        return self._belief is not None

    @property
    def belief(self) -> Optional[BBox]:
        """Current internal belief."""
        return self._belief

    @property
    def kalman_state(self) -> Optional[KalmanState]:
        """Current motion state."""
        return self._kf

    def _reseed(self, box: BBox) -> None:
        box.validate()
        self._belief = box
        self._kf = state_from_box(box, self.kalman_cfg)
        self._drift = np.zeros(2)
        angle = self.rng.uniform(0.0, 2.0 * math.pi)
        self._direction = np.array([math.cos(angle), math.sin(angle)])

    def initialize(self, box: BBox, frame_index: int = 0) -> None:
        """Initialises the tracker with a box prompt on ``frame_index``."""
        self._reseed(box)
        self._frame_index = frame_index
        self.memory = MemoryBank(self.selection_cfg.memory_capacity)
        logger.debug("Surrogate tracker initialised at frame %s on %s", frame_index, box)

    def track_step(self, gt: Optional[BBox], prompt: Optional[BBox] = None) -> Optional[TrackerOutput]:
        """
        Processes one frame.

        A prompt re-seeds the belief and the Kalman mean (velocities zeroed) and
        clears the drift before candidates are drawn; without one the drift grows
        by ``drift_rate`` and the filter is predicted forward. The chosen candidate
        corrects the filter and is offered to the memory bank.

        Args:
            gt (BBox, optional): Scene ground truth for this frame.
            prompt (BBox, optional): Box prompt to re-seed on.

        Returns:
            TrackerOutput | None: The selected box, or None when the frame's
            objectness falls below ``lost_threshold``.

        Raises:
            UninitializedError: If called before ``initialize``.
        """
        if not self.initialized:
            raise UninitializedError("SurrogateTracker")
        if prompt is not None:
            self._reseed(prompt)
        else:
            self._drift = self._drift + self.model.drift_rate * self._direction
            self._kf = kf_predict(self._kf, self.kalman_cfg)

        candidates = generate_candidates(gt, self._belief, self.model, self.rng, self._drift)
        chosen, _ = select_candidate(candidates, self._kf, self.selection_cfg)
        motion_score = kf_iou(self._kf, chosen.box)
        self.memory = offer_to_memory(
            self.memory,
            make_memory_entry(self._frame_index, chosen, motion_score, self.selection_cfg))
        self._frame_index += 1

        if chosen.objectness < self.model.lost_threshold:
            return None
        self._kf = kf_correct(self._kf, chosen.box, self.kalman_cfg)
        self._belief = chosen.box
        return TrackerOutput(chosen.box, chosen.objectness, chosen.affinity)

    def step(self, frame_index: int, prompt: Optional[BBox] = None) -> Optional[TrackerOutput]:
        """Tracker-source interface: steps on the scene ground truth of ``frame_index``."""
        gt = self.gt_stream[frame_index] if frame_index < len(self.gt_stream) else None
        self._frame_index = frame_index
        return self.track_step(gt, prompt)


class ReplayTracker:
    """
    Tracker source replaying a recorded stream of tracker outputs.

    Prompts cannot influence a recording; they are accepted and ignored.
    """

    def __init__(self, stream: Sequence[Optional[TrackerOutput]]):
        self.stream = list(stream)
        self.initialized = False

    def initialize(self, box: BBox, frame_index: int = 0) -> None:
        """Marks the replay as started; the recording already carries its own start."""
        box.validate()
        self.initialized = True
        logger.debug("Replay tracker started at frame %s", frame_index)

    def step(self, frame_index: int, prompt: Optional[BBox] = None) -> Optional[TrackerOutput]:
        """Returns the recorded output of ``frame_index`` (None past the end)."""
        # pylint: disable=W0613
        if not self.initialized:
            raise UninitializedError("ReplayTracker")
        if frame_index < len(self.stream):
            return self.stream[frame_index]
        return None
