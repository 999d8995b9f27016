"""
Test run_sequence and find_initialization functions
from fusion.py file
"""
import numpy as np
import pytest

from fusetrack.exceptions import InitializationError
from fusetrack.fusion import (
    Detection,
    FusionConfig,
    best_detection,
    find_initialization,
    run_sequence,
)
from fusetrack.geometry import BBox, FrameGeometry, encloses, mean_box
from fusetrack.motion import KalmanConfig
from fusetrack.scenario import DetectorModel, ScenarioSpec, generate
from fusetrack.tracker import (
    ReplayTracker,
    SelectionConfig,
    SurrogateModel,
    SurrogateTracker,
    TrackerOutput,
)

FRAME = FrameGeometry(1920.0, 1080.0)


def moving_boxes(count):
    """A target crossing the frame slowly"""
    return [BBox(100.0 + 0.2 * i, 200.0 + 0.1 * i, 30.0, 20.0) for i in range(count)]


def surrogate(gt, seed=3):
    """Surrogate tracker observing gt"""
    return SurrogateTracker(gt, SurrogateModel(), KalmanConfig(), SelectionConfig(),
                            np.random.default_rng([seed, 1]))


@pytest.mark.parametrize("policy", ["eager", "cadence"])
def test_prompt_gap_never_exceeds_cadence(policy):
    """6,000 frames with a reliable detection on every frame prompt at least every 30 frames"""
    boxes = moving_boxes(6000)
    tracker = ReplayTracker([TrackerOutput(b, 0.9) for b in boxes])
    detections = [[Detection(i, b, 0.95)] for i, b in enumerate(boxes)]
    decisions = run_sequence(tracker, detections, FRAME, FusionConfig(prompt_policy=policy),
                             6000, "augmented")
    prompt_frames = [0] + [d.frame_index for d in decisions if d.prompted]
    assert max(np.diff(prompt_frames)) <= 30
    assert all(d.cadence_ok for d in decisions)
    assert len(decisions) == 6000


def test_empty_detection_stream_matches_tracker_only():
    """Without detections augmented and tracker-only outputs are identical"""
    spec = ScenarioSpec(length=1000, exit_segments=((400, 450),), seed=4)
    gt, _ = generate(spec, DetectorModel())
    init = find_initialization("gt", gt=gt)
    runs = []
    for mode in ("tracker-only", "augmented"):
        runs.append(run_sequence(surrogate(gt), [[] for _ in gt], spec.frame, FusionConfig(),
                                 len(gt), mode, init))
    assert [(d.output, d.output_confidence) for d in runs[0]] == \
        [(d.output, d.output_confidence) for d in runs[1]]
    assert not any(d.prompted for d in runs[1])


def test_averaged_frames_are_exact_means():
    """Every averaged output is the mean of an enclosed tracker box and its detection"""
    spec = ScenarioSpec(length=400, seed=2)
    gt, detections = generate(spec, DetectorModel(loc_noise_sigma=1.0, size_noise_ratio=8.0))
    decisions = run_sequence(surrogate(gt), detections, spec.frame, FusionConfig(), len(gt))
    averaged = [d for d in decisions if d.source == "averaged"]
    assert averaged
    for decision in averaged:
        assert encloses(decision.detection.box, decision.tracker_box)
        assert decision.output == mean_box(decision.tracker_box, decision.detection.box)


def test_tracker_only_never_prompts():
    """Only the initial box reaches the tracker"""
    boxes = moving_boxes(200)
    detections = [[Detection(i, b, 0.99)] for i, b in enumerate(boxes)]
    decisions = run_sequence(surrogate(boxes), detections, FRAME, FusionConfig(), 200, "tracker-only")
    assert not any(d.prompted for d in decisions)
    assert all(d.detection is None for d in decisions)


def test_frames_before_initialisation():
    """Frames before the first detection yield source 'none'"""
    boxes = moving_boxes(50)
    detections = [[] for _ in range(5)] + [[Detection(i, b, 0.9)] for i, b in enumerate(boxes[5:], 5)]
    decisions = run_sequence(surrogate(boxes), detections, FRAME, FusionConfig(), 50)
    assert [d.source for d in decisions[:5]] == ["none"] * 5
    assert decisions[5].frame_index == 5
    assert decisions[5].output is not None
    assert len(decisions) == 50


def test_detector_only_mode():
    """The best detection of each frame is the prediction"""
    detections = [[Detection(0, BBox(0, 0, 5, 5), 0.3), Detection(0, BBox(9, 9, 5, 5), 0.6)], []]
    decisions = run_sequence(None, detections, FRAME, FusionConfig(), 3, "detector-only")
    assert decisions[0].output == BBox(9, 9, 5, 5)
    assert decisions[0].source == "detector"
    assert decisions[0].output_confidence == 0.6
    assert decisions[1].output is None and decisions[2].output is None


def test_unknown_mode_raises():
    """Only the three modes exist"""
    with pytest.raises(ValueError, match="Unknown mode"):
        run_sequence(None, [], FRAME, FusionConfig(), 1, "fusion")


def test_find_initialization():
    """gt takes the first box; detector the best detection of the first non-empty frame"""
    gt = [None, BBox(1, 1, 2, 2), BBox(3, 3, 2, 2)]
    assert find_initialization("gt", gt=gt) == (1, BBox(1, 1, 2, 2))
    detections = [[], [Detection(1, BBox(0, 0, 4, 4), 0.2), Detection(1, BBox(5, 5, 4, 4), 0.7)]]
    assert find_initialization("detector", detections=detections) == (1, BBox(5, 5, 4, 4))


def test_find_initialization_without_boxes():
    """No box anywhere is an initialisation error"""
    with pytest.raises(InitializationError, match="strategy 'detector'") as excinfo:
        find_initialization("detector", detections=[[], []])
    assert excinfo.value.code == "E_INIT"
    with pytest.raises(ValueError, match="Unknown initialisation strategy"):
        find_initialization("oracle")


def test_best_detection_ties():
    """The first detection wins a tie"""
    first, second = Detection(0, BBox(0, 0, 1, 1), 0.5), Detection(0, BBox(2, 2, 1, 1), 0.5)
    assert best_detection([first, second]) is first
    assert best_detection([]) is None
