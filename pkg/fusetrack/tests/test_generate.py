"""
Test generate, generate_ground_truth and simulate_detections functions
from scenario.py file
"""
import logging

import numpy as np
import pytest

from fusetrack.exceptions import StreamValidationError
from fusetrack.scenario import DetectorModel, ScenarioSpec, generate, simulate_detections


def true_detection_flags(gt, detections):
    """Whether each visible frame carries a detection overlapping its target"""
    flags = []
    for box, frame_dets in zip(gt, detections):
        if box is None:
            continue
        flags.append(any(abs(d.box.center[0] - box.center[0]) < 20 for d in frame_dets))
    return np.array(flags)


def inside(spec, box):
    """Box within the frame, up to rounding"""
    return (box.x >= 0 and box.y >= 0
            and box.right <= spec.width + 1e-9 and box.bottom <= spec.height + 1e-9)


def test_same_seed_same_streams():
    """Generation is a pure function of the scenario"""
    spec = ScenarioSpec(length=300, seed=12)
    assert generate(spec, DetectorModel()) == generate(spec, DetectorModel())
    other = generate(ScenarioSpec(length=300, seed=13), DetectorModel())
    assert other[0] != generate(spec, DetectorModel())[0]


@pytest.mark.parametrize("trajectory", ["linear", "sinusoidal", "waypoint"])
def test_boxes_stay_in_frame(trajectory):
    """Visible boxes lie inside the frame and respect the area bounds"""
    spec = ScenarioSpec(length=2000, trajectory=trajectory, speed=9.0, seed=1)
    gt, _ = generate(spec, DetectorModel())
    frame_area = spec.width * spec.height
    for box in gt:
        assert inside(spec, box)
        ratio = box.area / frame_area
        assert spec.area_ratio_min * (1 - 1e-9) <= ratio <= spec.area_ratio_max * (1 + 1e-9)
        assert box.w / box.h == pytest.approx(spec.aspect_ratio)


def test_fixed_waypoints():
    """A single waypoint keeps the target still"""
    spec = ScenarioSpec(length=50, trajectory="waypoint", waypoints=((0.5, 0.5),),
                        area_ratio_min=1e-3, area_ratio_max=1e-3)
    gt, _ = generate(spec, DetectorModel())
    assert len(set(gt)) == 1
    assert gt[0].center == pytest.approx((960.0, 540.0))


def test_exit_segments():
    """Exit frames carry no target and no true detection"""
    spec = ScenarioSpec(length=500, exit_segments=((100, 180), (400, 500)), seed=3)
    gt, detections = generate(spec, DetectorModel(clutter_rate=0.0))
    assert all(gt[i] is None for i in range(100, 180))
    assert all(gt[i] is None for i in range(400, 500))
    assert gt[99] is not None and gt[180] is not None
    assert all(not detections[i] for i in range(100, 180))


def test_noise_free_detector():
    """Without noise, detections coincide with the target with confidence 1"""
    spec = ScenarioSpec(length=100, seed=5)
    model = DetectorModel(detect_prob=1.0, loc_noise_sigma=0.0, clutter_rate=0.0)
    gt, detections = generate(spec, model)
    for box, frame_dets in zip(gt, detections):
        assert len(frame_dets) == 1
        assert frame_dets[0].confidence == 1.0
        assert tuple(frame_dets[0].box) == pytest.approx(tuple(box))


def test_detection_rate_with_unit_bursts():
    """With a unit burst length the detect rate lands within 2% of detect_prob"""
    spec = ScenarioSpec(length=20_000, seed=9)
    gt, detections = generate(spec, DetectorModel(detect_prob=0.7, dropout_burst=1.0,
                                                  clutter_rate=0.0))
    assert true_detection_flags(gt, detections).mean() == pytest.approx(0.7, abs=0.02)


def test_mean_miss_burst_length():
    """Runs of missed frames last dropout_burst frames on average"""
    spec = ScenarioSpec(length=50_000, seed=10)
    gt, detections = generate(spec, DetectorModel(detect_prob=0.8, dropout_burst=5.0,
                                                  clutter_rate=0.0))
    flags = true_detection_flags(gt, detections)
    runs, current = [], 0
    for detected in flags:
        if detected:
            if current:
                runs.append(current)
            current = 0
        else:
            current += 1
    assert np.mean(runs) == pytest.approx(5.0, abs=0.5)
    assert flags.mean() == pytest.approx(0.8, abs=0.03)


def test_clutter_rate():
    """Clutter adds Poisson false detections with bounded confidence"""
    spec = ScenarioSpec(length=5000, seed=2)
    model = DetectorModel(detect_prob=0.0, clutter_rate=0.5, clutter_conf_low=0.1, clutter_conf_high=0.4)
    gt, _ = generate(spec, model)
    detections = simulate_detections(gt, spec, model, np.random.default_rng(0))
    counts = [len(d) for d in detections]
    assert np.mean(counts) == pytest.approx(0.5, abs=0.05)
    for frame_dets in detections:
        for det in frame_dets:
            assert 0.1 <= det.confidence <= 0.4
            assert inside(spec, det.box)


def test_infeasible_dropout_is_clamped(caplog):
    """A burst too short for the miss rate is clamped with a warning"""
    with caplog.at_level(logging.WARNING):
        p_drop, p_recover = DetectorModel(detect_prob=0.3, dropout_burst=1.0).transition_probabilities()
    assert (p_drop, p_recover) == (1.0, 1.0)
    assert "infeasible" in caplog.text


def test_invalid_spec():
    """Exit segments must lie inside the sequence"""
    with pytest.raises(StreamValidationError, match="exit segment"):
        generate(ScenarioSpec(length=100, exit_segments=((50, 150),)), DetectorModel())
    with pytest.raises(StreamValidationError, match="trajectory"):
        generate(ScenarioSpec(trajectory="spiral"), DetectorModel())


@pytest.mark.parametrize("kwargs, name", [
    ({"detect_prob": 1.5}, "detect_prob"),
    ({"dropout_burst": 0.5}, "dropout_burst"),
    ({"clutter_conf_low": 0.7}, "clutter_conf_low"),
    ({"conf_scale": 0.0}, "conf_scale"),
])
def test_detector_model_validation(kwargs, name):
    """Invalid detector parameters are rejected"""
    with pytest.raises(ValueError, match=name):
        DetectorModel(**kwargs).validate()


def test_box_larger_than_frame_is_rejected():
    """An area ratio whose box overflows the frame height fails validation"""
    spec = ScenarioSpec(area_ratio_min=0.88, area_ratio_max=0.9)
    assert spec.max_area_ratio == pytest.approx(1080 * 1.5 / 1920)
    with pytest.raises(StreamValidationError, match="larger than the frame"):
        spec.validate()
    with pytest.raises(StreamValidationError, match="larger than the frame"):
        generate(spec, DetectorModel())


def test_box_wider_than_frame_is_rejected():
    """Very wide targets are bounded by the frame width instead"""
    spec = ScenarioSpec(aspect_ratio=10.0, area_ratio_min=0.1, area_ratio_max=0.2)
    assert spec.max_area_ratio == pytest.approx(1920 / (1080 * 10.0))
    with pytest.raises(StreamValidationError, match="area_ratio_max"):
        spec.validate()


@pytest.mark.parametrize("trajectory", ["linear", "sinusoidal", "waypoint"])
@pytest.mark.parametrize("aspect_ratio, area_ratio_min, at_limit", [
    (1.5, 1e-6, True),
    (1.0, 0.3, True),
    (10.0, 1e-4, True),
    (0.1, 1e-4, True),
    (1.5, 0.5, False),
])
def test_boxes_stay_in_frame_at_the_largest_valid_ratio(trajectory, aspect_ratio,
                                                        area_ratio_min, at_limit):
    """Ground truth and clutter stay inside the frame across the accepted extremes"""
    base = ScenarioSpec(length=600, trajectory=trajectory, aspect_ratio=aspect_ratio,
                        scale_period=100, speed=25.0, seed=8)
    limit = base.max_area_ratio if at_limit else 0.99 * base.max_area_ratio
    spec = ScenarioSpec(length=600, trajectory=trajectory, aspect_ratio=aspect_ratio,
                        area_ratio_min=min(area_ratio_min, limit), area_ratio_max=limit,
                        scale_period=100, speed=25.0, seed=8)
    spec.validate()
    gt, detections = generate(spec, DetectorModel(detect_prob=0.0, clutter_rate=1.0))
    for box in gt:
        assert inside(spec, box)
        assert box.w <= spec.width and box.h <= spec.height
    clutter = [det for frame_dets in detections for det in frame_dets]
    assert clutter
    for det in clutter:
        assert inside(spec, det.box)
