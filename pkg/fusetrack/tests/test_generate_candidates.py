"""
Test generate_candidates function
from tracker.py file
"""
import numpy as np
import pytest

from fusetrack.geometry import BBox, center_distance
from fusetrack.tracker import SurrogateModel, generate_candidates

GT = BBox(100.0, 100.0, 20.0, 20.0)


def test_candidate_count_and_ranges():
    """Every candidate is a valid box with scores in [0, 1]"""
    model = SurrogateModel(candidate_count=5, noise_sigma=3.0)
    rng = np.random.default_rng(0)
    for _ in range(100):
        candidates = generate_candidates(GT, GT, model, rng)
        assert len(candidates) == 5
        for candidate in candidates:
            candidate.validate()


def test_noise_free_locked_candidates_sit_on_target():
    """Without jitter or drift, locked candidates coincide with the target"""
    model = SurrogateModel(noise_sigma=0.0, objectness_sigma=0.0)
    candidates = generate_candidates(GT, BBox(105.0, 100.0, 20.0, 20.0), model,
                                     np.random.default_rng(1))
    for candidate in candidates:
        assert center_distance(candidate.box, GT) == pytest.approx(0.0, abs=1e-9)
        assert candidate.affinity == pytest.approx(1.0)
        assert candidate.objectness == pytest.approx(0.9)


def test_drift_offsets_locked_candidates():
    """Locked candidates carry the accumulated drift"""
    model = SurrogateModel(noise_sigma=0.0, objectness_sigma=0.0)
    candidates = generate_candidates(GT, GT, model, np.random.default_rng(1), drift=(3.0, 4.0))
    assert center_distance(candidates[0].box, GT) == pytest.approx(5.0)
    assert candidates[0].affinity < 1.0


def test_unlocked_candidates_follow_belief():
    """Beyond the capture radius the target is ignored"""
    model = SurrogateModel(noise_sigma=0.0, objectness_sigma=0.0)
    belief = BBox(400.0, 400.0, 30.0, 15.0)
    candidates = generate_candidates(GT, belief, model, np.random.default_rng(1))
    for candidate in candidates:
        assert candidate.box.center == pytest.approx(belief.center)
        assert (candidate.box.w, candidate.box.h) == (30.0, 15.0)
        assert candidate.affinity < 1e-6


def test_absent_target():
    """Without a target affinity is 0 and objectness stays below the lost threshold"""
    model = SurrogateModel(objectness_sigma=0.5)
    rng = np.random.default_rng(7)
    for _ in range(200):
        for candidate in generate_candidates(None, GT, model, rng):
            assert candidate.affinity == 0.0
            assert 0.0 <= candidate.objectness < model.lost_threshold


def test_objectness_is_frame_level():
    """All candidates of a frame share one objectness"""
    candidates = generate_candidates(GT, GT, SurrogateModel(), np.random.default_rng(11))
    assert len({c.objectness for c in candidates}) == 1


def test_random_stream_consumption_does_not_depend_on_inputs():
    """Visible and absent frames consume the same draws"""
    model = SurrogateModel()
    visible, absent = np.random.default_rng(5), np.random.default_rng(5)
    generate_candidates(GT, GT, model, visible)
    generate_candidates(None, BBox(600, 10, 5, 5), model, absent)
    assert visible.random() == absent.random()


def test_same_seed_same_candidates():
    """Seeded draws are reproducible"""
    first = generate_candidates(GT, GT, SurrogateModel(), np.random.default_rng(9))
    second = generate_candidates(GT, GT, SurrogateModel(), np.random.default_rng(9))
    assert first == second


@pytest.mark.parametrize("kwargs, name", [
    ({"candidate_count": 0}, "candidate_count"),
    ({"noise_sigma": -1.0}, "noise_sigma"),
    ({"capture_radius": 0.0}, "capture_radius"),
    ({"lost_threshold": 1.5}, "lost_threshold"),
])
def test_model_validation(kwargs, name):
    """Invalid surrogate parameters are rejected"""
    with pytest.raises(ValueError, match=name):
        SurrogateModel(**kwargs).validate()
