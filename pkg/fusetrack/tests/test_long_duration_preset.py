"""
Test long_duration_preset function
from scenario.py file
"""
import pytest

from fusetrack.exceptions import UnknownPresetError
from fusetrack.scenario import PRESETS, SimulationPreset, long_duration_preset


def test_r1_pos7():
    """Long sequence with four field-of-view exits"""
    preset = long_duration_preset("r1-pos7-like", seed=7)
    assert isinstance(preset, SimulationPreset)
    spec = preset.spec
    assert (spec.length, spec.width, spec.height, spec.fps) == (6327, 2040.0, 1086.0, 60.0)
    assert len(spec.exit_segments) == 4
    assert spec.seed == 7
    spec.validate()
    preset.detector.validate()
    preset.surrogate.validate()


@pytest.mark.parametrize("name, length", [
    ("r1-pos3-like", 6213),
    ("r1-pos7-like", 6327),
    ("r2-pos3-like", 1484),
    ("r2-pos7-like", 4908),
    ("dut-short-like", 83),
    ("dut-long-like", 2635),
])
def test_registered_lengths(name, length):
    """Every preset has its sequence length and a valid scenario"""
    spec = long_duration_preset(name).spec
    assert spec.name == name
    assert spec.length == length
    spec.validate()


def test_registry_is_complete():
    """Six presets are registered"""
    assert len(PRESETS) == 6


def test_unknown_preset():
    """Unknown names list the available presets"""
    with pytest.raises(UnknownPresetError) as excinfo:
        long_duration_preset("r3-pos1-like")
    assert isinstance(excinfo.value, KeyError)
    assert excinfo.value.name == "r3-pos1-like"
    assert "r1-pos7-like" in excinfo.value.available
    assert str(excinfo.value).startswith("Unknown preset 'r3-pos1-like'")
