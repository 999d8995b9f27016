"""
Test the package version
from __init__.py file
"""
import re
from pathlib import Path

import fusetrack

ROOT = Path(__file__).resolve().parents[2]


def test_version_matches_setup():
    """setup.py and the package carry the same version"""
    setup_text = (ROOT / "setup.py").read_text(encoding="utf-8")
    assert re.search(r'version="([^"]+)"', setup_text).group(1) == fusetrack.__version__


def test_docs_take_the_package_version():
    """The Sphinx configuration reads the version from the package"""
    conf_text = (ROOT / "docs" / "source" / "conf.py").read_text(encoding="utf-8")
    assert "release = __version__" in conf_text
    assert "project = 'fusetrack'" in conf_text
