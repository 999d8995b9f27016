"""Allows ``python -m fusetrack``."""
import sys

from fusetrack.cli import main

sys.exit(main())
