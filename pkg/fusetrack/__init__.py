"""Main entry point into the fusetrack package
"""
__version__ = "0.1.0"

from fusetrack import geometry
from fusetrack import motion
from fusetrack import tracker
from fusetrack import fusion
from fusetrack import metrics
from fusetrack import scenario
from fusetrack import formats
from fusetrack import config
from fusetrack import utils
from fusetrack import experiments
