"""
End-to-end runs on synthetic scenarios: single pipelines, the three-way
initialisation/augmentation comparison, and parameter sweeps.
"""
import dataclasses
import itertools
import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from fusetrack.config import RunConfig
from fusetrack.exceptions import EmptyInputError
from fusetrack.fusion import Detection, FusionDecision, find_initialization, run_sequence
from fusetrack.geometry import BBox, FrameGeometry
from fusetrack.metrics import METRIC_KEYS, MetricReport, evaluate_sequence, pairs_from_decisions
from fusetrack.scenario import ScenarioSpec, generate
from fusetrack.tracker import SurrogateTracker
from fusetrack.utils import create_metric_row_dataframe

logger = logging.getLogger(__name__)

# Second entropy word of the tracker's random stream, keeping it apart from the scenario's
TRACKER_STREAM = 1

COMPARISON_RUNS = (
    ("gt-init tracker-only", "tracker-only", "gt"),
    ("detector-init tracker-only", "tracker-only", "detector"),
    ("detector-init augmented", "augmented", "detector"),
)


class PipelineResult(NamedTuple):
    """Decisions and metrics of one run."""
    decisions: List[FusionDecision]
    report: MetricReport


def build_tracker(gt: Sequence[Optional[BBox]], cfg: RunConfig, seed: int) -> SurrogateTracker:
    """Surrogate tracker observing ``gt``, with its own seeded random stream."""
    return SurrogateTracker(gt, cfg.surrogate, cfg.kalman, cfg.selection,
                            np.random.default_rng([seed, TRACKER_STREAM]))


def run_pipeline(
    gt: Optional[Sequence[Optional[BBox]]],
    detections: Sequence[Sequence[Detection]],
    frame: FrameGeometry,
    cfg: RunConfig,
    mode: str = "augmented",
    init: str = "detector",
    seed: int = 0,
    tracker=None,
    frame_count: Optional[int] = None,
) -> List[FusionDecision]:
    """
    Runs one mode over one sequence.

    Args:
        gt (Sequence[Optional[BBox]]): Ground truth (scene for the surrogate tracker
            and the source of the ``gt`` initialisation).
        detections (Sequence[Sequence[Detection]]): Per-frame detections.
        frame (FrameGeometry): Image size.
        cfg (RunConfig): Configuration.
        mode (str): ``tracker-only``, ``augmented`` or ``detector-only``.
        init (str): ``gt`` or ``detector``.
        seed (int): Seed of the surrogate tracker.
        tracker: Tracker source to use instead of a fresh surrogate.
        frame_count (int, optional): Sequence length; defaults to the longer stream.

    Returns:
        List[FusionDecision]: One decision per frame.
    """
    if frame_count is None:
        frame_count = max(len(gt or []), len(detections))
    init_point = None
    if mode != "detector-only":
        init_point = find_initialization(init, gt=gt, detections=detections)
    if tracker is None and mode != "detector-only":
        tracker = build_tracker(gt, cfg, seed)
    return run_sequence(tracker, detections, frame, cfg.fusion, frame_count, mode, init_point)


def run_pipeline_on_scenario(
    spec: ScenarioSpec,
    cfg: RunConfig,
    mode: str = "augmented",
    init: str = "detector",
    seed: Optional[int] = None,
) -> PipelineResult:
    """
    Generates a scenario, runs one mode on it and scores the output.

    ``seed`` overrides the scenario seed and also seeds the tracker.
    """
    if seed is not None:
        spec = dataclasses.replace(spec, seed=seed)
    gt, detections = generate(spec, cfg.detector)
    decisions = run_pipeline(gt, detections, spec.frame, cfg, mode, init, spec.seed)
    report = evaluate_sequence(pairs_from_decisions(gt, decisions), spec.frame, cfg.metrics)
    return PipelineResult(decisions, report)


def _metric_row(label: str, sequence: str, seed, report_scalars: Dict[str, float]) -> pd.DataFrame:
    return create_metric_row_dataframe(label=label, sequence=sequence, seed=seed, **report_scalars)


def compare_modes(spec: ScenarioSpec, cfg: RunConfig, seeds: Sequence[int]) -> pd.DataFrame:
    """
    GT-initialised tracker-only, detector-initialised tracker-only and
    detector-initialised augmented runs over several seeds.

    Args:
        spec (ScenarioSpec): Scenario to generate for each seed.
        cfg (RunConfig): Configuration (its detector model drives the scenario).
        seeds (Sequence[int]): Seeds to run.

    Returns:
        pd.DataFrame: One row per (run, seed) followed by one mean row per run
        (``seed = 'mean'``).

    Raises:
        EmptyInputError: If ``seeds`` is empty.
    """
    if not seeds:
        raise EmptyInputError("compare_modes needs at least one seed.")
    frames = []
    for seed in seeds:
        for label, mode, init in COMPARISON_RUNS:
            result = run_pipeline_on_scenario(spec, cfg, mode, init, seed)
            frames.append(_metric_row(label, spec.name, seed, result.report.scalars()))
    per_seed = pd.concat(frames, ignore_index=True)

    means = []
    for label, _, _ in COMPARISON_RUNS:
        rows = per_seed[per_seed["label"] == label]
        means.append(_metric_row(label, spec.name, "mean",
                                 {k: float(rows[k].astype(float).mean()) for k in METRIC_KEYS}))
    return pd.concat([per_seed] + means, ignore_index=True)


def expand_grid(params: Dict[str, Sequence[str]]) -> List[Dict[str, str]]:
    """
    Cartesian product of a parameter grid, in the order the keys were given.

    Raises:
        EmptyInputError: If there is no parameter or a parameter has no value.
    """
    if not params or any(len(values) == 0 for values in params.values()):
        raise EmptyInputError("The sweep grid is empty.")
    keys = list(params)
    return [dict(zip(keys, combo)) for combo in itertools.product(*(params[k] for k in keys))]


def _sweep_point(args: Tuple[Dict[str, str], RunConfig, str, str]) -> Dict[str, object]:
    overrides, cfg, mode, init = args
    point_cfg = cfg.with_overrides(overrides)
    result = run_pipeline_on_scenario(point_cfg.scenario, point_cfg, mode, init)
    logger.info("Sweep point %s: S=%.4f", overrides, result.report.S)
    return {**overrides, **result.report.scalars()}


def run_sweep(
    params: Dict[str, Sequence[str]],
    spec: ScenarioSpec,
    cfg: RunConfig,
    mode: str = "augmented",
    init: str = "detector",
    workers: int = 1,
) -> pd.DataFrame:
    """
    Scores every point of a parameter grid on one scenario.

    Each point applies its ``section.key`` overrides to ``cfg`` and runs the
    same scenario (same seed). Points run in parallel processes when
    ``workers > 1``; row order always follows the grid order.

    Args:
        params (Dict[str, Sequence[str]]): Values per ``section.key``.
        spec (ScenarioSpec): Scenario to run.
        cfg (RunConfig): Base configuration.
        mode (str): Pipeline mode.
        init (str): Initialisation strategy.
        workers (int): Number of worker processes.

    Returns:
        pd.DataFrame: One row per grid point: the parameter values then the
        eight scalar metrics.

    Raises:
        EmptyInputError: If the grid is empty.
        ConfigValidationError: If a key or value is invalid.
    """
    grid = expand_grid(params)
    cfg = dataclasses.replace(cfg, scenario=spec)
    for overrides in grid:
        cfg.with_overrides(overrides)
    tasks = [(overrides, cfg, mode, init) for overrides in grid]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            rows = list(executor.map(_sweep_point, tasks))
    else:
        rows = [_sweep_point(task) for task in tasks]
    return pd.DataFrame(rows, columns=list(params) + list(METRIC_KEYS))
