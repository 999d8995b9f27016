"""
Command-line entry points: ``simulate``, ``fuse``, ``eval``, ``sweep`` and ``report``.

Every failure is reported on stderr as a single line ``ERROR <code>: <message>``;
usage errors exit with status 2, all other errors with status 1.
"""
import argparse
import dataclasses
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional

import pandas as pd
from openpyxl import Workbook

from fusetrack.config import RunConfig, load_run_config, read_overrides, write_run_config
from fusetrack.exceptions import EmptyInputError, FusetrackError, MetricVersionError
from fusetrack.experiments import run_pipeline, run_sweep
from fusetrack.formats import (
    CURVE_NAMES,
    SequenceMeta,
    load_curves,
    load_detections,
    load_ground_truth,
    load_meta,
    load_predictions,
    load_summary,
    load_tracker_stream,
    write_decisions,
    write_detections,
    write_ground_truth,
    write_meta,
    write_results,
)
from fusetrack.fusion import INIT_STRATEGIES, MODES
from fusetrack.metrics import (
    METRIC_KEYS,
    METRIC_VERSION,
    MetricReport,
    average_reports,
    evaluate_sequence,
    pairs_from_streams,
)
from fusetrack.scenario import PRESETS, generate, long_duration_preset
from fusetrack.tracker import ReplayTracker
from fusetrack.utils import create_metric_row_dataframe, list_sequence_dirs

logger = logging.getLogger(__name__)


class CommandParser(argparse.ArgumentParser):
    """Argument parser reporting usage errors as ``ERROR E_USAGE: ...`` (exit status 2)."""

    def error(self, message):
        sys.stderr.write(f"ERROR E_USAGE: {message}\n")
        sys.exit(2)


def _write_csv(df: pd.DataFrame, path: Path) -> None:
    df.to_csv(path, index=False, lineterminator="\n")


def _scenario_config(args) -> RunConfig:
    """Preset or spec file, with ``--config`` keys on top and ``--seed`` last."""
    overrides = read_overrides(args.config)
    if args.preset:
        preset = long_duration_preset(args.preset)
        base = RunConfig(surrogate=preset.surrogate, detector=preset.detector, scenario=preset.spec)
    else:
        base = RunConfig()
        overrides = {**read_overrides(args.spec), **overrides}
    cfg = base.with_overrides(overrides)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, scenario=dataclasses.replace(cfg.scenario, seed=args.seed))
    return cfg


def cmd_simulate(args, parser) -> None:
    """Writes ``gt.csv``, ``detections.csv`` and ``meta.json`` for a scenario."""
    # pylint: disable=W0613
    cfg = _scenario_config(args)
    spec = cfg.scenario
    gt, detections = generate(spec, cfg.detector)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_ground_truth(gt, out_dir / "gt.csv")
    write_detections(detections, out_dir / "detections.csv")
    write_meta(SequenceMeta(spec.name, spec.width, spec.height, spec.fps, spec.length),
               out_dir / "meta.json")
    logger.info("Simulated '%s' (seed %s) into %s", spec.name, spec.seed, out_dir)


def cmd_fuse(args, parser) -> None:
    """Runs one mode over file streams and writes ``decisions.csv`` and ``config.cfg``."""
    cfg = load_run_config(args.config)
    meta = load_meta(args.meta)
    detections = load_detections(args.det, meta.frame_count)
    gt = load_ground_truth(args.gt, meta.frame_count) if args.gt else None
    if args.init == "gt" and gt is None:
        parser.error("--init gt requires --gt")
    tracker = None
    if args.tracker:
        tracker = ReplayTracker(load_tracker_stream(args.tracker, meta.frame_count))
    elif gt is None and args.mode != "detector-only":
        parser.error("the surrogate tracker needs --gt (or replay a recorded stream with --tracker)")

    decisions = run_pipeline(gt, detections, meta.frame, cfg, args.mode, args.init,
                             args.seed, tracker, meta.frame_count)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_decisions(decisions, out_dir / "decisions.csv")
    write_run_config(cfg, out_dir / "config.cfg")
    logger.info("Wrote %s decisions to %s", len(decisions), out_dir)


def evaluate_files(gt_path, pred_path, meta_path, cfg: RunConfig):
    """Scores a prediction file against a ground-truth file; returns the metadata and the report."""
    meta = load_meta(meta_path)
    gt = load_ground_truth(gt_path, meta.frame_count)
    predictions = load_predictions(pred_path, meta.frame_count)
    report = evaluate_sequence(pairs_from_streams(gt, predictions), meta.frame, cfg.metrics)
    return meta, report


def cmd_eval(args, parser) -> None:
    """Writes ``summary.json`` and ``curves.csv`` for one sequence or a whole dataset."""
    cfg = load_run_config(args.config)
    out_dir = Path(args.out)
    if not args.dataset:
        missing = [flag for flag, value in (("--gt", args.gt), ("--pred", args.pred), ("--meta", args.meta))
                   if not value]
        if missing:
            parser.error(f"the following arguments are required without --dataset: {', '.join(missing)}")
        meta, report = evaluate_files(args.gt, args.pred, args.meta, cfg)
        write_results(None, report, out_dir, meta.name)
        return

    if args.gt or args.pred or args.meta:
        parser.error("--dataset cannot be combined with --gt, --pred or --meta")
    sequences = list_sequence_dirs(args.dataset)
    if not sequences:
        raise EmptyInputError(f"No sequence directory (with meta.json) under {args.dataset}.")
    reports: List[MetricReport] = []
    rows = []
    for sequence in sequences:
        seq_dir = sequence["path"]
        pred_path = seq_dir / "decisions.csv"
        if not pred_path.exists():
            pred_path = seq_dir / "predictions.csv"
        meta, report = evaluate_files(seq_dir / "gt.csv", pred_path, seq_dir / "meta.json", cfg)
        write_results(None, report, out_dir / sequence["name"], meta.name)
        reports.append(report)
        rows.append(create_metric_row_dataframe(label=sequence["name"], sequence=meta.name,
                                                **report.scalars()))
    mean = average_reports(reports)
    write_results(None, mean, out_dir, "dataset-mean")
    rows.append(create_metric_row_dataframe(label="mean", sequence="dataset-mean", **mean.scalars()))
    _write_csv(pd.concat(rows, ignore_index=True).drop(columns=["seed"]), out_dir / "sequences.csv")
    logger.info("Evaluated %s sequences from %s", len(reports), args.dataset)


def parse_param_grid(values: List[str], parser) -> Dict[str, List[str]]:
    """Turns repeated ``section.key=v1,v2`` flags into a grid."""
    grid: Dict[str, List[str]] = {}
    for item in values or []:
        key, sep, raw = item.partition("=")
        key = key.strip()
        if not sep or not key:
            parser.error(f"--param expects 'section.key=v1,v2,...', got '{item}'")
        if key in grid:
            parser.error(f"--param '{key}' given twice")
        grid[key] = [v.strip() for v in raw.split(",") if v.strip()]
    return grid


def cmd_sweep(args, parser) -> None:
    """Writes ``sweep.csv``: the eight metrics for every point of the grid."""
    grid = parse_param_grid(args.param, parser)
    cfg = _scenario_config(args)
    table = run_sweep(grid, cfg.scenario, cfg, args.mode, args.init, args.workers)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_csv(table, out_dir / "sweep.csv")
    logger.info("Swept %s grid points on '%s'", len(table), cfg.scenario.name)


def write_comparison_workbook(table: pd.DataFrame, path: Path) -> None:
    """Writes the comparison table to an Excel workbook."""
    wb = Workbook()
    ws = wb.active
    ws.title = "comparison"
    ws.append(list(table.columns))
    for row in table.itertuples(index=False):
        ws.append(list(row))
    wb.save(path)


def unique_labels(labels: List[str]) -> List[str]:
    """Suffixes repeated labels with ``-2``, ``-3``, ... so every curve column is kept."""
    counts: Dict[str, int] = {}
    taken = set()
    result = []
    for label in labels:
        count = counts.get(label, 1)
        candidate = label
        while candidate in taken:
            count += 1
            candidate = f"{label}-{count}"
        counts[label] = count
        taken.add(candidate)
        result.append(candidate)
    return result


def cmd_report(args, parser) -> None:
    """Merges summaries into a comparison table and side-by-side curve files."""
    paths = [Path(p) for p in args.summary]
    summaries = [load_summary(p) for p in paths]
    versions = {str(p): s["version"] for p, s in zip(paths, summaries)}
    if set(versions.values()) != {METRIC_VERSION}:
        raise MetricVersionError(versions)

    if args.labels:
        labels = args.labels.split(",")
        if len(labels) != len(paths):
            parser.error(f"--labels has {len(labels)} entries for {len(paths)} summaries")
        if len(set(labels)) != len(labels):
            parser.error(f"--labels must be distinct, got {labels}")
    else:
        labels = unique_labels([p.parent.name or p.stem for p in paths])

    table = pd.concat(
        [create_metric_row_dataframe(label=label, **{k: s["metrics"][k] for k in METRIC_KEYS})
         for label, s in zip(labels, summaries)],
        ignore_index=True)[["label"] + list(METRIC_KEYS)]
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_csv(table, out_dir / "comparison.csv")
    (out_dir / "comparison.txt").write_text(table.to_string(index=False) + "\n", encoding="utf-8")
    write_comparison_workbook(table, out_dir / "comparison.xlsx")

    curve_paths = [p.parent / "curves.csv" for p in paths]
    missing = [str(p) for p in curve_paths if not p.exists()]
    if missing:
        logger.warning("No curves next to %s; skipping curve files", ", ".join(missing))
        return
    curves = [load_curves(p) for p in curve_paths]
    for name in CURVE_NAMES:
        merged = pd.DataFrame({"threshold": curves[0][name].thresholds})
        for label, run_curves in zip(labels, curves):
            merged[label] = run_curves[name].values
        file_name = "success_curves.csv" if name == "success" else f"{name}_curves.csv"
        _write_csv(merged, out_dir / file_name)
    logger.info("Report of %s runs written to %s", len(paths), out_dir)


def _add_scenario_source(sub) -> None:
    source = sub.add_mutually_exclusive_group(required=True)
    source.add_argument("--preset", choices=sorted(PRESETS), help="Registered scenario preset")
    source.add_argument("--spec", help="Scenario file (scenario./detector. keys)")
    sub.add_argument("--seed", type=int, default=None, help="Scenario and tracker seed")
    sub.add_argument("--config", default=None, help="Configuration file applied on top")
    sub.add_argument("--out", required=True, help="Output directory")


def build_parser() -> CommandParser:
    """The ``fusetrack`` argument parser."""
    parser = CommandParser(prog="fusetrack",
                           description="Detection-tracker fusion engine and evaluation harness.")
    parser.add_argument("--verbose", "-v", action="store_true", help="Log per-frame decisions")
    commands = parser.add_subparsers(dest="command", required=True)

    simulate = commands.add_parser("simulate", help="Generate a synthetic sequence")
    _add_scenario_source(simulate)
    simulate.set_defaults(handler=cmd_simulate)

    fuse = commands.add_parser("fuse", help="Run the tracker and the fusion module")
    fuse.add_argument("--det", required=True, help="detections.csv")
    fuse.add_argument("--meta", required=True, help="meta.json")
    fuse.add_argument("--gt", default=None, help="gt.csv (scene of the surrogate tracker)")
    fuse.add_argument("--tracker", default=None, help="Recorded tracker stream to replay")
    fuse.add_argument("--config", default=None, help="Configuration file")
    fuse.add_argument("--mode", choices=MODES, default="augmented")
    fuse.add_argument("--init", choices=INIT_STRATEGIES, default="detector")
    fuse.add_argument("--seed", type=int, default=0, help="Surrogate tracker seed")
    fuse.add_argument("--out", required=True, help="Output directory")
    fuse.set_defaults(handler=cmd_fuse)

    evaluate = commands.add_parser("eval", help="Score predictions")
    evaluate.add_argument("--gt", default=None, help="gt.csv")
    evaluate.add_argument("--pred", default=None, help="decisions.csv or predictions.csv")
    evaluate.add_argument("--meta", default=None, help="meta.json")
    evaluate.add_argument("--dataset", default=None, help="Directory of sequence directories")
    evaluate.add_argument("--config", default=None, help="Configuration file")
    evaluate.add_argument("--out", required=True, help="Output directory")
    evaluate.set_defaults(handler=cmd_eval)

    sweep = commands.add_parser("sweep", help="Score a parameter grid on a scenario")
    sweep.add_argument("--param", action="append", required=True,
                       help="section.key=v1,v2,... (repeatable)")
    sweep.add_argument("--mode", choices=MODES, default="augmented")
    sweep.add_argument("--init", choices=INIT_STRATEGIES, default="detector")
    sweep.add_argument("--workers", type=int, default=1, help="Worker processes")
    _add_scenario_source(sweep)
    sweep.set_defaults(handler=cmd_sweep)

    report = commands.add_parser("report", help="Merge summaries into comparison files")
    report.add_argument("--summary", nargs="+", required=True, help="summary.json files")
    report.add_argument("--labels", default=None, help="Comma-separated row labels")
    report.add_argument("--out", required=True, help="Output directory")
    report.set_defaults(handler=cmd_report)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """
    Runs one subcommand.

    Args:
        argv (List[str], optional): Arguments; defaults to ``sys.argv[1:]``.

    Returns:
        int: 0 on success, 1 on error. Usage errors exit with status 2.
    """
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)
    try:
        args.handler(args, parser)
    except FusetrackError as exc:
        message = " ".join(str(exc).split())
        sys.stderr.write(f"ERROR {exc.code}: {message}\n")
        return 1
    except OSError as exc:
        sys.stderr.write(f"ERROR E_IO: {' '.join(str(exc).split())}\n")
        return 1
    return 0
