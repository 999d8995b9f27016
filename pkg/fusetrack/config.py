"""
Run configuration.

The on-disk format is one ``section.key=value`` per line; ``#`` starts a comment
and blank lines are ignored, e.g.::

    # fusion thresholds
    fusion.conf_threshold=0.75
    fusion.prompt_policy=eager
    selection.score_weights=0.5,0.25,0.25
    scenario.exit_segments=100-200;900-1010
"""
import dataclasses
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional

from fusetrack.exceptions import ConfigValidationError
from fusetrack.fusion import FusionConfig
from fusetrack.metrics import MetricOptions
from fusetrack.motion import KalmanConfig
from fusetrack.scenario import DetectorModel, ScenarioSpec
from fusetrack.tracker import SelectionConfig, SurrogateModel

logger = logging.getLogger(__name__)

CONFIG_ENV_VAR = "FUSETRACK_CONFIG"
TRUE_VALUES = ("true", "1", "yes")
FALSE_VALUES = ("false", "0", "no")


@dataclass(frozen=True)
class RunConfig:
    """
    Every tunable parameter of a run, grouped by section.

    Attributes:
        fusion (FusionConfig): Prediction fusion thresholds and policies.
        kalman (KalmanConfig): Motion model noise and gate.
        selection (SelectionConfig): Candidate selection and memory scoring.
        surrogate (SurrogateModel): Surrogate tracker behaviour.
        detector (DetectorModel): Simulated detector behaviour.
        metrics (MetricOptions): Evaluation options.
        scenario (ScenarioSpec): Synthetic scenario, used by ``simulate --spec``
            and ``sweep --spec``.
    """
    fusion: FusionConfig = field(default_factory=FusionConfig)
    kalman: KalmanConfig = field(default_factory=KalmanConfig)
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    surrogate: SurrogateModel = field(default_factory=SurrogateModel)
    detector: DetectorModel = field(default_factory=DetectorModel)
    metrics: MetricOptions = field(default_factory=MetricOptions)
    scenario: ScenarioSpec = field(default_factory=ScenarioSpec)

    def validate(self) -> None:
        """
        Validates every section.

        Raises:
            ConfigValidationError: Naming the section whose invariants are broken.
        """
        for section in dataclasses.fields(self):
            try:
                getattr(self, section.name).validate()
            except ValueError as exc:
                raise ConfigValidationError(section.name, str(exc)) from exc

    def with_overrides(self, overrides: Dict[str, str]) -> "RunConfig":
        """
        Returns a copy with ``section.key`` string values applied and validated.

        Raises:
            ConfigValidationError: On an unknown key or a value that does not parse.
        """
        sections: Dict[str, Dict[str, Any]] = {}
        for key, raw in overrides.items():
            section, name = _split_key(key)
            current = getattr(self, section)
            if name not in {f.name for f in dataclasses.fields(current)}:
                raise ConfigValidationError(key, "unknown key")
            sections.setdefault(section, {})[name] = _parse_value(key, raw, getattr(current, name))
        updated = self
        for section, values in sections.items():
            replaced = dataclasses.replace(getattr(updated, section), **values)
            try:
                replaced.validate()
            except ValueError as exc:
                key = next((f"{section}.{n}" for n in values if f"'{n}'" in str(exc)), section)
                raise ConfigValidationError(key, str(exc)) from exc
            updated = dataclasses.replace(updated, **{section: replaced})
        return updated

    def to_lines(self) -> List[str]:
        """The configuration in the on-disk format, one line per key."""
        lines = ["# fusetrack run configuration"]
        for section in dataclasses.fields(self):
            values = getattr(self, section.name)
            for item in dataclasses.fields(values):
                lines.append(f"{section.name}.{item.name}={_format_value(getattr(values, item.name))}")
        return lines


def _split_key(key: str):
    section, sep, name = key.strip().partition(".")
    if not sep or section not in {f.name for f in dataclasses.fields(RunConfig)}:
        raise ConfigValidationError(key, "unknown section; expected one of "
                                    f"{[f.name for f in dataclasses.fields(RunConfig)]}")
    return section, name


def _parse_value(key: str, raw: str, current: Any) -> Any:
    raw = raw.strip()
    name = key.rsplit(".", 1)[-1]
    try:
        if isinstance(current, bool):
            lowered = raw.lower()
            if lowered in TRUE_VALUES:
                return True
            if lowered in FALSE_VALUES:
                return False
            raise ValueError(f"expected one of {TRUE_VALUES + FALSE_VALUES}")
        if isinstance(current, int):
            return int(raw)
        if isinstance(current, float):
            return float(raw)
        if name == "exit_segments":
            if not raw:
                return ()
            return tuple(tuple(int(v) for v in part.split("-")) for part in raw.split(";"))
        if name == "waypoints":
            if not raw:
                return ()
            return tuple(tuple(float(v) for v in part.split(":")) for part in raw.split(";"))
        if isinstance(current, tuple):
            return tuple(float(v) for v in raw.split(","))
        return raw
    except ValueError as exc:
        raise ConfigValidationError(key, f"cannot parse value '{raw}' ({exc})") from exc


def _format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        if value and isinstance(value[0], tuple):
            joiner = "-" if isinstance(value[0][0], int) else ":"
            return ";".join(joiner.join(repr(v) for v in pair) for pair in value)
        return ",".join(repr(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_config_lines(lines: Iterable[str], source: str = "<config>") -> Dict[str, str]:
    """
    Parses configuration lines into raw ``section.key -> value`` strings.

    Raises:
        ConfigValidationError: On a line without ``=``.
    """
    values: Dict[str, str] = {}
    for line_number, line in enumerate(lines, start=1):
        content = line.split("#", 1)[0].strip()
        if not content:
            continue
        key, sep, raw = content.partition("=")
        if not sep:
            raise ConfigValidationError(f"{source}:{line_number}", f"expected 'section.key=value', got '{content}'")
        values[key.strip()] = raw
    return values


def load_run_config(path: Optional[str] = None) -> RunConfig:
    """
    Loads a run configuration.

    Without ``path`` the file named by the ``FUSETRACK_CONFIG`` environment
    variable is used; without either, the defaults.

    Args:
        path (str, optional): Configuration file.

    Returns:
        RunConfig: Validated configuration.

    Raises:
        ConfigValidationError: On an unknown key or an invalid value.
        OSError: If the file cannot be read.
    """
    return RunConfig().with_overrides(read_overrides(path))


def read_overrides(path: Optional[str] = None) -> Dict[str, str]:
    """
    Raw ``section.key -> value`` strings of a configuration file.

    Falls back to ``FUSETRACK_CONFIG``; returns an empty mapping when neither is set.
    """
    path = path or os.environ.get(CONFIG_ENV_VAR)
    if not path:
        return {}
    logger.info("Loading configuration from %s", path)
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except UnicodeDecodeError as exc:
        raise ConfigValidationError(str(path),
                                    f"not UTF-8 text ({exc.reason} at byte {exc.start})") from exc
    return parse_config_lines(lines, str(path))


def write_run_config(cfg: RunConfig, path) -> None:
    """Writes the configuration record of a run."""
    Path(path).write_text("\n".join(cfg.to_lines()) + "\n", encoding="utf-8")
