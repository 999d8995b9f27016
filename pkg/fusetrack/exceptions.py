"""Exceptions used within the project"""


class FusetrackError(Exception):
    """
    Base class for every error raised by fusetrack.

    Attributes:
        code (str): Short machine-parseable code. The command-line interface prints
            it as a prefix (``ERROR <code>: <message>``) so callers can grep for it.
    """
    code = "E_FUSETRACK"


class InvalidGeometryError(FusetrackError, ValueError):
    """
    Raised when a box (or frame geometry) cannot take part in an overlap computation.

    Attributes:
        box (tuple): The offending box or frame values.
        reason (str): Which invariant was violated.

    Example:
        raise InvalidGeometryError((0, 0, -3, 4), "width must be > 0")
    """
    code = "E_GEOMETRY"

    def __init__(self, box, reason):
        super().__init__(f"Invalid geometry {tuple(box)}: {reason}")
        self.box = box
        self.reason = reason


class NumericError(FusetrackError, ArithmeticError):
    """
    Raised when the Kalman filter meets a non-finite state or a singular
    innovation covariance.
    """
    code = "E_NUMERIC"


class EmptyInputError(FusetrackError, ValueError):
    """Raised when an operation needs at least one element and got none."""
    code = "E_EMPTY"


class UninitializedError(FusetrackError, RuntimeError):
    """
    Raised when a tracker or fusion engine is stepped before it received its
    initial box prompt.

    Attributes:
        component (str): Name of the component that was not initialised.
    """
    code = "E_UNINITIALIZED"

    def __init__(self, component):
        super().__init__(f"{component} used before initialization; call initialize() first.")
        self.component = component


class InitializationError(FusetrackError, ValueError):
    """
    Raised when no initialisation box can be found for a sequence.

    Attributes:
        strategy (str): The initialisation strategy that failed ('gt' or 'detector').
    """
    code = "E_INIT"

    def __init__(self, strategy):
        super().__init__(
            f"Cannot initialize with strategy '{strategy}': "
            "no box available anywhere in the sequence.")
        self.strategy = strategy


class UndefinedMetricError(FusetrackError, ValueError):
    """
    Raised when a metric has no defined value for the given frames.

    Attributes:
        metric (str): Name of the metric.
    """
    code = "E_METRIC"

    def __init__(self, metric, reason):
        super().__init__(f"Metric '{metric}' is undefined: {reason}")
        self.metric = metric


class StreamParseError(FusetrackError, ValueError):
    """
    Raised when a line of a CSV stream file cannot be parsed.

    Attributes:
        path (str): File being read.
        line_number (int | None): 1-based line number, when known.
    """
    code = "E_PARSE"

    def __init__(self, path, line_number, reason):
        where = f"{path}:{line_number}" if line_number is not None else f"{path}"
        super().__init__(f"Cannot parse {where}: {reason}")
        self.path = path
        self.line_number = line_number


class StreamValidationError(FusetrackError, ValueError):
    """
    Raised when a stream or scenario parses but breaks one of its invariants
    (duplicate frames, confidence outside [0, 1], exit segment out of range...).
    """
    code = "E_VALIDATION"


class ConfigValidationError(FusetrackError, ValueError):
    """
    Raised when a configuration key is unknown or its value is invalid.

    Attributes:
        key (str): Fully qualified key, e.g. ``fusion.conf_threshold``.
    """
    code = "E_CONFIG"

    def __init__(self, key, reason):
        super().__init__(f"Invalid configuration key '{key}': {reason}")
        self.key = key


class UnknownPresetError(FusetrackError, KeyError):
    """
    Raised when a scenario preset name is not registered.

    Attributes:
        name (str): Requested preset.
        available (list): Registered preset names.
    """
    code = "E_PRESET"

    def __init__(self, name, available):
        super().__init__(f"Unknown preset '{name}'. Available presets: {sorted(available)}")
        self.name = name
        self.available = sorted(available)

    def __str__(self):
        # KeyError would otherwise wrap the message in quotes
        return self.args[0]


class FrameAlignmentError(FusetrackError, ValueError):
    """Raised when evaluation inputs do not share the sequence's frame range."""
    code = "E_ALIGNMENT"


class MetricVersionError(FusetrackError, ValueError):
    """
    Raised when summaries produced by different metric versions are merged.

    Attributes:
        versions (dict): Mapping of summary path to the version it declares.
    """
    code = "E_VERSION"

    def __init__(self, versions):
        super().__init__(f"Incompatible metric versions across summaries: {versions}")
        self.versions = versions
