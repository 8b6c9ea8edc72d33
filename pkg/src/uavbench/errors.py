"""Exception types shared across the harness.

Every error carries a stable machine-readable ``code`` so the CLI can emit
structured error records.
"""


class HarnessError(Exception):
    """Base class for all harness errors."""

    code = "harness-error"


class InvalidBoxError(HarnessError, ValueError):
    """A box has non-positive width/height or non-finite coordinates."""

    code = "invalid-box"


class InvalidInputError(HarnessError, ValueError):
    """A non-box input (image size, duration, ...) is degenerate."""

    code = "invalid-input"


class DatasetError(HarnessError, RuntimeError):
    """Malformed annotation or inconsistent dataset layout.

    ``path`` and ``line`` (1-based, optional) locate the offending record.
    """

    code = "dataset-error"

    def __init__(self, message, path=None, line=None):
        self.path = str(path) if path is not None else None
        self.line = line
        loc = ""
        if self.path is not None:
            loc = f" [{self.path}" + (f":{line}" if line is not None else "") + "]"
        super().__init__(message + loc)


class MissingSplitError(DatasetError):
    """Requested split directory is absent or holds no entries."""

    code = "missing-split"


class EmptyDatasetError(DatasetError):
    """An operation that needs objects got an empty index."""

    code = "empty-dataset"


class EmptyEvaluationError(HarnessError, ValueError):
    """No evaluable frames / no ground truth for a metric computation."""

    code = "empty-evaluation"


class MeasurementError(HarnessError, ValueError):
    """Throughput measurement with zero tasks or zero duration."""

    code = "measurement-error"


class ConfigError(HarnessError, ValueError):
    """Bad run configuration (unknown plugin spec, invalid threshold, ...)."""

    code = "config-error"


class PluginError(HarnessError, RuntimeError):
    """Base class for plug-in failures."""

    code = "plugin-error"


class PluginProtocolError(PluginError):
    """External plug-in broke the wire contract (malformed reply, bad score,
    unexpected exit). ``diagnostics`` holds captured stderr, if any."""

    code = "protocol-error"

    def __init__(self, message, diagnostics=None):
        self.diagnostics = diagnostics or ""
        if self.diagnostics:
            message = f"{message}\n--- plugin stderr ---\n{self.diagnostics}"
        super().__init__(message)


class UninitializedTrackerError(PluginError):
    """track() called before init()."""

    code = "uninitialized-tracker"
