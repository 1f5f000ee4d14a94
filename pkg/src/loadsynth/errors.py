"""Exception hierarchy shared by the library, the CLI and the HTTP service.

The CLI maps these onto its documented exit codes (usage=1, input=2,
model=3, data shape=4); the service maps them onto HTTP status codes.
"""


class LoadSynthError(Exception):
    """Base class for all errors raised by this package."""


class UsageError(LoadSynthError):
    """Bad arguments, bad configuration or an unknown config key."""


class InputError(LoadSynthError):
    """Missing or unreadable input files, malformed CSV rows."""


class ParseError(InputError):
    """A CSV row that cannot be parsed; carries the offending line number."""

    def __init__(self, message, line_number=None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class ValidationError(InputError):
    """Input that parses but violates a documented invariant."""


class DataShapeError(LoadSynthError):
    """Data that is structurally unusable (too short, mixed lengths, ...)."""


class ModelError(LoadSynthError):
    """Problems with trained model artifacts."""


class ModelLoadError(ModelError):
    """Unreadable, corrupted or version-incompatible model file."""


class TrainingError(ModelError):
    """Training preconditions not met."""


class ClosureViolation(ModelError):
    """A sampler reached a context that was never observed in training.

    Must be impossible for chains trained and sampled through this
    package; raised rather than silently recovering so that a bug in the
    training/sampling pairing is loud.
    """
