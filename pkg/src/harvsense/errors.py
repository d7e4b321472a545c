"""Exception hierarchy shared by every module."""


class HarvsenseError(Exception):
    """Base class; the CLI maps these to exit code 1."""


class DomainError(HarvsenseError, ValueError):
    """An argument lies outside the domain where the model is defined."""


class ConfigError(HarvsenseError, ValueError):
    pass


class TraceParseError(HarvsenseError):
    def __init__(self, path, row, message):
        self.path = str(path)
        self.row = row
        self.message = message
        super().__init__(f"{self.path}: row {row}: {message}")


class DegenerateSegmentError(HarvsenseError, ValueError):
    """Segment peak-to-peak is too small to normalise."""


class ModelFormatError(HarvsenseError):
    """Model file is corrupt, of an unknown version, or built for another spec."""


class TrainingError(HarvsenseError):
    """Loss became NaN or diverged during training."""
