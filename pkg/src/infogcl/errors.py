"""Exception types raised across the package."""


class InfoGCLError(Exception):
    """Base class for every package-specific failure."""


class IngestError(InfoGCLError):
    """A required input file is missing or unreadable."""


class FormatError(InfoGCLError):
    """An input file exists but its contents violate the expected layout."""


class ShapeError(InfoGCLError, ValueError):
    pass


class NumericError(InfoGCLError, FloatingPointError):
    """A tensor operation produced NaN or Inf."""


class AlignmentError(InfoGCLError):
    """Local-local contrast found no node present in both views."""


class NeedNegativesError(InfoGCLError):
    """InfoNCE was asked to score a batch with no negatives; use negfree_loss."""


class DomainError(InfoGCLError, ValueError):
    pass


class StratificationError(InfoGCLError):
    """A cross-validation fold ended up without some class."""


class ConfigError(InfoGCLError, ValueError):
    pass


class DivergenceError(InfoGCLError):
    def __init__(self, epoch: int, batch: int, value: float):
        super().__init__(f"non-finite loss {value!r} at epoch {epoch}, batch {batch}")
        self.epoch = epoch
        self.batch = batch
        self.value = value
