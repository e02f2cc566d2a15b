"""Exception types shared across the package."""


class DrnError(Exception):
    """Base class for all drnlab errors."""


class DimensionError(DrnError):
    """Input rejected: shape or value does not match the model."""


class DegenerateLayerError(DrnError):
    """A layer whose gain would be zero (all-zero weights and biases)."""


class IsolatedNodeError(DrnError):
    """A hidden/output node with zero total conductance; its update is undefined."""


class NumericFailureError(DrnError):
    """Non-finite values appeared during a solve or a training step."""

    def __init__(self, message, batch_index=None):
        super().__init__(message)
        self.batch_index = batch_index


class FormatError(DrnError):
    """A serialized artifact (netlist, weight file, IDX file) is malformed."""


class DatasetError(DrnError):
    """Image/label files disagree or violate dataset invariants."""
