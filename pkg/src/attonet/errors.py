"""Exception types shared across the toolkit."""

from __future__ import annotations


class AttonetError(Exception):
    """Base class for all toolkit errors."""


class SpecFormatError(AttonetError, ValueError):
    """A network document (JSON) is malformed or carries unknown keys."""


class ShapeUnderflowError(AttonetError):
    """Shape propagation produced a zero or negative spatial dimension."""

    def __init__(self, layer_id: str, detail: str):
        super().__init__(f"{layer_id}: {detail}")
        self.layer_id = layer_id


class ChannelMismatchError(AttonetError):
    """Channel binding failed for a layer (e.g. groups exceed channels)."""

    def __init__(self, layer_id: str, detail: str):
        super().__init__(f"{layer_id}: {detail}")
        self.layer_id = layer_id


class ShapeMismatchError(AttonetError):
    """An engine input or weight array does not match the bound layer."""


class MissingWeightsError(AttonetError):
    """A forward pass was requested without weights for some layer."""


class TensorFormatError(AttonetError, ValueError):
    """A binary tensor or weight file is malformed."""


class MetricDomainError(AttonetError, ValueError):
    """A score was requested for inputs outside the metric's domain."""


class EvaluatorFailureError(AttonetError):
    """An accuracy evaluator raised while scoring a candidate network."""

    def __init__(self, digest: str, cause: BaseException | str):
        super().__init__(f"evaluator failed on candidate {digest}: {cause}")
        self.digest = digest
        self.cause = cause


class InsufficientHistoryError(AttonetError):
    """Exploration history holds fewer usable generations than requested."""
