"""
Exception hierarchy for the Low Vision GUI Checker.

Library code raises these; the batch pipeline catches CheckerError per
file, logs it and moves on to the next layout.
"""


class CheckerError(Exception):
    """Base class for every error the checker raises on purpose."""


class ConfigError(CheckerError):
    """Invalid configuration value or configuration file."""


# Layout parsing


class LayoutError(CheckerError):
    """A layout file could not be turned into a LayoutTree."""


class MalformedXml(LayoutError):
    """The document is not well-formed XML."""


class BadBounds(LayoutError):
    """A bounds attribute does not match "[x1,y1][x2,y2]" or is inverted."""


class MissingRoot(LayoutError):
    """The document holds no <node> element to act as the root view."""


# Graph construction


class GraphError(CheckerError):
    """A LayoutTree could not be turned into a GUI-graph."""


class EmptyGui(GraphError):
    """No component-node survived identification."""


class TooManyNodes(GraphError):
    """The graph has more real nodes than the padding threshold."""

    def __init__(self, n_real: int, threshold: int):
        super().__init__(
            f"graph has {n_real} nodes, padding threshold is {threshold}"
        )
        self.n_real = n_real
        self.threshold = threshold


class InvalidClass(CheckerError):
    """A class index outside the range an operation accepts."""


# Model


class ModelError(CheckerError):
    """Base class for GCN model errors."""


class ShapeMismatch(ModelError):
    """Tensor shapes disagree with the model configuration."""


class NoLabeledNodes(ModelError):
    """Loss requested over a graph or dataset without labeled components."""


class NonFiniteLoss(ModelError):
    """Training diverged."""


class CheckpointError(ModelError):
    """A checkpoint file is unreadable or has the wrong format/version."""


# Synthetic corpus


class CorpusError(CheckerError):
    """Base class for corpus generation errors."""


class InfeasibleSpec(CorpusError):
    """Components cannot be placed without overlap on the device."""


class UnknownComponent(CorpusError):
    """A resource id that does not name a component of the layout."""


class EmptyCorpus(CorpusError):
    """An operation that needs GUIs was given none."""


# Evaluation


class LengthMismatch(CheckerError):
    """Prediction and gold vectors have different lengths."""
