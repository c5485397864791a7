"""Exception hierarchy.

Every error raised by the library derives from :class:`DistForestError`.
:class:`ParseError` and its subclasses signal malformed input files; every
other subclass signals a violated precondition or contract.
"""


class DistForestError(Exception):
    """Base class for all library errors."""


# -- trees -------------------------------------------------------------------


class TreeError(DistForestError):
    pass


class InvalidTree(TreeError):
    pass


class UnknownLabel(TreeError):
    pass


class IncompatibleSplits(TreeError):
    pass


class IncompleteSplits(TreeError):
    pass


class InvalidTarget(TreeError):
    pass


class TooLarge(TreeError):
    pass


# -- metrics -----------------------------------------------------------------


class MetricError(DistForestError):
    pass


class InvalidMetric(MetricError):
    pass


class LabelMismatch(MetricError):
    pass


class MissingLength(MetricError):
    pass


class InfiniteEntry(MetricError):
    pass


# -- reconstruction ----------------------------------------------------------


class ReconstructionError(DistForestError):
    pass


class AmbiguousQuartet(ReconstructionError):
    pass


class NonPositiveLength(ReconstructionError):
    pass


class PartitionConflict(ReconstructionError):
    """Components of the sharing graph produced overlapping leaf blocks."""


class GlueError(ReconstructionError):
    pass


class SideConflict(GlueError):
    pass


class EdgeIdentificationAmbiguous(GlueError):
    pass


class InconsistentLocalTrees(IncompatibleSplits):
    """Local trees of a sharing collection cannot be restrictions of one tree."""


# -- sequence models ---------------------------------------------------------


class ModelError(DistForestError):
    pass


class OutOfRange(ModelError, ValueError):
    pass


class ModelMismatch(ModelError):
    pass


# -- file formats ------------------------------------------------------------


class ParseError(DistForestError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f" (line {line}" + (f", column {column}" if column is not None else "") + ")"
        super().__init__(message + where)


class AsymmetryError(ParseError):
    pass


class RaggedLengths(ParseError):
    pass
