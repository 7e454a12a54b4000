"""Exception types raised across the toolkit.

Everything derives from :class:`HMCError` so the command line can map any
data or model failure to a single exit status.
"""


class HMCError(Exception):
    """Base class for all toolkit errors."""


# hierarchy construction / queries
class HierarchyError(HMCError):
    pass


class CycleDetected(HierarchyError):
    pass


class MultipleParents(HierarchyError):
    pass


class DuplicateLabel(HierarchyError):
    pass


class EmptyCode(HierarchyError):
    pass


class InconsistentDelimiterUse(HierarchyError):
    pass


class IndexOutOfRange(HierarchyError, IndexError):
    pass


# numerical shape / contract violations
class LengthMismatch(HMCError, ValueError):
    pass


class ShapeMismatch(HMCError, ValueError):
    pass


class InvalidDimensions(HMCError, ValueError):
    pass


class InconsistentTarget(HMCError, ValueError):
    pass


# data
class EmptyDataset(HMCError):
    pass


class UnknownLabel(HMCError):
    pass


class RaggedRow(HMCError):
    pass


class NotUpwardClosed(HMCError):
    pass


class ParseError(HMCError):
    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)


class InvalidShape(HMCError, ValueError):
    pass


# metrics
class EmptyBatch(HMCError):
    pass


class UndefinedRatio(HMCError):
    pass


class NoPositives(HMCError):
    pass


# checkpoints
class FingerprintMismatch(HMCError):
    pass
