"""Exception types shared across the engine, simulator, and checker."""


class ViewLensError(Exception):
    """Base class for all errors raised by this package."""


class CycleDetected(ViewLensError):
    """The declared edge set is not a DAG."""


class DuplicateNode(ViewLensError):
    """A node id appears more than once in a graph specification."""


class UnknownNode(ViewLensError):
    """An operation referenced a node that does not exist in the graph."""


class StaleVersion(ViewLensError):
    """A new item's version is not strictly newer than the node's items."""


class NoMatchingUC(ViewLensError):
    """install_result found no under-computation placeholder at that version."""


class EmptyWriteSet(ViewLensError):
    """A write transaction must name at least one base node."""


class AlreadyCommitted(ViewLensError):
    """step_write called on a committed write transaction."""


class WriteOrderViolation(ViewLensError):
    """A write was stepped or committed out of submission order."""


class EmptyViewport(ViewLensError):
    """A read transaction must cover at least one node."""


class WriteInProgress(ViewLensError):
    """Configuration changes are only allowed between write transactions."""


class UnknownLens(ViewLensError):
    """Unrecognized lens name or invalid k."""


class UnknownPolicy(ViewLensError):
    """Unrecognized scheduler policy name."""


class EmptyGroup(ViewLensError):
    """next_view called with an empty candidate group."""


class ClockWentBackwards(ViewLensError):
    """An event instant precedes the previous one for the same tracker."""


class UnorderedTrace(ViewLensError):
    """ReadEvent return instants are not non-decreasing."""


class MissingVersionHistory(ViewLensError):
    """The requested check needs the trace's write/version history."""


class WorkloadMismatch(ViewLensError):
    """Cross-lens comparison over traces from different read sequences."""


class ConfigInvalid(ViewLensError):
    """An experiment or graph configuration failed validation."""
