"""Transactional view-refresh engine for live dashboards.

Multi-versioned view graphs, read-side consistency lenses, dwell-driven
refresh scheduling, exact invisibility/staleness metrics, a deterministic
simulator, a trace property checker, and a live HTTP demo service.
"""

from .engine import Engine, StepResult, WriteTxn
from .errors import ViewLensError
from .graph import ViewGraph, build_graph, load_spec
from .lenses import Lens, MetaInfo, VersionChoice, select_version
from .metrics import MetricsReport, compute_report, invisibility, staleness
from .scheduler import CostModel, DwellTracker, Policy, next_view, priority
from .simulator import ExperimentConfig, default_dashboard_spec, run_experiment
from .trace import ReadEvent, Trace, VersionRecord

__all__ = [
    "Engine",
    "StepResult",
    "WriteTxn",
    "ViewLensError",
    "ViewGraph",
    "build_graph",
    "load_spec",
    "Lens",
    "MetaInfo",
    "VersionChoice",
    "select_version",
    "MetricsReport",
    "compute_report",
    "invisibility",
    "staleness",
    "CostModel",
    "DwellTracker",
    "Policy",
    "next_view",
    "priority",
    "ExperimentConfig",
    "default_dashboard_spec",
    "run_experiment",
    "ReadEvent",
    "Trace",
    "VersionRecord",
]

__version__ = "0.1.0"
