"""Mean-agnostic sequential tests for multiplicative count series.

Streaming CUSUM-type detectors for the daily growth ratio of a count
series, a Monte Carlo harness measuring their delay/false-alarm tradeoff,
and ingestion helpers for running them on real data.
"""

from .core import Barriers, constrained_mean_estimates, mast_increment, page_increment
from .detectors import (
    AlarmReport,
    DetectorConfig,
    DetectorKind,
    DetectorState,
    TraceRow,
    brute_force_statistic,
    mast_update,
    page_update,
    run_stream,
    write_trace_csv,
)
from .ingestion import (
    CountSeries,
    DegenerateSigmaError,
    InsufficientDataError,
    ParseError,
    RatioSeries,
    estimate_sigma,
    parse_counts,
    reconstruct_counts,
    smooth_counts,
    to_ratios,
    write_ratios_csv,
)
from .simulation import (
    CurvePoint,
    ExtrapolationError,
    InsufficientEventsError,
    LinearFit,
    OperationalCurve,
    PerformanceEstimate,
    ScenarioSpec,
    estimate_delay,
    estimate_pf,
    fit_linear,
    generate_path,
    operational_curve,
)

__version__ = "0.1.0"

__all__ = [
    "AlarmReport",
    "Barriers",
    "CountSeries",
    "CurvePoint",
    "DegenerateSigmaError",
    "DetectorConfig",
    "DetectorKind",
    "DetectorState",
    "ExtrapolationError",
    "InsufficientDataError",
    "InsufficientEventsError",
    "LinearFit",
    "OperationalCurve",
    "ParseError",
    "PerformanceEstimate",
    "RatioSeries",
    "ScenarioSpec",
    "TraceRow",
    "brute_force_statistic",
    "constrained_mean_estimates",
    "estimate_delay",
    "estimate_pf",
    "estimate_sigma",
    "fit_linear",
    "generate_path",
    "mast_increment",
    "mast_update",
    "operational_curve",
    "page_increment",
    "page_update",
    "parse_counts",
    "reconstruct_counts",
    "run_stream",
    "smooth_counts",
    "to_ratios",
    "write_ratios_csv",
    "write_trace_csv",
    "__version__",
]
