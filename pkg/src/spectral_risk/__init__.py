"""Spectral risk detection on rolling return matrices, with a backtest harness."""
from .market_data import ReturnMatrix, ReturnPanel, load_panel, sample_universe, window
from .metrics import MetricsSummary, max_drawdown, summarize
from .spectral import (
    NormalizedSpectrum,
    RiskScenario,
    classify_scenario,
    enhanced_signal,
    normalized_spectrum,
    rr_signal,
    singular_values,
    vertex_distance,
    vertex_distances,
)

__all__ = [
    "MetricsSummary",
    "NormalizedSpectrum",
    "ReturnMatrix",
    "ReturnPanel",
    "RiskScenario",
    "classify_scenario",
    "enhanced_signal",
    "load_panel",
    "max_drawdown",
    "normalized_spectrum",
    "rr_signal",
    "sample_universe",
    "singular_values",
    "summarize",
    "vertex_distance",
    "vertex_distances",
    "window",
]
__version__ = "0.1.0"
