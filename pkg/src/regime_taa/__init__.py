"""Macroeconomic regime detection and regime-driven tactical asset allocation."""
from .errors import (
    ConfigError,
    DataError,
    FlatPositionWarning,
    NumericalError,
    RegimeTaaError,
)
from .ingest import FactorPanel, MacroPanel, build_factor_panel, fit_pca, parse_fred_md, read_group_map
from .regimes import RegimeModel, classify, elbow_k, fit_regimes, kmeans
from .transition import conditional_transition, estimate_transition, propagate
from .forecast import AssetPanel
from .allocate import bl_posterior, size

__version__ = "0.1.0"
