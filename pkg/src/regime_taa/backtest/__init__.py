"""Walk-forward backtesting, performance metrics and control comparisons."""
from .metrics import Metrics, cumulative_log_returns, drawdowns, metrics, vol_scale
from .stats import NemenyiResult, TTestResult, nemenyi_test, paired_t_test, random_regime_control
from .walkforward import (
    BENCHMARKS,
    COMPARED_METRICS,
    MODELS,
    AuditRecord,
    BacktestConfig,
    BacktestResult,
    ComparisonReport,
    RegimeStep,
    StrategyResult,
    align,
    cumulative_table,
    metrics_table,
    regime_path,
    returns_table,
    weights_table,
    run_comparison,
    run_strategies,
    walk_forward,
)
