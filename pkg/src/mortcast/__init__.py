"""Mortality rate forecasting: Lee-Carter variants, a from-scratch LSTM,
and a 10-year out-of-sample benchmark harness."""

from .arima import (
    ArimaFit,
    ArimaSpec,
    KpssResult,
    auto_select,
    fit_arima,
    fit_rw_drift,
    forecast,
    kpss_test,
)
from .errors import MortcastError
from .experiments import (
    EvaluationReport,
    ForecastSet,
    HoldoutSplit,
    aggregate,
    evaluate_forecasts,
    run_lc_pipeline,
    run_lstm_pipeline,
    split_holdout,
    write_report,
)
from .hmd import (
    DatasetRegistry,
    LifeTableRecord,
    MortalityMatrix,
    Sex,
    apply_exclusions,
    build_matrix,
    parse_life_table,
)
from .leecarter import LeeCarter, LogMortalityMatrix, log_transform
from .lstm import (
    LstmForecaster,
    LstmNetwork,
    SequenceDataset,
    Standardizer,
    build_dataset,
    cell_step,
    forecast_recursive,
    forward,
    loss_and_gradients,
)
from .metrics import ForecastMetrics, compute_metrics
from .svd import jacobi_svd
from .synth import generate_registry

__version__ = "0.1.0"

__all__ = [
    "ArimaFit",
    "ArimaSpec",
    "DatasetRegistry",
    "EvaluationReport",
    "ForecastMetrics",
    "ForecastSet",
    "HoldoutSplit",
    "KpssResult",
    "LeeCarter",
    "LifeTableRecord",
    "LogMortalityMatrix",
    "LstmForecaster",
    "LstmNetwork",
    "MortalityMatrix",
    "MortcastError",
    "SequenceDataset",
    "Sex",
    "Standardizer",
    "aggregate",
    "apply_exclusions",
    "auto_select",
    "build_dataset",
    "build_matrix",
    "cell_step",
    "compute_metrics",
    "evaluate_forecasts",
    "fit_arima",
    "fit_rw_drift",
    "forecast",
    "forecast_recursive",
    "forward",
    "generate_registry",
    "jacobi_svd",
    "kpss_test",
    "log_transform",
    "loss_and_gradients",
    "parse_life_table",
    "run_lc_pipeline",
    "run_lstm_pipeline",
    "split_holdout",
    "write_report",
]
