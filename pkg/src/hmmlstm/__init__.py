"""Regime-augmented LSTM forecasting.

A diagonal Gaussian HMM is fitted to monthly economic series; its decoded
states and per-state means are appended as features for a numpy LSTM
regressor, which is explained with Integrated Gradients.

Modules
-------
ingest       CSV acquisition, monthly alignment, growth rates, ADF diagnostics
regime       HMM fitting (Baum-Welch), Viterbi decoding, feature augmentation
pipeline     min-max scaling, lag tensors, chronological and forward-chaining splits
network      LSTM forward/BPTT, Adam, training loop, regression metrics
attribution  Integrated Gradients and averaged feature importance
forecast     seed-ensemble multi-horizon forecasts and mode comparisons
cli          ``hmmlstm`` command-line driver
"""
from .attribution import AttributionMap, attribute_samples, average_attributions, input_gradient, integrated_gradients
from .errors import ConfigError, DataError, DegenerateError, HmmLstmError
from .forecast import ForecastResult, compare_configs, forecast_horizon
from .ingest import (
    AdfResult,
    RawSeries,
    SeriesTable,
    adf_test,
    align,
    correlation_matrix,
    fetch_csv,
    pct_change_year,
    summary_stats,
    to_monthly,
)
from .network import (
    LstmNetwork,
    NetworkConfig,
    RegressionMetrics,
    TrainReport,
    adam_step,
    cell_forward,
    evaluate,
    run_experiment,
    train,
)
from .pipeline import (
    FoldPlan,
    ScalerParams,
    SupervisedTensor,
    chrono_split,
    forward_chain_folds,
    make_supervised,
    scaler_fit,
    scaler_transform,
)
from .regime import (
    ClassificationReport,
    DecodedPath,
    GaussianHmm,
    augment_features,
    binarize_states,
    classification_report,
    fit_em,
    forward_backward,
    stationary_distribution,
    viterbi,
)

__version__ = "0.1.0"
