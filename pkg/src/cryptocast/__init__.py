"""cryptocast: time-series forecasting toolkit.

Five forecasters over sliding feature windows (hybrid attention encoder +
GRU, BiLSTM, BiGRU, Gaussian RBF network, memorizing kernel regressor), a
data pipeline for price/volume/sentiment series, and nonparametric
statistics for comparing the models' test errors.
"""

__version__ = "0.1.0"

from .config import ExperimentConfig, load_config_file, validate_config
from .data import (
    Forecast,
    NormStats,
    SeriesFrame,
    SplitSpec,
    SynthParams,
    WindowSet,
    apply_minmax,
    chronological_split,
    classify_fgi,
    compose_fgi,
    fit_minmax,
    invert_minmax,
    load_series,
    make_windows,
    synthesize_series,
)
from .errors import (
    AlignmentError,
    ConfigError,
    CryptocastError,
    DataError,
    DegenerateScaleError,
    DimensionError,
    DivergenceError,
    DomainError,
    NumericalError,
    OrderingError,
    ParseError,
    SchemaError,
    SizeError,
)
from .gradcheck import grad_check
from .hybrid import HybridConfig, HybridModel, hybrid_forward, hybrid_train, init_hybrid, predict_series
from .kernels import GrnnModel, RbfnModel, grnn_fit, grnn_predict, rbfn_fit, rbfn_predict
from .optim import AdamState, TrainConfig, adam_step
from .pipeline import run_experiment
from .recurrent import (
    BiRnnModel,
    GruCellParams,
    LstmCellParams,
    birnn_forward,
    birnn_train,
    gru_cell_step,
    init_birnn,
    lstm_cell_step,
)
from .rng import Rng
from .stats import (
    ComparisonReport,
    FriedmanResult,
    IntervalBand,
    MetricReport,
    WilcoxonResult,
    bonferroni_adjust,
    compare_models,
    compute_metrics,
    friedman_test,
    prediction_interval,
    rank_blocks,
    tail_probability,
    wilcoxon_signed_rank,
)

__all__ = [
    "AdamState",
    "AlignmentError",
    "BiRnnModel",
    "ComparisonReport",
    "ConfigError",
    "CryptocastError",
    "DataError",
    "DegenerateScaleError",
    "DimensionError",
    "DivergenceError",
    "DomainError",
    "ExperimentConfig",
    "Forecast",
    "FriedmanResult",
    "GrnnModel",
    "GruCellParams",
    "HybridConfig",
    "HybridModel",
    "IntervalBand",
    "LstmCellParams",
    "MetricReport",
    "NormStats",
    "NumericalError",
    "OrderingError",
    "ParseError",
    "RbfnModel",
    "Rng",
    "SchemaError",
    "SeriesFrame",
    "SizeError",
    "SplitSpec",
    "SynthParams",
    "TrainConfig",
    "WilcoxonResult",
    "WindowSet",
    "adam_step",
    "apply_minmax",
    "birnn_forward",
    "birnn_train",
    "bonferroni_adjust",
    "chronological_split",
    "classify_fgi",
    "compare_models",
    "compose_fgi",
    "compute_metrics",
    "fit_minmax",
    "friedman_test",
    "grad_check",
    "grnn_fit",
    "grnn_predict",
    "gru_cell_step",
    "hybrid_forward",
    "hybrid_train",
    "init_birnn",
    "init_hybrid",
    "invert_minmax",
    "load_config_file",
    "load_series",
    "lstm_cell_step",
    "make_windows",
    "prediction_interval",
    "predict_series",
    "rank_blocks",
    "rbfn_fit",
    "rbfn_predict",
    "run_experiment",
    "synthesize_series",
    "tail_probability",
    "validate_config",
    "wilcoxon_signed_rank",
    "__version__",
]
