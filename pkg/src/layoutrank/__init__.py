"""Learning bar-chart layout quality from paired comparisons."""

from .baselines import LinearRankModel, metric_features, train_ranksvm
from .evaluation import correlations, export_analysis, mccv
from .model import ScoringModel, TrainConfig, pair_loss, predict_pair, train
from .optimize import Constraints, NoFeasibleLayoutError, OptimizeResult, optimize
from .oracle import OracleConfig, calibrate_beta, judge_pair, true_score
from .pairs import (
    ComparisonPair,
    Dataset,
    generate_pairs,
    gradient_resample,
    importance_resample,
    label_pairs,
)
from .params import (
    PARAM_ORDER,
    LayoutParams,
    ParamGrid,
    default_grid,
    enumerate_cells,
    normalize,
    sample_params,
)
from .render import ChartData, RenderedChart, desk_reject, render

__all__ = [
    "PARAM_ORDER",
    "ChartData",
    "ComparisonPair",
    "Constraints",
    "Dataset",
    "LayoutParams",
    "LinearRankModel",
    "NoFeasibleLayoutError",
    "OptimizeResult",
    "OracleConfig",
    "ParamGrid",
    "RenderedChart",
    "ScoringModel",
    "TrainConfig",
    "calibrate_beta",
    "correlations",
    "default_grid",
    "desk_reject",
    "enumerate_cells",
    "export_analysis",
    "generate_pairs",
    "gradient_resample",
    "importance_resample",
    "judge_pair",
    "label_pairs",
    "mccv",
    "metric_features",
    "normalize",
    "optimize",
    "pair_loss",
    "predict_pair",
    "render",
    "sample_params",
    "train",
    "train_ranksvm",
    "true_score",
]

__version__ = "0.1.0"
