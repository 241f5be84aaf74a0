"""costcast: cost-oriented load forecasting toolkit.

Builds operational-cost loss functions for load forecasting by simulating
day-ahead dispatch and intraday balancing on a DC-flow network, distills the
simulated costs into smooth piecewise-linear losses, and trains linear and
neural forecasters against them.
"""

from .dispatch import DispatchEngine, ReserveConfig
from .errors import (
    CostcastError,
    DivergenceError,
    InfeasibleError,
    ParseError,
    ValidationError,
)
from .forecaster import (
    AnnModel,
    Dataset,
    FeatureConfig,
    MlrModel,
    build_features,
    load_model,
    predict,
    save_model,
    train_ann,
    train_mlr,
)
from .grid_model import (
    Bess,
    FlowModel,
    Generator,
    Line,
    LoadProfile,
    Network,
    load_network,
    load_profile_from_csv,
)
from .loss_fit import (
    LossVariant,
    PiecewiseLossFunction,
    QuadraticLoss,
    fit_spline,
    fit_variant,
    huberize,
    linearize,
    place_breakpoints,
)
from .metrics import (
    EvaluationReport,
    build_report,
    fepc_by_day,
    mape,
    mfepc,
    ofp_ufp,
)
from .scenario import LossDataset, build_loss_dataset, generate_scenarios
from .series import HourlySeries, load_series_csv, synthetic_series

__version__ = "0.1.0"

__all__ = [
    "AnnModel",
    "Bess",
    "CostcastError",
    "Dataset",
    "DispatchEngine",
    "DivergenceError",
    "EvaluationReport",
    "FeatureConfig",
    "FlowModel",
    "Generator",
    "HourlySeries",
    "InfeasibleError",
    "Line",
    "LoadProfile",
    "LossDataset",
    "LossVariant",
    "MlrModel",
    "Network",
    "ParseError",
    "PiecewiseLossFunction",
    "QuadraticLoss",
    "ReserveConfig",
    "ValidationError",
    "build_features",
    "build_loss_dataset",
    "build_report",
    "fepc_by_day",
    "fit_spline",
    "fit_variant",
    "generate_scenarios",
    "huberize",
    "linearize",
    "load_model",
    "load_network",
    "load_profile_from_csv",
    "load_series_csv",
    "mape",
    "mfepc",
    "ofp_ufp",
    "place_breakpoints",
    "predict",
    "save_model",
    "synthetic_series",
    "train_ann",
    "train_mlr",
    "__version__",
]
