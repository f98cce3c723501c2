"""Cost-regularized unbalanced optimal transport with a learned linear cost."""

from .bcd import (
    cross_correlation,
    epsilon_sweep,
    m_update,
    objective,
    reduced_objective,
    solve_cruot,
    stripped_objective,
)
from .core_types import (
    CouplingMatrix,
    CruotError,
    DegenerateMarginal,
    DimensionMismatch,
    DiscreteMeasure,
    EmptyDataset,
    EntropySpec,
    KTooLarge,
    LinearCostMap,
    MissingLabels,
    NegativeArgument,
    NonFiniteEntry,
    NonNumericFeature,
    NonPositiveWeight,
    NormBoundViolation,
    NumericalOverflow,
    ParseError,
    PointCloud,
    SolveConfig,
    SolveResult,
)
from .data_io import RunConfig, load_dataset, load_run_config, read_report, write_report
from .divergence import balanced_match, kl_divergence, phi_kl, phi_penalty
from .entropic_map import EntropicMapModel, NotConverged, align, evaluate_map, fit_map
from .evaluation import (
    EvalReport,
    SubsampleScheme,
    knn_predict,
    label_transfer_accuracy,
    subsample,
    transported_mass,
)
from . import kernels
from .kernels import available_backends, set_backend
from .sinkhorn import marginal_residual, solve_uot, uot_objective
from .toy import make_toy

__version__ = "0.1.0"
