"""Order selection with confidence for finite Gaussian mixture models.

Public surface:

- mixture representation and EM fitting (``mixture``, ``em``)
- finite-sample split/swapped order tests and e-value tools (``ordertests``)
- the sequential testing procedure and AIC/BIC (``stp``)
- overlap-controlled synthetic mixtures and KL diagnostics (``simgen``)
- the replicated simulation harness (``harness``)
- CSV/JSON formats (``dataio``) and the command line (``cli``)

The EM hot loop runs on compiled kernels when the extension built, with a
pure-NumPy fallback; ``mixorder.backend.BACKEND`` names the active one.
"""

__version__ = "0.1.0"

from .backend import BACKEND
from .em import FitConfig, FitResult, fit_mle
from .errors import (
    DegenerateFitError,
    DimensionError,
    EmptyAggregateError,
    EmptyDataError,
    InsufficientComponentsError,
    InsufficientDataError,
    InvalidStatisticError,
    InvariantError,
    MixOrderError,
    OverlapUnreachableError,
    ParseError,
    PositiveDefiniteError,
    ScenarioError,
)
from .harness import MetricsRow, ReplicateRecord, Scenario, emit_results, fwer_oracle, run_scenario
from .mixture import (
    Dataset,
    GaussianComponent,
    MixtureParams,
    log_density_gaussian,
    log_likelihood,
    log_mixture_density,
    sample,
)
from .ordertests import (
    FitCache,
    SplitPlan,
    TestConfig,
    TestOutcome,
    aggregate_e_values,
    p_value_from_log_stat,
    random_split,
    run_order_test,
    split_statistic_log,
    swapped_statistic_log,
)
from .simgen import GeneratedMixture, GenSpec, generate_mixture_params, kl_mc, pairwise_overlap_mc
from .stp import (
    AlphaSchedule,
    ICTable,
    StpOutcome,
    dim_g,
    information_criteria,
    resolve_alpha,
    run_stp,
)

__all__ = [
    "BACKEND",
    "__version__",
    "AlphaSchedule", "Dataset", "FitCache", "FitConfig", "FitResult",
    "GaussianComponent", "GeneratedMixture", "GenSpec", "ICTable",
    "MetricsRow", "MixtureParams", "ReplicateRecord", "Scenario",
    "SplitPlan", "StpOutcome", "TestConfig", "TestOutcome",
    "aggregate_e_values", "dim_g", "emit_results", "fit_mle", "fwer_oracle",
    "generate_mixture_params", "information_criteria", "kl_mc",
    "log_density_gaussian", "log_likelihood", "log_mixture_density",
    "p_value_from_log_stat", "pairwise_overlap_mc", "random_split",
    "resolve_alpha", "run_order_test", "run_scenario", "run_stp", "sample",
    "split_statistic_log", "swapped_statistic_log",
    "DegenerateFitError", "DimensionError", "EmptyAggregateError",
    "EmptyDataError", "InsufficientComponentsError", "InsufficientDataError",
    "InvalidStatisticError", "InvariantError", "MixOrderError",
    "OverlapUnreachableError", "ParseError", "PositiveDefiniteError",
    "ScenarioError",
]
