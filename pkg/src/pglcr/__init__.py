"""Bayesian latent class analysis and latent class regression.

Collapsed Gibbs sampling for LCA, Polya-Gamma augmented Gibbs sampling for
LCR, item and predictor selection, and label-switching-aware summaries.
Class labels and category codes are 0-based in the Python API; files on
disk use 1-based codes.
"""

__version__ = "0.1.0"

from .distributions import (
    RandomStream,
    draw_categorical,
    draw_dirichlet,
    draw_gaussian_from_precision,
    draw_polya_gamma,
    polya_gamma,
)
from .errors import (
    ConfigError,
    DegenerateWeightsError,
    DimensionError,
    IngestionError,
    InsufficientSamplesError,
    InvalidParameterError,
    NumericalSingularityError,
    PglcrError,
    TraceVersionError,
)
from .lca import LcaChainConfig, lca_gibbs_step, run_lca_chain
from .lcr import LcrChainConfig, run_lcr_chain
from .model import (
    CategoricalDataset,
    CovariateMatrix,
    LcrState,
    PriorConfig,
    collapsed_log_posterior,
    complete_data_loglik,
    compute_counts,
    mixing_probabilities,
)
from .simulate import GenerativeSpec, generate, sim1_spec, sim2_spec
from .trace import ChainTrace, read_trace, write_trace

__all__ = [
    "__version__",
    "RandomStream",
    "draw_categorical",
    "draw_dirichlet",
    "draw_gaussian_from_precision",
    "draw_polya_gamma",
    "polya_gamma",
    "ConfigError",
    "DegenerateWeightsError",
    "DimensionError",
    "IngestionError",
    "InsufficientSamplesError",
    "InvalidParameterError",
    "NumericalSingularityError",
    "PglcrError",
    "TraceVersionError",
    "LcaChainConfig",
    "lca_gibbs_step",
    "run_lca_chain",
    "LcrChainConfig",
    "run_lcr_chain",
    "CategoricalDataset",
    "CovariateMatrix",
    "LcrState",
    "PriorConfig",
    "collapsed_log_posterior",
    "complete_data_loglik",
    "compute_counts",
    "mixing_probabilities",
    "GenerativeSpec",
    "generate",
    "sim1_spec",
    "sim2_spec",
    "ChainTrace",
    "read_trace",
    "write_trace",
]
