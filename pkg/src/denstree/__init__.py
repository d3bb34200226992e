"""Tree-based conditional density estimation over mixed continuous and
discrete data, composable into Bayesian networks.

Four interchangeable conditional estimators (CART-like, stratified,
exactly conditionalized joint trees, approximately conditionalized joint
trees) share one greedy grower and a family of leaf distributions
(uniform, truncated Gaussians, regression Gaussians, per-dimension linear
and multilinear corner interpolation fitted by fixed-component EM).
"""

__version__ = "0.1.0"

from ._kernels import BACKEND as KERNEL_BACKEND
from .bayesnet import (
    FactoredModel,
    NetworkStructure,
    SearchConfig,
    TierConfig,
    fit_gaussian_mixture_baseline,
    joint_log_likelihood,
    learn_structure,
    parameterize,
    sample_network,
)
from .conditional import (
    ApproxCondModel,
    CartModel,
    CondLearnConfig,
    ConditionalSpec,
    EvalCounters,
    JointModel,
    StratifiedModel,
    learn_approx,
    learn_cart,
    learn_conditional,
    learn_joint,
    learn_stratified,
    smooth_conditional,
)
from .errors import ConfigError, DataError, DensTreeError
from .leaves import EmFitConfig, LeafDistribution
from .preprocess import add_noise, scale_to_unit
from .schema import Box, Dataset, VariableSchema, validate_dataset
from .serialize import decode_model, encode_model
from .splitting import SplitPlan, kfold_partition, split_holdout
from .tree import DensityTree, GrowConfig, grow_tree, prune_tree, sample_tree, smooth_tree, tree_log_density

__all__ = [
    "KERNEL_BACKEND",
    "__version__",
    "ApproxCondModel",
    "Box",
    "CartModel",
    "CondLearnConfig",
    "ConditionalSpec",
    "ConfigError",
    "DataError",
    "Dataset",
    "DensTreeError",
    "DensityTree",
    "EmFitConfig",
    "EvalCounters",
    "FactoredModel",
    "GrowConfig",
    "JointModel",
    "LeafDistribution",
    "NetworkStructure",
    "SearchConfig",
    "SplitPlan",
    "StratifiedModel",
    "TierConfig",
    "VariableSchema",
    "add_noise",
    "decode_model",
    "encode_model",
    "fit_gaussian_mixture_baseline",
    "grow_tree",
    "joint_log_likelihood",
    "kfold_partition",
    "learn_approx",
    "learn_cart",
    "learn_conditional",
    "learn_joint",
    "learn_stratified",
    "learn_structure",
    "parameterize",
    "prune_tree",
    "sample_network",
    "sample_tree",
    "scale_to_unit",
    "smooth_conditional",
    "smooth_tree",
    "split_holdout",
    "tree_log_density",
    "validate_dataset",
]
