"""Direct estimation and testing of correlations between latent higher-level
variables (proteins, pathways) from lower-level measurements (peptides,
genes), with a positive-definite shrinkage estimator and aggregation
baselines for comparison.
"""

__version__ = "0.1.0"

from .data import (  # noqa: E402
    BindingMap,
    PairIndexSet,
    SampleMatrix,
    UniqueSets,
    check_uvc,
    derive_unique_sets,
    load_binding_map,
    load_samples,
)
from .direct import CovEstimate, estimate_correlation, estimate_direct, estimate_sigma  # noqa: E402
from .errors import LatcorrError, NumericalError, ParseError, UVCError, ValidationError  # noqa: E402
from .inference import InferenceResult, PairInference, infer_all, test_pair  # noqa: E402
from .moments import CrossProducts, cross_products, pair_sum, quad_form, quad_form_batch  # noqa: E402
from .shrinkage import ShrinkageResult, cross_validate_kappa, shrink, shrink_estimate  # noqa: E402

__all__ = [
    "BindingMap",
    "PairIndexSet",
    "SampleMatrix",
    "UniqueSets",
    "check_uvc",
    "derive_unique_sets",
    "load_binding_map",
    "load_samples",
    "CovEstimate",
    "estimate_correlation",
    "estimate_direct",
    "estimate_sigma",
    "LatcorrError",
    "NumericalError",
    "ParseError",
    "UVCError",
    "ValidationError",
    "InferenceResult",
    "PairInference",
    "infer_all",
    "test_pair",
    "CrossProducts",
    "cross_products",
    "pair_sum",
    "quad_form",
    "quad_form_batch",
    "ShrinkageResult",
    "cross_validate_kappa",
    "shrink",
    "shrink_estimate",
]
