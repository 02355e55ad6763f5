"""Certified robustness to parameterized geometric image transforms.

The package certifies classifiers against rotation, translation, and
volume-scaling attacks by smoothing in the transform's parameter space.
Sound interval bounds on the bilinear interpolation error and a sound
inverse-image over-approximation turn the statistical certificates into
guarantees that hold for every parameter in a box, not just the sampled
ones.
"""

__version__ = "0.1.0"

from .errors import (
    BackendError,
    DomainError,
    FormatError,
    GeosmoothError,
    InfeasibleInput,
)
from .interval import EMPTY, Interval, interval_norm2
from .geometry import (
    KINDS,
    PARAM_DIM,
    GridGeometry,
    ParamBox,
    TransformSpec,
    inverse_coord_map,
    read_bounds,
    read_coords,
)
from .imageops import (
    Image,
    IntervalImage,
    PreprocessConfig,
    apply_preprocess,
    apply_transform,
    apply_transform_interval,
    bilinear_interpolate,
    gaussian_blur,
    quantize,
    quantize_widen,
    read_png,
    vignette_mask,
    volume_scale,
    write_png,
)
from .inverse import InverseResult, invert_image, refine_once
from .datasets import Dataset, synthetic_glyph, synthetic_glyphs
from .classifier import (
    CentroidClassifier,
    ClassifierHandle,
    ExternalClassifier,
    MlpClassifier,
    classify_batch,
    fit_centroid,
    load_centroid,
    load_mlp_weights,
    load_mnist_idx,
    save_centroid,
    save_mlp_weights,
)
from .errorbound import (
    ErrorBoundConfig,
    ErrorBoundEstimate,
    epsilon_concrete,
    epsilon_interval_max,
    estimate_E_distributional,
    estimate_E_individual,
    propose_E,
    scan_epsilon,
)
from .smoothing import (
    ABSTAIN,
    Certificate,
    SmoothingConfig,
    basespt,
    certify_l2_robust,
    distspt,
    indivspt,
    radius_l2,
    radius_param,
    smooth_predict_certify,
    smoothed_predict,
)
from .attacks import (
    AttackResult,
    evaluate_defense,
    summarize,
    worst_of_k,
    write_records_jsonl,
    write_summary_csv,
)
from ._backend import NUMBA_ENABLED, backend_name

__all__ = [
    "ABSTAIN",
    "AttackResult",
    "BackendError",
    "Certificate",
    "CentroidClassifier",
    "ClassifierHandle",
    "Dataset",
    "DomainError",
    "EMPTY",
    "ErrorBoundConfig",
    "ErrorBoundEstimate",
    "ExternalClassifier",
    "FormatError",
    "GeosmoothError",
    "GridGeometry",
    "Image",
    "InfeasibleInput",
    "Interval",
    "IntervalImage",
    "InverseResult",
    "KINDS",
    "MlpClassifier",
    "NUMBA_ENABLED",
    "PARAM_DIM",
    "ParamBox",
    "PreprocessConfig",
    "SmoothingConfig",
    "TransformSpec",
    "apply_preprocess",
    "apply_transform",
    "apply_transform_interval",
    "backend_name",
    "basespt",
    "bilinear_interpolate",
    "certify_l2_robust",
    "classify_batch",
    "distspt",
    "epsilon_concrete",
    "epsilon_interval_max",
    "estimate_E_distributional",
    "estimate_E_individual",
    "evaluate_defense",
    "fit_centroid",
    "gaussian_blur",
    "indivspt",
    "interval_norm2",
    "inverse_coord_map",
    "invert_image",
    "load_centroid",
    "load_mlp_weights",
    "load_mnist_idx",
    "propose_E",
    "quantize",
    "quantize_widen",
    "radius_l2",
    "radius_param",
    "read_bounds",
    "read_coords",
    "read_png",
    "refine_once",
    "save_centroid",
    "save_mlp_weights",
    "scan_epsilon",
    "smooth_predict_certify",
    "smoothed_predict",
    "summarize",
    "synthetic_glyph",
    "synthetic_glyphs",
    "vignette_mask",
    "volume_scale",
    "worst_of_k",
    "write_png",
    "write_records_jsonl",
    "write_summary_csv",
]
