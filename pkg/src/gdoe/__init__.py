"""Generative design of experiments on a 2D latent space.

Workflow: declare factors and constraints, enumerate and filter the full
factorial, train the autoencoder on the encoded design, place grids on
the latent square, decode them into pragmatic designs with diagnostics,
then interpolate measured responses and rank factor importance.
"""

from .cluster import Clustering, kmeans, ward
from .constraints import ConstraintExpr, evaluate, parse_constraint
from .design import (
    Design,
    EncodedMatrix,
    FactorSpec,
    NoiseConfig,
    build_full_factorial,
    decode_vector,
    duplicate_and_split,
    encode_design,
    filter_by_constraints,
)
from .errors import GdoeError, ValidationError
from .fields import FieldMap, density_map, extract_borders, factor_map, gradient_map
from .generate import DesignDiagnostics, diagnose, generate, random_subset
from .grids import GridSpec, make_grid
from .project import Project
from .response import (
    ImportanceReport,
    OptimumReport,
    ResponseRecord,
    Surface,
    compute_lcl,
    find_optimum,
    importance,
    interpolate,
)
from .vae import (
    LatentEmbedding,
    TrainingConfig,
    VaeModel,
    decode_latent,
    embed,
    kl_divergence,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "Clustering", "kmeans", "ward",
    "ConstraintExpr", "evaluate", "parse_constraint",
    "Design", "EncodedMatrix", "FactorSpec", "NoiseConfig",
    "build_full_factorial", "decode_vector", "duplicate_and_split",
    "encode_design", "filter_by_constraints",
    "GdoeError", "ValidationError",
    "FieldMap", "density_map", "extract_borders", "factor_map", "gradient_map",
    "DesignDiagnostics", "diagnose", "generate", "random_subset",
    "GridSpec", "make_grid",
    "Project",
    "ImportanceReport", "OptimumReport", "ResponseRecord", "Surface",
    "compute_lcl", "find_optimum", "importance", "interpolate",
    "LatentEmbedding", "TrainingConfig", "VaeModel",
    "decode_latent", "embed", "kl_divergence", "train",
]
