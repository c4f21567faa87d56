"""pxlab: numerical laboratory for u_t = div(|grad u|^(p(x)-2) grad u) + |u|^(r-2) u
with homogeneous Dirichlet data: explicit constants, regime classification,
simulation, and trajectory-level inequality checks."""

from .exponents import ExponentField, LogHolderReport, bounds, extrema, log_holder_estimate
from .grid import Grid, ScalarField, field_from_function, zero_field
from .operators import FaceVectorField, gradient_faces, px_laplacian, source_term
from .spaces import (
    EmbeddingEstimate,
    energy_functional,
    estimate_embedding_constant,
    grad_luxemburg_norm,
    grad_modular,
    lr_norm,
    luxemburg_norm,
    modular,
)

__version__ = "0.1.0"

__all__ = [
    "ExponentField",
    "LogHolderReport",
    "Grid",
    "ScalarField",
    "FaceVectorField",
    "EmbeddingEstimate",
    "bounds",
    "extrema",
    "log_holder_estimate",
    "field_from_function",
    "zero_field",
    "gradient_faces",
    "px_laplacian",
    "source_term",
    "modular",
    "luxemburg_norm",
    "lr_norm",
    "grad_modular",
    "grad_luxemburg_norm",
    "energy_functional",
    "estimate_embedding_constant",
    "__version__",
]
