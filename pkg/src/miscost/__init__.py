"""miscost: cost of naive exhaustive maximum-independent-set search on
G(n,p) random graphs, computed exactly, asymptotically, and by
simulation, with every route cross-validated against the others."""

from .errors import (
    BudgetExceeded,
    DomainError,
    InsufficientData,
    MiscostError,
    PrecisionInsufficient,
    SizeTooLarge,
)
from .exact import ENGINE_VERSION, MomentTable, PoissonGF, build_moment_table
from .graphs import GraphInstance, brute_force_alpha, count_independent_sets, sample_gnp
from .numerics import ModelParams, NumericContext, required_precision
from .search import CostSample, run_exhaustive_mis, sample_Y, sample_Z

__version__ = ENGINE_VERSION

__all__ = [
    "ENGINE_VERSION",
    "__version__",
    "ModelParams",
    "NumericContext",
    "required_precision",
    "GraphInstance",
    "sample_gnp",
    "brute_force_alpha",
    "count_independent_sets",
    "CostSample",
    "run_exhaustive_mis",
    "sample_Y",
    "sample_Z",
    "MomentTable",
    "PoissonGF",
    "build_moment_table",
    "MiscostError",
    "SizeTooLarge",
    "BudgetExceeded",
    "PrecisionInsufficient",
    "DomainError",
    "InsufficientData",
]
