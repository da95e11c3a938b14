"""Monte Carlo laboratory for spectral fluctuations of non-Hermitian
i.i.d. random matrices.

Samples N x N matrices with i.i.d. entries (variance 1/N), computes full
complex spectra, and verifies central-limit predictions for linear spectral
statistics and the centered resolvent trace against closed-form limit
covariances.
"""

# The replicate pipeline must be bitwise reproducible regardless of how many
# worker threads run it, so BLAS-level threading is pinned before numpy ever
# loads. setdefault keeps explicit user overrides in force.
import os

for _var in (
    "OPENBLAS_NUM_THREADS",
    "MKL_NUM_THREADS",
    "OMP_NUM_THREADS",
    "NUMEXPR_NUM_THREADS",
):
    os.environ.setdefault(_var, "1")
del os, _var

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    EigenvalueOutsideContour,
    FluctlabError,
    NonConvergence,
    PoleCollision,
    SchemaError,
    SingularPoint,
)

__all__ = [
    "__version__",
    "ConfigError",
    "EigenvalueOutsideContour",
    "FluctlabError",
    "NonConvergence",
    "PoleCollision",
    "SchemaError",
    "SingularPoint",
]
