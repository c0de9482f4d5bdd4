"""Variational Monte Carlo for neural quantum states on the J1-J2 square lattice."""

import os as _os

import numpy as _np  # noqa: F401  (loads the BLAS backend before capping it)

# OpenBLAS thread pools hurt badly at the factorization sizes this package
# uses (hundreds to a few thousand rows); default to single-threaded BLAS
# unless the user capped threads explicitly via the environment.
if not any(
    _os.environ.get(v)
    for v in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "NQSVMC_THREADS")
):
    try:
        from threadpoolctl import ThreadpoolController as _TC

        _blas_limit = _TC()
        _blas_limit.limit(limits=1, user_api="blas")
    except Exception:  # pragma: no cover - threadpoolctl is optional at runtime
        pass

from .errors import (
    ConfigError,
    DimensionTooSmall,
    FactorizationFailure,
    NoConvergence,
    NonErgodicWarning,
    NotSquare,
    OddDimension,
    SectorTooLarge,
    SingularM,
    UnsupportedIrrep,
    ZeroAmplitude,
    ZeroAmplitudeReference,
)
from .hamiltonian import HamiltonianSpec
from .lattice import LatticeGeometry, build_square_lattice
from .nqs import ParameterVector, init_parameters, log_psi
from .optimizer import OptimizerConfig, UpdateRule
from .symmetry import build_c4v, build_space_group, build_translation_group

__all__ = [
    "ConfigError",
    "DimensionTooSmall",
    "FactorizationFailure",
    "HamiltonianSpec",
    "LatticeGeometry",
    "NoConvergence",
    "NonErgodicWarning",
    "NotSquare",
    "OddDimension",
    "OptimizerConfig",
    "ParameterVector",
    "SectorTooLarge",
    "SingularM",
    "UnsupportedIrrep",
    "UpdateRule",
    "ZeroAmplitude",
    "ZeroAmplitudeReference",
    "build_c4v",
    "build_space_group",
    "build_square_lattice",
    "build_translation_group",
    "init_parameters",
    "log_psi",
]

__version__ = "0.1.0"
