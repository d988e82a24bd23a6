"""Dilute Fermi gas energetics: scattering solvers, Hartree-Fock on a torus,
regularized kernels, and small-mode Fock-space exact diagonalization."""

import os as _os

# Pin BLAS to a single thread unless the user chose otherwise: keeps every
# reduction order fixed so repeated runs are bitwise reproducible.  Effective
# only when this package is imported before numpy initializes BLAS.
for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    _os.environ.setdefault(_var, "1")

from . import fermi_gas, fock, lattice, potential, radial, scattering, trial
from .errors import (AccuracyError, AdmissibilityError, ConvergenceError,
                     FermigasError, GeometryError, ParameterError,
                     ResourceLimitError)

__all__ = [
    "fermi_gas", "fock", "lattice", "potential", "radial", "scattering", "trial",
    "AccuracyError", "AdmissibilityError", "ConvergenceError", "FermigasError",
    "GeometryError", "ParameterError", "ResourceLimitError",
]

__version__ = "0.1.0"
