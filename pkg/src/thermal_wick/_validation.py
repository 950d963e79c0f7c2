"""Input validation helpers shared by the public entry points."""

import numpy as np

from .exceptions import NonHermitianInput

HERMITIAN_RTOL = 1e-12


def as_square_matrix(m, name="matrix"):
    """Return ``m`` as a complex 2-D square array, raising ``ValueError`` otherwise."""
    arr = np.asarray(m, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 1:
        raise ValueError(f"{name} must be a non-empty square matrix, got shape {arr.shape}")
    return arr


def check_hermitian(m, name="matrix", rtol=HERMITIAN_RTOL):
    """Validate Hermiticity to ``rtol`` relative and return the symmetrized matrix.

    The check is ``||M - M*|| <= rtol * ||M||`` in operator norm; a zero
    matrix passes.
    """
    arr = as_square_matrix(m, name)
    scale = np.linalg.norm(arr, 2)
    if np.linalg.norm(arr - arr.conj().T, 2) > rtol * max(scale, np.finfo(float).tiny):
        if scale > 0:
            raise NonHermitianInput(f"{name} is not Hermitian to relative tolerance {rtol:g}")
    return 0.5 * (arr + arr.conj().T)


def check_positive(value, name):
    value = float(value)
    if not np.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be a positive finite number, got {value!r}")
    return value


def operator_norm(m):
    """Largest singular value."""
    return float(np.linalg.norm(np.asarray(m), 2))
