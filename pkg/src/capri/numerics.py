"""Dense symmetric linear algebra shared by the estimators.

All matrices are plain ``numpy`` arrays.  Inputs are symmetrized with
``(M + M.T) / 2`` before any spectral operation.
"""

import numpy as np
from scipy import linalg

from .errors import InvalidArgument, InvalidMatrix, NotPSD

EIG_FLOOR = 1e-10


def as_sym(m):
    """Validate a square finite matrix and return its symmetric part."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise InvalidMatrix(f"expected a non-empty square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidMatrix("matrix has non-finite entries")
    return 0.5 * (m + m.T)


def sym_eig(m):
    """Eigendecomposition of a symmetric matrix, eigenvalues descending.

    Returns ``(lam, V)`` with ``m == V @ diag(lam) @ V.T``.
    """
    lam, vec = np.linalg.eigh(as_sym(m))
    return lam[::-1].copy(), vec[:, ::-1].copy()


def clamp_spectrum(lam, floor):
    """Apply the PSD floor rule to an eigenvalue vector.

    Values below ``-10 * floor`` mean the matrix was never PSD and raise
    ``NotPSD``; everything else below ``floor`` is lifted to ``floor``.
    """
    if floor <= 0:
        raise InvalidArgument("floor must be positive")
    if lam.size and lam.min() < -10.0 * floor:
        raise NotPSD(f"eigenvalue {lam.min():.3e} below -10*floor ({floor:.1e})")
    return np.maximum(lam, floor)


def inv_sqrt_psd(m, floor=EIG_FLOOR):
    """Return ``V diag(max(lam, floor)**-0.5) V.T`` for symmetric PSD ``m``."""
    lam, vec = sym_eig(m)
    lam = clamp_spectrum(lam, floor)
    out = (vec / np.sqrt(lam)) @ vec.T
    return 0.5 * (out + out.T)


def solve_regularized(m, tau, rhs):
    """Solve ``(m + tau I) x = rhs`` for symmetric PSD ``m``."""
    m = np.asarray(m, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    if tau <= 0:
        raise InvalidArgument("tau must be positive")
    if m.ndim != 2 or m.shape[0] != m.shape[1] or rhs.shape[0] != m.shape[0]:
        raise InvalidArgument(f"dimension mismatch: {m.shape} vs {rhs.shape}")
    a = as_sym(m) + tau * np.eye(m.shape[0])
    try:
        return linalg.cho_solve(linalg.cho_factor(a), rhs)
    except linalg.LinAlgError:
        return np.linalg.solve(a, rhs)
