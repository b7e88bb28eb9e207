"""Dense symmetric linear algebra shared by the solvers and condition checks.

All routines take plain ``numpy`` arrays. Inputs are symmetrized on entry so
downstream code can rely on exact symmetry.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

# Relative eigenvalue floor for inverse square roots and solves.
EIGEN_FLOOR = 1e-10
# Absolute fallback when the natural scale is zero.
ABS_FLOOR = 1e-12


class LinalgError(ArithmeticError):
    """Raised when an eigen iteration fails or a matrix is not usable."""


class NearSingularError(LinalgError):
    """A matrix has an eigenvalue below the admissible floor.

    The offending eigenvalue is kept on ``eigenvalue`` so callers can report it.
    """

    def __init__(self, message: str, eigenvalue: float):
        super().__init__(message)
        self.eigenvalue = float(eigenvalue)


class EigenDecomposition(NamedTuple):
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        u, d = self.eigenvectors, self.eigenvalues
        return (u * d) @ u.T


def sym_matrix(m) -> np.ndarray:
    """Return ``m`` as a float64 square matrix, symmetrized as (m + m') / 2."""
    a = np.array(m, dtype=np.float64, copy=True)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise ValueError(f"expected a non-empty square matrix, got shape {a.shape}")
    return 0.5 * (a + a.T)


def eigen_sym(m) -> EigenDecomposition:
    """Spectral decomposition ``m = U diag(d) U'`` with ``d`` sorted descending.

    Ties keep the order in which LAPACK returned them, so the output is
    deterministic for a fixed input.
    """
    a = sym_matrix(m)
    try:
        w, u = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:
        raise LinalgError(
            f"eigendecomposition did not converge for a {a.shape[0]}x{a.shape[0]} matrix"
        ) from exc
    # eigh returns ascending order; flip to descending without disturbing ties
    order = np.argsort(-w, kind="stable")
    return EigenDecomposition(w[order], np.ascontiguousarray(u[:, order]))


def _floor(eigenvalues: np.ndarray) -> float:
    scale = float(np.max(np.abs(eigenvalues)))
    return EIGEN_FLOOR * scale if scale > 0 else ABS_FLOOR


def mat_power_half(m, exponent: float) -> np.ndarray:
    """Symmetric square root (``exponent=0.5``) or inverse square root (``-0.5``)."""
    if exponent not in (0.5, -0.5):
        raise ValueError("exponent must be +1/2 or -1/2")
    d, u = eigen_sym(m)
    if exponent < 0:
        floor = _floor(d)
        if d[-1] <= floor:
            raise NearSingularError(
                f"near-singular covariance: smallest eigenvalue {d[-1]:.3e} "
                f"below floor {floor:.3e}",
                d[-1],
            )
        scaled = d ** -0.5
    else:
        # round-off can push a PSD eigenvalue slightly negative
        tol = _floor(d)
        if d[-1] < -tol:
            raise NearSingularError(
                f"matrix is not positive semi-definite: smallest eigenvalue {d[-1]:.3e}",
                d[-1],
            )
        scaled = np.sqrt(np.clip(d, 0.0, None))
    out = (u * scaled) @ u.T
    return 0.5 * (out + out.T)


def lambda_max(m) -> float:
    """Largest eigenvalue of a symmetric matrix."""
    return float(eigen_sym(m).eigenvalues[0])


def solve_sym(m, rhs) -> np.ndarray:
    """Solve ``m x = rhs`` for a positive definite ``m`` via its eigendecomposition.

    ``rhs`` may be a vector or a matrix; the result has the same shape.
    """
    d, u = eigen_sym(m)
    floor = _floor(d)
    if d[-1] <= floor:
        raise NearSingularError(
            f"matrix is not positive definite above the floor: smallest eigenvalue "
            f"{d[-1]:.3e} (floor {floor:.3e})",
            d[-1],
        )
    b = np.asarray(rhs, dtype=np.float64)
    if b.shape[0] != d.shape[0]:
        raise ValueError(f"rhs has {b.shape[0]} rows, matrix has dimension {d.shape[0]}")
    coef = u.T @ b
    if coef.ndim == 1:
        coef = coef / d
    else:
        coef = coef / d[:, None]
    return u @ coef
