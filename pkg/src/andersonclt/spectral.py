"""Symmetric eigendecomposition and spectral functional calculus.

All statistics in this package consume the full spectrum; everything here is
a direct dense (or, for chains, dense-banded) LAPACK solve.  Diagonal matrix
elements <delta_n, f(H) delta_n> come from the eigenvector overlaps, traces
from the eigenvalues alone.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal, eigvalsh_tridiagonal

from .lattice import Hamiltonian
from .testfuncs import derivative_of, function_of

__all__ = [
    "EigenDecomposition",
    "EigensolveError",
    "eig_sym",
    "eigenvalues_sym",
    "spectral_diagonal",
    "trace_function",
    "hellmann_feynman_check",
    "HellmannFeynmanResult",
]

DEGENERACY_GAP = 1e-10


class EigensolveError(RuntimeError):
    """Eigensolver failure, annotated with the matrix provenance."""


@dataclass(frozen=True)
class EigenDecomposition:
    """Ascending eigenvalues with aligned orthonormal eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    source_dim: int


def _matrix_and_meta(H):
    if isinstance(H, Hamiltonian):
        return H.matrix, H
    return np.asarray(H, dtype=np.float64), None


def eig_sym(H) -> EigenDecomposition:
    """Full symmetric eigendecomposition of a Hamiltonian or raw matrix."""
    matrix, meta = _matrix_and_meta(H)
    try:
        if meta is not None and meta.is_chain and len(matrix) > 1:
            diag, off = meta.tridiagonal()
            w, v = eigh_tridiagonal(diag, off)
        else:
            w, v = np.linalg.eigh(matrix)
    except (np.linalg.LinAlgError, ValueError) as exc:
        fingerprint = meta.provenance if meta is not None else f"dim={len(matrix)}"
        raise EigensolveError(
            f"symmetric eigensolve failed (matrix fingerprint: {fingerprint})"
        ) from exc
    return EigenDecomposition(w, v, len(matrix))


def eigenvalues_sym(H) -> np.ndarray:
    """Ascending eigenvalues only (faster than eig_sym when vectors are unused)."""
    matrix, meta = _matrix_and_meta(H)
    try:
        if meta is not None and meta.is_chain and len(matrix) > 1:
            diag, off = meta.tridiagonal()
            return eigvalsh_tridiagonal(diag, off, lapack_driver="sterf")
        return np.linalg.eigvalsh(matrix)
    except (np.linalg.LinAlgError, ValueError) as exc:
        fingerprint = meta.provenance if meta is not None else f"dim={len(matrix)}"
        raise EigensolveError(
            f"symmetric eigensolve failed (matrix fingerprint: {fingerprint})"
        ) from exc


def spectral_diagonal(dec: EigenDecomposition, f, site_index: int) -> float:
    """<delta_n, f(H) delta_n> = sum_k f(E_k) |psi_k(n)|^2."""
    if not 0 <= site_index < dec.source_dim:
        raise IndexError(f"site index {site_index} out of range {dec.source_dim}")
    weights = np.square(dec.eigenvectors[site_index, :])
    return float(weights @ np.asarray(function_of(f)(dec.eigenvalues), dtype=np.float64))


def trace_function(dec: EigenDecomposition, f) -> float:
    """Tr f(H) = sum_k f(E_k)."""
    return float(np.sum(np.asarray(function_of(f)(dec.eigenvalues), dtype=np.float64)))


@dataclass(frozen=True)
class HellmannFeynmanResult:
    formula: float
    finite_diff: float
    abs_err: float


def hellmann_feynman_check(H, f, site_index: int, h: float) -> HellmannFeynmanResult:
    """Compare the trace-derivative formula with a central difference.

    The derivative of Tr f(H + lambda P_n) at lambda = 0, where P_n projects
    onto the basis vector at ``site_index``, equals <delta_n, f'(H) delta_n>.
    The finite difference [Tr f(H + h P_n) - Tr f(H - h P_n)] / (2h) agrees to
    O(h^2) for three-times differentiable f.
    """
    if h <= 0:
        raise ValueError(f"step must be positive, got {h}")
    matrix, meta = _matrix_and_meta(H)
    dec = eig_sym(H)
    gaps = np.diff(dec.eigenvalues)
    if len(gaps) and float(np.min(gaps)) < DEGENERACY_GAP:
        warnings.warn(
            "near-degenerate spectrum (gap < 1e-10); the trace-derivative "
            "formula sums over the full eigenbasis and remains valid",
            stacklevel=2,
        )
    formula = spectral_diagonal(dec, derivative_of(f), site_index)

    fn = function_of(f)
    shifted = matrix.copy()
    shifted[site_index, site_index] = matrix[site_index, site_index] + h
    plus = float(np.sum(fn(np.linalg.eigvalsh(shifted))))
    shifted[site_index, site_index] = matrix[site_index, site_index] - h
    minus = float(np.sum(fn(np.linalg.eigvalsh(shifted))))
    finite_diff = (plus - minus) / (2.0 * h)
    return HellmannFeynmanResult(formula, finite_diff, abs(formula - finite_diff))
