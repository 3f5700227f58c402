from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional

import numpy as np
import scipy.linalg

from config import config
import errors

if TYPE_CHECKING:
    import assembly

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Spectrum:
    """Ascending discrete eigenvalues with optional M-orthonormal eigenvectors"""
    eigenvalues: np.ndarray
    eigenvectors: Optional[np.ndarray] = None  # columns aligned with eigenvalues
    mass: Optional[np.ndarray] = None           # M used for the normalization
    multi_indices: Optional[np.ndarray] = None  # 1-based 1D mode tuple per eigenvalue (tensor spectra)

    @property
    def count(self) -> int:
        return int(self.eigenvalues.size)


def _band_matvec(band: np.ndarray, x: np.ndarray) -> np.ndarray:
    n = band.shape[1]
    y = band[0][:, None] * x
    for d in range(1, band.shape[0]):
        sub = band[d, :n - d][:, None]
        y[d:] += sub * x[:n - d]
        y[:n - d] += sub * x[d:]
    return y


def _cholesky_lower(ops: assembly.OperatorPair) -> np.ndarray:
    """Dense lower-triangular factor L of M = L Lᵀ from the banded factorization"""
    try:
        factor = scipy.linalg.cholesky_banded(ops.mass_band, lower=True)
    except np.linalg.LinAlgError as e:
        raise errors.DefinitenessError(f"mass matrix is not positive definite: {e}") from e
    n = factor.shape[1]
    L = np.zeros((n, n))
    for d in range(factor.shape[0]):
        idx = np.arange(n - d)
        L[idx + d, idx] = factor[d, :n - d]
    return L


def solve_generalized(ops: assembly.OperatorPair, vectors: bool = True, refine: bool = True) -> Spectrum:
    """
    Solve K U = λ M U for all eigenpairs.

    M = L Lᵀ is factored in band storage, the symmetric matrix L⁻¹ K L⁻ᵀ is
    diagonalized, and U = L⁻ᵀ Y is M-orthonormal by construction.

    Args:
        ops: Assembled operators
        vectors: Keep the eigenvectors in the result
        refine: Replace every eigenvalue by the Rayleigh quotient of its
            eigenvector, computed with the banded operators. Dense eigenvalues
            carry absolute errors of order eps·λ_max; the quotient brings low
            modes back to relative accuracy near eps.

    Returns:
        Spectrum sorted in ascending order
    """
    L = _cholesky_lower(ops)
    K = ops.K
    X = scipy.linalg.solve_triangular(L, K, lower=True)
    C = scipy.linalg.solve_triangular(L, X.T, lower=True)
    C = 0.5 * (C + C.T)

    need_vectors = vectors or refine
    if need_vectors:
        values, Y = scipy.linalg.eigh(C)
        U = scipy.linalg.solve_triangular(L.T, Y, lower=False)
    else:
        values = scipy.linalg.eigh(C, eigvals_only=True)
        U = None

    if refine:
        KU = _band_matvec(ops.stiffness_band, U)
        MU = _band_matvec(ops.mass_band, U)
        mass_norms = np.einsum('ij,ij->j', U, MU)
        values = np.einsum('ij,ij->j', U, KU) / mass_norms
        U = U / np.sqrt(mass_norms)
        order = np.argsort(values, kind='stable')
        values, U = values[order], U[:, order]

    if not np.all(np.isfinite(values)):
        raise errors.NumericalError("eigenvalue computation produced non-finite values")

    return Spectrum(
        eigenvalues=values,
        eigenvectors=U if vectors else None,
        mass=ops.M if vectors else None,
    )


def solve_tensor(operator: assembly.KroneckerOperator, vectors: bool = False) -> Spectrum:
    """
    Spectrum of a Kronecker-composed operator from one 1D solve.

    The d-dimensional eigenvalues are all sums of d one-dimensional eigenvalues
    and the eigenvectors are Kronecker products of 1D eigenvectors.
    """
    factors = operator.factors
    first = factors[0]
    for f in factors[1:]:
        if f.size != first.size or f.bc != first.bc:
            raise ValueError("all Kronecker factors must have the same size and boundary condition")
        if not (np.array_equal(f.stiffness_band, first.stiffness_band)
                and np.array_equal(f.mass_band, first.mass_band)):
            raise ValueError("solve_tensor needs identical 1D factors in every dimension")

    base = solve_generalized(first, vectors=vectors)
    lam = base.eigenvalues
    dims = len(factors)
    n = lam.size

    sums = lam
    for _ in range(1, dims):
        sums = np.add.outer(sums, lam)
    sums = sums.reshape(-1)
    order = np.argsort(sums, kind='stable')
    multi = np.stack(np.unravel_index(order, (n,) * dims), axis=1) + 1

    U = None
    M = None
    if vectors:
        if n ** dims > config.DENSE_DOF_CAP:
            raise ValueError(f"{n ** dims} unknowns exceed the dense cap of {config.DENSE_DOF_CAP}")
        columns = []
        for idx in multi - 1:
            col = base.eigenvectors[:, idx[0]]
            for k in idx[1:]:
                col = np.kron(col, base.eigenvectors[:, k])
            columns.append(col)
        U = np.stack(columns, axis=1)
        M = base.mass
        for _ in range(1, dims):
            M = np.kron(M, base.mass)

    return Spectrum(eigenvalues=sums[order], eigenvectors=U, mass=M, multi_indices=multi)
