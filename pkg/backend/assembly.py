import dataclasses
import enum
import itertools
import logging
from dataclasses import dataclass
from typing import Callable, Optional, Tuple, Union

import numpy as np

from config import config
import eigen
import errors
import quadrature
import splines

logger = logging.getLogger(__name__)

Coefficient = Union[float, Callable[[float], float]]


class BoundaryCondition(str, enum.Enum):
    DIRICHLET = "dirichlet"
    NEUMANN = "neumann"


@dataclass(frozen=True)
class QuadratureTriple:
    """Rules for the ∇w·∇v term, the γwv term and the mass form"""
    grad_rule: quadrature.AnyRule
    reaction_rule: quadrature.AnyRule
    mass_rule: quadrature.AnyRule

    def __post_init__(self):
        if quadrature.as_rule(self.reaction_rule) != quadrature.as_rule(self.mass_rule):
            raise ValueError("the reaction and mass terms must use the same quadrature rule")

    @classmethod
    def uniform(cls, rule: quadrature.AnyRule) -> 'QuadratureTriple':
        """Same rule for all three terms"""
        return cls(grad_rule=rule, reaction_rule=rule, mass_rule=rule)


def dense_to_band(matrix: np.ndarray, bandwidth: int) -> np.ndarray:
    """Lower band storage: band[d, j] = A[j+d, j]"""
    n = matrix.shape[0]
    band = np.zeros((bandwidth + 1, n))
    for d in range(bandwidth + 1):
        band[d, :n - d] = np.diagonal(matrix, -d)
    return band


def band_to_dense(band: np.ndarray) -> np.ndarray:
    n = band.shape[1]
    dense = np.zeros((n, n))
    for d in range(band.shape[0]):
        if d == 0:
            dense[np.arange(n), np.arange(n)] = band[0]
        else:
            idx = np.arange(n - d)
            dense[idx + d, idx] = band[d, :n - d]
            dense[idx, idx + d] = band[d, :n - d]
    return dense


def _bandwidth_of(matrix: np.ndarray) -> int:
    rows, cols = np.nonzero(matrix)
    return int(np.max(np.abs(rows - cols))) if rows.size else 0


@dataclass(frozen=True)
class OperatorPair:
    """Symmetric stiffness K and mass M in lower band storage"""
    stiffness_band: np.ndarray
    mass_band: np.ndarray
    bc: BoundaryCondition
    dim: int = 1

    @property
    def size(self) -> int:
        return self.stiffness_band.shape[1]

    @property
    def bandwidth(self) -> int:
        return self.stiffness_band.shape[0] - 1

    @property
    def K(self) -> np.ndarray:
        return band_to_dense(self.stiffness_band)

    @property
    def M(self) -> np.ndarray:
        return band_to_dense(self.mass_band)

    @classmethod
    def from_dense(cls, K, M, bc: BoundaryCondition = BoundaryCondition.DIRICHLET, dim: int = 1) -> 'OperatorPair':
        K = np.asarray(K, dtype=float)
        M = np.asarray(M, dtype=float)
        if K.shape != M.shape or K.shape[0] != K.shape[1]:
            raise ValueError(f"K {K.shape} and M {M.shape} must be square and of equal size")
        width = max(_bandwidth_of(K), _bandwidth_of(M))
        return cls(dense_to_band(K, width), dense_to_band(M, width), BoundaryCondition(bc), dim)


@dataclass(frozen=True)
class KroneckerOperator:
    """
    d-dimensional operators as Kronecker compositions of one 1D pair.

    K_dD = Σ_i M ⊗ .. ⊗ K_i ⊗ .. ⊗ M and M_dD = M ⊗ .. ⊗ M; nothing is
    materialized until materialize() is called.
    """
    factors: Tuple[OperatorPair, ...]
    gamma_split: Tuple[float, ...]

    @property
    def dims(self) -> int:
        return len(self.factors)

    @property
    def gamma_total(self) -> float:
        return float(sum(self.gamma_split))

    @property
    def size(self) -> int:
        return int(np.prod([f.size for f in self.factors]))

    def materialize(self, cap: Optional[int] = None) -> OperatorPair:
        """Dense d-dimensional K and M, refused above `cap` unknowns"""
        cap = config.DENSE_DOF_CAP if cap is None else cap
        if self.size > cap:
            logger.warning(f"refusing to materialize {self.size} unknowns (cap {cap})")
            raise ValueError(
                f"tensor operator has {self.size} unknowns, above the dense cap of {cap}"
            )
        Ks = [f.K for f in self.factors]
        Ms = [f.M for f in self.factors]
        M = Ms[0]
        for m in Ms[1:]:
            M = np.kron(M, m)
        K = np.zeros_like(M)
        for i in range(self.dims):
            term = Ks[0] if i == 0 else Ms[0]
            for j in range(1, self.dims):
                term = np.kron(term, Ks[j] if j == i else Ms[j])
            K += term
        return OperatorPair.from_dense(K, M, self.factors[0].bc, dim=self.dims)


def _is_constant(gamma: Coefficient) -> bool:
    return not callable(gamma)


def _safe_call(gamma: Callable[[float], float], x: float) -> float:
    try:
        with np.errstate(divide='ignore', invalid='ignore', over='ignore'):
            return float(gamma(x))
    except (ZeroDivisionError, OverflowError):
        return float('inf')


def _coefficient_at(gamma: Coefficient, nodes: np.ndarray, element: int) -> np.ndarray:
    if _is_constant(gamma):
        values = np.full(nodes.shape, float(gamma))
    else:
        values = np.array([_safe_call(gamma, float(x)) for x in nodes], dtype=float)
    bad = ~np.isfinite(values)
    if np.any(bad):
        q = int(np.argmax(bad))
        raise errors.SingularCoefficientError(node=float(nodes[q]), element=element, value=float(values[q]))
    return values


def _element_tables(spec: splines.BasisSpec, element: splines.Element, rule: quadrature.AnyRule):
    """Mapped weights, basis values and derivatives at the nodes of one element"""
    nodes, weights = quadrature.as_rule(rule).mapped(*element.interval)
    p = spec.degree
    values = np.empty((nodes.size, p + 1))
    derivs = np.empty((nodes.size, p + 1))
    span = element.index + p
    for q, x in enumerate(nodes):
        _, values[q], derivs[q] = splines.local_basis(spec, x, span=span)
    return nodes, weights, values, derivs


def _dirichlet_restrict(matrix: np.ndarray) -> np.ndarray:
    return matrix[1:-1, 1:-1]


def assemble_1d(spec: splines.BasisSpec, gamma: Coefficient, rules: QuadratureTriple,
                bc: BoundaryCondition) -> OperatorPair:
    """
    Assemble K and M for -u'' + γu under the three-rule quadrature split.

    Args:
        spec: Spline space
        gamma: Reaction coefficient, a constant or a function of x evaluated at the
            mapped nodes of the reaction rule
        rules: Quadrature rules for the gradient, reaction and mass terms
        bc: Dirichlet removes the first and last basis functions (clamped splines
            interpolate the end values); Neumann keeps every function

    Returns:
        OperatorPair in band storage with bandwidth p
    """
    bc = BoundaryCondition(bc)
    p = spec.degree
    n = spec.num_basis
    K = np.zeros((n, n))
    M = np.zeros((n, n))
    # Elements are merged in index order so the result is bit-reproducible
    for element in splines.elements_of(spec):
        first = element.index
        _, w_grad, _, d_grad = _element_tables(spec, element, rules.grad_rule)
        nodes, w_mass, v_mass, _ = _element_tables(spec, element, rules.mass_rule)
        g = _coefficient_at(gamma, nodes, element.index)
        local_mass = v_mass.T @ (w_mass[:, None] * v_mass)
        local_stiff = d_grad.T @ (w_grad[:, None] * d_grad)
        local_stiff += v_mass.T @ ((w_mass * g)[:, None] * v_mass)
        K[first:first + p + 1, first:first + p + 1] += local_stiff
        M[first:first + p + 1, first:first + p + 1] += local_mass

    if bc is BoundaryCondition.DIRICHLET:
        if n <= 2:
            raise ValueError("Dirichlet conditions leave no degrees of freedom on this mesh")
        K, M = _dirichlet_restrict(K), _dirichlet_restrict(M)
    # symmetric by construction; remove round-off asymmetry from the element sums
    K = 0.5 * (K + K.T)
    M = 0.5 * (M + M.T)
    return OperatorPair(dense_to_band(K, p), dense_to_band(M, p), bc, dim=1)


def assemble_tensor(spec: splines.BasisSpec, gamma_total: float, dims: int, rules: QuadratureTriple,
                    bc: BoundaryCondition) -> KroneckerOperator:
    """Kronecker-composed operators on [a,b]^dims with γ split evenly over dimensions"""
    if not _is_constant(gamma_total):
        raise ValueError("tensor-product assembly needs a constant coefficient")
    if dims not in (1, 2, 3):
        raise ValueError(f"dims must be 1, 2 or 3, got {dims}")
    gamma_1d = float(gamma_total) / dims
    factor = assemble_1d(spec, gamma_1d, rules, bc)
    return KroneckerOperator(factors=(factor,) * dims, gamma_split=(gamma_1d,) * dims)


def assemble_direct(spec: splines.BasisSpec, gamma_total: float, dims: int, rules: QuadratureTriple,
                    bc: BoundaryCondition) -> OperatorPair:
    """
    Multi-dimensional assembly by an explicit loop over product elements.

    Uses tensor-product quadrature on every box element and never forms a
    Kronecker product; the tensor route must agree with it.
    """
    if not _is_constant(gamma_total):
        raise ValueError("direct tensor assembly needs a constant coefficient")
    bc = BoundaryCondition(bc)
    p = spec.degree
    n = spec.num_basis
    total = n ** dims
    if total > config.DENSE_DOF_CAP:
        raise ValueError(f"{total} unknowns exceed the dense cap of {config.DENSE_DOF_CAP}")

    elements = splines.elements_of(spec)
    grad_tables = [_element_tables(spec, e, rules.grad_rule) for e in elements]
    mass_tables = [_element_tables(spec, e, rules.mass_rule) for e in elements]
    K = np.zeros((total, total))
    M = np.zeros((total, total))
    local_shape = (p + 1,) * dims

    def tensor_values(tables, which):
        """Rows: tensor quadrature points; columns: local tensor basis functions"""
        weights = tables[0][1]
        for t in tables[1:]:
            weights = np.multiply.outer(weights, t[1])
        columns = [t[2] if k != which else t[3] for k, t in enumerate(tables)]
        values = columns[0]
        for c in columns[1:]:
            values = _outer_rows(values, c)
        return weights.reshape(-1), values

    for combo in itertools.product(range(len(elements)), repeat=dims):
        g_tabs = [grad_tables[e] for e in combo]
        m_tabs = [mass_tables[e] for e in combo]
        w_m, phi = tensor_values(m_tabs, which=-1)
        local_mass = phi.T @ (w_m[:, None] * phi)
        local_stiff = float(gamma_total) * local_mass
        for k in range(dims):
            w_g, dphi = tensor_values(g_tabs, which=k)
            local_stiff = local_stiff + dphi.T @ (w_g[:, None] * dphi)
        global_idx = np.ravel_multi_index(
            np.indices(local_shape).reshape(dims, -1) + np.array(combo)[:, None],
            (n,) * dims,
        )
        K[np.ix_(global_idx, global_idx)] += local_stiff
        M[np.ix_(global_idx, global_idx)] += local_mass

    if bc is BoundaryCondition.DIRICHLET:
        if n <= 2:
            raise ValueError("Dirichlet conditions leave no degrees of freedom on this mesh")
        interior = np.indices((n,) * dims).reshape(dims, -1)
        keep = np.all((interior > 0) & (interior < n - 1), axis=0)
        K = K[np.ix_(keep, keep)]
        M = M[np.ix_(keep, keep)]
    K = 0.5 * (K + K.T)
    M = 0.5 * (M + M.T)
    return OperatorPair.from_dense(K, M, bc, dim=dims)


def _outer_rows(left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """Row-wise Kronecker product: (Q1, A1) x (Q2, A2) -> (Q1*Q2, A1*A2)"""
    q1, a1 = left.shape
    q2, a2 = right.shape
    return np.einsum('qa,rb->qrab', left, right).reshape(q1 * q2, a1 * a2)


def shift_spectrum(spectrum: eigen.Spectrum, gamma: float) -> eigen.Spectrum:
    """λ_h = λ̂_h + γ for a spectrum computed with γ = 0; eigenvectors unchanged"""
    return dataclasses.replace(spectrum, eigenvalues=spectrum.eigenvalues + float(gamma))
