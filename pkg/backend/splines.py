from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

# Reference element used by element maps; quadrature tables live on [-1, 1]
REFERENCE_ELEMENT: Tuple[float, float] = (0.0, 1.0)


@dataclass(frozen=True)
class KnotVector:
    """Clamped uniform knot vector of a maximum-continuity spline space"""
    knots: Tuple[float, ...]
    degree: int

    def __post_init__(self):
        p = self.degree
        if p < 1:
            raise ValueError(f"degree must be at least 1, got {p}")
        knots = np.asarray(self.knots, dtype=float)
        if knots.size < 2 * (p + 1):
            raise ValueError("knot vector too short for the requested degree")
        if np.any(np.diff(knots) < 0):
            raise ValueError("knots must be nondecreasing")
        a, b = knots[0], knots[-1]
        if not b > a:
            raise ValueError(f"empty parameter interval [{a}, {b}]")
        if np.any(knots[: p + 1] != a) or np.any(knots[-(p + 1):] != b):
            raise ValueError(f"end knots must be repeated exactly {p + 1} times")
        breaks = knots[p:-p]
        spacing = np.diff(breaks)
        if np.any(spacing <= 0):
            raise ValueError("interior knots must be simple")
        h = (b - a) / spacing.size
        if np.max(np.abs(spacing - h)) > 1e-10 * (b - a):
            raise ValueError("only uniformly spaced knots are supported")

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.knots, dtype=float)

    @property
    def a(self) -> float:
        return self.knots[0]

    @property
    def b(self) -> float:
        return self.knots[-1]

    @property
    def n_elements(self) -> int:
        return len(self.knots) - 2 * self.degree - 1

    @property
    def h(self) -> float:
        return (self.b - self.a) / self.n_elements

    @property
    def breakpoints(self) -> np.ndarray:
        return self.array[self.degree:len(self.knots) - self.degree]


@dataclass(frozen=True)
class BasisSpec:
    """Degree-p, C^{p-1} B-spline space on an interval"""
    knot_vector: KnotVector

    @property
    def degree(self) -> int:
        return self.knot_vector.degree

    @property
    def num_basis(self) -> int:
        return len(self.knot_vector.knots) - self.degree - 1

    @property
    def n_elements(self) -> int:
        return self.knot_vector.n_elements

    @property
    def interval(self) -> Tuple[float, float]:
        return self.knot_vector.a, self.knot_vector.b

    @property
    def h(self) -> float:
        return self.knot_vector.h

    @classmethod
    def uniform(cls, a: float, b: float, n_elements: int, p: int) -> 'BasisSpec':
        """Shortcut for a space on make_uniform_open_knots(a, b, n_elements, p)"""
        return cls(make_uniform_open_knots(a, b, n_elements, p))


@dataclass(frozen=True)
class Element:
    """Knot span K = σ(K̂) with its affine map from the reference element"""
    index: int
    interval: Tuple[float, float]
    jacobian: float
    reference: Tuple[float, float] = REFERENCE_ELEMENT

    def map_from_reference(self, xhat):
        """σ: reference coordinates to physical coordinates"""
        return self.interval[0] + (np.asarray(xhat, dtype=float) - self.reference[0]) * self.jacobian


def make_uniform_open_knots(a: float, b: float, n_elements: int, p: int) -> KnotVector:
    """
    Build the clamped uniform knot vector of a maximum-continuity space.

    Args:
        a: Left end of the interval
        b: Right end of the interval
        n_elements: Number of elements (distinct knot spans)
        p: Polynomial degree

    Returns:
        KnotVector with n_elements + 1 breakpoints; the space has n_elements + p functions
    """
    if n_elements < 1:
        raise ValueError(f"need at least one element, got {n_elements}")
    if not b > a:
        raise ValueError(f"interval [{a}, {b}] is empty")
    if p < 1:
        raise ValueError(f"degree must be at least 1, got {p}")
    breaks = np.linspace(a, b, n_elements + 1)
    knots = [float(a)] * p + [float(x) for x in breaks] + [float(b)] * p
    return KnotVector(knots=tuple(knots), degree=p)


def find_span(spec: BasisSpec, x: float) -> int:
    """Index i of the knot span [x_i, x_{i+1}) holding x; the last span is closed at b"""
    kv = spec.knot_vector
    span = int(np.searchsorted(kv.array, x, side='right')) - 1
    return min(max(span, spec.degree), spec.num_basis - 1)


def _check_point(spec: BasisSpec, x: float):
    a, b = spec.interval
    if not (a <= x <= b):
        raise ValueError(f"x={x} lies outside [{a}, {b}]")


def _basis_table(knots: np.ndarray, p: int, span: int, x: float) -> List[np.ndarray]:
    """
    Cox-de Boor triangle for the functions nonzero on `span`.

    Entry d of the result holds the d+1 degree-d values of functions
    span-d .. span at x. Zero denominators follow the 0/0 := 0 convention.
    """
    table = [np.array([1.0])]
    left = np.zeros(p + 1)
    right = np.zeros(p + 1)
    current = np.array([1.0])
    for j in range(1, p + 1):
        left[j] = x - knots[span + 1 - j]
        right[j] = knots[span + j] - x
        nxt = np.zeros(j + 1)
        saved = 0.0
        for r in range(j):
            denom = right[r + 1] + left[j - r]
            temp = current[r] / denom if denom != 0.0 else 0.0
            nxt[r] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        nxt[j] = saved
        current = nxt
        table.append(current)
    return table


def local_basis(spec: BasisSpec, x: float, span: Optional[int] = None) -> Tuple[int, np.ndarray, np.ndarray]:
    """
    Values and first derivatives of the p+1 functions supported at x.

    Passing `span` evaluates the polynomial piece of that knot span, which
    element loops need at nodes sitting on the element end points.

    Returns:
        Tuple of (index of the first function, values, derivatives)
    """
    p = spec.degree
    knots = spec.knot_vector.array
    if span is None:
        span = find_span(spec, x)
    table = _basis_table(knots, p, span, x)
    values = table[p]
    lower = table[p - 1]
    first = span - p
    derivs = np.zeros(p + 1)
    # N'_{i,p} = p N_{i,p-1}/(x_{i+p}-x_i) - p N_{i+1,p-1}/(x_{i+p+1}-x_{i+1})
    for k in range(p + 1):
        i = first + k
        if k >= 1:
            denom = knots[i + p] - knots[i]
            if denom != 0.0:
                derivs[k] += p * lower[k - 1] / denom
        if k <= p - 1:
            denom = knots[i + p + 1] - knots[i + 1]
            if denom != 0.0:
                derivs[k] -= p * lower[k] / denom
    return first, values, derivs


def eval_basis(spec: BasisSpec, x: float) -> List[Tuple[int, float]]:
    """Basis functions with support containing x, as (basis_index, value) pairs"""
    _check_point(spec, x)
    first, values, _ = local_basis(spec, x)
    return [(first + k, float(v)) for k, v in enumerate(values)]


def eval_basis_deriv(spec: BasisSpec, x: float) -> List[Tuple[int, float]]:
    """First derivatives of the basis functions supported at x"""
    _check_point(spec, x)
    first, _, derivs = local_basis(spec, x)
    return [(first + k, float(d)) for k, d in enumerate(derivs)]


def elements_of(spec: BasisSpec, reference: Tuple[float, float] = REFERENCE_ELEMENT) -> List[Element]:
    """Elements of the space with their affine maps from `reference`"""
    breaks = spec.knot_vector.breakpoints
    ref_length = reference[1] - reference[0]
    return [
        Element(
            index=e,
            interval=(float(breaks[e]), float(breaks[e + 1])),
            jacobian=float(breaks[e + 1] - breaks[e]) / ref_length,
            reference=reference,
        )
        for e in range(spec.n_elements)
    ]


def evaluate_expansion(spec: BasisSpec, coefficients: Sequence[float], xs) -> np.ndarray:
    """Evaluate u(x) = Σ_j c_j φ_j(x) at every point of xs"""
    coefficients = np.asarray(coefficients, dtype=float)
    if coefficients.size != spec.num_basis:
        raise ValueError(
            f"expected {spec.num_basis} coefficients, got {coefficients.size}"
        )
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    out = np.empty(xs.size)
    for q, x in enumerate(xs):
        _check_point(spec, x)
        first, values, _ = local_basis(spec, x)
        out[q] = values @ coefficients[first:first + values.size]
    return out


def cox_de_boor(knots: Sequence[float], j: int, p: int, x: float) -> float:
    """
    Textbook recursive B-spline φ_p^j(x), 0/0 := 0.

    Slow; kept as the reference the fast triangle in local_basis is checked against.
    The degree-0 functions are indicators of [x_j, x_{j+1}).
    """
    if p == 0:
        return 1.0 if knots[j] <= x < knots[j + 1] else 0.0
    left_den = knots[j + p] - knots[j]
    right_den = knots[j + p + 1] - knots[j + 1]
    left = 0.0 if left_den == 0 else (x - knots[j]) / left_den * cox_de_boor(knots, j, p - 1, x)
    right = 0.0 if right_den == 0 else (knots[j + p + 1] - x) / right_den * cox_de_boor(knots, j + 1, p - 1, x)
    return left + right
