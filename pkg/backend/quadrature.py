import enum
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple, Union

import numpy as np

from config import config
import errors

logger = logging.getLogger(__name__)

# Nodes closer than this are merged when two rules are blended
_NODE_MERGE_TOL = 1e-14


class RuleFamily(str, enum.Enum):
    GAUSS = "gauss"
    LOBATTO = "lobatto"
    BLENDED = "blended"
    CUSTOM = "custom"


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and weights on the reference interval [-1, 1]"""
    nodes: Tuple[float, ...]
    weights: Tuple[float, ...]
    exactness_degree: int
    family: RuleFamily = RuleFamily.CUSTOM
    label: str = ""

    def __post_init__(self):
        if len(self.nodes) != len(self.weights):
            raise ValueError("nodes and weights must have the same length")
        if len(self.nodes) == 0:
            raise ValueError("a quadrature rule needs at least one node")

    @property
    def size(self) -> int:
        return len(self.nodes)

    def mapped(self, c: float, d: float) -> Tuple[np.ndarray, np.ndarray]:
        """Nodes and weights carried to [c, d] by the affine map (det J = (d-c)/2)"""
        half = 0.5 * (d - c)
        nodes = 0.5 * (c + d) + half * np.asarray(self.nodes)
        return nodes, half * np.asarray(self.weights)


@dataclass(frozen=True)
class BlendedRule:
    """
    Q_τ = τ·rule_a + (1-τ)·rule_b.

    The blend is stored eagerly as one rule over the union of both node sets
    with pre-scaled weights, so integration and assembly never see the pair.
    """
    rule_a: QuadratureRule
    rule_b: QuadratureRule
    tau: float
    rule: QuadratureRule = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "rule", _merge(self.rule_a, self.rule_b, self.tau))

    @property
    def nodes(self) -> Tuple[float, ...]:
        return self.rule.nodes

    @property
    def weights(self) -> Tuple[float, ...]:
        return self.rule.weights

    @property
    def exactness_degree(self) -> int:
        return self.rule.exactness_degree

    @property
    def family(self) -> RuleFamily:
        return RuleFamily.BLENDED

    @property
    def label(self) -> str:
        return self.rule.label

    def mapped(self, c: float, d: float) -> Tuple[np.ndarray, np.ndarray]:
        return self.rule.mapped(c, d)


AnyRule = Union[QuadratureRule, BlendedRule]


def as_rule(rule: AnyRule) -> QuadratureRule:
    """Plain rule behind a QuadratureRule or a BlendedRule"""
    return rule.rule if isinstance(rule, BlendedRule) else rule


def _format_tau(tau: float) -> str:
    return f"{tau:.6g}"


def _merge(rule_a: QuadratureRule, rule_b: QuadratureRule, tau: float) -> QuadratureRule:
    nodes = np.concatenate([rule_a.nodes, rule_b.nodes])
    weights = np.concatenate([tau * np.asarray(rule_a.weights), (1.0 - tau) * np.asarray(rule_b.weights)])
    order = np.argsort(nodes, kind="stable")
    nodes, weights = nodes[order], weights[order]

    merged_nodes, merged_weights = [], []
    for x, w in zip(nodes, weights):
        if merged_nodes and abs(x - merged_nodes[-1]) <= _NODE_MERGE_TOL:
            merged_weights[-1] += w
        else:
            merged_nodes.append(float(x))
            merged_weights.append(float(w))

    # τ = 0 or 1 leaves exactly-zero weights; dropping them keeps singular
    # coefficients from being sampled at nodes that do not contribute
    kept = [(x, w) for x, w in zip(merged_nodes, merged_weights) if w != 0.0]
    return QuadratureRule(
        nodes=tuple(x for x, _ in kept),
        weights=tuple(w for _, w in kept),
        exactness_degree=min(rule_a.exactness_degree, rule_b.exactness_degree),
        family=RuleFamily.BLENDED,
        label=f"Q({rule_a.label},{rule_b.label};tau={_format_tau(tau)})",
    )


def _legendre(n: int, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """P_n(x) and P_{n-1}(x) by the three-term recurrence"""
    p_prev = np.ones_like(x)
    if n == 0:
        return p_prev, np.zeros_like(x)
    p = x.copy()
    for k in range(2, n + 1):
        p_prev, p = p, ((2 * k - 1) * x * p - (k - 1) * p_prev) / k
    return p, p_prev


def _newton(update: Callable[[np.ndarray], np.ndarray], x: np.ndarray, what: str) -> np.ndarray:
    dx = np.full_like(x, np.inf)
    for _ in range(config.NEWTON_MAX_ITER):
        dx = update(x)
        x = x - dx
        if np.max(np.abs(dx)) <= config.NEWTON_TOL:
            return x
    # Round-off can keep the last correction just above NEWTON_TOL
    if np.max(np.abs(dx)) <= 1e-12:
        return x
    raise errors.NumericalError(f"Newton iteration for the {what} nodes did not converge")


def gauss_legendre(m: int) -> QuadratureRule:
    """
    m-point Gauss-Legendre rule G_m, exact up to degree 2m-1.

    Nodes are the roots of P_m, found by Newton iteration from Chebyshev
    initial guesses; weights are 2 / ((1-x²) P'_m(x)²).
    """
    if m < 1:
        raise ValueError(f"Gauss-Legendre rules need m >= 1, got {m}")

    def update(x):
        p, p_prev = _legendre(m, x)
        dp = m * (x * p - p_prev) / (x * x - 1.0)
        return p / dp

    x0 = -np.cos(np.pi * (np.arange(m) + 0.75) / (m + 0.5))
    x = _newton(update, x0, f"G{m}")
    x = np.sort(x)
    x = 0.5 * (x - x[::-1])  # exact symmetry
    p, p_prev = _legendre(m, x)
    dp = m * (x * p - p_prev) / (x * x - 1.0)
    weights = 2.0 / ((1.0 - x * x) * dp * dp)
    return QuadratureRule(
        nodes=tuple(float(v) for v in x),
        weights=tuple(float(w) for w in 0.5 * (weights + weights[::-1])),
        exactness_degree=2 * m - 1,
        family=RuleFamily.GAUSS,
        label=f"G{m}",
    )


def gauss_lobatto(m: int) -> QuadratureRule:
    """
    m-point Gauss-Lobatto rule L_m, exact up to degree 2m-3.

    Nodes are ±1 and the roots of P'_{m-1}; weights are 2 / (m(m-1) P_{m-1}(x)²).
    """
    if m < 2:
        raise ValueError(f"Gauss-Lobatto rules need m >= 2, got {m}")
    n = m - 1

    def update(x):
        p, p_prev = _legendre(n, x)
        return (x * p - p_prev) / ((n + 1) * p)

    # Chebyshev-Gauss-Lobatto nodes as the first guess; ±1 are fixed points
    x0 = -np.cos(np.pi * np.arange(m) / n)
    x = _newton(update, x0, f"L{m}")
    x = np.sort(x)
    x = 0.5 * (x - x[::-1])
    x[0], x[-1] = -1.0, 1.0
    p, _ = _legendre(n, x)
    weights = 2.0 / (m * n * p * p)
    return QuadratureRule(
        nodes=tuple(float(v) for v in x),
        weights=tuple(float(w) for w in 0.5 * (weights + weights[::-1])),
        exactness_degree=2 * m - 3,
        family=RuleFamily.LOBATTO,
        label=f"L{m}",
    )


def blend(rule_a: AnyRule, rule_b: AnyRule, tau: float) -> BlendedRule:
    """Q_τ = τ·rule_a + (1-τ)·rule_b; τ may lie outside [0, 1]"""
    return BlendedRule(rule_a=as_rule(rule_a), rule_b=as_rule(rule_b), tau=float(tau))


def optimal_blend(p: int) -> BlendedRule:
    """
    Gauss-Lobatto blend cancelling the Λ^{2p} eigenvalue error term.

    τ is the weight of the Gauss rule. p=2 uses τ=1/3 on (G3, L3), i.e. the
    Lobatto rule weighted 2:1; p=3 uses τ=-3/2 on (G4, L4) and p=1 uses the
    configured P1_OPTIMAL_TAU on (G2, L2).
    """
    if p == 1:
        tau = config.P1_OPTIMAL_TAU
    elif p == 2:
        tau = 1.0 / 3.0
    elif p == 3:
        tau = -1.5
    else:
        raise errors.NoBuiltinOptimumError(
            f"no built-in optimal blending for degree {p}; "
            f"use blend(gauss_legendre({p + 1}), gauss_lobatto({p + 1}), tau) with an explicit tau"
        )
    return blend(gauss_legendre(p + 1), gauss_lobatto(p + 1), tau)


def gauss_gauss_blend(p: int, tau: float) -> BlendedRule:
    """τ·G_{p+1} + (1-τ)·G_p; avoids the element end points, unlike Lobatto rules"""
    return blend(gauss_legendre(p + 1), gauss_legendre(p), tau)


def select_rule(kind: str, p: int, points: Optional[int] = None,
                tau: Optional[float] = None) -> Tuple[str, AnyRule]:
    """
    Resolve a configured rule selection for degree p.

    Args:
        kind: One of gauss, lobatto, optimal, blend, gauss_blend
        p: Spline degree
        points: Number of points m for gauss/lobatto/blend (default p+1)
        tau: Blending parameter; required for blend and gauss_blend

    Returns:
        Tuple of (display label, rule)
    """
    m = points or p + 1
    if kind == "gauss":
        rule = gauss_legendre(m)
        return rule.label, rule
    if kind == "lobatto":
        rule = gauss_lobatto(m)
        return rule.label, rule
    if kind == "optimal":
        return f"O{p}", optimal_blend(p)
    if kind in ("blend", "gauss_blend"):
        if tau is None:
            raise ValueError(f"a '{kind}' rule needs tau")
        rule = blend(gauss_legendre(m), gauss_lobatto(m), tau) if kind == "blend" else gauss_gauss_blend(p, tau)
        return rule.label, rule
    raise ValueError(f"unknown rule kind '{kind}'")


def integrate(rule: AnyRule, f: Callable[[float], float], interval: Tuple[float, float] = (-1.0, 1.0)) -> float:
    """Weighted sum of f over `rule` mapped affinely to interval=[c, d]"""
    c, d = interval
    if not d > c:
        raise ValueError(f"integration interval [{c}, {d}] is empty")
    nodes, weights = as_rule(rule).mapped(c, d)
    values = np.fromiter((f(x) for x in nodes), dtype=float, count=nodes.size)
    return float(weights @ values)
