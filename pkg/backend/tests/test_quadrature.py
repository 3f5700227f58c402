import sys
import os
import math
import pytest
import numpy as np

# Add backend to sys.path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

import errors
import quadrature
from config import config

def monomial_integral(k):
    """∫_{-1}^{1} x^k dx"""
    return 0.0 if k % 2 else 2.0 / (k + 1)

def monomial_error(rule, k):
    return quadrature.integrate(rule, lambda x: x ** k) - monomial_integral(k)

@pytest.mark.parametrize("m", range(2, 11))
def test_gauss_exactness_degree(m):
    """Test that G_m is exact up to degree 2m-1 and not beyond."""
    rule = quadrature.gauss_legendre(m)
    assert rule.exactness_degree == 2 * m - 1
    for k in range(2 * m):
        assert monomial_error(rule, k) == pytest.approx(0.0, abs=1e-13)
    assert abs(monomial_error(rule, 2 * m)) > 1e-10

@pytest.mark.parametrize("m", range(2, 11))
def test_lobatto_exactness_degree(m):
    """Test that L_m is exact up to degree 2m-3 and not beyond."""
    rule = quadrature.gauss_lobatto(m)
    assert rule.exactness_degree == 2 * m - 3
    for k in range(2 * m - 2):
        assert monomial_error(rule, k) == pytest.approx(0.0, abs=1e-13)
    assert abs(monomial_error(rule, 2 * m - 2)) > 1e-10

@pytest.mark.parametrize("make, m", [
    (quadrature.gauss_legendre, 1), (quadrature.gauss_legendre, 7),
    (quadrature.gauss_lobatto, 2), (quadrature.gauss_lobatto, 7),
])
def test_weights_and_symmetry(make, m):
    """Test positive weights summing to 2 and nodes symmetric about 0."""
    rule = make(m)
    nodes = np.array(rule.nodes)
    assert rule.size == m
    assert np.all(np.diff(nodes) > 0)
    np.testing.assert_allclose(nodes, -nodes[::-1], atol=1e-15)
    assert sum(rule.weights) == pytest.approx(2.0, abs=1e-14)
    assert min(rule.weights) > 0

def test_three_point_gauss_values():
    rule = quadrature.gauss_legendre(3)
    np.testing.assert_allclose(rule.nodes, [-math.sqrt(0.6), 0.0, math.sqrt(0.6)], atol=1e-15)
    np.testing.assert_allclose(rule.weights, [5 / 9, 8 / 9, 5 / 9], atol=1e-15)
    assert rule.label == "G3"
    assert rule.family is quadrature.RuleFamily.GAUSS

def test_three_point_lobatto_values():
    rule = quadrature.gauss_lobatto(3)
    assert rule.nodes[0] == -1.0 and rule.nodes[-1] == 1.0
    np.testing.assert_allclose(rule.nodes, [-1.0, 0.0, 1.0], atol=1e-15)
    np.testing.assert_allclose(rule.weights, [1 / 3, 4 / 3, 1 / 3], atol=1e-15)
    assert rule.label == "L3"

def test_invalid_point_counts():
    with pytest.raises(ValueError):
        quadrature.gauss_legendre(0)
    with pytest.raises(ValueError):
        quadrature.gauss_lobatto(1)

def test_blend_is_linear_in_tau():
    """Test that the blended rule integrates as τ·Q_a + (1-τ)·Q_b."""
    rng = np.random.default_rng(7)
    g3, l3 = quadrature.gauss_legendre(3), quadrature.gauss_lobatto(3)
    coefficients = rng.normal(size=9)
    f = lambda x: np.polyval(coefficients, x)
    for tau in rng.uniform(-3.0, 3.0, 5):
        blended = quadrature.integrate(quadrature.blend(g3, l3, tau), f)
        expected = tau * quadrature.integrate(g3, f) + (1 - tau) * quadrature.integrate(l3, f)
        assert blended == pytest.approx(expected, abs=1e-12)

def test_blend_node_union():
    """Test that shared nodes are merged and zero weights dropped."""
    g3, l3 = quadrature.gauss_legendre(3), quadrature.gauss_lobatto(3)
    assert quadrature.blend(g3, l3, 0.5).rule.size == 5
    assert quadrature.blend(g3, l3, 1.0).rule.size == 3
    assert -1.0 not in quadrature.blend(g3, l3, 1.0).nodes
    assert quadrature.blend(g3, l3, 0.5).label == "Q(G3,L3;tau=0.5)"
    assert quadrature.blend(g3, l3, 0.5).family is quadrature.RuleFamily.BLENDED

def test_blend_exactness_is_minimum():
    rule = quadrature.blend(quadrature.gauss_legendre(4), quadrature.gauss_lobatto(4), -1.5)
    assert rule.exactness_degree == 5

def test_optimal_blend_parameters():
    assert quadrature.optimal_blend(2).tau == pytest.approx(1 / 3)
    assert quadrature.optimal_blend(2).rule_a.label == "G3"
    assert quadrature.optimal_blend(3).tau == -1.5
    assert quadrature.optimal_blend(3).rule_b.label == "L4"

def test_optimal_blend_linear_uses_config(mocker):
    """Test that the p=1 blend takes its τ from the configuration."""
    mocker.patch.object(config, "P1_OPTIMAL_TAU", 0.25)
    rule = quadrature.optimal_blend(1)
    assert rule.tau == 0.25
    assert rule.rule_a.label == "G2"

def test_unconverged_newton_raises_numerical_error(mocker):
    """Test that node generation reports a stalled Newton iteration as a numerical failure."""
    mocker.patch.object(config, "NEWTON_MAX_ITER", 0)
    with pytest.raises(errors.NumericalError):
        quadrature.gauss_legendre(5)
    with pytest.raises(errors.NumericalError):
        quadrature.gauss_lobatto(5)

def test_no_builtin_optimum_beyond_cubic():
    with pytest.raises(errors.NoBuiltinOptimumError):
        quadrature.optimal_blend(4)

def test_gauss_gauss_blend():
    rule = quadrature.gauss_gauss_blend(2, 1.5)
    assert rule.label == "Q(G3,G2;tau=1.5)"
    assert min(abs(x) for x in rule.nodes) == pytest.approx(0.0, abs=1e-15)
    assert max(abs(x) for x in rule.nodes) < 1.0

@pytest.mark.parametrize("kind, tau, label", [
    ("gauss", None, "G3"),
    ("lobatto", None, "L3"),
    ("optimal", None, "O2"),
    ("blend", 0.5, "Q(G3,L3;tau=0.5)"),
    ("gauss_blend", 1.5, "Q(G3,G2;tau=1.5)"),
])
def test_select_rule_labels(kind, tau, label):
    assert quadrature.select_rule(kind, 2, tau=tau)[0] == label

def test_select_rule_points_and_errors():
    label, rule = quadrature.select_rule("gauss", 2, points=5)
    assert label == "G5" and rule.size == 5
    with pytest.raises(ValueError):
        quadrature.select_rule("blend", 2)
    with pytest.raises(ValueError):
        quadrature.select_rule("simpson", 2)

def test_mapped_rule_integrates_on_interval():
    """Test the affine map to [c, d]."""
    rule = quadrature.gauss_legendre(2)
    assert quadrature.integrate(rule, lambda x: x * x, (0.0, 2.0)) == pytest.approx(8 / 3)
    _, weights = rule.mapped(0.5, 1.25)
    assert weights.sum() == pytest.approx(0.75)
    with pytest.raises(ValueError):
        quadrature.integrate(rule, lambda x: x, (1.0, 1.0))
