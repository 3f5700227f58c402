import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.special

from config import config
import assembly
import eigen
import errors
import models
import quadrature
import splines

logger = logging.getLogger(__name__)

# Wave numbers Λ = ωh sampled by the dispersion fit, and the fit's degree in Λ²
DISPERSION_RESOLUTIONS: Sequence[float] = np.linspace(0.1, 0.5, 17)
DISPERSION_FIT_DEGREE = 4

# τ grids for the sweep, per partner family of G_{p+1}
LOBATTO_TAU_GRIDS: Dict[int, Sequence[float]] = {
    1: np.linspace(0.0, 1.0, 11),
    2: np.linspace(0.0, 1.0, 11),
    3: np.linspace(-3.0, 0.0, 13),
}
GAUSS_TAU_GRID: Sequence[float] = np.linspace(0.5, 3.0, 11)

PROBLEM_NAMES = (
    "laplace_dirichlet_1d",
    "laplace_neumann_1d",
    "laplace_dirichlet_2d",
    "laplace_dirichlet_3d",
    "schrodinger_poschl_teller",
)


def poschl_teller_potential(alpha: float, beta: float) -> Callable[[float], float]:
    """α(α+1)/cos²x + β(β+1)/sin²x; infinite at x = 0 and x = π/2"""
    def potential(x: float) -> float:
        with np.errstate(divide='ignore'):
            return alpha * (alpha + 1.0) / np.cos(x) ** 2 + beta * (beta + 1.0) / np.sin(x) ** 2
    return potential


@dataclass(frozen=True)
class ModelProblem:
    """Eigenproblem -Δu + γu = λu with a closed-form spectrum"""
    name: str
    domain: Tuple[float, float]
    bc: assembly.BoundaryCondition
    dims: int = 1
    gamma_shift: float = 0.0  # constant γ of Laplace problems
    alpha: float = 1.0
    beta: float = 1.0

    @property
    def is_schrodinger(self) -> bool:
        return self.name == "schrodinger_poschl_teller"

    @property
    def gamma(self) -> assembly.Coefficient:
        if self.is_schrodinger:
            return poschl_teller_potential(self.alpha, self.beta)
        return self.gamma_shift

    @property
    def length(self) -> float:
        return self.domain[1] - self.domain[0]

    @property
    def has_constant_mode(self) -> bool:
        """Neumann Laplace: the constant mode (λ = γ) is excluded from comparisons"""
        return self.bc is assembly.BoundaryCondition.NEUMANN

    def exact_eigenvalue(self, j: int) -> float:
        """j-th (1-based) exact eigenvalue of a 1D problem"""
        if j < 1:
            raise ValueError(f"mode index must be at least 1, got {j}")
        if self.dims != 1:
            raise ValueError("exact_eigenvalue indexes 1D problems; use exact_spectrum")
        if self.is_schrodinger:
            return (self.alpha + self.beta + 2.0 + 2.0 * (j - 1)) ** 2
        return (j * math.pi / self.length) ** 2 + self.gamma_shift

    def exact_eigenfunction(self, j: int) -> Callable[[np.ndarray], np.ndarray]:
        """L²-normalized exact eigenfunction of the j-th (1-based) mode of a 1D problem"""
        a, length = self.domain[0], self.length
        scale = math.sqrt(2.0 / length)
        if self.is_schrodinger:
            return _poschl_teller_mode(self.alpha, self.beta, j - 1)
        if self.bc is assembly.BoundaryCondition.NEUMANN:
            return lambda x: scale * np.cos(j * math.pi * (np.asarray(x) - a) / length)
        return lambda x: scale * np.sin(j * math.pi * (np.asarray(x) - a) / length)


def _poschl_teller_mode(alpha: float, beta: float, j: int) -> Callable[[np.ndarray], np.ndarray]:
    def raw(x):
        x = np.asarray(x, dtype=float)
        return (np.cos(x) ** (alpha + 1.0) * np.sin(x) ** (beta + 1.0)
                * scipy.special.eval_jacobi(j, beta + 0.5, alpha + 0.5, np.cos(2.0 * x)))

    nodes, weights = quadrature.gauss_legendre(96).mapped(0.0, 0.5 * math.pi)
    norm = math.sqrt(float(weights @ raw(nodes) ** 2))
    return lambda x: raw(x) / norm


def model_problem(name: str, gamma: float = 0.0, alpha: float = 1.0, beta: float = 1.0) -> ModelProblem:
    """Model problem by name; `gamma` shifts Laplace problems by a constant"""
    Bc = assembly.BoundaryCondition
    if name == "laplace_neumann_1d":
        return ModelProblem(name, (0.0, 1.0), Bc.NEUMANN, 1, gamma)
    if name == "laplace_dirichlet_1d":
        return ModelProblem(name, (0.0, 1.0), Bc.DIRICHLET, 1, gamma)
    if name == "laplace_dirichlet_2d":
        return ModelProblem(name, (0.0, 1.0), Bc.DIRICHLET, 2, gamma)
    if name == "laplace_dirichlet_3d":
        return ModelProblem(name, (0.0, 1.0), Bc.DIRICHLET, 3, gamma)
    if name == "schrodinger_poschl_teller":
        return ModelProblem(name, (0.0, 0.5 * math.pi), Bc.DIRICHLET, 1, 0.0, alpha, beta)
    raise ValueError(f"unknown problem '{name}'; expected one of {', '.join(PROBLEM_NAMES)}")


def _tensor_exact(problem: ModelProblem, count: int) -> np.ndarray:
    """Sorted (k²+l²+...)π²/L² with multiplicity, enumerated until the count-th value is settled"""
    dims = problem.dims
    bound = max(1, math.ceil(count ** (1.0 / dims)))
    while True:
        squares = np.arange(1, bound + 1, dtype=float) ** 2
        sums = squares
        for _ in range(1, dims):
            sums = np.add.outer(sums, squares)
        sums = np.sort(sums.reshape(-1), kind='stable')
        # any tuple with an index above `bound` has sum >= (bound+1)² + (dims-1)
        if sums.size >= count and sums[count - 1] <= (bound + 1) ** 2 + (dims - 1):
            break
        bound += 1
    return sums[:count] * (math.pi / problem.length) ** 2 + problem.gamma_shift


def exact_spectrum(problem: ModelProblem, count: int) -> List[float]:
    """First `count` exact eigenvalues, ascending, with multiplicity"""
    if count < 1:
        raise ValueError(f"count must be at least 1, got {count}")
    if problem.dims == 1:
        return [problem.exact_eigenvalue(j) for j in range(1, count + 1)]
    return [float(v) for v in _tensor_exact(problem, count)]


def comparable_eigenvalues(discrete: eigen.Spectrum, problem: ModelProblem) -> np.ndarray:
    """Discrete eigenvalues paired with exact modes 1, 2, ...; drops the Neumann constant mode"""
    values = discrete.eigenvalues
    return values[1:] if problem.has_constant_mode else values


def relative_errors(discrete: eigen.Spectrum, problem: ModelProblem, mode_indices: Sequence[int]) -> List[float]:
    """Signed (λ_j^h - λ_j)/λ_j for the requested 1-based modes"""
    values = comparable_eigenvalues(discrete, problem)
    modes = list(mode_indices)
    if not modes:
        return []
    for j in modes:
        if j < 1 or j > values.size:
            raise ValueError(f"mode {j} is not available; the discrete spectrum has {values.size} comparable modes")
    exact = exact_spectrum(problem, max(modes))
    return [float((values[j - 1] - exact[j - 1]) / exact[j - 1]) for j in modes]


def _slope_fit(usable: Sequence[Tuple[float, float]]) -> Tuple[float, float, List[float]]:
    log_h = np.log([h for h, _ in usable])
    log_e = np.log([e for _, e in usable])
    slope, intercept = np.polyfit(log_h, log_e, 1)
    return float(slope), float(intercept), [float(s) for s in np.diff(log_e) / np.diff(log_h)]


def fit_convergence(errors_by_mesh: Sequence[Tuple[float, float]], mode: Optional[int] = None,
                    rule: Optional[str] = None,
                    wave_number: Optional[float] = None) -> models.ConvergenceReport:
    """
    Least-squares slope of log|error| against log h.

    Exact hits (zero error) are excluded with a warning. With fewer than two
    usable meshes the slope is omitted. Given the mode's wave number √λ, a
    second slope is fitted on the meshes with √λ·h <= ASYMPTOTIC_RESOLUTION.
    """
    pairs = sorted(((float(h), abs(float(e))) for h, e in errors_by_mesh), reverse=True)
    usable = [(h, e) for h, e in pairs if e > 0.0]
    excluded = [h for h, e in pairs if not e > 0.0]
    if excluded:
        logger.warning(f"excluding meshes with zero error from the fit: h={excluded}")

    report = models.ConvergenceReport(
        mode=mode,
        rule=rule,
        mesh_sizes=[h for h, _ in pairs],
        relative_errors=[e for _, e in pairs],
        excluded=excluded,
    )
    if len(usable) < 2:
        logger.warning(f"cannot fit a slope from {len(usable)} mesh(es); slope omitted")
        return report

    slope, intercept, pairwise = _slope_fit(usable)
    report.fitted_slope = slope
    report.pairwise_slopes = pairwise
    report.mesh_range = [float(min(h for h, _ in usable)), float(max(h for h, _ in usable))]
    report.leading_coefficient = float(math.exp(intercept))

    if wave_number is not None:
        limit = config.ASYMPTOTIC_RESOLUTION
        resolved = [(h, e) for h, e in usable if wave_number * h <= limit]
        report.pre_asymptotic = [h for h, _ in usable if wave_number * h > limit]
        if len(resolved) >= 2:
            report.asymptotic_slope = _slope_fit(resolved)[0]
    return report


def solve_problem(problem: ModelProblem, p: int, n_elements: int, rule: quadrature.AnyRule,
                  vectors: bool = False) -> Tuple[splines.BasisSpec, eigen.Spectrum]:
    """
    Discretize and solve a model problem on a uniform mesh.

    Laplace problems with a constant γ are solved for γ = 0 and shifted
    afterwards; 2D/3D problems take the separated Kronecker route.
    """
    spec = splines.BasisSpec.uniform(problem.domain[0], problem.domain[1], n_elements, p)
    rules = assembly.QuadratureTriple.uniform(rule)
    if problem.dims == 1:
        gamma = problem.gamma if problem.is_schrodinger else 0.0
        ops = assembly.assemble_1d(spec, gamma, rules, problem.bc)
        spectrum = eigen.solve_generalized(ops, vectors=vectors)
    else:
        operator = assembly.assemble_tensor(spec, 0.0, problem.dims, rules, problem.bc)
        spectrum = eigen.solve_tensor(operator, vectors=vectors)
    if problem.gamma_shift:
        spectrum = assembly.shift_spectrum(spectrum, problem.gamma_shift)
    return spec, spectrum


def stencil_symbols(p: int, rule: quadrature.AnyRule) -> Tuple[np.ndarray, np.ndarray]:
    """
    Interior rows (K_0..K_p, M_0..M_p) of the unit-spacing operators.

    Read off the middle row of a Neumann assembly on 4p+2 unit elements,
    far enough from both ends that every neighbour is an interior B-spline.
    Off-diagonal entries are averaged over both sides.
    """
    n_elements = 4 * p + 2
    spec = splines.BasisSpec.uniform(0.0, float(n_elements), n_elements, p)
    ops = assembly.assemble_1d(spec, 0.0, assembly.QuadratureTriple.uniform(rule),
                               assembly.BoundaryCondition.NEUMANN)
    K, M = ops.K, ops.M
    centre = 2 * p + 1
    offsets = np.arange(p + 1)
    stiffness = 0.5 * (K[centre, centre + offsets] + K[centre, centre - offsets])
    mass = 0.5 * (M[centre, centre + offsets] + M[centre, centre - offsets])
    return stiffness, mass


def dispersion_relation(p: int, rule: quadrature.AnyRule, resolutions: Sequence[float]) -> np.ndarray:
    """
    Relative error λ_h/λ - 1 of the plane wave e^{iωx} at each Λ = ωh.

    λ_h h² = K̂(Λ)/M̂(Λ) with K̂ = -4 Σ_j K_j sin²(jΛ/2) and M̂ = M_0 + 2 Σ_j M_j cos(jΛ).
    """
    stiffness, mass = stencil_symbols(p, rule)
    big_lambda = np.asarray(resolutions, dtype=float)
    j = np.arange(1, p + 1)
    k_hat = -4.0 * (np.sin(np.outer(big_lambda, j) / 2.0) ** 2) @ stiffness[1:]
    m_hat = mass[0] + 2.0 * np.cos(np.outer(big_lambda, j)) @ mass[1:]
    if np.any(m_hat <= 0.0):
        raise errors.DefinitenessError(
            f"mass symbol of {quadrature.as_rule(rule).label} is not positive for p={p}"
        )
    return k_hat / (m_hat * big_lambda ** 2) - 1.0


def dispersion_coefficient(problem: ModelProblem, p: int, rule: quadrature.AnyRule, power: int,
                           resolutions: Optional[Sequence[float]] = None) -> models.DispersionEstimate:
    """
    Coefficient c of Λ^power in the relative eigenvalue error (λ_h - λ)/λ.

    Uses the discrete dispersion relation of the interior stencil, which is
    what the low modes of the problem see. The error divided by Λ^{min(power, 2p)}
    is fitted as a polynomial in Λ², and c is read off the matching term.
    """
    if problem.dims != 1 or problem.is_schrodinger:
        raise ValueError(f"dispersion coefficients need a 1D Laplace problem, got {problem.name}")
    if power < 2 or power % 2:
        raise ValueError(f"dispersion powers are even and at least 2, got {power}")
    resolutions = np.asarray(DISPERSION_RESOLUTIONS if resolutions is None else resolutions, dtype=float)
    if resolutions.size <= DISPERSION_FIT_DEGREE:
        raise ValueError(f"the dispersion fit needs more than {DISPERSION_FIT_DEGREE} wave numbers")

    error = dispersion_relation(p, rule, resolutions)
    base = min(power, 2 * p)
    term = (power - base) // 2
    scaled = error / resolutions ** base
    squares = resolutions ** 2
    fit = np.polynomial.polynomial.polyfit(squares, scaled, DISPERSION_FIT_DEGREE)
    reduced = np.polynomial.polynomial.polyfit(squares, scaled, DISPERSION_FIT_DEGREE - 1)
    coefficient = float(fit[term])
    scale = float(np.max(np.abs(scaled))) / float(np.max(squares)) ** term
    converged = abs(coefficient - float(reduced[term])) <= 1e-4 * max(abs(coefficient), scale, 1e-300)

    label = quadrature.as_rule(rule).label
    if not converged:
        logger.warning(f"dispersion fit for {label}, power {power} is unsettled: "
                       f"{coefficient:.6e} vs {float(reduced[term]):.6e}")
    return models.DispersionEstimate(
        rule=label,
        tau=getattr(rule, "tau", None),
        exponent=power,
        coefficient=coefficient,
        samples=[float(s) for s in error / resolutions ** power],
        resolutions=[float(r) for r in resolutions],
        converged=converged,
    )


def _pair_rule(p: int, partner: str, tau: float) -> quadrature.BlendedRule:
    if partner == "lobatto":
        return quadrature.blend(quadrature.gauss_legendre(p + 1), quadrature.gauss_lobatto(p + 1), tau)
    if partner == "gauss":
        return quadrature.gauss_gauss_blend(p, tau)
    raise ValueError(f"unknown partner family '{partner}'")


def tau_sweep(p: int, tau_grid: Optional[Sequence[float]] = None, partner: str = "lobatto",
              problem: Optional[ModelProblem] = None) -> Tuple[float, models.TauSweepReport]:
    """
    Locate τ where the Λ^{2p} coefficient of τ·G_{p+1} + (1-τ)·partner vanishes.

    The coefficient is affine in τ, so the zero is linearly interpolated
    between the first pair of grid points where it changes sign. Grid points
    whose blended mass symbol is not positive are skipped.
    """
    problem = problem or model_problem("laplace_neumann_1d")
    if tau_grid is None:
        tau_grid = GAUSS_TAU_GRID if partner == "gauss" else LOBATTO_TAU_GRIDS.get(p, np.linspace(0.0, 1.0, 11))
    power = 2 * p
    taus, coefficients = [], []
    for tau in tau_grid:
        rule = _pair_rule(p, partner, float(tau))
        try:
            estimate = dispersion_coefficient(problem, p, rule, power)
        except errors.DefinitenessError:
            logger.warning(f"skipping tau={tau}: blended mass symbol is not positive")
            continue
        taus.append(float(tau))
        coefficients.append(estimate.coefficient)

    tau_star = None
    for i in range(len(taus) - 1):
        c0, c1 = coefficients[i], coefficients[i + 1]
        if c0 == 0.0:
            tau_star = taus[i]
            break
        if c0 * c1 < 0.0 or c1 == 0.0:
            tau_star = taus[i] - c0 * (taus[i + 1] - taus[i]) / (c1 - c0)
            break
    if tau_star is None:
        raise errors.TauSweepError(
            f"Λ^{power} coefficient does not change sign for p={p} on tau in [{min(tau_grid)}, {max(tau_grid)}]"
        )

    partner_label = f"L{p + 1}" if partner == "lobatto" else f"G{p}"
    logger.info(f"tau sweep p={p} (G{p + 1}/{partner_label}): tau*={tau_star:.6f}")
    report = models.TauSweepReport(
        degree=p,
        rule_pair=[f"G{p + 1}", partner_label],
        exponent=power,
        taus=taus,
        coefficients=[float(c) for c in coefficients],
        tau_star=float(tau_star),
    )
    return float(tau_star), report


def mode_multiplicity(problem: ModelProblem, mode: int) -> int:
    if problem.dims == 1:
        return 1
    values = np.asarray(exact_spectrum(problem, mode + problem.dims ** 2 * mode))
    target = values[mode - 1]
    return int(np.sum(np.isclose(values, target, rtol=1e-12, atol=0.0)))


def eigenfunction_l2_error(discrete: eigen.Spectrum, problem: ModelProblem, mode: int,
                           spec: splines.BasisSpec) -> float:
    """
    ‖u_h - u‖ in L² for one mode of a 1D problem.

    The sign of u_h is chosen to maximize (u_h, u); integrals use G_{p+3} on
    every element.
    """
    if mode_multiplicity(problem, mode) > 1:
        raise errors.MultiplicityError(
            f"mode {mode} of {problem.name} is degenerate; subspace comparison is not supported"
        )
    if problem.dims != 1:
        raise ValueError("eigenfunction errors are available for 1D problems only")
    if discrete.eigenvectors is None:
        raise ValueError("the spectrum carries no eigenvectors")

    column = mode if problem.has_constant_mode else mode - 1
    if column >= discrete.eigenvectors.shape[1]:
        raise ValueError(f"mode {mode} is not available in the discrete spectrum")
    coefficients = discrete.eigenvectors[:, column]
    if problem.bc is assembly.BoundaryCondition.DIRICHLET:
        coefficients = np.concatenate([[0.0], coefficients, [0.0]])

    exact = problem.exact_eigenfunction(mode)
    rule = quadrature.gauss_legendre(spec.degree + 3)
    reference = np.asarray(rule.nodes)
    nodes, weights = [], []
    for element in splines.elements_of(spec, reference=(-1.0, 1.0)):
        nodes.append(element.map_from_reference(reference))
        weights.append(element.jacobian * np.asarray(rule.weights))

    x = np.concatenate(nodes)
    w = np.concatenate(weights)
    uh = splines.evaluate_expansion(spec, coefficients, x)
    u = exact(x)
    sign = 1.0 if w @ (uh * u) >= 0.0 else -1.0
    return float(math.sqrt(w @ (sign * uh - u) ** 2))


def elements_for_dofs(problem: ModelProblem, p: int, dofs: int) -> int:
    """Elements per direction giving `dofs` unknowns per direction after boundary conditions"""
    n_elements = dofs - p
    if problem.bc is assembly.BoundaryCondition.DIRICHLET:
        n_elements += 2
    if n_elements < 1:
        raise ValueError(f"{dofs} degrees of freedom are too few for degree {p} on {problem.name}")
    return n_elements
