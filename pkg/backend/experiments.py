import logging
import math
from concurrent import futures
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Optional, Tuple

import numpy as np

import analysis
import assembly
import eigen
import errors
import models
import quadrature
import splines
from config import config

logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)

SPECTRUM_HEADER = ("mode_index", "j_over_N", "lambda_exact", "lambda_h", "relative_error")
CONVERGENCE_HEADER = ("h", "mode", "rule", "relative_error")
SCHRODINGER_HEADER = ("p", "N", "rule", "mode", "relative_error")
GRID3D_HEADER = ("k", "l", "m", "lambda_exact", "lambda_h", "relative_error")

# Published Gauss-column errors of the Pöschl-Teller table (α = β = 1), per degree and mode
TABLE_GAUSS_ERRORS: Dict[int, Dict[int, List[float]]] = {
    1: {1: [3.19e-3, 7.41e-4, 1.78e-4], 2: [1.06e-2, 2.49e-3, 6.04e-4], 4: [3.95e-2, 9.33e-3, 2.27e-3]},
    2: {1: [1.63e-3, 7.94e-5, 4.62e-6], 2: [1.68e-2, 6.68e-4, 3.61e-5], 4: [1.02e+0, 9.07e-3, 4.07e-4]},
}
TABLE_GAUSS_SLOPES: Dict[int, Dict[int, float]] = {
    1: {1: 2.08, 2: 2.07, 4: 2.06},
    2: {1: 4.23, 2: 4.43, 4: 5.64},
}
TABLE_BLEND_MIN_SLOPE: Dict[int, float] = {1: 2.7, 2: 5.5}

Row = Tuple


@dataclass
class ConvergenceStudy:
    rows: List[Row]
    reports: List[models.ConvergenceReport]


@dataclass
class SchrodingerStudy:
    rows: List[Row]
    reports: Dict[int, List[models.ConvergenceReport]]  # per degree
    taus: Dict[int, float]                              # Gauss-Gauss blending parameter per degree
    errors: Dict[Tuple[int, str, int], List[float]] = field(default_factory=dict)  # (p, rule, mode) -> per mesh


class ExperimentRunner:
    """Runs the eigenvalue studies of one experiment configuration"""

    def __init__(self, experiment: models.ExperimentConfig, max_workers: Optional[int] = None):
        self.experiment = experiment
        self.max_workers = max_workers or config.MAX_WORKERS
        self.problem = analysis.model_problem(
            experiment.problem, gamma=experiment.gamma, alpha=experiment.alpha, beta=experiment.beta
        )
        self._gauss_blend_taus: Dict[int, float] = {}

    def _map(self, fn: Callable, items: Iterable) -> List:
        """Apply fn to every item; results come back in input order"""
        items = list(items)
        if self.max_workers <= 1 or len(items) <= 1:
            return [fn(item) for item in items]
        with futures.ThreadPoolExecutor(max_workers=self.max_workers) as executor:
            return list(executor.map(fn, items))

    def gauss_blend_tau(self, p: int) -> float:
        """τ of the G_{p+1}/G_p blend, from a sweep on the constant-coefficient problem"""
        if p not in self._gauss_blend_taus:
            tau_star, _ = analysis.tau_sweep(
                p, self.experiment.tau_grid, partner="gauss", problem=analysis.model_problem("laplace_neumann_1d")
            )
            self._gauss_blend_taus[p] = tau_star
            logger.info(f"Gauss-Gauss blend for p={p}: tau={tau_star:.6f}")
        return self._gauss_blend_taus[p]

    def resolve_rule(self, selection: models.RuleSelection, p: int) -> Tuple[str, quadrature.AnyRule]:
        tau = selection.tau
        if selection.kind == "gauss_blend" and tau is None:
            tau = self.gauss_blend_tau(p)
        return quadrature.select_rule(selection.kind, p, selection.points, tau)

    def _rules(self, p: int) -> List[Tuple[str, quadrature.AnyRule]]:
        return [self.resolve_rule(selection, p) for selection in self.experiment.rules]

    def spectrum(self) -> Dict[str, List[Row]]:
        """
        Full discrete spectrum for N degrees of freedom per direction, one table per rule.

        N is the last configured mesh entry. Rows are indexed like the exact
        modes, so a Neumann table starts at mode 0 (λ = γ); a zero exact
        eigenvalue gets the absolute error in the error column.
        """
        p = self.experiment.degree
        dofs = self.experiment.meshes[-1]
        n = analysis.elements_for_dofs(self.problem, p, dofs)
        tables = {}
        for label, rule in self._rules(p):
            _, spectrum = analysis.solve_problem(self.problem, p, n, rule)
            values = spectrum.eigenvalues
            count = values.size
            if self.problem.has_constant_mode:
                exact = [self.problem.gamma_shift] + analysis.exact_spectrum(self.problem, count - 1)
                first = 0
            else:
                exact = analysis.exact_spectrum(self.problem, count)
                first = 1
            tables[label] = [
                (j, j / count, lam, float(lam_h), _spectrum_error(float(lam_h), lam))
                for j, lam, lam_h in zip(range(first, first + count), exact, values)
            ]
            logger.info(f"spectrum {label}: {count} modes on {n} elements")
        return tables

    def convergence(self) -> ConvergenceStudy:
        """Relative errors of the configured modes under every rule across the mesh sweep"""
        p = self.experiment.degree
        modes = self.experiment.modes
        exact = analysis.exact_spectrum(self.problem, max(modes))
        rows, reports = [], []
        for label, rule in self._rules(p):
            def solve_mesh(n, rule=rule):
                spec, spectrum = analysis.solve_problem(self.problem, p, n, rule)
                logger.info(f"convergence {label}: n={n} solved ({spectrum.count} modes)")
                return spec.h, analysis.relative_errors(spectrum, self.problem, modes)

            results = self._map(solve_mesh, self.experiment.meshes)
            for h, errs in results:
                rows.extend((h, mode, label, err) for mode, err in zip(modes, errs))
            for i, mode in enumerate(modes):
                wave_number = math.sqrt(exact[mode - 1] - self.problem.gamma_shift)
                reports.append(analysis.fit_convergence(
                    [(h, errs[i]) for h, errs in results], mode=mode, rule=label, wave_number=wave_number
                ))
        return ConvergenceStudy(rows=rows, reports=reports)

    def _schrodinger_tau(self, p: int) -> float:
        for selection in self.experiment.rules:
            if selection.kind == "gauss_blend" and selection.tau is not None:
                return selection.tau
        return self.gauss_blend_tau(p)

    def schrodinger(self) -> SchrodingerStudy:
        """
        Pöschl-Teller errors in the layout of the published table.

        Each degree runs G_{p+1} and the G_{p+1}/G_p blend (labelled O_p) on its
        table meshes. Meshes are labelled N = π/h as in the table, so the
        half-period domain has N/2 elements; ρ rows carry the fitted slope in
        the error column.
        """
        problem = analysis.model_problem(
            "schrodinger_poschl_teller", alpha=self.experiment.alpha, beta=self.experiment.beta
        )
        modes = self.experiment.modes
        study = SchrodingerStudy(rows=[], reports={}, taus={})
        for p in sorted(self.experiment.table_meshes):
            meshes = self.experiment.table_meshes[p]
            tau = self._schrodinger_tau(p)
            study.taus[p] = tau
            rules = [(f"G{p + 1}", quadrature.gauss_legendre(p + 1)), (f"O{p}", quadrature.gauss_gauss_blend(p, tau))]
            study.reports[p] = []
            for label, rule in rules:
                def solve_mesh(n, rule=rule):
                    spec, spectrum = analysis.solve_problem(problem, p, table_elements(n), rule)
                    return spec.h, analysis.relative_errors(spectrum, problem, modes)

                results = self._map(solve_mesh, meshes)
                for n, (_, errs) in zip(meshes, results):
                    study.rows.extend((p, n, label, mode, err) for mode, err in zip(modes, errs))
                for i, mode in enumerate(modes):
                    study.errors[(p, label, mode)] = [errs[i] for _, errs in results]
                    report = analysis.fit_convergence([(h, errs[i]) for h, errs in results], mode=mode, rule=label)
                    study.reports[p].append(report)
                    if report.fitted_slope is not None:
                        study.rows.append((p, "rho", label, mode, report.fitted_slope))
        return study

    def _dispersion_problem(self) -> analysis.ModelProblem:
        if self.experiment.dims != 1 or self.problem.is_schrodinger:
            raise errors.ConfigError("dispersion coefficients need a 1D Laplace problem")
        return self.problem

    def dispersion(self) -> dict:
        """Leading coefficients per rule, plus the τ sweep when requested"""
        p = self.experiment.degree
        problem = self._dispersion_problem()
        estimates = []
        for selection in self.experiment.rules:
            label, rule = self.resolve_rule(selection, p)
            powers = [2 * p]
            if selection.kind in ("optimal", "blend", "gauss_blend"):
                powers.append(2 * p + 2)
            for power in powers:
                estimate = analysis.dispersion_coefficient(problem, p, rule, power)
                estimate.rule = label
                estimates.append(estimate.model_dump())
        result = {"problem": problem.name, "degree": p, "estimates": estimates, "sweep": None}
        if self.experiment.sweep:
            _, report = analysis.tau_sweep(p, self.experiment.tau_grid, problem=problem)
            result["sweep"] = report.model_dump()
        return result

    def grid3d(self) -> Dict[str, List[Row]]:
        """(k, l, m) error grid of the 3D Dirichlet problem via the tensor route, one per rule"""
        if self.experiment.dims != 3:
            raise errors.ConfigError("the 3D error grid needs the laplace_dirichlet_3d problem")
        p = self.experiment.degree
        n = self.experiment.meshes[-1]
        tables = {}
        for label, rule in self._rules(p):
            _, spectrum = analysis.solve_problem(self.problem, p, n, rule)
            tables[label] = _grid_rows(self.problem, spectrum, self.experiment.grid_max)
            logger.info(f"grid3d {label}: {len(tables[label])} (k,l,m) entries")
        return tables

    def checks(self, command: str, result) -> List[models.CheckResult]:
        """Acceptance checks of one command, evaluated on its result where possible"""
        handlers = {
            "spectrum": lambda: [self.check_spectrum_branch(result)],
            "convergence": lambda: self.check_convergence(result),
            "schrodinger": lambda: self.check_schrodinger(result),
            "dispersion": lambda: self.check_dispersion(),
            "grid3d": lambda: [self.check_kronecker_oracle(), self.check_grid_domination(result)],
        }
        if command not in handlers:
            raise ValueError(f"no checks for command '{command}'")
        return handlers[command]()

    def _gauss_and_optimal(self) -> Tuple[str, str]:
        p = self.experiment.degree
        return f"G{p + 1}", f"O{p}"

    def check_spectrum_branch(self, tables: Dict[str, List[Row]]) -> models.CheckResult:
        gauss, optimal = self._gauss_and_optimal()
        name = "spectrum_branch"
        if gauss not in tables or optimal not in tables:
            return models.CheckResult(name=name, passed=False, detail=f"needs rules {gauss} and {optimal}")
        violations = [
            g[0] for g, o in zip(tables[gauss], tables[optimal])
            if g[0] >= 1 and g[1] <= 0.3 and abs(o[4]) > abs(g[4]) + 1e-14
        ]
        return models.CheckResult(
            name=name,
            passed=not violations,
            detail=f"|{optimal}| <= |{gauss}| for j/N <= 0.3" + (f"; violated at modes {violations[:10]}" if violations else ""),
        )

    def check_convergence(self, study: ConvergenceStudy) -> List[models.CheckResult]:
        """
        Slopes 2p (Gauss) and 2p+2 (optimal blend) per mode.

        The slope is taken on the resolved meshes (Λ = √λ·h up to
        ASYMPTOTIC_RESOLUTION) when at least two remain; the all-mesh and
        pairwise slopes are reported alongside.
        """
        p = self.experiment.degree
        gauss, optimal = self._gauss_and_optimal()
        tolerances = (0.15, 0.25) if self.experiment.dims == 1 else (0.2, 0.3)
        by_key = {(r.rule, r.mode): r for r in study.reports}
        results = []
        for label, expected, tol in ((gauss, 2 * p, tolerances[0]), (optimal, 2 * p + 2, tolerances[1])):
            for mode in self.experiment.modes:
                report = by_key.get((label, mode))
                slope = None if report is None else _checked_slope(report)
                passed = slope is not None and abs(slope - expected) <= tol
                detail = f"slope {slope} vs {expected} +/- {tol}"
                if report is not None:
                    pairwise = ", ".join(f"{s:.3f}" for s in report.pairwise_slopes)
                    detail += (f"; all meshes {report.fitted_slope}, pairwise [{pairwise}]"
                               f", pre-asymptotic h={report.pre_asymptotic}")
                results.append(models.CheckResult(name=f"slope_{label}_mode{mode}", passed=passed, detail=detail))
        if self.experiment.dims == 1:
            smaller = all(
                (gauss, m) in by_key and (optimal, m) in by_key
                and all(o < g for o, g in zip(by_key[(optimal, m)].relative_errors, by_key[(gauss, m)].relative_errors))
                for m in self.experiment.modes
            )
            results.append(models.CheckResult(
                name="optimal_below_gauss",
                passed=smaller,
                detail=f"{optimal} errors strictly below {gauss} on every mesh",
            ))
        return results

    def check_schrodinger(self, study: SchrodingerStudy) -> List[models.CheckResult]:
        results = []
        reference_setup = (
            self.experiment.alpha == 1.0 and self.experiment.beta == 1.0
            and all(self.experiment.table_meshes.get(p) == models.TABLE_MESHES[p] for p in models.TABLE_MESHES)
        )
        for p in sorted(study.reports):
            gauss, blended = f"G{p + 1}", f"O{p}"
            slopes = {(r.rule, r.mode): r.fitted_slope for r in study.reports[p]}
            for mode in self.experiment.modes:
                ours = study.errors.get((p, gauss, mode))
                mixed = study.errors.get((p, blended, mode))
                if reference_setup and mode in TABLE_GAUSS_ERRORS.get(p, {}):
                    published = TABLE_GAUSS_ERRORS[p][mode]
                    deviations = [abs(abs(e) - r) / r for e, r in zip(ours, published)]
                    results.append(models.CheckResult(
                        name=f"table_p{p}_{gauss}_mode{mode}",
                        passed=max(deviations) <= 0.02,
                        detail=f"errors {[f'{abs(e):.3e}' for e in ours]} vs {published}",
                    ))
                    rho = slopes.get((gauss, mode))
                    target = TABLE_GAUSS_SLOPES[p][mode]
                    results.append(models.CheckResult(
                        name=f"table_p{p}_{gauss}_rho{mode}",
                        passed=rho is not None and abs(rho - target) <= 0.1,
                        detail=f"rho {rho} vs {target} +/- 0.1",
                    ))
                rho = slopes.get((blended, mode))
                floor = TABLE_BLEND_MIN_SLOPE.get(p)
                if floor is not None:
                    results.append(models.CheckResult(
                        name=f"table_p{p}_{blended}_rho{mode}",
                        passed=rho is not None and rho >= floor,
                        detail=f"rho {rho} >= {floor} (tau={study.taus[p]:.6f})",
                    ))
                results.append(models.CheckResult(
                    name=f"table_p{p}_{blended}_beats_{gauss}_mode{mode}",
                    passed=all(abs(b) < abs(g) for b, g in zip(mixed, ours)),
                    detail=f"{blended} errors below {gauss} on every mesh",
                ))
        if not reference_setup:
            logger.warning("published values only apply to alpha=beta=1 on the default table meshes; skipped")
        return results

    def check_dispersion(self) -> List[models.CheckResult]:
        """
        Quadratic-spline coefficients and optimal τ recovery on the 1D Neumann problem.

        τ weights the Gauss rule, so the G3/L3 blend has Λ⁴ coefficient (3τ-1)/1440
        and vanishes at τ = 1/3 (Lobatto weighted 2:1).
        """
        problem = analysis.model_problem("laplace_neumann_1d")
        g3, l3 = quadrature.gauss_legendre(3), quadrature.gauss_lobatto(3)
        cases = [
            ("G3", g3, 4, 1.0 / 720.0, 0.05),
            ("L3", l3, 4, -1.0 / 1440.0, 0.05),
        ]
        for tau in (0.1, 0.5, 0.8):
            cases.append((f"tau={tau}", quadrature.blend(g3, l3, tau), 4, (3.0 * tau - 1.0) / 1440.0, 0.05))
        optimal = quadrature.optimal_blend(2)
        cases.append(("tau=1/3", optimal, 6, 11.0 / 60480.0, 0.10))

        results = []
        for name, rule, power, expected, tol in cases:
            c = analysis.dispersion_coefficient(problem, 2, rule, power).coefficient
            results.append(models.CheckResult(
                name=f"dispersion_{name}_power{power}",
                passed=abs(c - expected) <= tol * abs(expected),
                detail=f"c={c:.6e} vs {expected:.6e} within {tol:.0%}",
            ))
        c4 = analysis.dispersion_coefficient(problem, 2, optimal, 4).coefficient
        results.append(models.CheckResult(
            name="dispersion_tau=1/3_power4_vanishes",
            passed=abs(c4) < 1.0 / 14400.0,
            detail=f"|c|={abs(c4):.3e} < {1.0 / 14400.0:.3e}",
        ))
        for p, (low, high) in ((2, (0.332, 0.335)), (3, (-1.52, -1.48))):
            tau_star, _ = analysis.tau_sweep(p, problem=problem)
            results.append(models.CheckResult(
                name=f"tau_sweep_p{p}",
                passed=low <= tau_star <= high,
                detail=f"tau*={tau_star:.6f} in [{low}, {high}]",
            ))
        return results

    def check_kronecker_oracle(self) -> models.CheckResult:
        """Materialized Kronecker operators against direct 3D assembly, and tensor against dense eigenvalues"""
        worst_matrix, worst_eig = 0.0, 0.0
        for p in (1, 2):
            for n in (3, 4):
                spec = splines.BasisSpec.uniform(0.0, 1.0, n, p)
                rules = assembly.QuadratureTriple.uniform(quadrature.gauss_legendre(p + 1))
                bc = assembly.BoundaryCondition.DIRICHLET
                operator = assembly.assemble_tensor(spec, 0.0, 3, rules, bc)
                dense = operator.materialize()
                direct = assembly.assemble_direct(spec, 0.0, 3, rules, bc)
                worst_matrix = max(worst_matrix, float(np.max(np.abs(dense.K - direct.K))),
                                   float(np.max(np.abs(dense.M - direct.M))))
                tensor = eigen.solve_tensor(operator).eigenvalues
                full = eigen.solve_generalized(dense, vectors=False).eigenvalues
                worst_eig = max(worst_eig, float(np.max(np.abs(tensor - full) / np.abs(full))))
        return models.CheckResult(
            name="kronecker_oracle",
            passed=worst_matrix <= 1e-12 and worst_eig <= 1e-10,
            detail=f"max entry difference {worst_matrix:.2e}, max eigenvalue deviation {worst_eig:.2e}",
        )

    def check_grid_domination(self, tables: Dict[str, List[Row]]) -> models.CheckResult:
        gauss, optimal = self._gauss_and_optimal()
        name = "grid3d_domination"
        if gauss not in tables or optimal not in tables:
            return models.CheckResult(name=name, passed=False, detail=f"needs rules {gauss} and {optimal}")
        limit = self.experiment.meshes[-1] / 3.0
        violations = [
            g[:3] for g, o in zip(tables[gauss], tables[optimal])
            if max(g[:3]) <= limit and abs(o[5]) > abs(g[5]) + 1e-14
        ]
        return models.CheckResult(
            name=name,
            passed=not violations,
            detail=f"|{optimal}| <= |{gauss}| for k,l,m <= N/3" + (f"; violated at {violations[:5]}" if violations else ""),
        )


def _grid_rows(problem: analysis.ModelProblem, spectrum: eigen.Spectrum, grid_max: Optional[int]) -> List[Row]:
    """Rows (k, l, m, exact, discrete, relative error) for every tuple up to grid_max, in (k, l, m) order"""
    multi = spectrum.multi_indices
    n_1d = int(round(spectrum.count ** (1.0 / 3.0)))
    kmax = min(grid_max or n_1d, n_1d)
    scale = (math.pi / problem.length) ** 2
    rows = []
    keep = np.all(multi <= kmax, axis=1)
    for (k, l, m), lam_h in sorted(zip(map(tuple, multi[keep]), spectrum.eigenvalues[keep])):
        exact = (k * k + l * l + m * m) * scale + problem.gamma_shift
        rows.append((int(k), int(l), int(m), exact, float(lam_h), float((lam_h - exact) / exact)))
    return rows


def _spectrum_error(lam_h: float, lam: float) -> float:
    """Relative error, or the absolute one where the exact eigenvalue is zero"""
    if lam == 0.0:
        return lam_h
    return (lam_h - lam) / lam


def table_elements(n_label: int) -> int:
    """Elements on (0, π/2) for a table mesh labelled N = π/h"""
    return n_label // 2


def _checked_slope(report: models.ConvergenceReport) -> Optional[float]:
    if report.asymptotic_slope is not None:
        return report.asymptotic_slope
    return report.fitted_slope
