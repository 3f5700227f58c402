from typing import Dict, List, Literal, Optional, Tuple

import pydantic

ProblemName = Literal[
    "laplace_dirichlet_1d",
    "laplace_neumann_1d",
    "laplace_dirichlet_2d",
    "laplace_dirichlet_3d",
    "schrodinger_poschl_teller",
]
RuleKind = Literal["gauss", "lobatto", "optimal", "blend", "gauss_blend"]

SUPPORTED_DEGREES = (1, 2, 3)

# Meshes of the Schrödinger table per degree, labelled N = π/h (N/2 elements on the half period)
TABLE_MESHES: Dict[int, List[int]] = {1: [40, 80, 160], 2: [10, 20, 40]}

# The 1D Laplace problem posed under the other boundary condition
BOUNDARY_VARIANTS: Dict[Tuple[str, str], str] = {
    ("laplace_neumann_1d", "dirichlet"): "laplace_dirichlet_1d",
    ("laplace_dirichlet_1d", "neumann"): "laplace_neumann_1d",
}


class RuleSelection(pydantic.BaseModel):
    """Quadrature rule requested by an experiment"""
    model_config = pydantic.ConfigDict(extra="forbid", frozen=True)

    kind: RuleKind
    points: Optional[int] = None  # defaults to p+1
    tau: Optional[float] = None   # required for "blend"; "gauss_blend" sweeps when omitted

    @pydantic.field_validator("points")
    @classmethod
    def _points_positive(cls, v):
        if v is not None and v < 1:
            raise ValueError("points must be at least 1")
        return v

    @pydantic.model_validator(mode="after")
    def _blend_needs_tau(self):
        if self.kind == "blend" and self.tau is None:
            raise ValueError("a 'blend' rule needs tau")
        return self


class ExperimentConfig(pydantic.BaseModel):
    """One experiment, as read from a JSON config file plus flag overrides"""
    model_config = pydantic.ConfigDict(extra="forbid")

    problem: ProblemName = "laplace_neumann_1d"
    degree: int = 2
    meshes: List[int] = [16, 32, 64, 128]
    rules: List[RuleSelection] = [RuleSelection(kind="gauss"), RuleSelection(kind="optimal")]
    bc: Optional[Literal["dirichlet", "neumann"]] = None  # selects the 1D Laplace variant; filled in from the problem
    modes: List[int] = [1]
    gamma: float = 0.0              # constant shift for Laplace problems
    alpha: float = 1.0              # Pöschl-Teller strengths
    beta: float = 1.0
    table_meshes: Dict[int, List[int]] = TABLE_MESHES
    tau_grid: Optional[List[float]] = None
    sweep: bool = False
    grid_max: Optional[int] = None  # largest 1D mode index of the 3D error grid
    output: str = "results"

    @pydantic.field_validator("degree")
    @classmethod
    def _degree_supported(cls, v):
        if v not in SUPPORTED_DEGREES:
            raise ValueError(f"degree must be one of {SUPPORTED_DEGREES}")
        return v

    @pydantic.field_validator("meshes", "modes")
    @classmethod
    def _positive_list(cls, v):
        if not v:
            raise ValueError("must not be empty")
        if any(k < 1 for k in v):
            raise ValueError("entries must be at least 1")
        return v

    @pydantic.field_validator("table_meshes")
    @classmethod
    def _table_meshes(cls, v):
        for p, meshes in v.items():
            if p not in SUPPORTED_DEGREES:
                raise ValueError(f"degree {p} is not supported")
            if not meshes or any(n < 2 or n % 2 for n in meshes):
                raise ValueError(f"table meshes for degree {p} must be even labels N >= 2")
        return v

    @pydantic.field_validator("alpha", "beta")
    @classmethod
    def _strength_positive(cls, v):
        if v <= 0:
            raise ValueError("Pöschl-Teller strengths must be positive")
        return v

    @pydantic.model_validator(mode="after")
    def _consistent(self):
        natural = problem_boundary(self.problem)
        if self.bc is not None and self.bc != natural:
            variant = BOUNDARY_VARIANTS.get((self.problem, self.bc))
            if variant is None:
                raise ValueError(f"problem '{self.problem}' is posed with {natural} conditions only, not {self.bc}")
            self.problem = variant
        self.bc = problem_boundary(self.problem)
        if self.gamma != 0.0 and self.problem == "schrodinger_poschl_teller":
            raise ValueError("gamma shift applies to Laplace problems only")
        if not self.rules:
            raise ValueError("at least one rule is required")
        return self

    @property
    def dims(self) -> int:
        return {"laplace_dirichlet_2d": 2, "laplace_dirichlet_3d": 3}.get(self.problem, 1)


def problem_boundary(problem: str) -> str:
    return "neumann" if problem == "laplace_neumann_1d" else "dirichlet"


class ConvergenceReport(pydantic.BaseModel):
    """Relative errors of one mode under one rule across meshes"""
    mode: Optional[int] = None
    rule: Optional[str] = None
    mesh_sizes: List[float]
    relative_errors: List[float]
    fitted_slope: Optional[float] = None
    pairwise_slopes: List[float] = []
    mesh_range: Optional[List[float]] = None  # [h_min, h_max] used by the fit
    leading_coefficient: Optional[float] = None
    excluded: List[float] = []                # mesh sizes dropped for zero error
    asymptotic_slope: Optional[float] = None   # slope over the resolved meshes only
    pre_asymptotic: List[float] = []          # mesh sizes left out of asymptotic_slope


class DispersionEstimate(pydantic.BaseModel):
    """Leading coefficient c in (λ_h-λ)/λ ≈ c Λ^power"""
    rule: str
    tau: Optional[float] = None
    exponent: int
    coefficient: float
    samples: List[float]       # error / Λ^power at each sampled Λ
    resolutions: List[float]   # sampled Λ = ωh
    converged: bool


class TauSweepReport(pydantic.BaseModel):
    """Leading coefficient sampled on a τ grid and its interpolated zero"""
    degree: int
    rule_pair: List[str]
    exponent: int
    taus: List[float]
    coefficients: List[float]
    tau_star: float


class CheckResult(pydantic.BaseModel):
    """Outcome of one acceptance criterion"""
    name: str
    passed: bool
    detail: str
