import argparse
import csv
import json
import logging
import math
import pathlib
import re
import sys
from typing import Any, Dict, List, Optional, Sequence, Tuple

import pydantic

from config import config
import errors
import experiments
import models

logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_CHECK = 4

RULE_KINDS = ("gauss", "lobatto", "optimal", "blend", "gauss_blend")
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")

# Values a command assumes when its config file leaves them out
COMMAND_DEFAULTS: Dict[str, Dict[str, Any]] = {
    "spectrum": {"problem": "laplace_neumann_1d", "meshes": [1000]},
    "convergence": {"problem": "laplace_neumann_1d", "modes": [2, 4, 8]},
    "schrodinger": {"problem": "schrodinger_poschl_teller", "modes": [1, 2, 4]},
    "dispersion": {"problem": "laplace_neumann_1d"},
    "grid3d": {"problem": "laplace_dirichlet_3d", "meshes": [16]},
}

SINGULAR_HINT = (
    "the coefficient was sampled where it is singular; Lobatto nodes sit on element end points, "
    "use a 'gauss_blend' rule, whose nodes stay inside the elements"
)


def _format(value) -> str:
    """CSV cell text; floats carry 16 significant digits"""
    if isinstance(value, float):
        if not math.isfinite(value):
            raise errors.NumericalError(f"non-finite value {value} in output")
        return f"{value:.15e}"
    return str(value)


def _write_csv(path: pathlib.Path, header: Sequence[str], rows: Sequence[Tuple]) -> pathlib.Path:
    cells = [[_format(v) for v in row] for row in rows]
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        w.writerows(cells)
    return path


def _write_json(path: pathlib.Path, payload: Dict[str, Any]) -> pathlib.Path:
    try:
        text = json.dumps(payload, indent=2, sort_keys=True, allow_nan=False)
    except ValueError as e:
        raise errors.NumericalError(f"non-finite value in {path.name}: {e}") from e
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text + "\n", encoding="utf-8")
    return path


def _file_label(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.=-]+", "_", label).strip("_")


def _describe_validation(e: pydantic.ValidationError) -> str:
    parts = []
    for err in e.errors():
        where = ".".join(str(part) for part in err["loc"]) or "<root>"
        parts.append(f"{where}: {err['msg']}")
    return "; ".join(parts)


def _read_config_file(path: str) -> Dict[str, Any]:
    try:
        text = pathlib.Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise errors.ConfigError(f"cannot read config file {path}: {e}") from e
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise errors.ConfigError(f"{path}: line {e.lineno}, column {e.colno}: {e.msg}") from e
    if not isinstance(data, dict):
        raise errors.ConfigError(f"{path}: top level must be a JSON object")
    return data


def _apply_rule_overrides(data: Dict[str, Any], rule: Optional[str], tau: Optional[float]):
    if rule is not None:
        selection = {"kind": rule}
        if tau is not None:
            selection["tau"] = tau
        data["rules"] = [selection]
        return
    if tau is None:
        return
    rules = [dict(r) for r in data.get("rules", [{"kind": "gauss"}, {"kind": "optimal"}])]
    blends = [r for r in rules if r.get("kind") in ("blend", "gauss_blend")]
    if blends:
        for r in blends:
            r["tau"] = tau
    else:
        rules.append({"kind": "blend", "tau": tau})
    data["rules"] = rules


def load_experiment(command: str, args: argparse.Namespace) -> models.ExperimentConfig:
    """
    Build the experiment of one command from its config file and flag overrides.

    Raises:
        errors.ConfigError: unreadable file, malformed JSON or invalid fields
    """
    data = _read_config_file(args.config) if args.config else {}
    for key, value in COMMAND_DEFAULTS[command].items():
        data.setdefault(key, value)
    data.setdefault("output", config.OUTPUT_DIR)

    if args.p is not None:
        data["degree"] = args.p
    if args.n is not None:
        data["meshes"] = [args.n]
    if args.bc is not None:
        data["bc"] = args.bc
    if args.out is not None:
        data["output"] = args.out
    _apply_rule_overrides(data, args.rule, args.tau)

    try:
        return models.ExperimentConfig.model_validate(data)
    except pydantic.ValidationError as e:
        raise errors.ConfigError(_describe_validation(e)) from e


def cmd_spectrum(runner: experiments.ExperimentRunner, out: pathlib.Path):
    result = runner.spectrum()
    written = [
        _write_csv(out / f"spectrum_{_file_label(label)}.csv", experiments.SPECTRUM_HEADER, rows)
        for label, rows in result.items()
    ]
    return result, written


def cmd_convergence(runner: experiments.ExperimentRunner, out: pathlib.Path):
    experiment = runner.experiment
    result = runner.convergence()
    written = [
        _write_csv(out / "convergence.csv", experiments.CONVERGENCE_HEADER, result.rows),
        _write_json(out / "convergence_slopes.json", {
            "problem": experiment.problem,
            "degree": experiment.degree,
            "reports": [r.model_dump() for r in result.reports],
        }),
    ]
    return result, written


def cmd_schrodinger(runner: experiments.ExperimentRunner, out: pathlib.Path):
    experiment = runner.experiment
    result = runner.schrodinger()
    written = [
        _write_csv(out / "schrodinger.csv", experiments.SCHRODINGER_HEADER, result.rows),
        _write_json(out / "schrodinger_blend.json", {
            "alpha": experiment.alpha,
            "beta": experiment.beta,
            "tau": {str(p): tau for p, tau in result.taus.items()},
        }),
    ]
    return result, written


def cmd_dispersion(runner: experiments.ExperimentRunner, out: pathlib.Path):
    result = runner.dispersion()
    return result, [_write_json(out / "dispersion.json", result)]


def cmd_grid3d(runner: experiments.ExperimentRunner, out: pathlib.Path):
    result = runner.grid3d()
    written = [
        _write_csv(out / f"grid3d_{_file_label(label)}.csv", experiments.GRID3D_HEADER, rows)
        for label, rows in result.items()
    ]
    return result, written


COMMANDS = {
    "spectrum": cmd_spectrum,
    "convergence": cmd_convergence,
    "schrodinger": cmd_schrodinger,
    "dispersion": cmd_dispersion,
    "grid3d": cmd_grid3d,
}


def run_command(command: str, experiment: models.ExperimentConfig,
                check: bool = False) -> Tuple[List[pathlib.Path], List[models.CheckResult]]:
    """
    Run one experiment and write its artifacts.

    Returns:
        Tuple of (written files, check results; empty unless `check`)
    """
    if command not in COMMANDS:
        raise ValueError(f"unknown command '{command}'")
    runner = experiments.ExperimentRunner(experiment)
    result, written = COMMANDS[command](runner, pathlib.Path(experiment.output))

    for path in written:
        logger.info(f"Wrote {path}")
    checks = runner.checks(command, result) if check else []
    return written, checks


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="iga-spectra",
        description="Eigenvalue studies of B-spline discretizations under blended quadrature.",
    )
    commands = parser.add_subparsers(dest="command", required=True)
    helps = {
        "spectrum": "full discrete spectrum against the exact one, one CSV per rule",
        "convergence": "relative eigenvalue errors over a mesh sweep with fitted slopes",
        "schrodinger": "Pöschl-Teller errors in the layout of the published table",
        "dispersion": "leading dispersion coefficients and the optional tau sweep",
        "grid3d": "(k, l, m) relative error grid of the 3D Dirichlet problem",
    }
    for name, text in helps.items():
        sub = commands.add_parser(name, help=text)
        sub.add_argument("--config", help="JSON experiment file")
        sub.add_argument("--p", type=int, help="spline degree")
        sub.add_argument("--n", type=int, help="number of elements, or of degrees of freedom for spectrum (replaces the mesh list)")
        sub.add_argument("--tau", type=float, help="blending parameter")
        sub.add_argument("--rule", choices=RULE_KINDS, help="single quadrature rule")
        sub.add_argument("--bc", choices=("dirichlet", "neumann"), help="boundary condition; switches the 1D Laplace problem between its variants")
        sub.add_argument("--out", help="output directory")
        sub.add_argument("--check", action="store_true", help="evaluate the acceptance checks")
        sub.add_argument("--log-level", type=str.upper, choices=LOG_LEVELS, default=config.LOG_LEVEL.upper())
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.getLogger().setLevel(args.log_level)

    try:
        experiment = load_experiment(args.command, args)
        written, checks = run_command(args.command, experiment, args.check)
    except errors.SingularCoefficientError as e:
        logger.error(f"Numerical failure: {e}")
        print(f"error: {e}\nhint: {SINGULAR_HINT}", file=sys.stderr)
        return EXIT_NUMERICAL
    except errors.NumericalError as e:
        logger.error(f"Numerical failure: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as e:
        # ConfigError and plain argument errors alike
        logger.error(f"Configuration error: {e}")
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    for path in written:
        print(f"Wrote: {path}")
    for result in checks:
        print(f"{'PASS' if result.passed else 'FAIL'} {result.name}: {result.detail}")
    if checks and not all(result.passed for result in checks):
        return EXIT_CHECK
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
