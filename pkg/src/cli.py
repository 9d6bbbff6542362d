"""Drivers behind the command line: verify, cone-check and solve."""

__author__ = "Krylov Torus contributors"
__copyright__ = "Copyright 2026, Krylov Torus contributors"
__license__ = "MIT"


import dataclasses
import logging
import os
import time
import typing

import numpy as np
import pandas as pd

import src.config as config
import src.krylov_op as krylov_op
import src.solver as solver
import src.torus as torus
import src.utils as utils
import src.verify as verify
from src.errors import ConeViolation, ConfigError, SuiteFailure

LOG_LEVEL = os.environ.get("LOG_LEVEL", "INFO")
logging.basicConfig(level=LOG_LEVEL)
LOGGER = logging.getLogger(__name__)

Report = dict[str, typing.Any]

REPORT_FILE = "report.json"
TIMINGS_FILE = "timings.json"
MAX_LISTED_NODES = 100
GAP_FACTOR = 5.0
FLOOR_GAP_TOLERANCE = 1e-12


def _coefficient(spec: torus.FourierSpec, grid: torus.TorusGrid) -> krylov_op.CoefficientValue:
    if not spec.modes:
        return spec.constant
    return torus.sample_fourier(spec, grid).values


def _is_constant(problem: config.ProblemConfig) -> bool:
    return (
        problem.manufactured is None
        and not problem.chi0_potential.modes
        and all(not spec.modes for spec in problem.alpha)
    )


def build_problem(problem: config.ProblemConfig) -> tuple[solver.Problem, torus.ScalarField | None]:
    """
    Turn the problem block into a solver Problem.

    Args:
    ----
        problem: Validated problem block.

    Returns:
    -------
        The Problem and, for manufactured runs, the centred intended solution.

    Raises:
    ------
        ConfigError: the coefficients violate the standing assumptions.

    """
    grid = torus.TorusGrid(problem.n, problem.N)
    chi0 = torus.background_field(grid, problem.chi0_matrix, problem.chi0_potential)
    alpha = [_coefficient(spec, grid) for spec in problem.alpha]

    u_star = None
    if problem.manufactured is not None:
        u_star = torus.sample_fourier(problem.manufactured.u_star, grid).centered()
        hessian = None
        if problem.manufactured.hessian == "analytic":
            hessian = torus.analytic_complex_hessian(problem.manufactured.u_star, grid)
        alpha.append(solver.manufactured_coefficients(u_star, chi0, alpha, hessian=hessian).values)

    try:
        coefficients = krylov_op.Coefficients(problem.n, problem.k, tuple(alpha), problem.floors)
    except ConfigError:
        raise
    except ValueError as error:
        raise ConfigError(f"Invalid coefficients: {error}") from error
    return solver.Problem(grid, chi0, coefficients), u_star


def _finish(target: str, report: Report, timings: dict[str, float]) -> None:
    utils.write_json(target, REPORT_FILE, report)
    utils.write_json(target, TIMINGS_FILE, timings)


def run_verify(settings: config.RunConfig) -> Report:
    """
    Run the property suites and write the report.

    Args:
    ----
        settings: The run configuration.

    Returns:
    -------
        The report.

    Raises:
    ------
        SuiteFailure: after the report is written, when any suite failed.

    """
    started = time.perf_counter()
    LOGGER.info("Verify run: seed %d, %d trials per suite", settings.seed, settings.trials)
    results = verify.run_suites(
        settings.seed,
        settings.trials,
        settings.suites.dimensions,
        settings.suites.inject_failure,
    )
    rows = [result.as_dict() for result in results]
    failing = sorted({result.name for result in results if not result.passed})
    report: Report = {
        "mode": "verify",
        "seed": settings.seed,
        "trials": settings.trials,
        "dimensions": [list(pair) for pair in settings.suites.dimensions],
        "suites": rows,
        "failing": failing,
        "passed": not failing,
    }

    frame = pd.DataFrame(rows, columns=["name", "n", "k", "cases", "worst_margin", "tolerance", "strict", "passed"])
    LOGGER.info("Suite outcomes per dimension:\n%s", utils.summarize(frame))
    utils.write_csv(settings.output.directory, "suites.csv", frame)
    _finish(settings.output.directory, report, {"total_seconds": time.perf_counter() - started})

    if failing:
        raise SuiteFailure(f"Failing suites: {', '.join(failing)}")
    return report


def run_cone_check(settings: config.RunConfig) -> Report:
    """
    Evaluate the cone condition of chi_0 against alpha at every node.

    Args:
    ----
        settings: The run configuration; needs a problem block.

    Returns:
    -------
        The report, when the minimum margin is strictly positive.

    Raises:
    ------
        ConeViolation: after the report is written, when chi_0 leaves
            Gamma_{k-1} (status precondition-failed) or a margin is not
            positive (status failed).

    """
    if settings.problem is None:
        raise ConfigError("cone-check needs a problem block")
    started = time.perf_counter()
    problem, _ = build_problem(settings.problem)
    chi0 = problem.chi0
    n = problem.grid.n
    report: Report = {"mode": "cone-check", "n": n, "k": problem.k, "N": problem.grid.N}

    flags = chi0.cone_flags(problem.k).reshape(-1)
    outside = np.flatnonzero(~flags)
    if outside.size:
        node = int(outside[0])
        report.update(
            {
                "status": "precondition-failed",
                "outside_count": int(outside.size),
                "outside_nodes": outside[:MAX_LISTED_NODES].tolist(),
            }
        )
        _finish(settings.output.directory, report, {"total_seconds": time.perf_counter() - started})
        raise ConeViolation(
            f"chi_0 leaves Gamma_{problem.k - 1} at {outside.size} nodes",
            node=node,
            eigenvalues=chi0.eigenvalues.reshape(-1, n)[node],
        )

    raw, normalized = krylov_op.cone_margins_batch(chi0.eigenvalues, krylov_op.KrylovPoint(problem.beta))
    per_node = np.min(raw, axis=-1).reshape(-1)
    failing = np.flatnonzero(per_node <= 0.0)
    minimum = float(np.min(per_node))
    report.update(
        {
            "status": "failed" if failing.size else "passed",
            "min_margin": minimum,
            "min_normalized_margin": float(np.nanmin(normalized)) if not np.all(np.isnan(normalized)) else None,
            "min_tau": float(np.min(krylov_op.uniform_slack(chi0.eigenvalues, problem.k))),
            "failing_count": int(failing.size),
            "failing_nodes": failing[:MAX_LISTED_NODES].tolist(),
        }
    )
    LOGGER.info("Cone check: minimum margin %.6e, %d failing nodes", minimum, failing.size)
    utils.write_csv(settings.output.directory, "chi0_eigenvalues.csv", torus.eigenvalue_frame(chi0, per_node))
    _finish(settings.output.directory, report, {"total_seconds": time.perf_counter() - started})

    if failing.size:
        node = int(failing[0])
        raise ConeViolation(
            f"Cone condition fails at {failing.size} nodes, minimum margin {minimum:.6e}",
            node=node,
            eigenvalues=chi0.eigenvalues.reshape(-1, n)[node],
        )
    return report


def run_solve(settings: config.RunConfig) -> Report:
    """
    Solve the equation along the continuity path and audit the result.

    Writes report.json, timings.json, path.csv, u.csv, chi.csv and chi_eigenvalues.csv.

    Args:
    ----
        settings: The run configuration; needs a problem block.

    Returns:
    -------
        The report.

    """
    if settings.problem is None:
        raise ConfigError("solve needs a problem block")
    target = settings.output.directory
    timings: dict[str, float] = {}
    started = time.perf_counter()
    problem, u_star = build_problem(settings.problem)
    coefficients = problem.coefficients
    timings["setup_seconds"] = time.perf_counter() - started

    if coefficients.floors is not None:
        floor_gap = torus.integral_condition_gap(problem.chi0, coefficients, use_floors=True)
        if floor_gap < -FLOOR_GAP_TOLERANCE:
            LOGGER.warning("Floor form of the integral condition is negative (%.3e); the equation may have no solution", floor_gap)

    phase = time.perf_counter()
    result = solver.homotopy_solve(problem, settings.homotopy)
    timings["homotopy_seconds"] = time.perf_counter() - phase

    phase = time.perf_counter()
    chi_u = torus.chi_field(problem.chi0, result.state.u)
    final_point = problem.point(problem.top(1.0, 2) + result.a_tilde)
    margins = solver.field_cone_margins(chi_u, final_point)
    folded = dataclasses.replace(coefficients, alpha=(*coefficients.alpha[:-1], coefficients.alpha[-1] + result.a), floors=None)
    gap = torus.integral_condition_gap(chi_u, folded, reference=problem.chi0)
    gap_tolerance = GAP_FACTOR * problem.grid.h**2

    report: Report = {
        "mode": "solve",
        "n": problem.grid.n,
        "k": problem.k,
        "N": problem.grid.N,
        "a": result.a,
        "a_tilde": result.a_tilde,
        "residual_linf": result.residual.linf,
        "residual_l2": result.residual.l2,
        "min_cone_margin": float(np.min(margins)),
        "extended_gamma": result.extended_gamma,
        "integral_gap": gap,
        "integral_gap_tolerance": gap_tolerance,
        "integral_gap_within_tolerance": abs(gap) <= gap_tolerance,
        "path": [dataclasses.asdict(record) for record in result.path],
        "artifacts": ["path.csv", "u.csv", "chi.csv", "chi_eigenvalues.csv", TIMINGS_FILE],
    }
    if u_star is not None:
        report["manufactured_error_linf"] = float(np.max(np.abs(result.state.u.values - u_star.values)))
    if _is_constant(settings.problem):
        report["constant_oracle_a"] = solver.constant_solution_constant(settings.problem.chi0_matrix, coefficients)
    if not report["integral_gap_within_tolerance"]:
        LOGGER.warning("Integral condition gap %.3e exceeds %.3e", gap, gap_tolerance)

    utils.write_csv(target, "path.csv", pd.DataFrame([dataclasses.asdict(record) for record in result.path]))
    utils.write_csv(target, "u.csv", torus.scalar_frame(result.state.u))
    utils.write_csv(target, "chi.csv", torus.hermitian_frame(chi_u))
    utils.write_csv(target, "chi_eigenvalues.csv", torus.eigenvalue_frame(chi_u, margins))
    timings["audit_seconds"] = time.perf_counter() - phase
    timings["total_seconds"] = time.perf_counter() - started
    _finish(target, report, timings)

    LOGGER.info(
        "Solve finished: a=%.6e, residual %.3e (RMS %.3e), minimum cone margin %.3e",
        result.a,
        result.residual.linf,
        result.residual.l2,
        report["min_cone_margin"],
    )
    return report


COMMANDS: dict[str, typing.Callable[[config.RunConfig], Report]] = {
    "verify": run_verify,
    "cone-check": run_cone_check,
    "solve": run_solve,
}
