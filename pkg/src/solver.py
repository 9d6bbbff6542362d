"""Damped Newton continuity solver for the Krylov equation on the flat torus.

The unknown constant is carried on the beta scale (a_tilde) and converted to
a = k/(n-k+1) * a_tilde at the end. Stage one moves the top coefficient from
gamma to alpha_tilde = max(alpha_{k-1}, gamma); stage two moves it on to the
target alpha_{k-1}.
"""

__author__ = "Krylov Torus contributors"
__copyright__ = "Copyright 2026, Krylov Torus contributors"
__license__ = "MIT"


import dataclasses
import functools
import itertools
import logging
import os
import typing

import numpy as np
import numpy.typing as npt
import scipy.optimize
import scipy.sparse
import scipy.sparse.linalg

import src.krylov_op as krylov_op
import src.spectral as spectral
import src.symfun as symfun
import src.torus as torus
from src.errors import ConeTrapped, ConeViolation, ConvergenceFailure, HomotopyFailure

LOG_LEVEL = os.environ.get("LOG_LEVEL", "INFO")
logging.basicConfig(level=LOG_LEVEL)
LOGGER = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.float64]
AxisPair = tuple[int, int]

START_TOLERANCE = 1e-12
MANUFACTURED_MARGIN = 1e-6
STAGNATION_WINDOW = 200
STAGNATION_FACTOR = 10.0


@dataclasses.dataclass(frozen=True)
class HomotopyPlan:
    """Step counts and tolerances of the continuity path."""

    stage1_steps: int = 10
    stage2_steps: int = 10
    newton_tol: float = 1e-10
    newton_max_iter: int = 30
    damping_floor: float = 1e-6
    linear_rtol: float = 1e-10
    gmres_restart: int = 50
    gmres_maxiter: int = 40
    direct_max_unknowns: int = 5000
    max_bisections: int = 1

    def __post_init__(self) -> None:
        """Range check every field."""
        for name in ("stage1_steps", "stage2_steps", "newton_max_iter", "gmres_restart", "gmres_maxiter"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")  # noqa: TRY003
        for name in ("newton_tol", "damping_floor", "linear_rtol"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")  # noqa: TRY003
        if self.damping_floor >= 1.0:
            raise ValueError("damping_floor must be below 1")  # noqa: TRY003
        if self.direct_max_unknowns < 0 or self.max_bisections < 0:
            raise ValueError("direct_max_unknowns and max_bisections must be non-negative")  # noqa: TRY003


@dataclasses.dataclass(frozen=True)
class PathFields:
    """Top coefficient fields of the continuity path, alpha scale."""

    gamma: FloatArray
    alpha_tilde: FloatArray
    target: FloatArray


def gamma_field(
    chi0: torus.HermitianField,
    c: krylov_op.Coefficients,
    extend: bool = False,
) -> tuple[torus.ScalarField, torus.ScalarField]:
    """
    The starting top coefficient gamma and alpha_tilde = max(alpha_{k-1}, gamma).

    Args:
    ----
        chi0: Background form.
        c: Coefficients sampled on the same grid (or constants).
        extend: Also subtract the l = 0 term, which makes (u=0, a=0) solve the
            stage one equation at t = 0 whenever alpha_0 is present.

    Returns:
    -------
        gamma and alpha_tilde as scalar fields.

    """
    grid = chi0.grid
    k = c.k
    sigmas = torus.normalized_sigmas(chi0)
    bottom = sigmas[..., k - 1]
    if np.any(bottom <= 0.0):
        node = int(np.argmin(bottom.reshape(-1)))
        raise ConeViolation(
            f"sigma_{k - 1}(chi_0) is not positive",
            node=node,
            eigenvalues=chi0.eigenvalues.reshape(-1, grid.n)[node],
        )
    top = sigmas[..., k]
    for l in range(0 if extend else 1, k - 1):  # noqa: E741
        top = top - c.alpha[l] * sigmas[..., l]
    gamma = np.broadcast_to(top / bottom, grid.shape)
    tilde = np.maximum(np.broadcast_to(c.alpha[k - 1], grid.shape), gamma)
    return torus.ScalarField(grid, gamma), torus.ScalarField(grid, tilde)


@dataclasses.dataclass(frozen=True)
class Problem:
    """Grid, background form and coefficients of one solve."""

    grid: torus.TorusGrid
    chi0: torus.HermitianField
    coefficients: krylov_op.Coefficients
    extend_gamma: bool = False

    def __post_init__(self) -> None:
        """Check that everything lives on the same grid."""
        if self.chi0.grid != self.grid:
            raise ValueError("chi_0 lives on a different grid")  # noqa: TRY003
        if self.coefficients.n != self.grid.n:
            raise ValueError("Coefficient dimension does not match the grid")  # noqa: TRY003
        for value in self.coefficients.alpha:
            try:
                np.broadcast_to(value, self.grid.shape)
            except ValueError as error:
                raise ValueError("Coefficient fields do not match the grid") from error  # noqa: TRY003

    @property
    def k(self) -> int:
        """Operator degree."""
        return self.coefficients.k

    @property
    def top_factor(self) -> float:
        """C_n^k / C_n^{k-1} = (n-k+1)/k."""
        return float(krylov_op.beta_factor(self.grid.n, self.k, self.k - 1))

    @functools.cached_property
    def beta(self) -> FloatArray:
        """Beta coefficients on the grid, trailing axis k."""
        point = krylov_op.betas_from_alphas(self.coefficients)
        return np.broadcast_to(point.beta, (*self.grid.shape, self.k)).copy()

    @functools.cached_property
    def path(self) -> PathFields:
        """Top coefficients along the path."""
        gamma, tilde = gamma_field(self.chi0, self.coefficients, extend=self.extend_gamma)
        target = np.broadcast_to(self.coefficients.alpha[-1], self.grid.shape)
        return PathFields(gamma=gamma.values, alpha_tilde=tilde.values, target=np.array(target))

    @property
    def beta_scale(self) -> float:
        """Magnitude of the coefficients on the beta scale."""
        path = self.path
        tops = np.concatenate([path.gamma.ravel(), path.alpha_tilde.ravel(), path.target.ravel()])
        return float(max(np.max(np.abs(self.beta)), self.top_factor * np.max(np.abs(tops))))

    def point(self, top: FloatArray) -> krylov_op.KrylovPoint:
        """KrylovPoint on the grid with the given beta_{k-1} field."""
        beta = self.beta.copy()
        beta[..., -1] = top
        return krylov_op.KrylovPoint(beta)

    def top(self, t: float, stage: int) -> FloatArray:
        """beta_{k-1} along the path at parameter t of the given stage."""
        path = self.path
        if stage == 1:
            alpha = (1.0 - t) * path.gamma + t * path.alpha_tilde
        else:
            alpha = (1.0 - t) * path.alpha_tilde + t * path.target
        return self.top_factor * alpha

    def validate(self) -> None:
        """
        Check that chi_0 is in Gamma_{k-1} and satisfies the cone condition for alpha.

        Raises
        ------
            ConeViolation: at the first failing node.

        """
        flags = self.chi0.cone_flags(self.k)
        if not np.all(flags):
            node = int(np.flatnonzero(~flags.reshape(-1))[0])
            raise ConeViolation(
                f"chi_0 leaves Gamma_{self.k - 1}",
                node=node,
                eigenvalues=self.chi0.eigenvalues.reshape(-1, self.grid.n)[node],
            )
        margins = field_cone_margins(self.chi0, krylov_op.KrylovPoint(self.beta))
        if not np.all(margins > 0.0):
            node = int(np.argmin(margins.reshape(-1)))
            raise ConeViolation(
                f"chi_0 fails the cone condition, minimum margin {float(np.min(margins)):.3e}",
                node=node,
                eigenvalues=self.chi0.eigenvalues.reshape(-1, self.grid.n)[node],
            )


def field_cone_margins(chi: torus.HermitianField, p: krylov_op.KrylovPoint) -> FloatArray:
    """Minimum strict cone margin over deleted indices, per node."""
    raw, _ = krylov_op.cone_margins_batch(chi.eigenvalues, p)
    return np.min(raw, axis=-1)


@dataclasses.dataclass(frozen=True)
class SolverState:
    """Potential, constant and position on the continuity path."""

    u: torus.ScalarField
    a_tilde: float = 0.0
    t: float = 0.0
    stage: int = 1

    def __post_init__(self) -> None:
        """Validate the path position."""
        if self.stage not in (1, 2):
            raise ValueError(f"Unknown stage {self.stage}")  # noqa: TRY003
        if not 0.0 <= self.t <= 1.0:
            raise ValueError(f"Path parameter t={self.t} outside [0, 1]")  # noqa: TRY003

    @classmethod
    def start(cls, grid: torus.TorusGrid) -> "SolverState":
        """The exact stage one state at t = 0."""
        return cls(torus.ScalarField.zeros(grid))


@dataclasses.dataclass(frozen=True)
class Residual:
    """Residual field and its norms."""

    field: torus.ScalarField
    linf: float
    l2: float


@dataclasses.dataclass(frozen=True)
class _Evaluation:
    chi: torus.HermitianField
    point: krylov_op.KrylovPoint
    residual: Residual


def _norms(field: torus.ScalarField) -> Residual:
    values = field.values
    return Residual(field, float(np.max(np.abs(values))), float(np.sqrt(np.mean(values**2))))


def _evaluate(state: SolverState, problem: Problem, chi: torus.HermitianField | None = None) -> _Evaluation:
    field = torus.chi_field(problem.chi0, state.u) if chi is None else chi
    top = problem.top(state.t, state.stage)
    point = problem.point(top + state.a_tilde)
    value = krylov_op.f_value(field.eigenvalues, point)
    r = torus.ScalarField(problem.grid, value - top - state.a_tilde)
    return _Evaluation(field, point, _norms(r))


def residual(state: SolverState, problem: Problem) -> Residual:
    """
    Residual of the discrete equation at the state's path position.

    Args:
    ----
        state: Current iterate.
        problem: The problem.

    Returns:
    -------
        r = f(lambda(chi_u)) - beta_{k-1}(t) - a_tilde with its max and RMS norms.

    Raises:
    ------
        ConeViolation: chi_u leaves Gamma_{k-1} at some node.

    """
    return _evaluate(state, problem).residual


def operator_coefficients(derivative: npt.NDArray[np.complex128]) -> dict[AxisPair, FloatArray]:
    """
    Coefficients of Re tr(G . H(v)) per sorted real axis pair.

    Args:
    ----
        derivative: The matrix derivative G at every node, shape (..., n, n).

    Returns:
    -------
        Mapping (a, b) -> c_ab with L v = sum c_ab D_ab v.

    """
    n = derivative.shape[-1]
    coefficients: dict[AxisPair, FloatArray] = {}

    def add(a: int, b: int, value: FloatArray) -> None:
        key = (min(a, b), max(a, b))
        coefficients[key] = coefficients.get(key, 0.0) + value

    for i, j in itertools.product(range(n), repeat=2):
        xi, yi, xj, yj = 2 * i, 2 * i + 1, 2 * j, 2 * j + 1
        real = 0.25 * derivative[..., i, j].real
        imag = 0.25 * derivative[..., i, j].imag
        add(xi, xj, real)
        add(yi, yj, real)
        add(xi, yj, imag)
        add(yi, xj, -imag)
    return coefficients


def linearized_coefficients(state: SolverState, problem: Problem) -> dict[AxisPair, FloatArray]:
    """Coefficients of the linearised operator at the state."""
    evaluation = _evaluate(state, problem)
    chi = evaluation.chi
    gradient = krylov_op.f_grad(chi.eigenvalues, evaluation.point)
    return operator_coefficients(_matrix_derivative(chi, gradient))


def _matrix_derivative(chi: torus.HermitianField, gradient: FloatArray) -> npt.NDArray[np.complex128]:
    frames = chi.frames
    return np.einsum("...ip,...p,...jp->...ij", frames, gradient, frames.conj())


def apply_operator(coefficients: dict[AxisPair, FloatArray], values: FloatArray, grid: torus.TorusGrid) -> FloatArray:
    """L v for a field v given on the grid."""
    total = np.zeros(grid.shape)
    for (a, b), c in coefficients.items():
        total = total + c * torus.second_difference(values, grid, a, b)
    return total


def _stencil(a: int, b: int, h: float) -> list[tuple[dict[int, int], float]]:
    if a == b:
        weight = 1.0 / h**2
        return [({a: 1}, weight), ({}, -2.0 * weight), ({a: -1}, weight)]
    weight = 1.0 / (4.0 * h**2)
    return [
        ({a: 1, b: 1}, weight),
        ({a: 1, b: -1}, -weight),
        ({a: -1, b: 1}, -weight),
        ({a: -1, b: -1}, weight),
    ]


def assemble_operator(coefficients: dict[AxisPair, FloatArray], grid: torus.TorusGrid) -> scipy.sparse.csc_matrix:
    """
    Assemble the bordered system [[L, -1], [mean, 0]] as a sparse matrix.

    Args:
    ----
        coefficients: Output of operator_coefficients.
        grid: The grid.

    Returns:
    -------
        Sparse matrix of size (nodes + 1) square.

    """
    size = grid.size
    index = np.arange(size).reshape(grid.shape)
    rows, cols, data = [], [], []
    for (a, b), c in coefficients.items():
        field = np.broadcast_to(c, grid.shape).reshape(-1)
        for shift, weight in _stencil(a, b, grid.h):
            neighbour = index
            for axis, step in shift.items():
                neighbour = np.roll(neighbour, -step, axis=axis)
            rows.append(np.arange(size))
            cols.append(neighbour.reshape(-1))
            data.append(weight * field)
    rows.append(np.arange(size))
    cols.append(np.full(size, size))
    data.append(-np.ones(size))
    rows.append(np.full(size, size))
    cols.append(np.arange(size))
    data.append(np.full(size, 1.0 / size))
    matrix = scipy.sparse.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(size + 1, size + 1),
    )
    return matrix.tocsc()


def laplacian_symbol(grid: torus.TorusGrid) -> FloatArray:
    """Fourier symbol of the periodic discrete Laplacian sum_a D_aa."""
    theta = 2.0 * np.pi * np.fft.fftfreq(grid.N)
    one_axis = (2.0 * np.cos(theta) - 2.0) / grid.h**2
    symbol = np.zeros(grid.shape)
    for axis in range(grid.ndim):
        shape = [1] * grid.ndim
        shape[axis] = grid.N
        symbol = symbol + one_axis.reshape(shape)
    return symbol


@dataclasses.dataclass(frozen=True)
class LinearStats:
    """How a linearised system was solved."""

    method: str
    iterations: int
    relative_residual: float


class _Stagnation(Exception):  # noqa: N818 internal control flow
    pass


def solve_linearized(
    coefficients: dict[AxisPair, FloatArray],
    rhs: FloatArray,
    grid: torus.TorusGrid,
    plan: HomotopyPlan,
) -> tuple[FloatArray, float, LinearStats]:
    """
    Solve L v - da = rhs with mean(v) = 0.

    Small systems go through a sparse LU factorisation; larger ones through
    restarted GMRES preconditioned by the scaled inverse periodic Laplacian.

    Args:
    ----
        coefficients: Output of operator_coefficients.
        rhs: Right hand side on the grid.
        grid: The grid.
        plan: Tolerances and solver limits.

    Returns:
    -------
        v, da and the solve statistics.

    Raises:
    ------
        ConvergenceFailure: GMRES stagnates or runs out of iterations.

    """
    size = grid.size
    b = np.concatenate([np.asarray(rhs, dtype=np.float64).reshape(-1), [0.0]])
    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0:
        return np.zeros(grid.shape), 0.0, LinearStats("trivial", 0, 0.0)

    def matvec(x: FloatArray) -> FloatArray:
        v = x[:size].reshape(grid.shape)
        top = apply_operator(coefficients, v, grid).reshape(-1) - x[size]
        return np.concatenate([top, [np.mean(v)]])

    if size + 1 <= plan.direct_max_unknowns:
        solution = scipy.sparse.linalg.splu(assemble_operator(coefficients, grid)).solve(b)
        method, iterations = "direct", 1
    else:
        trace = sum(coefficients[(a, a)] for a in range(0, grid.ndim, 2)) * 4.0 / grid.n
        scale = float(np.mean(trace)) / 4.0
        symbol = scale * laplacian_symbol(grid)
        symbol.reshape(-1)[0] = 1.0

        def precondition(y: FloatArray) -> FloatArray:
            y_v = y[:size].reshape(grid.shape)
            shift = float(np.mean(y_v))
            transformed = np.fft.fftn(y_v - shift) / symbol
            transformed.reshape(-1)[0] = 0.0
            v = np.fft.ifftn(transformed).real + y[size]
            return np.concatenate([v.reshape(-1), [-shift]])

        operator = scipy.sparse.linalg.LinearOperator((size + 1, size + 1), matvec=matvec, dtype=np.float64)
        preconditioner = scipy.sparse.linalg.LinearOperator((size + 1, size + 1), matvec=precondition, dtype=np.float64)
        history: list[float] = []

        def monitor(norm: float) -> None:
            history.append(float(norm))
            if len(history) > STAGNATION_WINDOW and history[-1] > history[-1 - STAGNATION_WINDOW] / STAGNATION_FACTOR:
                raise _Stagnation

        try:
            solution, info = scipy.sparse.linalg.gmres(
                operator,
                b,
                rtol=plan.linear_rtol,
                restart=plan.gmres_restart,
                maxiter=plan.gmres_maxiter,
                M=preconditioner,
                callback=monitor,
                callback_type="pr_norm",
            )
        except _Stagnation as error:
            raise ConvergenceFailure(f"GMRES stagnated after {len(history)} iterations") from error
        if info != 0:
            raise ConvergenceFailure(f"GMRES did not converge (info={info})")
        method, iterations = "gmres", len(history)

    relative = float(np.linalg.norm(matvec(solution) - b)) / b_norm
    LOGGER.debug("Linear solve via %s: %d iterations, relative residual %.3e", method, iterations, relative)
    return solution[:size].reshape(grid.shape), float(solution[size]), LinearStats(method, iterations, relative)


@dataclasses.dataclass(frozen=True)
class NewtonStep:
    """A Newton direction for (u, a_tilde)."""

    v: torus.ScalarField
    da: float
    stats: LinearStats


def newton_step(state: SolverState, problem: Problem, plan: HomotopyPlan | None = None) -> NewtonStep:
    """
    Linearise at the state and solve for the Newton direction.

    Args:
    ----
        state: Current iterate.
        problem: The problem.
        plan: Linear solver settings; defaults to HomotopyPlan().

    Returns:
    -------
        The mean zero correction v, the constant correction da and solve statistics.

    """
    settings = HomotopyPlan() if plan is None else plan
    evaluation = _evaluate(state, problem)
    gradient = krylov_op.f_grad(evaluation.chi.eigenvalues, evaluation.point)
    coefficients = operator_coefficients(_matrix_derivative(evaluation.chi, gradient))
    v, da, stats = solve_linearized(coefficients, -evaluation.residual.field.values, problem.grid, settings)
    return NewtonStep(torus.ScalarField(problem.grid, v - np.mean(v)), da, stats)


def _advance(state: SolverState, step: NewtonStep, s: float) -> SolverState:
    u = torus.ScalarField(state.u.grid, state.u.values + s * step.v.values).centered()
    return dataclasses.replace(state, u=u, a_tilde=state.a_tilde + s * step.da)


def _line_search(
    state: SolverState,
    step: NewtonStep,
    problem: Problem,
    plan: HomotopyPlan,
    current: Residual,
    tolerance: float,
) -> tuple[SolverState, Residual, float]:
    if not np.any(step.v.values) and step.da == 0.0:
        return state, current, 1.0
    s = 1.0
    diagnostic = "no candidate evaluated"
    while s >= plan.damping_floor:
        candidate = _advance(state, step, s)
        chi = torus.chi_field(problem.chi0, candidate.u)
        flags = chi.cone_flags(problem.k)
        if not np.all(flags):
            node = int(np.flatnonzero(~flags.reshape(-1))[0])
            diagnostic = f"node {node} leaves Gamma_{problem.k - 1}, eigenvalues {chi.eigenvalues.reshape(-1, problem.grid.n)[node].tolist()}"
            LOGGER.debug("Step %.3e leaves the cone at node %d", s, node)
        else:
            trial = _evaluate(candidate, problem, chi=chi).residual
            if trial.l2 <= (1.0 - s / 4.0) * current.l2 or trial.linf <= tolerance:
                LOGGER.debug("Accepted step %.3e, residual %.3e", s, trial.linf)
                return candidate, trial, s
            worst = int(np.argmax(np.abs(trial.field.values.reshape(-1))))
            diagnostic = f"no sufficient decrease, worst node {worst} residual {trial.linf:.3e}"
        s *= 0.5
    raise ConeTrapped(f"Line search fell below the damping floor {plan.damping_floor}: {diagnostic}")


def damped_update(
    state: SolverState,
    step: NewtonStep,
    problem: Problem,
    plan: HomotopyPlan | None = None,
) -> SolverState:
    """
    Backtrack along a Newton direction until the cone holds and the residual drops.

    Args:
    ----
        state: Current iterate.
        step: Output of newton_step.
        problem: The problem.
        plan: Damping floor and tolerances; defaults to HomotopyPlan().

    Returns:
    -------
        The accepted state, re-centred to mean zero.

    Raises:
    ------
        ConeTrapped: No step above the damping floor is acceptable.

    """
    settings = HomotopyPlan() if plan is None else plan
    current = residual(state, problem)
    tolerance = newton_tolerance(problem, settings)
    return _line_search(state, step, problem, settings, current, tolerance)[0]


def newton_tolerance(problem: Problem, plan: HomotopyPlan) -> float:
    """Residual L-infinity target, scaled by the size of the coefficients."""
    return plan.newton_tol * (1.0 + problem.beta_scale)


@dataclasses.dataclass(frozen=True)
class NewtonResult:
    """Converged state and the residual history of a Newton solve."""

    state: SolverState
    residual: Residual
    iterations: int
    history: tuple[float, ...]


def newton_solve(state: SolverState, problem: Problem, plan: HomotopyPlan) -> NewtonResult:
    """
    Damped Newton iteration at a fixed path position.

    Args:
    ----
        state: Starting iterate, already at the target t and stage.
        problem: The problem.
        plan: Iteration limits and tolerances.

    Returns:
    -------
        The converged NewtonResult.

    Raises:
    ------
        ConvergenceFailure: The iteration budget is exhausted.

    """
    tolerance = newton_tolerance(problem, plan)
    current = residual(state, problem)
    history = [current.linf]
    for iteration in range(plan.newton_max_iter + 1):
        if current.linf <= tolerance:
            return NewtonResult(state, current, iteration, tuple(history))
        if iteration == plan.newton_max_iter:
            break
        step = newton_step(state, problem, plan)
        state, current, s = _line_search(state, step, problem, plan, current, tolerance)
        history.append(current.linf)
        LOGGER.debug("Newton iteration %d: residual %.3e, step %.3e", iteration + 1, current.linf, s)
    raise ConvergenceFailure(
        f"Newton did not converge in {plan.newton_max_iter} iterations (residual {current.linf:.3e})"
    )


@dataclasses.dataclass(frozen=True)
class PathRecord:
    """Diagnostics of one accepted step of the continuity path."""

    stage: int
    t: float
    newton_iterations: int
    residual_linf: float
    min_cone_margin: float
    min_sigma_k_minus_1: float
    min_grad_sum: float
    a_tilde: float


@dataclasses.dataclass(frozen=True)
class HomotopyResult:
    """Outcome of a full continuity solve."""

    state: SolverState
    a: float
    a_tilde: float
    residual: Residual
    path: tuple[PathRecord, ...]
    extended_gamma: bool


def _record(result: NewtonResult, problem: Problem) -> PathRecord:
    state = result.state
    evaluation = _evaluate(state, problem)
    eigenvalues = evaluation.chi.eigenvalues
    gradient = krylov_op.f_grad(eigenvalues, evaluation.point)
    return PathRecord(
        stage=state.stage,
        t=state.t,
        newton_iterations=result.iterations,
        residual_linf=result.residual.linf,
        min_cone_margin=float(np.min(field_cone_margins(evaluation.chi, evaluation.point))),
        min_sigma_k_minus_1=float(np.min(symfun.sigma(eigenvalues, problem.k - 1))),
        min_grad_sum=float(np.min(np.sum(gradient, axis=-1))),
        a_tilde=state.a_tilde,
    )


def _solve_segment(
    state: SolverState,
    t: float,
    problem: Problem,
    plan: HomotopyPlan,
    records: list[PathRecord],
    depth: int = 0,
) -> SolverState:
    target = dataclasses.replace(state, t=t)
    try:
        result = newton_solve(target, problem, plan)
    except (ConvergenceFailure, ConeViolation) as error:
        if depth >= plan.max_bisections:
            raise HomotopyFailure(
                f"Continuity path failed at stage {state.stage}, t={t:.6f}: {error}",
                last_good_state=state,
            ) from error
        middle = 0.5 * (state.t + t)
        LOGGER.warning("Newton failed at stage %d t=%.6f, bisecting at t=%.6f", state.stage, t, middle)
        halfway = _solve_segment(state, middle, problem, plan, records, depth + 1)
        return _solve_segment(halfway, t, problem, plan, records, depth + 1)
    record = _record(result, problem)
    records.append(record)
    LOGGER.info(
        "Stage %d t=%.4f: %d Newton iterations, residual %.3e, min cone margin %.3e, a_tilde %.6e",
        record.stage,
        record.t,
        record.newton_iterations,
        record.residual_linf,
        record.min_cone_margin,
        record.a_tilde,
    )
    return result.state


def _check_start(problem: Problem) -> Problem:
    start = residual(SolverState.start(problem.grid), problem)
    if start.linf <= START_TOLERANCE * (1.0 + problem.beta_scale):
        return problem
    if problem.extend_gamma:
        raise ConvergenceFailure(f"Stage one start is not exact (residual {start.linf:.3e})")
    LOGGER.warning(
        "Stage one start residual %.3e with gamma summed from l=1; including the l=0 term in gamma",
        start.linf,
    )
    extended = dataclasses.replace(problem, extend_gamma=True)
    return _check_start(extended)


def homotopy_solve(problem: Problem, plan: HomotopyPlan | None = None) -> HomotopyResult:
    """
    Follow both continuity stages from the exact start to the target equation.

    Args:
    ----
        problem: The problem; its cone condition is checked first.
        plan: Step counts and tolerances; defaults to HomotopyPlan().

    Returns:
    -------
        The final state, a = k/(n-k+1) * a_tilde and per-step diagnostics.

    Raises:
    ------
        ConeViolation: chi_0 fails the cone condition for alpha or for the path.
        HomotopyFailure: Newton fails at some t even after bisection.

    """
    settings = HomotopyPlan() if plan is None else plan
    problem.validate()
    problem = _check_start(problem)

    widest = problem.point(problem.top_factor * problem.path.alpha_tilde)
    path_margin = field_cone_margins(problem.chi0, widest)
    if not np.all(path_margin > 0.0):
        node = int(np.argmin(path_margin.reshape(-1)))
        raise ConeViolation(
            f"chi_0 fails the cone condition for the path coefficient alpha_tilde (margin {float(np.min(path_margin)):.3e})",
            node=node,
            eigenvalues=problem.chi0.eigenvalues.reshape(-1, problem.grid.n)[node],
        )

    LOGGER.info(
        "Continuity solve: n=%d, k=%d, N=%d, %d + %d steps",
        problem.grid.n,
        problem.k,
        problem.grid.N,
        settings.stage1_steps,
        settings.stage2_steps,
    )
    records: list[PathRecord] = []
    state = SolverState.start(problem.grid)
    for stage, steps in ((1, settings.stage1_steps), (2, settings.stage2_steps)):
        state = dataclasses.replace(state, t=0.0, stage=stage)
        for t in np.linspace(0.0, 1.0, steps + 1)[1:]:
            state = _solve_segment(state, float(t), problem, settings, records)

    final = residual(state, problem)
    a = state.a_tilde / problem.top_factor
    LOGGER.info("Continuity solve finished: a=%.6e, residual %.3e", a, final.linf)
    return HomotopyResult(
        state=state,
        a=a,
        a_tilde=state.a_tilde,
        residual=final,
        path=tuple(records),
        extended_gamma=problem.extend_gamma,
    )


def manufactured_coefficients(
    u_star: torus.ScalarField,
    chi0: torus.HermitianField,
    lower: typing.Sequence[krylov_op.CoefficientValue],
    hessian: torus.HermitianField | None = None,
) -> torus.ScalarField:
    """
    alpha_{k-1} for which u_star solves the equation with a = 0.

    Args:
    ----
        u_star: The intended solution.
        chi0: Background form.
        lower: alpha_0 ... alpha_{k-2}, which fixes k.
        hessian: Complex Hessian of u_star to build chi from; defaults to the
            discrete one, which makes u_star an exact discrete solution.

    Returns:
    -------
        The top coefficient field.

    Raises:
    ------
        ConeViolation: chi_{u_star} is not inside Gamma_{k-1} with margin.

    """
    grid = u_star.grid
    n = grid.n
    k = len(lower) + 1
    ddbar = torus.complex_hessian(u_star) if hessian is None else hessian
    chi = torus.HermitianField(grid, chi0.entries + ddbar.entries)
    shifted = chi.eigenvalues - MANUFACTURED_MARGIN
    mask = symfun.gamma_mask(shifted, k - 1)
    if not np.all(mask):
        node = int(np.flatnonzero(~mask.reshape(-1))[0])
        raise ConeViolation(
            f"chi of the manufactured solution is not inside Gamma_{k - 1} with margin {MANUFACTURED_MARGIN}",
            node=node,
            eigenvalues=chi.eigenvalues.reshape(-1, n)[node],
        )
    coefficients = krylov_op.Coefficients(n, k, (*lower, 0.0))
    point = krylov_op.betas_from_alphas(coefficients)
    beta = np.broadcast_to(point.beta, (*grid.shape, k))
    value = krylov_op.f_value(chi.eigenvalues, krylov_op.KrylovPoint(beta))
    factor = float(krylov_op.beta_factor(n, k, k - 1))
    return torus.ScalarField(grid, np.broadcast_to(value / factor, grid.shape))


def constant_solution_constant(
    matrix: npt.ArrayLike,
    coefficients: krylov_op.Coefficients,
) -> float:
    """
    The constant a for which u = 0 solves the equation with constant data.

    Root of sigma_k - sum_{l<=k-2} beta_l sigma_l - (beta_{k-1} + a_tilde) sigma_{k-1}
    in a_tilde, converted to a.

    Args:
    ----
        matrix: The constant background form.
        coefficients: Constant coefficients.

    Returns:
    -------
        a on the alpha scale.

    """
    eigenvalues = spectral.eig_hermitian(spectral.HermitianForm(np.asarray(matrix))).eigenvalues
    point = krylov_op.betas_from_alphas(coefficients)
    beta = point.beta
    sigmas = symfun.elementary_all(eigenvalues)
    k = coefficients.k
    lower = sum(beta[l] * sigmas[l] for l in range(k - 1))

    def mismatch(a_tilde: float) -> float:
        return float(sigmas[k] - lower - (beta[k - 1] + a_tilde) * sigmas[k - 1])

    bracket = 1.0 + abs(float(sigmas[k] - lower) / float(sigmas[k - 1])) + abs(float(beta[k - 1]))
    a_tilde = scipy.optimize.brentq(mismatch, -bracket, bracket, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return float(a_tilde) / float(krylov_op.beta_factor(coefficients.n, k, k - 1))
