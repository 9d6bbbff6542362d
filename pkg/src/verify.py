"""Randomised property suites for the symmetric function and operator calculus.

Each suite draws a batch of seeded samples, evaluates a margin per sample and
passes when the worst margin clears its tolerance. Margins are oriented so
that larger is better; residual style checks report the negated residual.
"""

__author__ = "Krylov Torus contributors"
__copyright__ = "Copyright 2026, Krylov Torus contributors"
__license__ = "MIT"


import collections.abc
import dataclasses
import itertools
import logging
import math
import os

import numpy as np
import numpy.typing as npt

import src.krylov_op as krylov_op
import src.spectral as spectral
import src.symfun as symfun

LOG_LEVEL = os.environ.get("LOG_LEVEL", "INFO")
logging.basicConfig(level=LOG_LEVEL)
LOGGER = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.float64]

SAMPLE_LOW = -1.0
SAMPLE_HIGH = 3.0
MAX_REJECTION_ROUNDS = 1000
FD_STEP = 1e-6
SECOND_FD_STEP = 1e-4
COLLISION_GAP = 1e-2
INTERIOR_SLACK = 0.05
CHARPOLY_MAX_N = 6
SUBSET_MAX_N = 10
DEFAULT_DIMENSIONS: tuple[tuple[int, int], ...] = ((3, 2), (4, 2), (4, 3), (5, 3))


@dataclasses.dataclass(frozen=True)
class SuiteResult:
    """Outcome of one suite at one (n, k)."""

    name: str
    n: int
    k: int
    cases: int
    worst_margin: float
    tolerance: float
    strict: bool = False

    @property
    def passed(self) -> bool:
        """Whether the worst margin clears the tolerance."""
        if self.strict:
            return self.worst_margin > 0.0
        return self.worst_margin >= -self.tolerance

    def as_dict(self) -> dict[str, object]:
        """Report form."""
        return {
            "name": self.name,
            "n": self.n,
            "k": self.k,
            "cases": self.cases,
            "worst_margin": self.worst_margin,
            "tolerance": self.tolerance,
            "strict": self.strict,
            "passed": self.passed,
        }


@dataclasses.dataclass(frozen=True)
class _Outcome:
    margins: FloatArray
    tolerance: float
    strict: bool = False


Suite = collections.abc.Callable[[np.random.Generator, int, int, int], _Outcome | None]


def uniform_spectra(rng: np.random.Generator, trials: int, n: int) -> FloatArray:
    """Spectra drawn uniformly from [-1, 3]^n."""
    return rng.uniform(SAMPLE_LOW, SAMPLE_HIGH, size=(trials, n))


def cone_spectra(rng: np.random.Generator, trials: int, n: int, k: int) -> FloatArray:
    """
    Rejection sample spectra from [-1, 3]^n restricted to Gamma_k.

    Args:
    ----
        rng: Seeded generator.
        trials: Number of samples wanted.
        n: Length of each spectrum.
        k: Cone index.

    Returns:
    -------
        Array of shape (trials, n).

    """
    accepted: list[FloatArray] = []
    count = 0
    for _ in range(MAX_REJECTION_ROUNDS):
        if count >= trials:
            break
        batch = uniform_spectra(rng, max(trials, 64), n)
        keep = batch[symfun.gamma_mask(batch, k)]
        accepted.append(keep)
        count += keep.shape[0]
    else:
        if count < trials:
            raise RuntimeError(f"Rejection sampling of Gamma_{k} in dimension {n} stalled")  # noqa: TRY003
    return np.concatenate(accepted)[:trials]


def random_beta(rng: np.random.Generator, trials: int, k: int, floor: float = 0.0) -> FloatArray:
    """Non-negative beta_0 ... beta_{k-2} and a signed beta_{k-1}."""
    lower = rng.uniform(0.0, 2.0, size=(trials, k - 1))
    if floor > 0.0:
        deficit = np.maximum(floor - lower.sum(axis=-1), 0.0)
        lower[:, 0] += deficit
    top = rng.uniform(-2.0, 2.0, size=(trials, 1))
    return np.concatenate([lower, top], axis=-1)


def _scale(values: FloatArray) -> FloatArray:
    return 1.0 + np.max(np.abs(symfun.elementary_all(values)), axis=-1)


def _subset_oracle(rng: np.random.Generator, trials: int, n: int, k: int) -> _Outcome | None:
    if n > SUBSET_MAX_N:
        return None
    values = uniform_spectra(rng, trials, n)
    table = symfun.elementary_all(values)
    margins = []
    for degree in range(n + 1):
        scale = 1.0 + symfun.subset_oracle(np.abs(values), degree)
        margins.append(-np.abs(table[:, degree] - symfun.subset_oracle(values, degree)) / scale)
    return _Outcome(np.min(np.stack(margins), axis=0), 1e-12)


def _charpoly_oracle(rng: np.random.Generator, trials: int, n: int, k: int) -> _Outcome | None:
    if n > CHARPOLY_MAX_N:
        return None
    matrices = spectral.random_hermitian(rng, n, (trials,))
    eigenvalues, _ = spectral.eig_hermitian_batch(matrices)
    via_eigen = symfun.elementary_all(eigenvalues)
    via_traces = spectral.charpoly_oracle(matrices)
    scale = 1.0 + symfun.elementary_all(np.abs(eigenvalues))
    return _Outcome(np.min(-np.abs(via_eigen - via_traces) / scale, axis=-1), 1e-9)


def _identity(name: str) -> Suite:
    def suite(rng: np.random.Generator, trials: int, n: int, k: int) -> _Outcome:
        values = uniform_spectra(rng, trials, n)
        return _Outcome(-symfun.identity_margin(name, values, k) / _scale(values), 1e-10)

    return suite


def _newton(rng: np.random.Generator, trials: int, n: int, k: int) -> _Outcome:
    values = uniform_spectra(rng, trials, n)
    margins = []
    for degree in range(1, n):
        margin = symfun.identity_margin("newton", values, degree)
        products = np.abs(symfun.sigma(values, degree - 1) * symfun.sigma(values, degree + 1))
        margins.append(margin / (1.0 + symfun.sigma(values, degree) ** 2 + products))
    return _Outcome(np.min(np.stack(margins), axis=0), 1e-10)


def _newton_maclaurin(rng: np.random.Generator, trials: int, n: int, k: int) -> _Outcome:
    values = cone_spectra(rng, trials, n, k)
    margins = []
    for low, r, s in itertools.product(range(k), range(1, k + 1), range(k)):
        if r > s and low >= s:
            margin = symfun.newton_maclaurin_margin(values, k, low, r, s)
            margins.append(margin / (1.0 + np.abs(margin)))
    return _Outcome(np.min(np.stack(margins), axis=0), 1e-10)


def _garding(rng: np.random.Generator, trials: int, n: int, k: int) -> _Outcome:
    lam = cone_spectra(rng, trials, n, k)
    mu = cone_spectra(rng, trials, n, k)
    margin = symfun.identity_margin("garding", lam, k, mu=mu)
    return _Outcome(margin / _scale(lam) / _scale(mu), 1e-10)


def _nesting(rng: np.random.Generator, trials: int, n: int, k: int) -> _Outcome:
    values = uniform_spectra(rng, trials, n)
    inside = symfun.gamma_mask(values, k)
    nested = np.ones(trials, dtype=bool)
    for degree in range(1, k):
        nested &= symfun.gamma_mask(values, degree)
    return _Outcome(np.where(inside & ~nested, -1.0, 0.0), 0.0)


def _central_difference(
    function: collections.abc.Callable[[FloatArray], FloatArray], values: FloatArray, degree: int
) -> tuple[FloatArray, npt.NDArray[np.bool_]]:
    n = values.shape[-1]
    gradient = np.zeros_like(values)
    usable = np.ones(values.shape[0], dtype=bool)
    for i in range(n):
        step = FD_STEP * (1.0 + np.abs(values[:, i]))
        plus = values.copy()
        minus = values.copy()
        plus[:, i] += step
        minus[:, i] -= step
        inside = symfun.gamma_mask(plus, degree) & symfun.gamma_mask(minus, degree)
        usable &= inside
        plus = np.where(inside[:, np.newaxis], plus, values)
        minus = np.where(inside[:, np.newaxis], minus, values)
        gradient[:, i] = (function(plus) - function(minus)) / (2.0 * step)
    return gradient, usable


def _interior(values: FloatArray, k: int) -> npt.NDArray[np.bool_]:
    # finite differences are only meaningful away from the cone boundary
    return np.asarray(krylov_op.uniform_slack(values, k) >= INTERIOR_SLACK)


def _gradient_fd(rng: np.random.Generator, trials: int, n: int, k: int) -> _Outcome:
    values = cone_spectra(rng, trials, n, k - 1)
    beta = random_beta(rng, trials, k)
    point = krylov_op.KrylovPoint(beta)
    interior = _interior(values, k)

    def sigma_k(x: FloatArray) -> FloatArray:
        return symfun.sigma(x, k)

    def operator(x: FloatArray) -> FloatArray:
        return krylov_op.f_value(x, point)

    errors = np.zeros(trials)
    for exact, function in ((symfun.grad_sigma_k(values, k), sigma_k), (krylov_op.f_grad(values, point), operator)):
        approx, usable = _central_difference(function, values, k - 1)
        error = np.max(np.abs(exact - approx) / (1.0 + np.abs(exact)), axis=-1)
        errors = np.maximum(errors, np.where(usable & interior, error, 0.0))
    return _Outcome(-errors, 1e-6)


def _quotient_deleted(rng: np.random.Generator, trials: int, n: int, k: int) -> _Outcome:
    point = krylov_op.KrylovPoint(np.zeros(k))
    values = cone_spectra(rng, trials, n, k - 1)
    scale = 1.0 + np.abs(krylov_op.f_value(values, point))
    return _Outcome(krylov_op.inequality_margin("quotient-deleted", values, point) / scale, 1e-10)


def _quotient_deleted_strict(rng: np.random.Generator, trials: int, n: int, k: int) -> _Outcome | None:
    # Lower degrees l < k-1 hold strictly on Gamma_k.
    if k < 3:
        return None
    point = krylov_op.KrylovPoint(np.zeros(k))
    values = cone_spectra(rng, trials, n, k)
    margins = []
    for low in range(1, k - 1):
        quotient = symfun.sigma(values, k) / symfun.sigma(values, low)
        margin = krylov_op.inequality_margin("quotient-deleted", values, point, l=low)
        margins.append(margin / (1.0 + np.abs(quotient)))
    return _Outcome(np.min(np.stack(margins), axis=0), 0.0, strict=True)


def _quotient_ellipticity(rng: np.random.Generator, trials: int, n: int, k: int) -> _Outcome:
    values = cone_spectra(rng, trials, n, k)
    minima = [np.min(symfun.quotient_gradient(values, k, low), axis=-1) for low in range(k)]
    return _Outcome(np.min(np.stack(minima), axis=0), 0.0, strict=True)


def _quotient_concavity(rng: np.random.Generator, trials: int, n: int, k: int) -> _Outcome:
    lam = cone_spectra(rng, trials, n, k)
    mu = cone_spectra(rng, trials, n, k)

    def root(x: FloatArray, low: int) -> FloatArray:
        return (symfun.sigma(x, k) / symfun.sigma(x, low)) ** (1.0 / (k - low))

    margins = []
    for low in range(k):
        mid = root(0.5 * (lam + mu), low) - 0.5 * (root(lam, low) + root(mu, low))
        margins.append(mid / (1.0 + np.abs(root(lam, low)) + np.abs(root(mu, low))))
    return _Outcome(np.min(np.stack(margins), axis=0), 1e-10)


def _ellipticity(rng: np.random.Generator, trials: int, n: int, k: int) -> _Outcome:
    values = cone_spectra(rng, trials, n, k - 1)
    point = krylov_op.KrylovPoint(random_beta(rng, trials, k))
    gradient = krylov_op.f_grad(values, point)
    return _Outcome(np.min(gradient, axis=-1) / (1.0 + np.max(np.abs(gradient), axis=-1)), 1e-10)


def _strict_ellipticity(rng: np.random.Generator, trials: int, n: int, k: int) -> _Outcome:
    values = cone_spectra(rng, trials, n, k - 1)
    point = krylov_op.KrylovPoint(random_beta(rng, trials, k, floor=0.1))
    return _Outcome(np.min(krylov_op.f_grad(values, point), axis=-1), 0.0, strict=True)


def _pair_margin(name: str) -> Suite:
    def suite(rng: np.random.Generator, trials: int, n: int, k: int) -> _Outcome:
        lam = cone_spectra(rng, trials, n, k - 1)
        mu = cone_spectra(rng, trials, n, k - 1)
        point = krylov_op.KrylovPoint(random_beta(rng, trials, k))
        margin = krylov_op.inequality_margin(name, lam, point, mu=mu)
        scale = 1.0 + np.abs(krylov_op.f_value(lam, point)) + np.abs(krylov_op.f_value(mu, point))
        return _Outcome(margin / scale, 1e-10)

    return suite


def _euler(rng: np.random.Generator, trials: int, n: int, k: int) -> _Outcome:
    values = cone_spectra(rng, trials, n, k - 1)
    point = krylov_op.KrylovPoint(random_beta(rng, trials, k))
    residual = krylov_op.inequality_margin("euler", values, point)
    scale = 1.0 + np.abs(krylov_op.lower_terms(symfun.elementary_all(values), point, weighted=True))
    return _Outcome(-residual / scale, 1e-10)


def _grad_sum(rng: np.random.Generator, trials: int, n: int, k: int) -> _Outcome:
    values = cone_spectra(rng, trials, n, k - 1)
    point = krylov_op.KrylovPoint(random_beta(rng, trials, k))
    margins = krylov_op.inequality_margin("grad-sum", values, point)
    identity = krylov_op.inequality_margin("grad-sum", np.ones(n), krylov_op.KrylovPoint(np.zeros(k)))
    equality = -abs(identity) if abs(identity) > 4.0 * np.finfo(float).eps else 0.0
    return _Outcome(np.minimum(margins, equality), 1e-10)


def _ratio_bounds(rng: np.random.Generator, trials: int, n: int, k: int) -> _Outcome:
    values = cone_spectra(rng, trials, n, k - 1)
    beta = random_beta(rng, trials, k, floor=0.1)
    beta[:, : k - 1] = np.maximum(beta[:, : k - 1], 1e-3)
    beta[:, -1] = 0.0
    beta[:, -1] = krylov_op.f_value(values, krylov_op.KrylovPoint(beta))
    point = krylov_op.KrylovPoint(beta)
    margins = [krylov_op.inequality_margin("quotient-bounds", values, point)]
    margins.extend(krylov_op.inequality_margin("ratio-upper", values, point, l=low) for low in range(k - 1))
    stacked = np.stack(margins)
    return _Outcome(np.min(stacked / (1.0 + np.abs(stacked)), axis=0), 1e-10)


def _gradient_order(rng: np.random.Generator, trials: int, n: int, k: int) -> _Outcome:
    values = -np.sort(-cone_spectra(rng, trials, n, k - 1), axis=-1)
    gradient = krylov_op.f_grad(values, krylov_op.KrylovPoint(np.zeros(k)))
    steps = np.diff(gradient, axis=-1)
    return _Outcome(np.min(steps, axis=-1) / (1.0 + np.max(np.abs(gradient), axis=-1)), 1e-10)


def _spectral_matrices(rng: np.random.Generator, trials: int, n: int, k: int) -> tuple[FloatArray, FloatArray]:
    values = cone_spectra(rng, trials, n, k - 1)
    frames = spectral.random_unitary(rng, n, (trials,))
    matrices = (frames * values[:, np.newaxis, :]) @ spectral.conjugate_transpose(frames)
    return values, matrices


def _operator_concavity(rng: np.random.Generator, trials: int, n: int, k: int) -> _Outcome:
    _, matrices = _spectral_matrices(rng, trials, n, k)
    eigenvalues, frames = spectral.eig_hermitian_batch(matrices)
    point = krylov_op.KrylovPoint(random_beta(rng, trials, k))
    directions = spectral.random_hermitian(rng, n, (trials,))
    value = spectral.second_derivative_batch(
        eigenvalues,
        frames,
        krylov_op.f_hessian(eigenvalues, point),
        krylov_op.f_grad(eigenvalues, point),
        directions,
    )
    return _Outcome(-value / (1.0 + np.abs(krylov_op.f_value(eigenvalues, point))), 1e-10)


def _second_derivative_fd(rng: np.random.Generator, trials: int, n: int, k: int) -> _Outcome:
    _, matrices = _spectral_matrices(rng, trials, n, k)
    eigenvalues, frames = spectral.eig_hermitian_batch(matrices)
    directions = 0.1 * spectral.random_hermitian(rng, n, (trials,))
    point = krylov_op.KrylovPoint(np.zeros(k))
    h = SECOND_FD_STEP
    plus, _ = spectral.eig_hermitian_batch(matrices + h * directions)
    minus, _ = spectral.eig_hermitian_batch(matrices - h * directions)
    separated = np.min(-np.diff(eigenvalues, axis=-1), axis=-1) > COLLISION_GAP
    inside = symfun.gamma_mask(plus, k - 1) & symfun.gamma_mask(minus, k - 1)
    usable = separated & inside & _interior(eigenvalues, k)

    errors = np.zeros(trials)
    functions = (
        (lambda x: symfun.sigma(x, k), symfun.hessian_sigma(eigenvalues, k), symfun.grad_sigma_k(eigenvalues, k)),
        (
            lambda x: krylov_op.f_value(x, point),
            krylov_op.f_hessian(eigenvalues, point),
            krylov_op.f_grad(eigenvalues, point),
        ),
    )
    for function, hessian, gradient in functions:
        exact = spectral.second_derivative_batch(eigenvalues, frames, hessian, gradient, directions)
        safe_plus = np.where(usable[:, np.newaxis], plus, eigenvalues)
        safe_minus = np.where(usable[:, np.newaxis], minus, eigenvalues)
        approx = (function(safe_plus) - 2.0 * function(eigenvalues) + function(safe_minus)) / h**2
        errors = np.maximum(errors, np.where(usable, np.abs(exact - approx) / (1.0 + np.abs(exact)), 0.0))
    return _Outcome(-errors, 1e-4)


def _frame_equivariance(rng: np.random.Generator, trials: int, n: int, k: int) -> _Outcome:
    _, matrices = _spectral_matrices(rng, trials, n, k)
    unitary = spectral.random_unitary(rng, n, (trials,))
    rotated = unitary @ matrices @ spectral.conjugate_transpose(unitary)
    point = krylov_op.KrylovPoint(np.zeros(k))

    def derivative(a: FloatArray) -> FloatArray:
        eigenvalues, frames = spectral.eig_hermitian_batch(a)
        return spectral.first_derivative_batch(frames, krylov_op.f_grad(eigenvalues, point))

    expected = unitary @ derivative(matrices) @ spectral.conjugate_transpose(unitary)
    scale = 1.0 + np.max(np.abs(expected), axis=(-2, -1))
    error = np.max(np.abs(derivative(rotated) - expected), axis=(-2, -1)) / scale
    return _Outcome(-error, 1e-9)


def _cone_consistency(rng: np.random.Generator, trials: int, n: int, k: int) -> _Outcome:
    _, matrices = _spectral_matrices(rng, trials, n, k)
    unitary = spectral.random_unitary(rng, n, (trials,))
    rotated = unitary @ matrices @ spectral.conjugate_transpose(unitary)
    point = krylov_op.KrylovPoint(random_beta(rng, trials, k))
    eigenvalues, _ = spectral.eig_hermitian_batch(matrices)
    rotated_values, _ = spectral.eig_hermitian_batch(rotated)
    raw, normalized = krylov_op.cone_margins_batch(eigenvalues, point)
    raw_rotated, _ = krylov_op.cone_margins_batch(rotated_values, point)
    frame_error = np.max(np.abs(np.sort(raw, axis=-1) - np.sort(raw_rotated, axis=-1)), axis=-1)

    deleted = symfun.deleted_elementary(eigenvalues)
    denominator = symfun.pick(deleted, k - 2)
    relation = np.where(denominator > 0.0, np.abs(normalized * denominator - raw), 0.0)
    scale = 1.0 + np.max(np.abs(raw), axis=-1)
    return _Outcome(-np.maximum(frame_error, np.max(relation, axis=-1)) / scale, 1e-9)


SUITES: dict[str, Suite] = {
    "subset-oracle": _subset_oracle,
    "charpoly-oracle": _charpoly_oracle,
    "decomposition": _identity("decomposition"),
    "euler-sigma": _identity("euler"),
    "trace": _identity("trace"),
    "newton": _newton,
    "newton-maclaurin": _newton_maclaurin,
    "garding": _garding,
    "gamma-nesting": _nesting,
    "gradient-fd": _gradient_fd,
    "quotient-deleted": _quotient_deleted,
    "quotient-deleted-strict": _quotient_deleted_strict,
    "quotient-ellipticity": _quotient_ellipticity,
    "quotient-concavity": _quotient_concavity,
    "ellipticity": _ellipticity,
    "strict-ellipticity": _strict_ellipticity,
    "concavity-midpoint": _pair_margin("concavity-midpoint"),
    "tangent": _pair_margin("tangent"),
    "euler": _euler,
    "grad-sum": _grad_sum,
    "ratio-bounds": _ratio_bounds,
    "gradient-order": _gradient_order,
    "operator-concavity": _operator_concavity,
    "second-derivative-fd": _second_derivative_fd,
    "frame-equivariance": _frame_equivariance,
    "cone-consistency": _cone_consistency,
}
SUITE_NAMES: tuple[str, ...] = tuple(SUITES)


def run_suites(
    seed: int,
    trials: int,
    dimensions: collections.abc.Sequence[tuple[int, int]] = DEFAULT_DIMENSIONS,
    inject_failure: str | None = None,
) -> list[SuiteResult]:
    """
    Run every suite for every (n, k) in a fixed order from one seeded generator.

    Args:
    ----
        seed: Seed of the generator.
        trials: Samples per suite; zero runs nothing.
        dimensions: The (n, k) pairs.
        inject_failure: Name of a suite whose margins are forced negative.

    Returns:
    -------
        One result per suite and dimension pair that applies.

    """
    if inject_failure is not None and inject_failure not in SUITES:
        raise ValueError(f"Unknown suite {inject_failure!r}")  # noqa: TRY003
    results: list[SuiteResult] = []
    if trials == 0:
        return results
    rng = np.random.default_rng(seed)
    for n, k in dimensions:
        if not 2 <= k <= n:
            raise ValueError(f"Invalid dimension pair (n, k) = ({n}, {k})")  # noqa: TRY003
        for name, suite in SUITES.items():
            outcome = suite(rng, trials, n, k)
            if outcome is None:
                continue
            margins = np.asarray(outcome.margins, dtype=np.float64)
            if name == inject_failure:
                margins = -np.abs(margins) - 1.0
            worst = float(np.min(margins)) if margins.size else math.inf
            result = SuiteResult(name, n, k, int(margins.size), worst, outcome.tolerance, outcome.strict)
            LOGGER.info(
                "Suite %s (n=%d, k=%d): %s, worst margin %.3e",
                name,
                n,
                k,
                "pass" if result.passed else "FAIL",
                worst,
            )
            results.append(result)
    return results
