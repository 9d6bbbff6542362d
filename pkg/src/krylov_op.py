"""The Krylov quotient operator, its derivatives, bounds and cone conditions.

The operator is

    f(lambda) = sigma_k / sigma_{k-1} - sum_{l <= k-2} beta_l sigma_l / sigma_{k-1}

and the equation holds at a point when f equals beta_{k-1}. Everything here
works on a single spectrum or on a batch with eigenvalues on the last axis,
with beta broadcast against it.
"""

__author__ = "Krylov Torus contributors"
__copyright__ = "Copyright 2026, Krylov Torus contributors"
__license__ = "MIT"


import dataclasses
import fractions
import math
import typing

import numpy as np
import numpy.typing as npt

import src.spectral as spectral
import src.symfun as symfun
from src.errors import AssumptionViolation, ConeViolation

FloatArray = npt.NDArray[np.float64]
CoefficientValue = float | FloatArray

TAU_TOLERANCE = 1e-12

ConeVariant = typing.Literal["strict-k-1", "mu-form"]
CONE_VARIANTS: tuple[str, ...] = typing.get_args(ConeVariant)

MarginName = typing.Literal[
    "quotient-deleted",
    "grad-sum",
    "ratio-upper",
    "quotient-bounds",
    "euler",
    "tangent",
    "concavity-midpoint",
]
MARGIN_NAMES: tuple[str, ...] = typing.get_args(MarginName)


def beta_factor(n: int, k: int, l: int) -> fractions.Fraction:  # noqa: E741 degree naming
    """Exact C_n^k / C_n^l."""
    return fractions.Fraction(math.comb(n, k), math.comb(n, l))


def ratio_bound_constant(n: int, k: int, l: int) -> float:  # noqa: E741 degree naming
    """(C_n^k)^{k-1-l} C_n^l / (C_n^{k-1})^{k-l}, the Newton-MacLaurin branch of the ratio bound."""
    value = fractions.Fraction(math.comb(n, k) ** (k - 1 - l) * math.comb(n, l), math.comb(n, k - 1) ** (k - l))
    return float(value)


def _check_assumptions(k: int, alpha: typing.Sequence[FloatArray], floors: tuple[float, ...] | None) -> None:
    for l in range(k - 1):  # noqa: E741
        values = alpha[l]
        if np.any(values < 0.0):
            raise AssumptionViolation("i", f"alpha_{l} takes negative values")
        if np.any(values > 0.0) and not np.all(values > 0.0):
            raise AssumptionViolation("i", f"alpha_{l} is neither identically zero nor strictly positive")
    lower = sum((alpha[l] for l in range(k - 1)), start=np.zeros(()))
    if not np.all(lower > 0.0):
        raise AssumptionViolation("ii", f"sum of alpha_0 ... alpha_{k - 2} is not strictly positive")
    if floors is None:
        return
    if len(floors) != k:
        raise ValueError(f"Expected {k} floor constants, got {len(floors)}")  # noqa: TRY003
    for l, floor in enumerate(floors):  # noqa: E741
        if np.any(alpha[l] < floor):
            raise AssumptionViolation("iii", f"alpha_{l} drops below its floor {floor}")


@dataclasses.dataclass(frozen=True)
class Coefficients:
    """Degree, dimension and the coefficient functions alpha_0 ... alpha_{k-1}."""

    n: int
    k: int
    alpha: tuple[CoefficientValue, ...]
    floors: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        """Validate shapes and the standing assumption."""
        if self.n < 2:
            raise ValueError("The complex dimension must be at least two")  # noqa: TRY003
        if not 2 <= self.k <= self.n:
            raise ValueError(f"Degree k={self.k} outside 2..{self.n}")  # noqa: TRY003
        if len(self.alpha) != self.k:
            raise ValueError(f"Expected {self.k} coefficient functions, got {len(self.alpha)}")  # noqa: TRY003
        arrays = []
        for value in self.alpha:
            array = np.array(value, dtype=np.float64)
            if not np.all(np.isfinite(array)):
                raise ValueError("Coefficient values must be finite")  # noqa: TRY003
            array.flags.writeable = False
            arrays.append(array)
        floors = None if self.floors is None else tuple(float(x) for x in self.floors)
        _check_assumptions(self.k, arrays, floors)
        object.__setattr__(self, "alpha", tuple(arrays))
        object.__setattr__(self, "floors", floors)

    @property
    def beta_factors(self) -> tuple[fractions.Fraction, ...]:
        """Exact C_n^k / C_n^l for l = 0 ... k-1."""
        return tuple(beta_factor(self.n, self.k, l) for l in range(self.k))

    def with_top(self, top: CoefficientValue) -> "Coefficients":
        """Copy with alpha_{k-1} replaced."""
        return dataclasses.replace(self, alpha=(*self.alpha[:-1], top))


@dataclasses.dataclass(frozen=True)
class KrylovPoint:
    """Pointwise beta coefficients, beta_{k-1} on the last slot of the trailing axis."""

    beta: FloatArray

    def __post_init__(self) -> None:
        """Validate the lower coefficients."""
        beta = np.array(self.beta, dtype=np.float64)
        if beta.ndim == 0 or beta.shape[-1] < 2:
            raise ValueError("A Krylov point needs k >= 2 coefficients")  # noqa: TRY003
        if not np.all(np.isfinite(beta)):
            raise ValueError("Beta coefficients must be finite")  # noqa: TRY003
        if np.any(beta[..., :-1] < 0.0):
            raise ValueError("beta_l must be non-negative for l <= k-2")  # noqa: TRY003
        beta.flags.writeable = False
        object.__setattr__(self, "beta", beta)

    @property
    def k(self) -> int:
        """Degree of the operator."""
        return int(self.beta.shape[-1])

    def slot(self, l: int) -> FloatArray:  # noqa: E741
        """beta_l with a trailing axis for broadcasting against spectra."""
        return self.beta[..., l, np.newaxis]


def betas_from_alphas(c: Coefficients, values: typing.Sequence[CoefficientValue] | None = None) -> KrylovPoint:
    """
    Convert alpha values into beta values.

    Args:
    ----
        c: The coefficient set; supplies n, k and the default alpha values.
        values: Alpha values at a point (or on a grid); defaults to c.alpha.

    Returns:
    -------
        The KrylovPoint with beta_l = (C_n^k / C_n^l) alpha_l.

    """
    raw = c.alpha if values is None else tuple(np.asarray(v, dtype=np.float64) for v in values)
    if len(raw) != c.k:
        raise ValueError(f"Expected {c.k} alpha values, got {len(raw)}")  # noqa: TRY003
    if values is not None:
        _check_assumptions(c.k, raw, c.floors)
    stacked = np.stack(np.broadcast_arrays(*raw), axis=-1)
    factors = np.array([float(f) for f in c.beta_factors])
    return KrylovPoint(stacked * factors)


def alphas_from_betas(n: int, k: int, beta: FloatArray) -> FloatArray:
    """Inverse of the beta scaling along the trailing axis."""
    factors = np.array([float(beta_factor(n, k, l)) for l in range(k)])
    return np.asarray(beta) / factors


def _require_cone(values: FloatArray, k: int) -> None:
    mask = symfun.gamma_mask(values, k - 1)
    if np.all(mask):
        return
    flat = np.flatnonzero(~np.asarray(mask).reshape(-1))
    node = int(flat[0])
    offending = values.reshape(-1, values.shape[-1])[node]
    raise ConeViolation(f"Spectrum outside Gamma_{k - 1}", node=node if values.ndim > 1 else None, eigenvalues=offending)


def _parts(lam: symfun.SpectrumLike, p: KrylovPoint) -> tuple[FloatArray, FloatArray, FloatArray]:
    values = symfun.as_array(lam)
    k = p.k
    n = values.shape[-1]
    if k > n:
        raise ValueError(f"Operator degree {k} exceeds spectrum length {n}")  # noqa: TRY003
    _require_cone(values, k)
    return values, symfun.elementary_all(values), symfun.deleted_elementary(values)


def _numerator(full: FloatArray, p: KrylovPoint) -> FloatArray:
    k = p.k
    total = symfun.pick(full, k)
    for l in range(k - 1):  # noqa: E741
        total = total - p.beta[..., l] * symfun.pick(full, l)
    return total


def _numerator_grad(deleted: FloatArray, p: KrylovPoint) -> FloatArray:
    k = p.k
    total = symfun.pick(deleted, k - 1)
    for l in range(1, k - 1):  # noqa: E741
        total = total - p.slot(l) * symfun.pick(deleted, l - 1)
    return total


def lower_terms(full: FloatArray, p: KrylovPoint, weighted: bool = False) -> FloatArray:
    """sum_{l <= k-2} beta_l sigma_l / sigma_{k-1}, optionally weighted by (k - l)."""
    k = p.k
    total = np.zeros(np.broadcast_shapes(full.shape[:-1], p.beta.shape[:-1]))
    for l in range(k - 1):  # noqa: E741
        weight = k - l if weighted else 1
        total = total + weight * p.beta[..., l] * symfun.pick(full, l)
    return total / symfun.pick(full, k - 1)


def f_value(lam: symfun.SpectrumLike, p: KrylovPoint) -> typing.Any:  # noqa: ANN401 float or array
    """
    Evaluate the Krylov quotient operator.

    Args:
    ----
        lam: Spectrum (or batch) inside Gamma_{k-1}.
        p: The beta coefficients.

    Returns:
    -------
        sigma_k/sigma_{k-1} - sum_{l <= k-2} beta_l sigma_l / sigma_{k-1}.

    """
    _, full, _ = _parts(lam, p)
    return symfun.as_result(_numerator(full, p) / symfun.pick(full, p.k - 1))


def f_grad(lam: symfun.SpectrumLike, p: KrylovPoint) -> FloatArray:
    """
    Gradient of the Krylov quotient operator by the quotient rule.

    Args:
    ----
        lam: Spectrum (or batch) inside Gamma_{k-1}.
        p: The beta coefficients.

    Returns:
    -------
        The partial derivatives f_i along the last axis.

    """
    _, full, deleted = _parts(lam, p)
    k = p.k
    top = _numerator(full, p)[..., np.newaxis]
    bottom = symfun.pick(full, k - 1)[..., np.newaxis]
    return (_numerator_grad(deleted, p) * bottom - top * symfun.pick(deleted, k - 2)) / bottom**2


def f_hessian(lam: symfun.SpectrumLike, p: KrylovPoint) -> FloatArray:
    """
    Hessian of the Krylov quotient operator with respect to the eigenvalues.

    Args:
    ----
        lam: Spectrum (or batch) inside Gamma_{k-1}.
        p: The beta coefficients.

    Returns:
    -------
        Second partials along the last two axes.

    """
    values, full, deleted = _parts(lam, p)
    k = p.k
    top = _numerator(full, p)[..., np.newaxis, np.newaxis]
    bottom = symfun.pick(full, k - 1)[..., np.newaxis, np.newaxis]
    top_grad = _numerator_grad(deleted, p)
    bottom_grad = symfun.pick(deleted, k - 2)
    top_hess = symfun.hessian_sigma(values, k)
    for l in range(2, k - 1):  # noqa: E741
        top_hess = top_hess - p.beta[..., l, np.newaxis, np.newaxis] * symfun.hessian_sigma(values, l)
    bottom_hess = symfun.hessian_sigma(values, k - 1)

    outer_mixed = top_grad[..., :, np.newaxis] * bottom_grad[..., np.newaxis, :]
    outer_bottom = bottom_grad[..., :, np.newaxis] * bottom_grad[..., np.newaxis, :]
    return (
        top_hess / bottom
        - (outer_mixed + np.swapaxes(outer_mixed, -1, -2)) / bottom**2
        - top * bottom_hess / bottom**2
        + 2.0 * top * outer_bottom / bottom**3
    )


@dataclasses.dataclass(frozen=True)
class ConeReport:
    """Per-index cone margins of a point, in both normalisations."""

    variant: str
    raw: FloatArray
    normalized: FloatArray | None
    min_margin: float
    tau: float | None = None

    @property
    def margins(self) -> FloatArray:
        """The margins the report is judged by."""
        if self.variant == "mu-form":
            return typing.cast("FloatArray", self.normalized)
        return self.raw

    @property
    def satisfied(self) -> bool:
        """Strict positivity of every margin."""
        return self.min_margin > 0.0


def cone_margins_batch(eigenvalues: FloatArray, p: KrylovPoint) -> tuple[FloatArray, FloatArray]:
    """
    Raw and normalised cone margins for a stack of spectra.

    Args:
    ----
        eigenvalues: Spectra along the last axis.
        p: The beta coefficients, broadcast against the spectra.

    Returns:
    -------
        raw_i = sigma_{k-1}(chi|i) - sum_{l=1}^{k-1} beta_l sigma_{l-1}(chi|i) and its
        quotient by sigma_{k-2}(chi|i); the quotient is NaN where that denominator is
        not positive.

    """
    deleted = symfun.deleted_elementary(eigenvalues)
    k = p.k
    raw = symfun.pick(deleted, k - 1)
    for l in range(1, k):  # noqa: E741
        raw = raw - p.slot(l) * symfun.pick(deleted, l - 1)
    denominator = symfun.pick(deleted, k - 2)
    positive = denominator > 0.0
    normalized = np.where(positive, raw / np.where(positive, denominator, 1.0), np.nan)
    return raw, normalized


def _cone_interval_end(base: FloatArray, step: FloatArray, degree: int) -> FloatArray:
    # sup of tau in [0, 1] with base + tau * step inside Gamma_degree; the set is an interval
    lower = np.zeros(base.shape[:-1])
    upper = np.ones(base.shape[:-1])
    inside_zero = symfun.gamma_mask(base, degree)
    inside_one = symfun.gamma_mask(base + step, degree)
    while np.any(upper - lower > TAU_TOLERANCE):
        middle = 0.5 * (lower + upper)
        inside = symfun.gamma_mask(base + middle[..., np.newaxis] * step, degree)
        lower = np.where(inside, middle, lower)
        upper = np.where(inside, upper, middle)
    return np.where(inside_one, 1.0, np.where(inside_zero, lower, 0.0))


def uniform_slack(lam: symfun.SpectrumLike, k: int) -> typing.Any:  # noqa: ANN401 float or array
    """
    Largest tau in [0, 1] with lam - tau*1 and 1 - tau*lam both in Gamma_{k-1}.

    Args:
    ----
        lam: Spectrum (or batch).
        k: Operator degree.

    Returns:
    -------
        The uniform slack, zero when lam itself is outside Gamma_{k-1}.

    """
    values = symfun.as_array(lam)
    ones = np.ones_like(values)
    shifted = _cone_interval_end(values, -ones, k - 1)
    scaled = _cone_interval_end(ones, -values, k - 1)
    inside = symfun.gamma_mask(values, k - 1)
    return symfun.as_result(np.where(inside, np.minimum(shifted, scaled), 0.0))


def cone_margin(
    point: spectral.HermitianForm | symfun.SpectrumLike,
    p: KrylovPoint,
    variant: str = "strict-k-1",
) -> ConeReport:
    """
    Local cone condition margins at a single point.

    Matrices are diagonalised first and the margins are evaluated on deleted
    eigenvalue tuples, which is the coordinate form of the (n-1, n-1)-form
    positivity condition in an omega-unitary eigenframe.

    Args:
    ----
        point: A HermitianForm or a single spectrum.
        p: Beta coefficients at the point.
        variant: "strict-k-1" or "mu-form".

    Returns:
    -------
        The ConeReport, including the uniform slack tau.

    """
    if variant not in CONE_VARIANTS:
        raise ValueError(f"Unknown cone variant {variant!r}")  # noqa: TRY003
    if isinstance(point, spectral.HermitianForm):
        values = spectral.eig_hermitian(point).eigenvalues.values
    else:
        values = symfun.as_array(point)
    if values.ndim != 1:
        raise ValueError("cone_margin takes a single point, use cone_margins_batch for fields")  # noqa: TRY003
    if p.beta.ndim != 1 or p.k > values.size:
        raise ValueError("cone_margin needs a single Krylov point with k <= n")  # noqa: TRY003

    raw, normalized = cone_margins_batch(values, p)
    if variant == "mu-form":
        if np.any(np.isnan(normalized)):
            raise ConeViolation(f"sigma_{p.k - 2} of a deleted tuple is not positive", eigenvalues=values)
        minimum = float(np.min(normalized))
    else:
        minimum = float(np.min(raw))
    report_normalized = None if np.any(np.isnan(normalized)) else normalized
    return ConeReport(
        variant=variant,
        raw=raw,
        normalized=report_normalized,
        min_margin=minimum,
        tau=float(uniform_slack(values, p.k)),
    )


def _ratio_bound(n: int, k: int, l: int, beta_l: FloatArray, top: FloatArray) -> FloatArray:  # noqa: E741
    return np.maximum((1.0 + np.abs(top)) / beta_l, ratio_bound_constant(n, k, l))


def inequality_margin(
    name: str,
    lam: symfun.SpectrumLike,
    p: KrylovPoint,
    mu: symfun.SpectrumLike | None = None,
    l: int | None = None,  # noqa: E741
) -> typing.Any:  # noqa: ANN401 float or array
    """
    Signed margins of the operator's structural inequalities.

    Args:
    ----
        name: quotient-deleted, grad-sum, ratio-upper, quotient-bounds, euler,
            tangent or concavity-midpoint.
        lam: Spectrum (or batch).
        p: Beta coefficients.
        mu: Second spectrum, required for tangent and concavity-midpoint.
        l: Lower degree for quotient-deleted (default k-1) and ratio-upper.

    Returns:
    -------
        A margin that is non-negative where the inequality applies, or an
        absolute residual for euler.

    """
    if name not in MARGIN_NAMES:
        raise ValueError(f"Unknown margin {name!r}")  # noqa: TRY003
    values = symfun.as_array(lam)
    n = values.shape[-1]
    k = p.k

    if name == "quotient-deleted":
        lower = k - 1 if l is None else l
        if not 1 <= lower <= k - 1:
            raise ValueError(f"quotient-deleted needs 1 <= l <= k-1, got {lower}")  # noqa: TRY003
        cone = k - 1 if lower == k - 1 else k
        if not np.all(symfun.gamma_mask(values, cone)):
            raise ConeViolation(f"quotient-deleted with l={lower} needs Gamma_{cone}")
        full = symfun.elementary_all(values)
        deleted = symfun.deleted_elementary(values)
        ratios = symfun.pick(deleted, k - 1) / symfun.pick(deleted, lower - 1)
        return symfun.as_result(np.min(ratios, axis=-1) - symfun.pick(full, k) / symfun.pick(full, lower))

    if name == "grad-sum":
        return symfun.as_result(np.sum(f_grad(values, p), axis=-1) - (n - k + 1) / k)

    if name in ("ratio-upper", "quotient-bounds"):
        _, full, _ = _parts(values, p)
        top = p.beta[..., k - 1]
        if name == "ratio-upper":
            if l is None or not 0 <= l <= k - 2:
                raise ValueError("ratio-upper needs 0 <= l <= k-2")  # noqa: TRY003
            beta_l = p.beta[..., l]
            if np.any(beta_l <= 0.0):
                raise ValueError(f"ratio-upper needs beta_{l} > 0")  # noqa: TRY003
            ratio = symfun.pick(full, l) / symfun.pick(full, k - 1)
            return symfun.as_result(_ratio_bound(n, k, l, beta_l, top) - ratio)
        upper = np.abs(top)
        for lower in range(k - 1):
            beta_l = p.beta[..., lower]
            positive = beta_l > 0.0
            safe = np.where(positive, beta_l, 1.0)
            upper = upper + np.where(positive, beta_l * _ratio_bound(n, k, lower, safe, top), 0.0)
        quotient = symfun.pick(full, k) / symfun.pick(full, k - 1)
        return symfun.as_result(np.minimum(quotient + np.abs(top), upper - quotient))

    if name == "euler":
        _, full, _ = _parts(values, p)
        gradient = f_grad(values, p)
        value = _numerator(full, p) / symfun.pick(full, k - 1)
        return symfun.as_result(np.abs(np.sum(gradient * values, axis=-1) - value - lower_terms(full, p, weighted=True)))

    if mu is None:
        raise ValueError(f"{name} needs a second spectrum mu")  # noqa: TRY003
    other = symfun.as_array(mu)
    if other.shape[-1] != n:
        raise ValueError("lam and mu have different lengths")  # noqa: TRY003
    if name == "tangent":
        _, full, _ = _parts(values, p)
        gradient = f_grad(values, p)
        return symfun.as_result(
            np.sum(gradient * other, axis=-1) - f_value(other, p) - lower_terms(full, p, weighted=True)
        )
    midpoint = 0.5 * (values + other)
    return symfun.as_result(f_value(midpoint, p) - 0.5 * (f_value(values, p) + f_value(other, p)))
