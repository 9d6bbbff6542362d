"""Elementary symmetric functions of real spectra.

Every function accepts a single :class:`Spectrum` or an array whose last axis
holds the eigenvalues, so whole grids or sample batches go through one call.
"""

__author__ = "Krylov Torus contributors"
__copyright__ = "Copyright 2026, Krylov Torus contributors"
__license__ = "MIT"


import dataclasses
import itertools
import math
import typing

import numpy as np
import numpy.typing as npt

FloatArray = npt.NDArray[np.float64]

SUBSET_ORACLE_MAX_N = 12

IdentityName = typing.Literal["decomposition", "euler", "trace", "newton", "garding"]
IDENTITY_NAMES: tuple[str, ...] = typing.get_args(IdentityName)


@dataclasses.dataclass(frozen=True)
class Spectrum:
    """An ordered real vector of eigenvalues."""

    values: FloatArray

    def __post_init__(self) -> None:
        """Validate and freeze the values."""
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 1:
            raise ValueError("A spectrum is a one dimensional vector")  # noqa: TRY003
        if values.size < 2:
            raise ValueError("A spectrum needs at least two entries")  # noqa: TRY003
        if not np.all(np.isfinite(values)):
            raise ValueError("Spectrum entries must be finite")  # noqa: TRY003
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        """Length of the spectrum."""
        return int(self.values.size)

    def __len__(self) -> int:
        """Length of the spectrum."""
        return self.n


SpectrumLike = Spectrum | npt.ArrayLike


@dataclasses.dataclass(frozen=True)
class GammaMembership:
    """Result of a Garding cone membership test."""

    inside: bool
    first_failing_degree: int | None = None


def as_array(lam: SpectrumLike) -> FloatArray:
    """
    Return the eigenvalue array behind a spectrum or a batch of spectra.

    Args:
    ----
        lam: A Spectrum, or an array with the eigenvalues on the last axis.

    Returns:
    -------
        A float64 array, validated for length and finiteness.

    """
    if isinstance(lam, Spectrum):
        return lam.values
    values = np.asarray(lam, dtype=np.float64)
    if values.ndim == 0 or values.shape[-1] < 2:
        raise ValueError("Spectra need at least two entries on the last axis")  # noqa: TRY003
    if not np.all(np.isfinite(values)):
        raise ValueError("Spectrum entries must be finite")  # noqa: TRY003
    return values


def as_result(value: FloatArray) -> typing.Any:  # noqa: ANN401 float for single spectra, array for batches
    """Unwrap zero dimensional arrays into plain floats."""
    if np.ndim(value) == 0:
        return float(value)
    return value


def _check_degree(k: int, n: int, lowest: int = 1, highest: int | None = None) -> None:
    top = n if highest is None else highest
    if not lowest <= k <= top:
        raise ValueError(f"Degree k={k} outside {lowest}..{top} for n={n}")  # noqa: TRY003


def _recurrence(values: FloatArray) -> FloatArray:
    # e_j <- e_j + lambda_i e_{j-1}, one element at a time
    count = values.shape[-1]
    table = np.zeros((*values.shape[:-1], count + 1))
    table[..., 0] = 1.0
    for i in range(count):
        table[..., 1:] = table[..., 1:] + values[..., i, np.newaxis] * table[..., :-1]
    return table


def pick(table: FloatArray, k: int) -> FloatArray:
    """
    Select sigma_k from a table of elementary symmetric functions.

    Degrees below zero or beyond the table give zero, which is the value the
    identities expect for sigma_{-1} and for sigma_n of a deleted tuple.

    Args:
    ----
        table: Output of elementary_all (or a deleted table).
        k: The degree.

    Returns:
    -------
        The k-th entry along the last axis.

    """
    if 0 <= k < table.shape[-1]:
        return table[..., k]
    return np.zeros(table.shape[:-1])


def elementary_all(lam: SpectrumLike, deleted: int | None = None) -> FloatArray:
    """
    Compute sigma_0 ... sigma_n of a spectrum.

    Args:
    ----
        lam: The spectrum (or a batch of spectra).
        deleted: Optional index to remove before evaluating, giving sigma(lam|i).

    Returns:
    -------
        Array of length n + 1 (n for the deleted tuple) along the last axis.

    """
    values = as_array(lam)
    if deleted is not None:
        n = values.shape[-1]
        if not 0 <= deleted < n:
            raise ValueError(f"Deleted index {deleted} outside 0..{n - 1}")  # noqa: TRY003
        values = np.delete(values, deleted, axis=-1)
    return _recurrence(values)


def deleted_elementary(lam: SpectrumLike) -> FloatArray:
    """
    Compute sigma_j(lam|i) for every deleted index i.

    The recurrence is re-run on each deleted tuple rather than peeling the
    decomposition identity apart, which would cancel badly near the cone boundary.

    Args:
    ----
        lam: The spectrum (or a batch of spectra).

    Returns:
    -------
        Array with trailing shape (n, n); entry [i, j] is sigma_j(lam|i).

    """
    values = as_array(lam)
    n = values.shape[-1]
    keep = np.array([[j for j in range(n) if j != i] for i in range(n)])
    return _recurrence(values[..., keep])


def sigma(lam: SpectrumLike, k: int) -> typing.Any:  # noqa: ANN401 float or array
    """Return sigma_k(lam); zero for k < 0 or k > n."""
    return as_result(pick(elementary_all(lam), k))


def grad_sigma_k(lam: SpectrumLike, k: int) -> FloatArray:
    """
    Gradient of sigma_k with respect to the eigenvalues.

    Args:
    ----
        lam: The spectrum (or a batch of spectra).
        k: The degree, 1 <= k <= n.

    Returns:
    -------
        Component i is sigma_{k-1}(lam|i).

    """
    values = as_array(lam)
    _check_degree(k, values.shape[-1])
    return deleted_elementary(values)[..., k - 1]


def hessian_sigma(lam: SpectrumLike, k: int) -> FloatArray:
    """
    Second derivatives of sigma_k: sigma_{k-2}(lam|ij) off the diagonal, zero on it.

    Args:
    ----
        lam: The spectrum (or a batch of spectra).
        k: The degree, 0 <= k <= n.

    Returns:
    -------
        Array with trailing shape (n, n).

    """
    values = as_array(lam)
    n = values.shape[-1]
    _check_degree(k, n, lowest=0)
    hessian = np.zeros((*values.shape[:-1], n, n))
    if k < 2:
        return hessian
    for i, j in itertools.combinations(range(n), 2):
        rest = _recurrence(np.delete(values, [i, j], axis=-1))
        hessian[..., i, j] = hessian[..., j, i] = pick(rest, k - 2)
    return hessian


def quotient_gradient(lam: SpectrumLike, k: int, l: int) -> FloatArray:  # noqa: E741 matches the degree naming of the quotient
    """
    Gradient of the Hessian quotient sigma_k / sigma_l.

    Args:
    ----
        lam: The spectrum (or a batch of spectra) with sigma_l > 0.
        k: Numerator degree.
        l: Denominator degree, 0 <= l < k <= n.

    Returns:
    -------
        Component i is [sigma_{k-1}(lam|i) sigma_l - sigma_k sigma_{l-1}(lam|i)] / sigma_l^2.

    """
    values = as_array(lam)
    n = values.shape[-1]
    _check_degree(k, n)
    if not 0 <= l < k:
        raise ValueError(f"Denominator degree l={l} must satisfy 0 <= l < k={k}")  # noqa: TRY003
    full = _recurrence(values)
    deleted = deleted_elementary(values)
    s_k = pick(full, k)[..., np.newaxis]
    s_l = pick(full, l)[..., np.newaxis]
    return (pick(deleted, k - 1) * s_l - s_k * pick(deleted, l - 1)) / s_l**2


def gamma_mask(lam: SpectrumLike, k: int) -> npt.NDArray[np.bool_]:
    """
    Vectorised Garding cone membership.

    Args:
    ----
        lam: The spectrum (or a batch of spectra).
        k: The cone index, 1 <= k <= n.

    Returns:
    -------
        Boolean array, True where sigma_1 ... sigma_k are all strictly positive.

    """
    values = as_array(lam)
    _check_degree(k, values.shape[-1])
    table = _recurrence(values)
    return np.all(table[..., 1 : k + 1] > 0.0, axis=-1)


def in_gamma(lam: SpectrumLike, k: int) -> GammaMembership:
    """
    Check membership of a single spectrum in the Garding cone Gamma_k.

    Args:
    ----
        lam: A single spectrum.
        k: The cone index, 1 <= k <= n.

    Returns:
    -------
        Whether the spectrum is inside, and the least failing degree if not.

    """
    values = as_array(lam)
    if values.ndim != 1:
        raise ValueError("in_gamma takes a single spectrum, use gamma_mask for batches")  # noqa: TRY003
    _check_degree(k, values.size)
    table = _recurrence(values)
    for degree in range(1, k + 1):
        if not table[degree] > 0.0:
            return GammaMembership(inside=False, first_failing_degree=degree)
    return GammaMembership(inside=True)


def subset_oracle(lam: SpectrumLike, k: int) -> typing.Any:  # noqa: ANN401 float or array
    """
    Evaluate sigma_k straight from its definition as a sum over k-subsets.

    Only meant as an independent check of elementary_all.

    Args:
    ----
        lam: The spectrum (or a batch of spectra), n <= 12.
        k: The degree.

    Returns:
    -------
        The sum of all products of k distinct entries.

    """
    values = as_array(lam)
    n = values.shape[-1]
    if n > SUBSET_ORACLE_MAX_N:
        raise ValueError(f"Subset enumeration is limited to n <= {SUBSET_ORACLE_MAX_N}")  # noqa: TRY003
    total = np.zeros(values.shape[:-1])
    for subset in itertools.combinations(range(n), k):
        total = total + np.prod(values[..., list(subset)], axis=-1)
    return as_result(total)


def identity_margin(
    name: str,
    lam: SpectrumLike,
    k: int,
    mu: SpectrumLike | None = None,
) -> typing.Any:  # noqa: ANN401 float or array
    """
    Evaluate an identity residual or an inequality margin.

    decomposition, euler and trace return absolute residuals of the three
    basic identities (zero up to rounding). newton and garding return signed
    margins that are non-negative whenever the inequality applies.

    Args:
    ----
        name: One of decomposition, euler, trace, newton, garding.
        lam: The spectrum (or a batch of spectra).
        k: The degree.
        mu: Second spectrum, required for garding.

    Returns:
    -------
        The residual or margin.

    """
    if name not in IDENTITY_NAMES:
        raise ValueError(f"Unknown identity {name!r}")  # noqa: TRY003
    values = as_array(lam)
    n = values.shape[-1]
    _check_degree(k, n, highest=n - 1 if name == "newton" else n)

    full = _recurrence(values)
    deleted = deleted_elementary(values)
    s_k = pick(full, k)

    if name == "decomposition":
        residual = s_k[..., np.newaxis] - pick(deleted, k) - values * pick(deleted, k - 1)
        return as_result(np.max(np.abs(residual), axis=-1))
    if name == "euler":
        return as_result(np.abs(np.sum(values * pick(deleted, k - 1), axis=-1) - k * s_k))
    if name == "trace":
        return as_result(np.abs(np.sum(pick(deleted, k), axis=-1) - (n - k) * s_k))
    if name == "newton":
        lower = pick(full, k - 1)
        upper = pick(full, k + 1)
        return as_result(k * (n - k) * s_k**2 - (n - k + 1) * (k + 1) * lower * upper)

    if mu is None:
        raise ValueError("The garding margin needs a second spectrum mu")  # noqa: TRY003
    other = as_array(mu)
    if other.shape[-1] != n:
        raise ValueError("lam and mu have different lengths")  # noqa: TRY003
    if not (np.all(gamma_mask(values, k)) and np.all(gamma_mask(other, k))):
        raise ValueError(f"The garding margin needs lam and mu inside Gamma_{k}")  # noqa: TRY003
    mixed = np.sum(other * pick(deleted, k - 1), axis=-1)
    bound = k * sigma(other, k) ** (1.0 / k) * s_k ** (1.0 - 1.0 / k)
    return as_result(mixed - bound)


def newton_maclaurin_margin(lam: SpectrumLike, k: int, l: int, r: int, s: int) -> typing.Any:  # noqa: ANN401, E741 float or array; degree naming
    """
    Margin of the generalized Newton-MacLaurin inequality on Gamma_k.

    Compares the normalised quotients [(sigma_k/C_n^k)/(sigma_l/C_n^l)]^{1/(k-l)}
    and [(sigma_r/C_n^r)/(sigma_s/C_n^s)]^{1/(r-s)}.

    Args:
    ----
        lam: The spectrum (or a batch of spectra) inside Gamma_k.
        k: Outer numerator degree.
        l: Outer denominator degree.
        r: Inner numerator degree.
        s: Inner denominator degree.

    Returns:
    -------
        Right side minus left side, non-negative when the inequality holds.

    """
    values = as_array(lam)
    n = values.shape[-1]
    if not (n >= k > l >= 0 and r > s >= 0 and k >= r and l >= s):
        raise ValueError(f"Inadmissible degrees (k, l, r, s) = {(k, l, r, s)}")  # noqa: TRY003
    if not np.all(gamma_mask(values, k)):
        raise ValueError(f"The Newton-MacLaurin margin needs lam inside Gamma_{k}")  # noqa: TRY003
    full = _recurrence(values)
    scaled = [full[..., j] / math.comb(n, j) for j in range(n + 1)]
    lhs = (scaled[k] / scaled[l]) ** (1.0 / (k - l))
    rhs = (scaled[r] / scaled[s]) ** (1.0 / (r - s))
    return as_result(rhs - lhs)
