"""Flat torus discretisation: periodic grids, fields and Wirtinger derivatives.

Real axes are ordered (x1, y1, x2, y2, ...), so x_i lives on axis 2(i-1) and
y_i on axis 2(i-1)+1. Every field stores its values with the grid shape as the
leading axes.
"""

__author__ = "Krylov Torus contributors"
__copyright__ = "Copyright 2026, Krylov Torus contributors"
__license__ = "MIT"


import dataclasses
import functools
import itertools
import logging
import math
import os

import numpy as np
import numpy.typing as npt
import pandas as pd

import src.krylov_op as krylov_op
import src.spectral as spectral
import src.symfun as symfun

LOG_LEVEL = os.environ.get("LOG_LEVEL", "INFO")
logging.basicConfig(level=LOG_LEVEL)
LOGGER = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.float64]
ComplexArray = npt.NDArray[np.complex128]

MIN_POINTS = 8


@dataclasses.dataclass(frozen=True)
class TorusGrid:
    """A uniform periodic grid on the flat torus of complex dimension n."""

    n: int
    N: int  # noqa: N815 points per real axis

    def __post_init__(self) -> None:
        """Validate the grid size."""
        if self.n < 2:
            raise ValueError("The complex dimension must be at least two")  # noqa: TRY003
        if self.N < MIN_POINTS or self.N % 2:
            raise ValueError(f"Points per axis must be even and at least {MIN_POINTS}, got {self.N}")  # noqa: TRY003

    @property
    def h(self) -> float:
        """Grid spacing."""
        return 2.0 * math.pi / self.N

    @property
    def ndim(self) -> int:
        """Number of real axes."""
        return 2 * self.n

    @property
    def shape(self) -> tuple[int, ...]:
        """Shape of a scalar field on the grid."""
        return (self.N,) * self.ndim

    @property
    def size(self) -> int:
        """Total number of nodes."""
        return self.N**self.ndim

    @functools.cached_property
    def axis_values(self) -> FloatArray:
        """Node coordinates along one axis."""
        return self.h * np.arange(self.N)

    def coordinate(self, axis: int) -> FloatArray:
        """Coordinate of each node along a real axis, broadcastable to the grid shape."""
        shape = [1] * self.ndim
        shape[axis] = self.N
        return self.axis_values.reshape(shape)

    @staticmethod
    def axis_name(axis: int) -> str:
        """Column name of a real axis."""
        return f"{'xy'[axis % 2]}{axis // 2 + 1}"


@dataclasses.dataclass(frozen=True)
class ScalarField:
    """Real values on every node of a grid."""

    grid: TorusGrid
    values: FloatArray

    def __post_init__(self) -> None:
        """Validate the shape and freeze the values."""
        values = np.array(self.values, dtype=np.float64)
        if values.shape != self.grid.shape:
            raise ValueError(f"Field shape {values.shape} does not match grid {self.grid.shape}")  # noqa: TRY003
        if not np.all(np.isfinite(values)):
            raise ValueError("Field values must be finite")  # noqa: TRY003
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, grid: TorusGrid) -> "ScalarField":
        """The zero field."""
        return cls(grid, np.zeros(grid.shape))

    def mean(self) -> float:
        """Grid mean."""
        return float(np.mean(self.values))

    def centered(self) -> "ScalarField":
        """The field minus its mean."""
        return ScalarField(self.grid, self.values - self.mean())

    def is_centered(self, tolerance: float = 1e-12) -> bool:
        """Whether the mean vanishes up to tolerance."""
        return abs(self.mean()) <= tolerance * (1.0 + float(np.max(np.abs(self.values))))


@dataclasses.dataclass(frozen=True)
class HermitianField:
    """One Hermitian matrix per node."""

    grid: TorusGrid
    entries: ComplexArray
    _flags: dict[int, npt.NDArray[np.bool_]] = dataclasses.field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self) -> None:
        """Validate, symmetrise and freeze the entries."""
        entries = np.array(self.entries, dtype=np.complex128)
        n = self.grid.n
        if entries.shape != (*self.grid.shape, n, n):
            raise ValueError(f"Expected entries of shape {(*self.grid.shape, n, n)}, got {entries.shape}")  # noqa: TRY003
        if not np.all(np.isfinite(entries)):
            raise ValueError("Field entries must be finite")  # noqa: TRY003
        entries = 0.5 * (entries + spectral.conjugate_transpose(entries))
        entries.flags.writeable = False
        object.__setattr__(self, "entries", entries)

    @classmethod
    def constant(cls, grid: TorusGrid, matrix: npt.ArrayLike) -> "HermitianField":
        """The same form at every node."""
        form = spectral.HermitianForm(np.asarray(matrix))
        return cls(grid, np.broadcast_to(form.entries, (*grid.shape, grid.n, grid.n)))

    @functools.cached_property
    def _decomposition(self) -> tuple[FloatArray, ComplexArray]:
        n = self.grid.n
        eigenvalues, frames = spectral.eig_hermitian_batch(self.entries.reshape(-1, n, n))
        return eigenvalues.reshape(*self.grid.shape, n), frames.reshape(*self.grid.shape, n, n)

    @property
    def eigenvalues(self) -> FloatArray:
        """Descending eigenvalues at every node."""
        return self._decomposition[0]

    @property
    def frames(self) -> ComplexArray:
        """Eigenvector frames at every node."""
        return self._decomposition[1]

    def cone_flags(self, k: int) -> npt.NDArray[np.bool_]:
        """Pointwise membership of the spectrum in Gamma_{k-1}, cached per k."""
        if k not in self._flags:
            self._flags[k] = symfun.gamma_mask(self.eigenvalues, k - 1)
        return self._flags[k]


@dataclasses.dataclass(frozen=True)
class FourierMode:
    """amplitude * cos(wave . x + phase)."""

    wave: tuple[int, ...]
    amplitude: float
    phase: float = 0.0


@dataclasses.dataclass(frozen=True)
class FourierSpec:
    """A constant plus a finite cosine series on the torus."""

    constant: float = 0.0
    modes: tuple[FourierMode, ...] = ()

    @property
    def max_wave(self) -> int:
        """Largest absolute wave component over all modes."""
        return max((abs(m) for mode in self.modes for m in mode.wave), default=0)

    def check(self, grid: TorusGrid) -> None:
        """Reject modes of the wrong length or beyond the aliasing bound N/4."""
        for mode in self.modes:
            if len(mode.wave) != grid.ndim:
                raise ValueError(f"Wave vector {mode.wave} needs {grid.ndim} components")  # noqa: TRY003
        if 4 * self.max_wave > grid.N:
            raise ValueError(f"Wave component {self.max_wave} aliases on a grid with N={grid.N}")  # noqa: TRY003


def _phases(mode: FourierMode, grid: TorusGrid) -> FloatArray:
    angle = np.full(grid.shape, mode.phase)
    for axis, m in enumerate(mode.wave):
        if m:
            angle = angle + m * grid.coordinate(axis)
    return angle


def sample_fourier(spec: FourierSpec, grid: TorusGrid) -> ScalarField:
    """
    Synthesise a Fourier spec on the grid.

    Args:
    ----
        spec: The constant and modes.
        grid: Target grid.

    Returns:
    -------
        The sampled field.

    """
    spec.check(grid)
    values = np.full(grid.shape, spec.constant)
    for mode in spec.modes:
        values = values + mode.amplitude * np.cos(_phases(mode, grid))
    return ScalarField(grid, values)


def analytic_complex_hessian(spec: FourierSpec, grid: TorusGrid) -> HermitianField:
    """
    Exact Wirtinger Hessian of a Fourier spec, sampled on the grid.

    For A cos(m . x + phase) the Hessian is -(A cos(.)/4) w w* with
    w_i = m_{x_i} - sqrt(-1) m_{y_i}.

    Args:
    ----
        spec: The potential.
        grid: Target grid.

    Returns:
    -------
        The Hermitian field of second Wirtinger derivatives.

    """
    spec.check(grid)
    n = grid.n
    entries = np.zeros((*grid.shape, n, n), dtype=np.complex128)
    for mode in spec.modes:
        wave = np.asarray(mode.wave, dtype=np.float64)
        w = wave[0::2] - 1j * wave[1::2]
        outer = np.outer(w, w.conj())
        scale = -0.25 * mode.amplitude * np.cos(_phases(mode, grid))
        entries = entries + scale[..., np.newaxis, np.newaxis] * outer
    return HermitianField(grid, entries)


def second_difference(values: FloatArray, grid: TorusGrid, a: int, b: int) -> FloatArray:
    """
    Periodic central second difference along real axes a and b.

    Args:
    ----
        values: Scalar values with the grid shape.
        grid: The grid.
        a: First axis.
        b: Second axis.

    Returns:
    -------
        The three point stencil when a == b, the four point cross stencil otherwise.

    """
    h2 = grid.h**2
    if a == b:
        return (np.roll(values, -1, axis=a) - 2.0 * values + np.roll(values, 1, axis=a)) / h2
    plus = np.roll(values, -1, axis=a)
    minus = np.roll(values, 1, axis=a)
    return (
        np.roll(plus, -1, axis=b) - np.roll(plus, 1, axis=b) - np.roll(minus, -1, axis=b) + np.roll(minus, 1, axis=b)
    ) / (4.0 * h2)


def complex_hessian(u: ScalarField) -> HermitianField:
    """
    Discrete Wirtinger Hessian u_{i jbar} of a scalar field.

    Args:
    ----
        u: The potential.

    Returns:
    -------
        The field 1/4 (u_xx + u_yy) + sqrt(-1)/4 (u_xy - u_yx) assembled from
        periodic central differences; exactly Hermitian.

    """
    grid = u.grid
    n = grid.n
    cache: dict[tuple[int, int], FloatArray] = {}

    def diff(a: int, b: int) -> FloatArray:
        key = (min(a, b), max(a, b))
        if key not in cache:
            cache[key] = second_difference(u.values, grid, *key)
        return cache[key]

    entries = np.zeros((*grid.shape, n, n), dtype=np.complex128)
    for i, j in itertools.combinations_with_replacement(range(n), 2):
        xi, yi, xj, yj = 2 * i, 2 * i + 1, 2 * j, 2 * j + 1
        real = 0.25 * (diff(xi, xj) + diff(yi, yj))
        imag = 0.25 * (diff(xi, yj) - diff(yi, xj))
        entries[..., i, j] = real + 1j * imag
        entries[..., j, i] = real - 1j * imag
    return HermitianField(grid, entries)


def chi_field(chi0: HermitianField, u: ScalarField) -> HermitianField:
    """chi_u = chi_0 + complex_hessian(u)."""
    if chi0.grid != u.grid:
        raise ValueError("chi_0 and u live on different grids")  # noqa: TRY003
    return HermitianField(chi0.grid, chi0.entries + complex_hessian(u).entries)


def background_field(grid: TorusGrid, matrix: npt.ArrayLike, potential: FourierSpec | None = None) -> HermitianField:
    """A closed real (1,1)-form: a constant Hermitian matrix plus the exact Hessian of a potential."""
    constant = HermitianField.constant(grid, matrix)
    if potential is None or not potential.modes:
        return constant
    return HermitianField(grid, constant.entries + analytic_complex_hessian(potential, grid).entries)


def normalized_sigmas(chi: HermitianField) -> FloatArray:
    """sigma_l(chi) / C_n^l for l = 0 ... n on the trailing axis."""
    n = chi.grid.n
    binomials = np.array([math.comb(n, l) for l in range(n + 1)], dtype=np.float64)
    return symfun.elementary_all(chi.eigenvalues) / binomials


def mean_sigma(chi: HermitianField, l: int) -> float:  # noqa: E741 degree naming
    """
    Grid mean of sigma_l(chi) / C_n^l.

    Args:
    ----
        chi: The field.
        l: Degree, 0 <= l <= n.

    Returns:
    -------
        The normalised mean, i.e. the ratio of chi^l ^ omega^{n-l} to omega^n integrals.

    """
    n = chi.grid.n
    if not 0 <= l <= n:
        raise ValueError(f"Degree l={l} outside 0..{n}")  # noqa: TRY003
    return float(np.mean(normalized_sigmas(chi)[..., l]))


def integral_condition_gap(
    chi: HermitianField,
    coefficients: krylov_op.Coefficients,
    reference: HermitianField | None = None,
    use_floors: bool = False,
) -> float:
    """
    Signed gap of the integral solvability condition.

    Args:
    ----
        chi: The field the lower degree terms are integrated on.
        coefficients: alpha_l sampled on the grid (or constants).
        reference: Field for the sigma_k term; defaults to chi.
        use_floors: Use the floor constants c_{k,l} in place of alpha_l.

    Returns:
    -------
        sum_l mean(alpha_l sigma_l / C_n^l) - mean(sigma_k / C_n^k); the floor
        form must be non-negative for solvability, the plain form must vanish.

    """
    if coefficients.n != chi.grid.n:
        raise ValueError("Coefficient dimension does not match the field")  # noqa: TRY003
    if use_floors and coefficients.floors is None:
        raise ValueError("The floor form of the gap needs floor constants")  # noqa: TRY003
    sigmas = normalized_sigmas(chi)
    top_sigmas = sigmas if reference is None else normalized_sigmas(reference)
    k = coefficients.k
    total = 0.0
    for l in range(k):  # noqa: E741
        weight = coefficients.floors[l] if use_floors and coefficients.floors else coefficients.alpha[l]
        total += float(np.mean(np.broadcast_to(weight * sigmas[..., l], chi.grid.shape)))
    return total - float(np.mean(top_sigmas[..., k]))


def _coordinate_columns(grid: TorusGrid) -> dict[str, FloatArray]:
    columns = {"index": np.arange(grid.size)}
    for axis in range(grid.ndim):
        columns[grid.axis_name(axis)] = np.broadcast_to(grid.coordinate(axis), grid.shape).reshape(-1)
    return columns


def scalar_frame(field: ScalarField) -> pd.DataFrame:
    """Dump a scalar field: index, coordinates, value."""
    columns = _coordinate_columns(field.grid)
    columns["value"] = field.values.reshape(-1)
    return pd.DataFrame(columns)


def hermitian_frame(field: HermitianField) -> pd.DataFrame:
    """Dump a Hermitian field: index, coordinates, re(i,j) and im(i,j) for i <= j."""
    n = field.grid.n
    flat = field.entries.reshape(-1, n, n)
    columns = _coordinate_columns(field.grid)
    for i, j in itertools.combinations_with_replacement(range(n), 2):
        columns[f"re({i + 1},{j + 1})"] = flat[:, i, j].real
        columns[f"im({i + 1},{j + 1})"] = flat[:, i, j].imag
    return pd.DataFrame(columns)


def eigenvalue_frame(field: HermitianField, cone_margin: FloatArray | None = None) -> pd.DataFrame:
    """Dump eigenvalues (descending) per node, plus the minimum cone margin per node if given."""
    n = field.grid.n
    flat = field.eigenvalues.reshape(-1, n)
    columns = _coordinate_columns(field.grid)
    for i in range(n):
        columns[f"lambda_{i + 1}"] = flat[:, i]
    if cone_margin is not None:
        columns["cone_margin"] = np.asarray(cone_margin).reshape(-1)
    return pd.DataFrame(columns)
