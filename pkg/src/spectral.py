"""Hermitian eigenvalue machinery and spectral derivative formulas."""

__author__ = "Krylov Torus contributors"
__copyright__ = "Copyright 2026, Krylov Torus contributors"
__license__ = "MIT"


import collections.abc
import dataclasses
import itertools
import logging
import os

import numpy as np
import numpy.typing as npt

import src.symfun as symfun
from src.errors import ConvergenceFailure

LOG_LEVEL = os.environ.get("LOG_LEVEL", "INFO")
logging.basicConfig(level=LOG_LEVEL)
LOGGER = logging.getLogger(__name__)

ComplexArray = npt.NDArray[np.complex128]

JACOBI_TOLERANCE = 1e-12
JACOBI_MAX_SWEEPS = 50
CHARPOLY_MAX_N = 8
CHARPOLY_IMAG_TOLERANCE = 1e-10
DEGENERATE_GAP = 1e-8


@dataclasses.dataclass(frozen=True)
class HermitianForm:
    """A Hermitian matrix: a real (1,1)-form at a point in an omega-unitary frame."""

    entries: ComplexArray

    def __post_init__(self) -> None:
        """Validate, symmetrise and freeze the entries."""
        entries = np.array(self.entries, dtype=np.complex128)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise ValueError("A Hermitian form is a square matrix")  # noqa: TRY003
        if entries.shape[0] < 2:
            raise ValueError("A Hermitian form needs dimension at least two")  # noqa: TRY003
        if not np.all(np.isfinite(entries)):
            raise ValueError("Hermitian form entries must be finite")  # noqa: TRY003
        entries = 0.5 * (entries + entries.conj().T)
        entries.flags.writeable = False
        object.__setattr__(self, "entries", entries)

    @property
    def n(self) -> int:
        """Complex dimension."""
        return int(self.entries.shape[0])

    @classmethod
    def diagonal(cls, values: npt.ArrayLike) -> "HermitianForm":
        """Build a diagonal form."""
        return cls(np.diag(np.asarray(values, dtype=np.complex128)))


@dataclasses.dataclass(frozen=True)
class EigenDecomposition:
    """Eigenvalues (descending) and the unitary frame of column eigenvectors."""

    eigenvalues: symfun.Spectrum
    frame: ComplexArray

    def reconstruct(self) -> ComplexArray:
        """Return frame . diag(eigenvalues) . frame*."""
        return (self.frame * self.eigenvalues.values) @ self.frame.conj().T


def _hermitian_array(a: HermitianForm | npt.ArrayLike) -> ComplexArray:
    if isinstance(a, HermitianForm):
        return a.entries
    entries = np.asarray(a, dtype=np.complex128)
    if entries.ndim < 2 or entries.shape[-1] != entries.shape[-2]:
        raise ValueError("Expected square matrices on the last two axes")  # noqa: TRY003
    return entries


def _off_norm(a: ComplexArray) -> npt.NDArray[np.float64]:
    diagonal = np.diagonal(a, axis1=-2, axis2=-1)
    total = np.sum(np.abs(a) ** 2, axis=(-2, -1)) - np.sum(np.abs(diagonal) ** 2, axis=-1)
    return np.sqrt(np.maximum(total, 0.0))


def conjugate_transpose(a: ComplexArray) -> ComplexArray:
    """Swap the last two axes and conjugate."""
    return np.conj(np.swapaxes(a, -1, -2))


def eig_hermitian_batch(
    entries: npt.ArrayLike,
    tolerance: float = JACOBI_TOLERANCE,
    max_sweeps: int = JACOBI_MAX_SWEEPS,
) -> tuple[npt.NDArray[np.float64], ComplexArray]:
    """
    Diagonalise a stack of Hermitian matrices with cyclic Jacobi rotations.

    Each rotation first removes the phase of the (p, q) entry and then applies
    a real Givens rotation, so the whole stack is rotated in lock step.

    Args:
    ----
        entries: Array of Hermitian matrices on the last two axes.
        tolerance: Sweeps stop once the off-diagonal Frobenius norm is at most
            tolerance times the Frobenius norm of the input.
        max_sweeps: Sweep budget before giving up.

    Returns:
    -------
        Eigenvalues sorted descending, and frames whose columns are the
        matching eigenvectors.

    """
    a = np.array(entries, dtype=np.complex128)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise ValueError("Expected square matrices on the last two axes")  # noqa: TRY003
    n = a.shape[-1]
    a = 0.5 * (a + conjugate_transpose(a))
    frame = np.broadcast_to(np.eye(n, dtype=np.complex128), a.shape).copy()
    scale = np.sqrt(np.sum(np.abs(a) ** 2, axis=(-2, -1)))
    # Entries below this are already zero to working precision.
    negligible = np.maximum(np.finfo(np.float64).eps * scale / n, np.finfo(np.float64).tiny)

    converged = False
    for sweep in range(max_sweeps + 1):
        done = _off_norm(a) <= tolerance * scale
        if np.all(done):
            converged = True
            LOGGER.debug("Jacobi converged after %d sweeps", sweep)
            break
        if sweep == max_sweeps:
            break
        for p, q in itertools.combinations(range(n), 2):
            apq = a[..., p, q]
            magnitude = np.abs(apq)
            active = (magnitude > negligible) & ~done
            safe = np.where(active, magnitude, 1.0)
            phase = np.where(active, apq.real / safe + 1j * (apq.imag / safe), 1.0)
            tau = (a[..., q, q].real - a[..., p, p].real) / (2.0 * safe)
            t = np.where(tau >= 0.0, 1.0, -1.0) / (np.abs(tau) + np.sqrt(1.0 + tau**2))
            t = np.where(active, t, 0.0)
            c = 1.0 / np.sqrt(1.0 + t**2)
            s = t * c

            rotation = np.broadcast_to(np.eye(n, dtype=np.complex128), a.shape).copy()
            rotation[..., p, p] = c
            rotation[..., p, q] = s
            rotation[..., q, p] = -s * np.conj(phase)
            rotation[..., q, q] = c * np.conj(phase)

            a = conjugate_transpose(rotation) @ a @ rotation
            frame = frame @ rotation
        a = 0.5 * (a + conjugate_transpose(a))

    if not converged:
        raise ConvergenceFailure(f"Jacobi iteration did not converge in {max_sweeps} sweeps")

    eigenvalues = np.diagonal(a, axis1=-2, axis2=-1).real
    order = np.argsort(-eigenvalues, axis=-1, kind="stable")
    eigenvalues = np.take_along_axis(eigenvalues, order, axis=-1)
    frame = np.take_along_axis(frame, order[..., np.newaxis, :], axis=-1)
    return eigenvalues, frame


def eig_hermitian(a: HermitianForm) -> EigenDecomposition:
    """
    Diagonalise a single Hermitian form.

    Args:
    ----
        a: The form.

    Returns:
    -------
        The eigen decomposition, eigenvalues descending.

    """
    eigenvalues, frame = eig_hermitian_batch(a.entries)
    return EigenDecomposition(symfun.Spectrum(eigenvalues), frame)


def charpoly_oracle(a: HermitianForm | npt.ArrayLike) -> npt.NDArray[np.float64]:
    """
    Coefficients sigma_0 ... sigma_n of det(I + tA) via the Leverrier-Faddeev recursion.

    This never touches eigenvalues, which makes it an independent check of the
    eigenvalue route to sigma_k.

    Args:
    ----
        a: A Hermitian form or a stack of Hermitian matrices, n <= 8.

    Returns:
    -------
        Real coefficient vector(s) of length n + 1 with sigma_0 = 1.

    """
    entries = _hermitian_array(a)
    n = entries.shape[-1]
    if n > CHARPOLY_MAX_N:
        raise ValueError(f"The characteristic polynomial oracle is limited to n <= {CHARPOLY_MAX_N}")  # noqa: TRY003

    identity = np.eye(n, dtype=np.complex128)
    coefficients = np.zeros((*entries.shape[:-2], n + 1), dtype=np.complex128)
    coefficients[..., n] = 1.0
    m = np.zeros_like(entries)
    for j in range(1, n + 1):
        m = entries @ m + coefficients[..., n - j + 1, np.newaxis, np.newaxis] * identity
        coefficients[..., n - j] = -np.trace(entries @ m, axis1=-2, axis2=-1) / j

    signs = np.array([(-1.0) ** j for j in range(n + 1)])
    sigmas = signs * coefficients[..., ::-1]
    residue = np.abs(sigmas.imag)
    if np.any(residue > CHARPOLY_IMAG_TOLERANCE * (1.0 + np.abs(sigmas.real))):
        raise ValueError("Imaginary residue in the characteristic polynomial; input is not Hermitian")  # noqa: TRY003
    return sigmas.real


def first_derivative_batch(frames: ComplexArray, gradients: npt.ArrayLike) -> ComplexArray:
    """Assemble Q diag(f) Q* for stacks of frames and eigenvalue gradients."""
    f = np.asarray(gradients, dtype=np.float64)
    return np.einsum("...ip,...p,...jp->...ij", frames, f, frames.conj())


def matrix_first_derivative(
    a: HermitianForm,
    scalar_gradient: collections.abc.Callable[[symfun.Spectrum], npt.ArrayLike],
) -> HermitianForm:
    """
    Matrix derivative dF/dA of F(A) = f(lambda(A)).

    Args:
    ----
        a: The point of evaluation.
        scalar_gradient: Gradient of the symmetric function f, evaluated on the
            descending spectrum of a.

    Returns:
    -------
        Q diag(f_1, ..., f_n) Q* in the ambient frame of a.

    """
    decomposition = eig_hermitian(a)
    gradient = np.asarray(scalar_gradient(decomposition.eigenvalues), dtype=np.float64)
    if gradient.shape != (a.n,):
        raise ValueError("The scalar gradient must return one entry per eigenvalue")  # noqa: TRY003
    return HermitianForm(first_derivative_batch(decomposition.frame, gradient))


def second_derivative_batch(
    eigenvalues: npt.NDArray[np.float64],
    frames: ComplexArray,
    f_hessian: npt.ArrayLike,
    f_grad: npt.ArrayLike,
    direction: npt.ArrayLike,
) -> npt.NDArray[np.float64]:
    """
    Vectorised body of second_derivative_contract for pre-diagonalised stacks.

    Args:
    ----
        eigenvalues: Descending eigenvalues, shape (..., n).
        frames: Matching eigenvector frames, shape (..., n, n).
        f_hessian: Hessian of f at the eigenvalues, shape (..., n, n).
        f_grad: Gradient of f at the eigenvalues, shape (..., n).
        direction: The Hermitian direction B in the ambient frame, shape (..., n, n).

    Returns:
    -------
        The second directional derivative of F at A along B.

    """
    hessian = np.asarray(f_hessian, dtype=np.float64)
    gradient = np.asarray(f_grad, dtype=np.float64)
    b = conjugate_transpose(frames) @ np.asarray(direction, dtype=np.complex128) @ frames
    diagonal = np.diagonal(b, axis1=-2, axis2=-1).real
    total = np.einsum("...p,...pq,...q->...", diagonal, hessian, diagonal)
    n = eigenvalues.shape[-1]
    for p, q in itertools.combinations(range(n), 2):
        gap = eigenvalues[..., p] - eigenvalues[..., q]
        close = np.abs(gap) < DEGENERATE_GAP
        safe = np.where(close, 1.0, gap)
        # limit of the divided difference for a symmetric C^2 function
        quotient = np.where(
            close,
            hessian[..., p, p] - hessian[..., p, q],
            (gradient[..., p] - gradient[..., q]) / safe,
        )
        total = total + 2.0 * quotient * np.abs(b[..., p, q]) ** 2
    return total


def second_derivative_contract(
    a: HermitianForm,
    f_hessian: npt.ArrayLike,
    f_grad: npt.ArrayLike,
    b: HermitianForm,
) -> float:
    """
    Second derivative of F(A) = f(lambda(A)) contracted twice with B.

    Args:
    ----
        a: The point of evaluation.
        f_hessian: Hessian of f at the descending spectrum of a.
        f_grad: Gradient of f at the descending spectrum of a.
        b: The direction, in the same ambient frame as a.

    Returns:
    -------
        sum f_pq b_pp b_qq + 2 sum_{p<q} (f_p - f_q)/(lambda_p - lambda_q) |b_pq|^2.

    """
    if a.n != b.n:
        raise ValueError("A and B have different dimensions")  # noqa: TRY003
    eigenvalues, frame = eig_hermitian_batch(a.entries)
    return float(second_derivative_batch(eigenvalues, frame, f_hessian, f_grad, b.entries))


def random_unitary(rng: np.random.Generator, n: int, size: tuple[int, ...] = ()) -> ComplexArray:
    """Draw Haar distributed unitary matrices."""
    z = rng.standard_normal((*size, n, n)) + 1j * rng.standard_normal((*size, n, n))
    q, r = np.linalg.qr(z)
    diagonal = np.diagonal(r, axis1=-2, axis2=-1)
    return q * (diagonal / np.abs(diagonal))[..., np.newaxis, :]


def random_hermitian(
    rng: np.random.Generator,
    n: int,
    size: tuple[int, ...] = (),
    scale: float = 1.0,
) -> ComplexArray:
    """Draw Hermitian matrices with Gaussian entries."""
    z = rng.standard_normal((*size, n, n)) + 1j * rng.standard_normal((*size, n, n))
    return 0.5 * scale * (z + conjugate_transpose(z))
