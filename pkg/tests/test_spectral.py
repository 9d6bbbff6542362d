"""Tests for the Hermitian eigen machinery."""

__author__ = "Krylov Torus contributors"
__copyright__ = "Copyright 2026, Krylov Torus contributors"
__license__ = "MIT"

import numpy as np
import pytest

import src.krylov_op as krylov_op
import src.spectral as spectral
import src.symfun as symfun
from src.errors import ConvergenceFailure


@pytest.fixture
def rng() -> np.random.Generator:
    """Seeded generator."""
    return np.random.default_rng(7)


def test_hermitian_form_symmetrises() -> None:
    """Test HermitianForm stores the Hermitian part."""
    form = spectral.HermitianForm(np.array([[1.0, 2.0], [0.0, 3.0]]))
    np.testing.assert_allclose(form.entries, [[1.0, 1.0], [1.0, 3.0]])
    assert form.n == 2


def test_hermitian_form_rejects_non_square() -> None:
    """Test HermitianForm needs a square matrix."""
    with pytest.raises(ValueError, match="square"):
        spectral.HermitianForm(np.ones((2, 3)))


def test_eig_hermitian_diagonal() -> None:
    """Test a diagonal form gives its entries in descending order."""
    decomposition = spectral.eig_hermitian(spectral.HermitianForm.diagonal([1.0, 3.0, 2.0]))
    np.testing.assert_allclose(decomposition.eigenvalues.values, [3.0, 2.0, 1.0])


def test_eig_hermitian_complex_two_by_two() -> None:
    """Test the eigenvalues of [[2, i], [-i, 2]] are 3 and 1."""
    decomposition = spectral.eig_hermitian(spectral.HermitianForm(np.array([[2.0, 1j], [-1j, 2.0]])))
    np.testing.assert_allclose(decomposition.eigenvalues.values, [3.0, 1.0], atol=1e-13)
    np.testing.assert_allclose(decomposition.reconstruct(), [[2.0, 1j], [-1j, 2.0]], atol=1e-13)


def test_eig_hermitian_batch_reconstructs(rng: np.random.Generator) -> None:
    """Test Q diag(lambda) Q* = A and Q unitary on a random batch."""
    matrices = spectral.random_hermitian(rng, 5, (200,))
    eigenvalues, frames = spectral.eig_hermitian_batch(matrices)
    rebuilt = (frames * eigenvalues[:, np.newaxis, :]) @ spectral.conjugate_transpose(frames)
    np.testing.assert_allclose(rebuilt, matrices, atol=1e-10)
    np.testing.assert_allclose(spectral.conjugate_transpose(frames) @ frames, np.broadcast_to(np.eye(5), (200, 5, 5)), atol=1e-10)
    assert np.all(np.diff(eigenvalues, axis=-1) <= 0.0)


def test_eig_hermitian_batch_matches_numpy(rng: np.random.Generator) -> None:
    """Test the Jacobi eigenvalues against LAPACK."""
    matrices = spectral.random_hermitian(rng, 4, (50,))
    eigenvalues, _ = spectral.eig_hermitian_batch(matrices)
    np.testing.assert_allclose(eigenvalues, np.linalg.eigvalsh(matrices)[:, ::-1], atol=1e-10)


@pytest.mark.parametrize("n", [4, 5])
def test_eig_hermitian_batch_large_batches_stay_finite(rng: np.random.Generator, n: int) -> None:
    """Test members that converge early are left alone while the rest of the batch keeps rotating."""
    matrices = spectral.random_hermitian(rng, n, (200,))
    eigenvalues, frames = spectral.eig_hermitian_batch(matrices)
    assert np.all(np.isfinite(eigenvalues))
    assert np.all(np.isfinite(frames))
    np.testing.assert_allclose(eigenvalues, np.linalg.eigvalsh(matrices)[:, ::-1], atol=1e-10)


def test_eig_hermitian_batch_subnormal_entries(rng: np.random.Generator) -> None:
    """Test diagonal and subnormal off-diagonal members next to random ones."""
    tiny = np.diag([4.0, 3.0, 2.0, 1.0]).astype(np.complex128)
    tiny[0, 3] = 1e-320 + 1e-320j
    tiny[3, 0] = np.conj(tiny[0, 3])
    matrices = np.concatenate(
        [
            np.diag([1.0, 2.0, 3.0, 4.0])[np.newaxis].astype(np.complex128),
            tiny[np.newaxis],
            spectral.random_hermitian(rng, 4, (30,)),
        ]
    )
    eigenvalues, frames = spectral.eig_hermitian_batch(matrices)
    assert np.all(np.isfinite(frames))
    np.testing.assert_allclose(eigenvalues[:2], [[4.0, 3.0, 2.0, 1.0], [4.0, 3.0, 2.0, 1.0]])
    np.testing.assert_allclose(eigenvalues[2:], np.linalg.eigvalsh(matrices[2:])[:, ::-1], atol=1e-10)


def test_eig_hermitian_batch_sweep_budget(rng: np.random.Generator) -> None:
    """Test a zero sweep budget on a non-diagonal matrix raises."""
    with pytest.raises(ConvergenceFailure, match="did not converge"):
        spectral.eig_hermitian_batch(spectral.random_hermitian(rng, 3), max_sweeps=0)


def test_charpoly_oracle_matches_eigenvalues(rng: np.random.Generator) -> None:
    """Test the trace recursion against sigma_k of the eigenvalues."""
    matrices = spectral.random_hermitian(rng, 6, (100,))
    eigenvalues, _ = spectral.eig_hermitian_batch(matrices)
    np.testing.assert_allclose(spectral.charpoly_oracle(matrices), symfun.elementary_all(eigenvalues), rtol=1e-9, atol=1e-9)


def test_charpoly_oracle_identity() -> None:
    """Test sigma_k of the identity are binomial coefficients."""
    np.testing.assert_allclose(spectral.charpoly_oracle(spectral.HermitianForm(np.eye(4))), [1.0, 4.0, 6.0, 4.0, 1.0])


def test_charpoly_oracle_limit() -> None:
    """Test the oracle refuses n > 8."""
    with pytest.raises(ValueError, match="n <= 8"):
        spectral.charpoly_oracle(np.eye(9))


def test_matrix_first_derivative_of_trace(rng: np.random.Generator) -> None:
    """Test the derivative of sigma_1 is the identity matrix."""
    form = spectral.HermitianForm(spectral.random_hermitian(rng, 3))
    derivative = spectral.matrix_first_derivative(form, lambda lam: symfun.grad_sigma_k(lam, 1))
    np.testing.assert_allclose(derivative.entries, np.eye(3), atol=1e-12)


def test_matrix_first_derivative_finite_differences(rng: np.random.Generator) -> None:
    """Test d/dt F(A + tB) = Re tr(dF/dA . B) for F = sigma_2."""
    a = spectral.HermitianForm(np.diag([3.0, 2.0, 1.0]) + 0.3 * spectral.random_hermitian(rng, 3))
    b = spectral.random_hermitian(rng, 3)
    derivative = spectral.matrix_first_derivative(a, lambda lam: symfun.grad_sigma_k(lam, 2))
    step = 1e-6

    def value(t: float) -> float:
        eigenvalues, _ = spectral.eig_hermitian_batch(a.entries + t * b)
        return symfun.sigma(eigenvalues, 2)

    approx = (value(step) - value(-step)) / (2 * step)
    assert np.trace(derivative.entries @ b).real == pytest.approx(approx, rel=1e-6)


def test_matrix_first_derivative_bad_gradient(rng: np.random.Generator) -> None:
    """Test a gradient of the wrong length is rejected."""
    form = spectral.HermitianForm(spectral.random_hermitian(rng, 3))
    with pytest.raises(ValueError, match="one entry per eigenvalue"):
        spectral.matrix_first_derivative(form, lambda lam: np.ones(2))


def test_second_derivative_contract_finite_differences(rng: np.random.Generator) -> None:
    """Test the second derivative formula for sigma_2 against central differences."""
    a = spectral.HermitianForm(np.diag([3.0, 2.0, 1.0]) + 0.2 * spectral.random_hermitian(rng, 3))
    b = spectral.HermitianForm(spectral.random_hermitian(rng, 3))
    lam = spectral.eig_hermitian(a).eigenvalues
    exact = spectral.second_derivative_contract(a, symfun.hessian_sigma(lam, 2), symfun.grad_sigma_k(lam, 2), b)

    def value(t: float) -> float:
        eigenvalues, _ = spectral.eig_hermitian_batch(a.entries + t * b.entries)
        return symfun.sigma(eigenvalues, 2)

    step = 1e-4
    approx = (value(step) - 2.0 * value(0.0) + value(-step)) / step**2
    assert exact == pytest.approx(approx, rel=1e-4)


def test_second_derivative_sigma_2_is_polynomial(rng: np.random.Generator) -> None:
    """Test sigma_2(A + tB) is quadratic, so its second derivative is 2 sigma_2 of the pair."""
    a = spectral.HermitianForm(spectral.random_hermitian(rng, 4))
    b = spectral.HermitianForm(spectral.random_hermitian(rng, 4))
    lam = spectral.eig_hermitian(a).eigenvalues
    exact = spectral.second_derivative_contract(a, symfun.hessian_sigma(lam, 2), symfun.grad_sigma_k(lam, 2), b)
    # sigma_2(B) = ((tr B)^2 - tr(B^2)) / 2, and d^2/dt^2 sigma_2(A + tB) = 2 sigma_2(B)
    trace = np.trace(b.entries).real
    expected = trace**2 - np.trace(b.entries @ b.entries).real
    assert exact == pytest.approx(expected, rel=1e-9, abs=1e-9)


def test_second_derivative_degenerate_limit() -> None:
    """Test the formula at the identity, where every eigenvalue coincides."""
    a = spectral.HermitianForm(np.eye(3))
    b = spectral.HermitianForm(np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]]))
    lam = spectral.eig_hermitian(a).eigenvalues
    exact = spectral.second_derivative_contract(a, symfun.hessian_sigma(lam, 2), symfun.grad_sigma_k(lam, 2), b)
    # 2 sigma_2(B) = (tr B)^2 - tr(B^2) = -2
    assert exact == pytest.approx(-2.0, abs=1e-12)


def test_second_derivative_of_operator_is_concave(rng: np.random.Generator) -> None:
    """Test the Krylov operator has non-positive second derivatives inside Gamma_{k-1}."""
    frames = spectral.random_unitary(rng, 4, (300,))
    values = rng.uniform(0.5, 3.0, size=(300, 4))
    matrices = (frames * values[:, np.newaxis, :]) @ spectral.conjugate_transpose(frames)
    eigenvalues, frames = spectral.eig_hermitian_batch(matrices)
    point = krylov_op.KrylovPoint(np.array([0.4, 0.7, -1.0]))
    directions = spectral.random_hermitian(rng, 4, (300,))
    second = spectral.second_derivative_batch(
        eigenvalues,
        frames,
        krylov_op.f_hessian(eigenvalues, point),
        krylov_op.f_grad(eigenvalues, point),
        directions,
    )
    assert np.all(second <= 1e-10)


def test_second_derivative_dimension_mismatch() -> None:
    """Test A and B must have the same size."""
    with pytest.raises(ValueError, match="different dimensions"):
        spectral.second_derivative_contract(
            spectral.HermitianForm(np.eye(2)), np.zeros((2, 2)), np.zeros(2), spectral.HermitianForm(np.eye(3))
        )


def test_random_unitary_is_unitary(rng: np.random.Generator) -> None:
    """Test random_unitary returns unitary matrices."""
    u = spectral.random_unitary(rng, 4, (10,))
    np.testing.assert_allclose(spectral.conjugate_transpose(u) @ u, np.broadcast_to(np.eye(4), (10, 4, 4)), atol=1e-12)
