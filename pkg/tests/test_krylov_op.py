"""Tests for the Krylov quotient operator and its margins."""

__author__ = "Krylov Torus contributors"
__copyright__ = "Copyright 2026, Krylov Torus contributors"
__license__ = "MIT"

import fractions

import numpy as np
import pytest

import src.krylov_op as krylov_op
import src.spectral as spectral
import src.symfun as symfun
from src.errors import AssumptionViolation, ConeViolation

LAM = np.array([1.0, 2.0, 3.0])


@pytest.fixture
def rng() -> np.random.Generator:
    """Seeded generator."""
    return np.random.default_rng(11)


@pytest.fixture
def point() -> krylov_op.KrylovPoint:
    """k = 2 with beta_0 = 1 and beta_1 = 0.5."""
    return krylov_op.KrylovPoint(np.array([1.0, 0.5]))


def test_beta_factor() -> None:
    """Test the exact binomial ratios."""
    assert krylov_op.beta_factor(3, 2, 0) == 3
    assert krylov_op.beta_factor(3, 2, 1) == 1
    assert krylov_op.beta_factor(4, 3, 1) == fractions.Fraction(1)
    assert krylov_op.beta_factor(4, 2, 1) == fractions.Fraction(3, 2)


def test_ratio_bound_constant() -> None:
    """Test (C_n^k)^{k-1-l} C_n^l / (C_n^{k-1})^{k-l} for n=3, k=2, l=0."""
    assert krylov_op.ratio_bound_constant(3, 2, 0) == pytest.approx(1.0 / 3.0)


def test_coefficients_convert_to_betas() -> None:
    """Test beta_l = C_n^k / C_n^l alpha_l."""
    c = krylov_op.Coefficients(3, 2, (1.0, 2.0))
    np.testing.assert_allclose(krylov_op.betas_from_alphas(c).beta, [3.0, 2.0])
    np.testing.assert_allclose(krylov_op.alphas_from_betas(3, 2, np.array([3.0, 2.0])), [1.0, 2.0])


def test_coefficients_are_read_only() -> None:
    """Test stored coefficient arrays cannot be modified."""
    c = krylov_op.Coefficients(2, 2, (np.array([1.0, 2.0]), 1.0))
    with pytest.raises(ValueError, match="read-only"):
        c.alpha[0][0] = 5.0


@pytest.mark.parametrize(
    ("alpha", "floors", "clause"),
    [
        ((0.0, 1.0), None, "ii"),
        ((-1.0, 1.0), None, "i"),
        ((np.array([0.0, 1.0]), 1.0), None, "i"),
        ((0.4, 1.0), (0.5, 0.5), "iii"),
        ((1.0, 0.4), (0.5, 0.5), "iii"),
    ],
)
def test_coefficients_assumption(alpha: tuple, floors: tuple[float, ...] | None, clause: str) -> None:
    """Test each clause of the standing assumption."""
    with pytest.raises(AssumptionViolation) as error:
        krylov_op.Coefficients(2, 2, alpha, floors)
    assert error.value.clause == clause


def test_coefficients_allow_zero_lower_term() -> None:
    """Test an identically zero alpha_l is fine when another lower term is positive."""
    c = krylov_op.Coefficients(3, 3, (0.0, 1.0, -2.0))
    assert c.k == 3


@pytest.mark.parametrize(
    ("n", "k", "alpha", "match"),
    [
        (1, 1, (1.0,), "at least two"),
        (3, 4, (1.0, 1.0, 1.0, 1.0), "Degree"),
        (3, 2, (1.0,), "Expected 2"),
        (3, 2, (1.0, np.inf), "finite"),
    ],
)
def test_coefficients_shape_errors(n: int, k: int, alpha: tuple, match: str) -> None:
    """Test Coefficients rejects bad shapes and values."""
    with pytest.raises(ValueError, match=match):
        krylov_op.Coefficients(n, k, alpha)


def test_with_top_replaces_last() -> None:
    """Test with_top only touches alpha_{k-1}."""
    c = krylov_op.Coefficients(3, 2, (1.0, 2.0)).with_top(-4.0)
    assert float(c.alpha[1]) == -4.0
    assert float(c.alpha[0]) == 1.0


def test_krylov_point_rejects_negative_lower() -> None:
    """Test beta_l must be non-negative below the top slot."""
    with pytest.raises(ValueError, match="non-negative"):
        krylov_op.KrylovPoint(np.array([-0.1, 1.0]))
    assert krylov_op.KrylovPoint(np.array([0.1, -1.0])).k == 2


def test_f_value(point: krylov_op.KrylovPoint) -> None:
    """Test f = sigma_2/sigma_1 - beta_0/sigma_1 at (1, 2, 3)."""
    assert krylov_op.f_value(LAM, point) == pytest.approx(5.0 / 3.0)


def test_f_value_outside_cone(point: krylov_op.KrylovPoint) -> None:
    """Test f refuses spectra outside Gamma_{k-1}."""
    with pytest.raises(ConeViolation, match="outside Gamma_1"):
        krylov_op.f_value(np.array([-3.0, 1.0, 1.0]), point)


def test_f_value_degree_too_large() -> None:
    """Test k may not exceed n."""
    with pytest.raises(ValueError, match="exceeds"):
        krylov_op.f_value(np.array([1.0, 2.0]), krylov_op.KrylovPoint(np.array([1.0, 1.0, 1.0])))


def test_f_grad(point: krylov_op.KrylovPoint) -> None:
    """Test the quotient rule gradient at (1, 2, 3)."""
    np.testing.assert_allclose(krylov_op.f_grad(LAM, point), np.array([20.0, 14.0, 8.0]) / 36.0)


def test_f_grad_finite_differences(rng: np.random.Generator) -> None:
    """Test f_grad against central differences for k = 3."""
    lam = np.array([2.0, 1.5, 1.0, 0.5])
    p = krylov_op.KrylovPoint(np.array([0.3, 0.6, -0.4]))
    exact = krylov_op.f_grad(lam, p)
    step = 1e-6
    for i in range(4):
        e = np.zeros(4)
        e[i] = step
        approx = (krylov_op.f_value(lam + e, p) - krylov_op.f_value(lam - e, p)) / (2 * step)
        assert approx == pytest.approx(exact[i], rel=1e-6, abs=1e-8)


def test_f_hessian_finite_differences() -> None:
    """Test f_hessian against differences of f_grad."""
    lam = np.array([2.0, 1.5, 1.0, 0.5])
    p = krylov_op.KrylovPoint(np.array([0.3, 0.6, -0.4]))
    exact = krylov_op.f_hessian(lam, p)
    step = 1e-6
    for j in range(4):
        e = np.zeros(4)
        e[j] = step
        approx = (krylov_op.f_grad(lam + e, p) - krylov_op.f_grad(lam - e, p)) / (2 * step)
        np.testing.assert_allclose(exact[:, j], approx, rtol=1e-5, atol=1e-7)
    np.testing.assert_allclose(exact, exact.T)


def test_ellipticity_on_cone(rng: np.random.Generator) -> None:
    """Test f_i >= 0 on Gamma_{k-1} with non-negative lower betas."""
    values = rng.uniform(-1.0, 3.0, size=(5000, 4))
    values = values[symfun.gamma_mask(values, 2)]
    p = krylov_op.KrylovPoint(np.array([0.5, 1.0, 2.0]))
    gradient = krylov_op.f_grad(values, p)
    assert np.all(gradient >= -1e-10 * (1.0 + np.max(np.abs(gradient), axis=-1, keepdims=True)))


def test_euler_margin(point: krylov_op.KrylovPoint) -> None:
    """Test sum lambda_i f_i = f + sum (k - l) beta_l sigma_l / sigma_{k-1}."""
    assert krylov_op.inequality_margin("euler", LAM, point) == pytest.approx(0.0, abs=1e-14)


def test_grad_sum_margin(point: krylov_op.KrylovPoint) -> None:
    """Test sum f_i - (n-k+1)/k at (1, 2, 3)."""
    assert krylov_op.inequality_margin("grad-sum", LAM, point) == pytest.approx(7.0 / 6.0 - 1.0)


def test_grad_sum_equality_at_identity() -> None:
    """Test sum f_i = (n-k+1)/k at the identity vector when beta vanishes."""
    margin = krylov_op.inequality_margin("grad-sum", np.ones(5), krylov_op.KrylovPoint(np.zeros(3)))
    assert abs(margin) <= 4.0 * np.finfo(float).eps


def test_quotient_deleted_default(point: krylov_op.KrylovPoint) -> None:
    """Test min_i sigma_1(lam|i) - sigma_2/sigma_1 at (1, 2, 3)."""
    assert krylov_op.inequality_margin("quotient-deleted", LAM, point) == pytest.approx(3.0 - 11.0 / 6.0)


def test_quotient_deleted_needs_gamma_k() -> None:
    """Test the l < k-1 form needs Gamma_k."""
    p = krylov_op.KrylovPoint(np.array([1.0, 0.0, 0.0]))
    with pytest.raises(ConeViolation, match="Gamma_3"):
        krylov_op.inequality_margin("quotient-deleted", np.array([3.0, 2.0, -0.5]), p, l=1)


def test_quotient_deleted_bad_degree(point: krylov_op.KrylovPoint) -> None:
    """Test the lower degree must lie in 1..k-1."""
    with pytest.raises(ValueError, match="1 <= l <= k-1"):
        krylov_op.inequality_margin("quotient-deleted", LAM, point, l=0)


def test_ratio_upper_and_bounds() -> None:
    """Test the ratio and two-sided bounds when f equals beta_{k-1}."""
    p = krylov_op.KrylovPoint(np.array([1.0, 0.0]))
    top = krylov_op.f_value(LAM, p)
    solved = krylov_op.KrylovPoint(np.array([1.0, top]))
    assert krylov_op.inequality_margin("ratio-upper", LAM, solved, l=0) >= 0.0
    assert krylov_op.inequality_margin("quotient-bounds", LAM, solved) >= 0.0


def test_ratio_upper_needs_positive_beta() -> None:
    """Test the ratio bound refuses beta_l = 0."""
    p = krylov_op.KrylovPoint(np.array([0.0, 1.0, 0.5]))
    with pytest.raises(ValueError, match="beta_0 > 0"):
        krylov_op.inequality_margin("ratio-upper", LAM, p, l=0)


def test_tangent_and_midpoint(rng: np.random.Generator) -> None:
    """Test the tangent and midpoint concavity margins on random pairs."""
    lam = rng.uniform(0.1, 3.0, size=(1000, 4))
    mu = rng.uniform(0.1, 3.0, size=(1000, 4))
    p = krylov_op.KrylovPoint(np.array([0.5, 0.2, -1.0]))
    assert np.all(krylov_op.inequality_margin("tangent", lam, p, mu=mu) >= -1e-10)
    assert np.all(krylov_op.inequality_margin("concavity-midpoint", lam, p, mu=mu) >= -1e-10)


def test_pair_margin_needs_mu(point: krylov_op.KrylovPoint) -> None:
    """Test pair margins need mu."""
    with pytest.raises(ValueError, match="second spectrum"):
        krylov_op.inequality_margin("tangent", LAM, point)


def test_unknown_margin(point: krylov_op.KrylovPoint) -> None:
    """Test inequality_margin rejects unknown names."""
    with pytest.raises(ValueError, match="Unknown margin"):
        krylov_op.inequality_margin("convexity", LAM, point)


def test_cone_margins_batch_k3() -> None:
    """Test raw and normalised margins at (1, 2, 3) with beta_1 = 1 and beta_2 = 0.5."""
    p = krylov_op.KrylovPoint(np.array([0.0, 1.0, 0.5]))
    raw, normalized = krylov_op.cone_margins_batch(LAM, p)
    np.testing.assert_allclose(raw, [2.5, 0.0, -0.5])
    np.testing.assert_allclose(normalized, [0.5, 0.0, -1.0 / 6.0])


def test_cone_margins_batch_nan_for_nonpositive_denominator() -> None:
    """Test the normalised margin is NaN where sigma_{k-2}(lam|i) <= 0."""
    p = krylov_op.KrylovPoint(np.array([0.0, 0.0, 0.0]))
    _, normalized = krylov_op.cone_margins_batch(np.array([3.0, -1.0, -1.0]), p)
    assert np.isnan(normalized[0])
    assert not np.isnan(normalized[1])


def test_cone_margin_report() -> None:
    """Test the single point report for k = 2."""
    report = krylov_op.cone_margin(LAM, krylov_op.KrylovPoint(np.array([1.0, 0.5])))
    np.testing.assert_allclose(report.raw, [4.5, 3.5, 2.5])
    assert report.min_margin == pytest.approx(2.5)
    assert report.satisfied
    assert report.tau is not None
    assert 0.0 < report.tau <= 1.0


def test_cone_margin_strictness() -> None:
    """Test a margin of exactly zero is not satisfied."""
    report = krylov_op.cone_margin(np.array([5.0, 5.0]), krylov_op.KrylovPoint(np.array([1.0, 5.0])))
    assert report.min_margin == 0.0
    assert not report.satisfied


def test_cone_margin_mu_form() -> None:
    """Test the normalised variant divides by sigma_{k-2} of the deleted tuple."""
    report = krylov_op.cone_margin(LAM, krylov_op.KrylovPoint(np.array([0.0, 1.0, 0.5])), variant="mu-form")
    assert report.min_margin == pytest.approx(-1.0 / 6.0)
    np.testing.assert_allclose(report.margins, [0.5, 0.0, -1.0 / 6.0])


def test_cone_margin_mu_form_undefined() -> None:
    """Test the normalised variant raises where it is undefined."""
    with pytest.raises(ConeViolation, match="not positive"):
        krylov_op.cone_margin(np.array([3.0, -1.0, -1.0]), krylov_op.KrylovPoint(np.zeros(3)), variant="mu-form")


def test_cone_margin_frame_invariance(rng: np.random.Generator) -> None:
    """Test margins depend only on the eigenvalues."""
    p = krylov_op.KrylovPoint(np.array([0.2, 0.5, 0.3]))
    u = spectral.random_unitary(rng, 4)
    base = spectral.HermitianForm(np.diag([3.0, 2.0, 1.5, 1.0]))
    rotated = spectral.HermitianForm(u @ base.entries @ u.conj().T)
    first = krylov_op.cone_margin(base, p)
    second = krylov_op.cone_margin(rotated, p)
    np.testing.assert_allclose(np.sort(first.raw), np.sort(second.raw), atol=1e-9)


def test_cone_margin_rejects_batches() -> None:
    """Test cone_margin takes a single point."""
    with pytest.raises(ValueError, match="single point"):
        krylov_op.cone_margin(np.ones((2, 3)), krylov_op.KrylovPoint(np.array([1.0, 0.5])))


def test_cone_margin_unknown_variant() -> None:
    """Test unknown variants are rejected."""
    with pytest.raises(ValueError, match="Unknown cone variant"):
        krylov_op.cone_margin(LAM, krylov_op.KrylovPoint(np.array([1.0, 0.5])), variant="loose")


def test_uniform_slack_identity() -> None:
    """Test the identity vector has slack 1 up to the bisection tolerance."""
    assert krylov_op.uniform_slack(np.ones(3), 2) == pytest.approx(1.0, abs=1e-10)


def test_uniform_slack_outside() -> None:
    """Test spectra outside Gamma_{k-1} have zero slack."""
    assert krylov_op.uniform_slack(np.array([-3.0, 1.0, 1.0]), 2) == 0.0
