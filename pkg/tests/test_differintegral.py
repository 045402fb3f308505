import cmath
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hyperop.differintegral import (
    EvalPolicy,
    ThetaSeries,
    build_transform,
    decay_diagnostic,
    differintegral_eval,
    matrix_fractional_power,
    matrix_power_eig,
    near_integer_eval,
    rmt_interpolation_check,
    theta_eval,
    theta_neg_real,
)
from hyperop.errors import DefectiveMatrixError, DomainError, PoleError, SectorError
from hyperop.numerics import RayContour


def geometric(beta: float, scale: float = 1.0, limit: float = 0.0) -> ThetaSeries:
    """``a_k = limit + scale * beta^(k+1)``, so ``F(z) = limit + scale * beta^z``."""
    b, s, c = mpmath.mpf(beta), mpmath.mpf(scale), mpmath.mpf(limit)
    return ThetaSeries.from_function(lambda x: c + s * b**x, xi0=c, decay_rate=beta)


EXP = ThetaSeries.from_function(lambda x: mpmath.mpf(1), xi0=1)


# ------------------------------------------------------------------ series


def test_theta_series_needs_data():
    with pytest.raises(ValueError):
        ThetaSeries()
    with pytest.raises(DomainError):
        ThetaSeries(coeffs=(1.0, math.inf))


def test_theta_series_pads_with_limit():
    s = ThetaSeries(coeffs=(1, 2, 3), xi0=5)
    assert s.coefficient(1) == 2
    assert s.coefficient(10) == 5


def test_decay_rate_bounds_reduced_coefficients():
    s = ThetaSeries(coeffs=tuple(2 + 0.7 * 0.6**k for k in range(30)), xi0=2)
    assert s.decay_rate == pytest.approx(0.6, abs=1e-6)
    k = np.arange(30)
    b = np.array([float(s.coefficient(int(j)) - 2) for j in k])
    c = np.max(b / s.decay_rate**k)
    assert c < 1.0 and np.all(b <= c * s.decay_rate**k * (1 + 1e-9))


def test_theta_at_origin_is_first_coefficient():
    s = geometric(0.5, limit=1.0)
    assert abs(theta_eval(s, 0) - 1.5) < 1e-15


def test_theta_exp_series_on_negative_axis():
    assert abs(theta_eval(EXP, -5) / math.exp(-5) - 1) < 1e-12


def test_theta_geometric_cancellation():
    s = geometric(0.5)
    hi, lo = theta_neg_real(s, np.array([20.0]))
    assert abs((hi[0] + lo[0]) / (0.5 * math.exp(-10)) - 1) < 1e-12


@settings(max_examples=40, deadline=None)
@given(st.complex_numbers(max_magnitude=5, allow_nan=False, allow_infinity=False))
def test_theta_stabilized_equals_naive_sum(w):
    s = geometric(0.35, scale=0.8, limit=1.3)
    with mpmath.workprec(200):
        naive = complex(mpmath.nsum(lambda k: s.coefficient(int(k)) * mpmath.mpc(w) ** k / mpmath.factorial(k), [0, 80]))
    assert abs(theta_eval(s, w) - naive) < 1e-12 * max(1.0, abs(naive))


# --------------------------------------------------------------- transform


@pytest.mark.parametrize("z", [0.5, 1.7, 0.3 + 0.4j])
def test_exp_series_transform_is_one(z):
    assert abs(differintegral_eval(EXP, z) - 1) < 1e-9


def test_geometric_transform_is_power():
    assert abs(differintegral_eval(geometric(0.5), 0.5) - math.sqrt(0.5)) < 1e-9


@settings(max_examples=25, deadline=None)
@given(
    st.floats(0.1, 0.9),
    st.floats(-2.0, 2.0),
    st.floats(-1.0, 3.0),
)
def test_integers_reproduce_coefficients(beta, scale, limit):
    s = geometric(beta, scale, limit)
    ks = np.arange(11)
    vals = differintegral_eval(s, ks + 1.0)
    expected = np.array([float(s.coefficient(int(k))) for k in ks])
    assert np.max(np.abs(vals - expected)) < 1e-9


def test_near_integer_agrees_with_generic_path_and_closed_form():
    s = geometric(0.5, limit=1.0)
    z = 3 - 0.01 * (1 + 1j)
    generic = differintegral_eval(s, z)
    limit_form = near_integer_eval(s, z)
    closed = 1 + 0.5**z
    a2 = float(s.coefficient(2))
    assert abs(generic - limit_form) < 1e-6 * a2
    assert abs(generic - closed) < 1e-6 * a2


def test_near_integer_at_integers():
    s = geometric(0.5, limit=1.0)
    assert abs(near_integer_eval(s, 3) - float(s.coefficient(2))) < 1e-14
    assert abs(near_integer_eval(EXP, 2) - 1) < 1e-14


def test_seam_continuity():
    s = geometric(0.5, limit=1.0)
    a1 = float(s.coefficient(1))
    at, inside, outside = (differintegral_eval(s, 2 + d) for d in (0.0, 1e-6, 1e-3))
    assert abs(inside - at) < 1e-5 * (1 + a1)
    # the generic path just outside the seam continues the limit form
    assert abs(outside - near_integer_eval(s, 2 + 1e-3)) < 1e-9


def test_near_integer_rejects_far_points():
    with pytest.raises(DomainError):
        near_integer_eval(EXP, 0.3)


def test_exact_integer_without_limit_form_raises():
    with pytest.raises(PoleError):
        differintegral_eval(EXP, 2.0, EvalPolicy(pole_tol=0.0))


def test_order_shift_convention():
    s = geometric(0.5)
    z = 0.7 + 0.2j
    assert abs(differintegral_eval(s, z, shift=0) - differintegral_eval(s, z + 1)) < 1e-13


@pytest.mark.parametrize("split", [0.5, 2.0])
def test_split_point_independence(split):
    s1 = geometric(0.45, scale=1.0, limit=0.5)
    s2 = geometric(0.45, scale=1.0, limit=0.5)
    z = np.array([0.4 + 0.3j, 1.6, 2.5 - 1j])
    ref = differintegral_eval(s1, z)
    alt = differintegral_eval(s2, z, EvalPolicy(contour=RayContour(split_point=split)))
    assert np.max(np.abs(ref - alt)) < 1e-9


@pytest.mark.parametrize("angle", [0.2, -0.2])
def test_ray_independence(angle):
    s1 = geometric(0.45, scale=1.0, limit=0.5)
    s2 = geometric(0.45, scale=1.0, limit=0.5)
    z = np.array([0.4 + 0.3j, 1.6, 2.5 - 1j])
    ref = differintegral_eval(s1, z)
    alt = differintegral_eval(s2, z, EvalPolicy(contour=RayContour(angle=angle)))
    assert np.max(np.abs(ref - alt)) < 1e-8


def test_linearity():
    c1, c2 = 0.7, -1.9
    b1, b2 = mpmath.mpf("0.3"), mpmath.mpf("0.65")
    s1 = ThetaSeries.from_function(lambda x: b1**x, decay_rate=0.3)
    s2 = ThetaSeries.from_function(lambda x: b2**x, decay_rate=0.65)
    mix = ThetaSeries.from_function(lambda x: c1 * b1**x + c2 * b2**x, decay_rate=0.65)
    z = np.array([0.3 + 0.1j, 1.2 - 0.5j, 2.7])
    lhs = differintegral_eval(mix, z)
    rhs = c1 * differintegral_eval(s1, z) + c2 * differintegral_eval(s2, z)
    assert np.max(np.abs(lhs - rhs)) < 1e-10


def test_transform_is_cached_per_policy():
    s = geometric(0.5)
    assert build_transform(s) is build_transform(s)
    assert build_transform(s, EvalPolicy(series_order=40)) is not build_transform(s)


# ----------------------------------------------------------- interpolation


@pytest.mark.parametrize(
    "H, z, tol",
    [
        (lambda x: 0.5**x, 1.5, 1e-9),
        (lambda x: mpmath.mpf(1), 0.25, 1e-10),
        (lambda x: 0.3**x + 2 * 0.6**x, 0.8 + 0.5j, 1e-8),
    ],
)
def test_interpolation_residuals(H, z, tol):
    assert rmt_interpolation_check(H, z) < tol


# -------------------------------------------------------------- diagnostic


def test_decay_diagnostic_exp_series():
    rep = decay_diagnostic(EXP, [0.5 + 1j * k for k in range(2, 13, 2)])
    assert rep.slope <= -1.4


def test_decay_diagnostic_smoke_and_empty():
    rep = decay_diagnostic(geometric(0.5), [0.5 + 1j * k for k in (1, 2, 3)])
    assert rep.slope is not None and len(rep.im) == 3
    empty = decay_diagnostic(EXP, [])
    assert empty.slope is None and empty.im == ()


# ----------------------------------------------------------------- matrix


def test_matrix_diagonal_square_root():
    B = matrix_fractional_power(np.diag([1.0, 4.0]), 0.5)
    assert np.max(np.abs(B - np.diag([1.0, 2.0]))) < 1e-9


def test_matrix_power_zero_is_identity():
    B = matrix_fractional_power(np.diag([1.0, 4.0]), 0.0)
    assert np.max(np.abs(B - np.eye(2))) < 1e-9


def test_matrix_triangular_square_root():
    A = np.array([[2.0, 1.0], [0.0, 3.0]])
    B = matrix_fractional_power(A, 0.5)
    assert np.max(np.sum(np.abs(B @ B - A), axis=1)) < 1e-8


def random_matrix(rng, n: int = 3) -> np.ndarray:
    """Real ``V D V^-1`` with eigenvalue real parts in [0.3, 3], sometimes a complex pair."""
    D = np.diag(rng.uniform(0.3, 3.0, n))
    if rng.uniform() < 0.5:
        b = rng.uniform(0.2, 1.0)
        D[1, 2], D[2, 1], D[2, 2] = b, -b, D[1, 1]
    V = np.eye(n) + 0.3 * rng.standard_normal((n, n))
    return V @ D @ np.linalg.inv(V)


@pytest.mark.parametrize("seed", range(4))
def test_matrix_against_eigendecomposition(seed):
    rng = np.random.default_rng(seed)
    A = random_matrix(rng)
    z = complex(rng.uniform(0.1, 1.5), rng.uniform(-0.5, 0.5))
    B = matrix_fractional_power(A, z)
    ref = matrix_power_eig(A, z)
    assert np.max(np.sum(np.abs(B - ref), axis=1)) < 1e-7


def test_matrix_errors():
    with pytest.raises(SectorError):
        matrix_fractional_power(np.diag([1.0, -0.5]), 0.5)
    with pytest.raises(DefectiveMatrixError):
        matrix_fractional_power(np.array([[1.0, 1.0], [0.0, 1.0]]), 0.5)
    with pytest.raises(DomainError):
        matrix_fractional_power(np.ones((2, 3)), 0.5)


def test_principal_power_matches_scalar():
    assert abs(matrix_power_eig(np.array([[0.5]]), 0.3 + 0.2j)[0, 0] - cmath.exp((0.3 + 0.2j) * math.log(0.5))) < 1e-15
