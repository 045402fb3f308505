import math

import mpmath
import numpy as np
import pytest

from hyperop.errors import DomainError, MultiplierRangeError, NoConvergenceError
from hyperop.schroder import (
    FixedPointData,
    SchroderModel,
    find_fixed_point,
    fractional_iterate_oracle,
    iterate,
    koenigs,
    koenigs_inverse,
)

SQRT2 = math.sqrt(2.0)


def _power_map(base: float):
    b = mpmath.mpf(base)

    def phi(x):
        return mpmath.power(b, x)

    def dphi(x):
        return mpmath.log(b) * mpmath.power(b, x)

    return phi, dphi


def _bisect(f, lo: float, hi: float, tol: float = 1e-14) -> float:
    flo = f(lo)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


@pytest.fixture(scope="module")
def sqrt2_model():
    phi, dphi = _power_map(SQRT2)
    return SchroderModel(phi, find_fixed_point(phi, mpmath.mpf(1), dphi=dphi), dphi=dphi)


@pytest.fixture(scope="module")
def linear_model():
    lam = mpmath.mpf("0.4")

    def phi(x):
        return lam * x

    return SchroderModel(phi, find_fixed_point(phi, mpmath.mpf("0.7")), dphi=lambda x: lam)


def basin_points(model, count: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    r = model.fp.basin_hint * np.sqrt(rng.uniform(0, 1, count))
    t = rng.uniform(0, 2 * math.pi, count)
    return [complex(model.xi0) + rr * complex(math.cos(tt), math.sin(tt)) for rr, tt in zip(r, t)]


# ------------------------------------------------------------- fixed points


def test_fixed_point_sqrt2():
    phi, dphi = _power_map(SQRT2)
    fp = find_fixed_point(phi, mpmath.mpf(1), dphi=dphi)
    assert abs(fp.xi0 - 2) < 1e-13
    assert abs(fp.lam - math.log(2)) < 1e-13


def test_fixed_point_linear_map():
    fp = find_fixed_point(lambda x: 0.4 * x, 0.7)
    assert abs(fp.xi0) < 1e-13
    assert abs(fp.lam - 0.4) < 1e-10


def test_fixed_point_base_1_2_against_bisection():
    omega = _bisect(lambda x: 1.2**x - x, 1.0, math.e)
    phi, dphi = _power_map(1.2)
    fp = find_fixed_point(phi, mpmath.mpf(1), dphi=dphi)
    assert abs(fp.xi0 - omega) < 1e-12
    assert abs(fp.lam - omega * math.log(1.2)) < 1e-12


def test_fixed_point_derivative_without_analytic_form():
    phi, _ = _power_map(SQRT2)
    fp = find_fixed_point(phi, mpmath.mpf(1))
    assert abs(fp.lam - math.log(2)) < 1e-10


def test_repelling_fixed_point_is_rejected():
    with pytest.raises(MultiplierRangeError):
        FixedPointData(xi0=0.0, lam=1.5, basin_hint=1.0)


def test_divergent_iteration_raises():
    with pytest.raises((NoConvergenceError, MultiplierRangeError)):
        find_fixed_point(lambda x: 2 * x + 1, 0.5, max_iter=200)


# ---------------------------------------------------------------- Koenigs


def test_koenigs_of_linear_map_is_identity(linear_model):
    for xi in (0.3, -0.2 + 0.1j, 0.05j):
        assert abs(complex(koenigs(linear_model, xi)) - xi) < 1e-14


def test_koenigs_vanishes_at_fixed_point(sqrt2_model):
    assert abs(koenigs(sqrt2_model, sqrt2_model.xi0)) < 1e-40


def test_koenigs_limit_depth_consistency(sqrt2_model):
    # the limit at depth n and n + 5 must agree once converged
    phi, lam, x0 = sqrt2_model.phi, sqrt2_model.lam, sqrt2_model.xi0
    with mpmath.workprec(sqrt2_model.workprec):
        x, n = mpmath.mpf(1), 0
        while abs(x - x0) > mpmath.mpf(2) ** -100:
            x, n = phi(x), n + 1
        a = (x - x0) / lam**n
        for _ in range(5):
            x = phi(x)
        b = (x - x0) / lam ** (n + 5)
    assert abs(a - b) < 1e-10
    assert abs(complex(koenigs(sqrt2_model, 1)) - complex(a)) < 1e-10


def test_schroder_equation_on_basin_samples(sqrt2_model):
    lam = complex(sqrt2_model.lam)
    worst = 0.0
    for xi in basin_points(sqrt2_model, 50):
        lhs = complex(koenigs(sqrt2_model, sqrt2_model.phi(mpmath.mpc(xi))))
        rhs = lam * complex(koenigs(sqrt2_model, xi))
        worst = max(worst, abs(lhs - rhs))
    assert worst < 1e-10


def test_koenigs_inverse_round_trip(sqrt2_model):
    for xi in basin_points(sqrt2_model, 12, seed=1):
        u = koenigs(sqrt2_model, xi)
        assert abs(complex(koenigs_inverse(sqrt2_model, u)) - xi) < 1e-12


def test_koenigs_inverse_at_zero_and_linear(sqrt2_model, linear_model):
    assert koenigs_inverse(sqrt2_model, 0) == sqrt2_model.xi0
    assert abs(complex(koenigs_inverse(linear_model, 0.25 + 0.1j)) - (0.25 + 0.1j)) < 1e-14


# ------------------------------------------------------ fractional iterates


def test_whole_step(sqrt2_model):
    assert abs(complex(fractional_iterate_oracle(sqrt2_model, 1, 1)) - SQRT2) < 1e-10


def test_two_steps(sqrt2_model):
    assert abs(complex(fractional_iterate_oracle(sqrt2_model, 1, 2)) - SQRT2**SQRT2) < 1e-10


def test_half_iterate_twice_is_one_step(sqrt2_model):
    half = fractional_iterate_oracle(sqrt2_model, 1, 0.5)
    twice = fractional_iterate_oracle(sqrt2_model, half, 0.5)
    assert abs(complex(twice) - SQRT2) < 1e-9


@pytest.mark.parametrize("z1, z2", [(0.3, 0.9), (0.5 + 0.4j, 1.1 - 0.2j), (1.7, 0.25 + 1j)])
def test_semigroup(sqrt2_model, z1, z2):
    inner = fractional_iterate_oracle(sqrt2_model, 1, z2)
    lhs = complex(fractional_iterate_oracle(sqrt2_model, inner, z1))
    rhs = complex(fractional_iterate_oracle(sqrt2_model, 1, z1 + z2))
    assert abs(lhs - rhs) < 1e-8


@pytest.mark.parametrize("z", [0.5, 1.3 + 0.7j, 2.2 - 1.5j])
def test_imaginary_period(sqrt2_model, z):
    period = 2 * math.pi / abs(math.log(math.log(2)))
    a = complex(fractional_iterate_oracle(sqrt2_model, 1, z))
    b = complex(fractional_iterate_oracle(sqrt2_model, 1, z + 1j * period))
    assert abs(a - b) < 1e-8


@pytest.mark.parametrize("z", [0.2, 0.5 + 1j, 1.5 - 2j, 3 + 0.5j, 0.1 + 4j])
def test_contraction_toward_fixed_point(sqrt2_model, z):
    xi = 1.0
    val = complex(fractional_iterate_oracle(sqrt2_model, xi, z))
    assert abs(val - 2) <= abs(xi - 2) + 1e-9


def test_integer_iterates_match_composition(sqrt2_model):
    phi = sqrt2_model.phi
    with mpmath.workprec(128):
        for n in (1, 2, 5, 10, 20):
            direct = complex(iterate(phi, mpmath.mpf(1), n))
            assert abs(complex(fractional_iterate_oracle(sqrt2_model, 1, n)) - direct) < 1e-10


def test_oracle_rejects_left_half_plane(sqrt2_model):
    with pytest.raises(DomainError):
        fractional_iterate_oracle(sqrt2_model, 1, -0.5)
