import math

import mpmath
import numpy as np
import pytest

from conftest import SQRT2
from hyperop.errors import DomainError, RangeError, RangeViolation
from hyperop.schroder import SchroderModel, find_fixed_point, fractional_iterate_oracle
from hyperop.tower import (
    TowerConfig,
    Tower,
    build_level,
    check_alpha,
    derivative_nonvanishing,
    eval as tower_eval,
    evaluate,
    level0,
    level1,
    range_excess,
    verify_functional_equation,
    verify_monotone_real,
)


def bisect(f, lo: float, hi: float, tol: float = 1e-13) -> float:
    flo = f(lo)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def power_model(alpha: float) -> SchroderModel:
    a = mpmath.mpf(alpha)

    def phi(x):
        return mpmath.power(a, x)

    def dphi(x):
        return mpmath.log(a) * mpmath.power(a, x)

    return SchroderModel(phi, find_fixed_point(phi, mpmath.mpf(1), dphi=dphi), dphi=dphi)


# ----------------------------------------------------------- closed forms


def test_level0():
    assert level0(1.3, 2) == pytest.approx(2.6, abs=1e-15)
    assert level0(1.2, 1j) == pytest.approx(1.2j, abs=1e-15)


def test_level1():
    assert level1(SQRT2, 2) == pytest.approx(2.0, abs=1e-15)
    assert level1(1.3, 1) == pytest.approx(1.3, abs=1e-15)
    assert level1(1.2, 0) == 1


@pytest.mark.parametrize("alpha", [1.0, 0.5, 1.5, math.exp(1 / math.e)])
def test_alpha_outside_range(alpha):
    with pytest.raises(RangeError):
        check_alpha(alpha)
    with pytest.raises(RangeError):
        Tower(alpha)


def test_config_validation():
    with pytest.raises(ValueError):
        TowerConfig(max_level=1)
    with pytest.raises(ValueError):
        TowerConfig(orbit_tol=0.0)
    with pytest.raises(ValueError):
        build_level(TowerConfig(max_level=2), SQRT2, 3)
    with pytest.raises(ValueError):
        Tower(SQRT2).level(1)


# --------------------------------------------------------------- level 2


def test_level2_fixed_point_and_multiplier(sqrt2_l2):
    assert sqrt2_l2.omega == pytest.approx(2.0, abs=1e-14)
    assert sqrt2_l2.lam == pytest.approx(math.log(2), abs=1e-14)
    assert sqrt2_l2.period == pytest.approx(2 * math.pi / abs(math.log(math.log(2))), rel=1e-13)


def test_level2_orbit_prefix(sqrt2_l2):
    a0 = SQRT2
    a1 = SQRT2**a0
    a2 = SQRT2**a1
    assert sqrt2_l2.orbit_values[:3] == pytest.approx([a0, a1, a2], abs=1e-15)


def test_level2_base_identities(sqrt2_l2):
    assert abs(tower_eval(sqrt2_l2, 1) - SQRT2) < 1e-9
    assert abs(tower_eval(sqrt2_l2, 2) - SQRT2**SQRT2) < 1e-9


@pytest.mark.parametrize("z", [0.5, 0.3 + 1.1j, 2.7 - 2.5j])
def test_level2_matches_koenigs_oracle(sqrt2_l2, z):
    oracle = complex(fractional_iterate_oracle(power_model(SQRT2), 1, z))
    assert abs(tower_eval(sqrt2_l2, z) - oracle) < 1e-8


def test_level2_functional_equation_examples(pool, sqrt2_l2):
    assert verify_functional_equation(sqrt2_l2, z=1.0) < 1e-8
    assert verify_functional_equation(pool.level(1.2, 2), z=0.7 + 0.4j) < 1e-7


def test_functional_equation_against_oracle_path(pool):
    # the same residual with the lower level supplied as the closed-form exponential
    ctx = pool.level(1.2, 2)
    res = verify_functional_equation(ctx, prev=lambda w: level1(1.2, w), z=0.7 + 0.4j)
    assert res < 1e-7


def test_integer_points_reproduce_orbit(sqrt2_l2):
    ks = np.arange(9)
    vals = evaluate(sqrt2_l2, ks + 1.0)
    assert np.max(np.abs(vals - np.array(sqrt2_l2.orbit_values[:9]))) < 1e-9


def test_large_real_part_uses_forward_steps(sqrt2_l2):
    # F(12) = a_11 lies beyond the direct-evaluation strip
    assert abs(tower_eval(sqrt2_l2, 12.0) - sqrt2_l2.orbit_values[11]) < 1e-9
    z = 9.3 + 0.4j
    assert abs(tower_eval(sqrt2_l2, z) - level1(SQRT2, tower_eval(sqrt2_l2, z - 1))) < 1e-12


def test_wide_imaginary_part_satisfies_functional_equation(sqrt2_l2):
    z = 1.0 + 6.0j  # beyond the transform's im_cap, served by the Koenigs route
    assert abs(sqrt2_l2.policy.im_cap) < 6.0
    assert verify_functional_equation(sqrt2_l2, z=z) < 1e-8


def test_period_reduction_is_exact(sqrt2_l2):
    z = np.array([0.4 + 0.2j, 2.0 - 1.0j, 3.3 + 1.9j])
    a = evaluate(sqrt2_l2, z)
    b = evaluate(sqrt2_l2, z + 1j * sqrt2_l2.period)
    c = evaluate(sqrt2_l2, z - 3j * sqrt2_l2.period)
    assert np.max(np.abs(a - b)) < 1e-12 and np.max(np.abs(a - c)) < 1e-12


def test_raw_transform_is_periodic_across_the_seam(pool):
    # away from the reduction: the compiled transform itself continues across Im z = P/2
    ctx = pool.level(1.2, 2)
    half = 0.5 * ctx.period
    assert half < ctx.policy.im_cap + 1e-12
    for x in (0.5, 1.5, 3.0):
        for d in (0.05, 0.2):
            above = ctx.transform.evaluate(np.array([complex(x, half + d)]))[0]
            below = ctx.transform.evaluate(np.array([complex(x, -half + d)]))[0]
            assert abs(above - below) < 1e-8


def test_domain_error_left_half_plane(sqrt2_l2):
    with pytest.raises(DomainError):
        tower_eval(sqrt2_l2, -1.0)
    with pytest.raises(DomainError):
        tower_eval(sqrt2_l2, 0.0 + 1j)


def test_range_excess_semantics(sqrt2_l2):
    inside = np.array([2.0, 1.5 + 0.3j, 1.01])
    assert np.all(range_excess(sqrt2_l2, inside) <= 0)
    assert range_excess(sqrt2_l2, np.array([3.5]))[0] == pytest.approx(0.5)
    assert range_excess(sqrt2_l2, np.array([-0.1 + 0j]))[0] > 0


def test_range_post_check_holds_on_grid(sqrt2_l2):
    re, im = np.meshgrid(np.linspace(0.25, 4, 6), np.linspace(-2, 2, 6))
    vals = evaluate(sqrt2_l2, (re + 1j * im).ravel(), check_range=True)
    assert np.all(vals.real > 0)


def test_range_violation_is_reported(sqrt2_l2):
    # a level whose fixed point is moved leaves the disk about the (wrong) centre
    from dataclasses import replace

    shifted = replace(sqrt2_l2, omega=1.05, _oracle={})
    with pytest.raises(RangeViolation):
        tower_eval(shifted, 3.0)


def test_monotone_real_examples(sqrt2_l2):
    assert verify_monotone_real(sqrt2_l2, [0.5, 1, 1.5, 2, 3])
    assert verify_monotone_real(sqrt2_l2, [1.7])
    far = [40.0, 60.0, 80.0, 120.0]
    assert verify_monotone_real(sqrt2_l2, far, tol=1e-12)
    assert np.all(evaluate(sqrt2_l2, far).real < math.e)


def test_monotone_rejects_bad_input(sqrt2_l2):
    with pytest.raises(DomainError):
        verify_monotone_real(sqrt2_l2, [2.0, 1.0])


def test_derivative_examples(sqrt2_l2):
    d1 = derivative_nonvanishing(sqrt2_l2, 1.0)
    h = 1e-4
    fd = (tower_eval(sqrt2_l2, 1 + h) - tower_eval(sqrt2_l2, 1 - h)) / (2 * h)
    assert d1 > 1e-12 and abs(d1 - abs(fd)) < 1e-6
    assert derivative_nonvanishing(sqrt2_l2, 3 + 2j) > 1e-12
    assert derivative_nonvanishing(None, 1.0, alpha=1.3) == pytest.approx(1.3 * math.log(1.3), abs=1e-14)


@pytest.mark.parametrize("alpha", [1.2, 1.44])
def test_other_bases_level2(pool, alpha):
    ctx = pool.level(alpha, 2)
    omega = bisect(lambda x: alpha**x - x, 1.0 + 1e-9, math.e - 1e-9)
    assert ctx.omega == pytest.approx(omega, abs=1e-10)
    assert ctx.lam == pytest.approx(math.log(omega), abs=1e-12)
    z = np.array([0.25 - 2j, 1.5 + 1j, 4 + 2j])
    assert np.max(verify_functional_equation(ctx, z=z)) < 1e-7


# --------------------------------------------------------------- level 3


def test_level3_fixed_point_by_bisection(sqrt2_l2, sqrt2_l3):
    omega3 = bisect(lambda x: tower_eval(sqrt2_l2, x).real - x, 1.0 + 1e-6, math.e - 1e-6)
    assert sqrt2_l3.omega == pytest.approx(omega3, abs=1e-10)
    assert 0 < sqrt2_l3.lam < 1


def test_level3_orbit_is_tetration_orbit(sqrt2_l2, sqrt2_l3):
    a = sqrt2_l3.orbit_values
    assert a[0] == pytest.approx(SQRT2, abs=1e-15)
    assert a[1] == pytest.approx(tower_eval(sqrt2_l2, SQRT2).real, abs=1e-12)
    assert a[2] == pytest.approx(tower_eval(sqrt2_l2, a[1]).real, abs=1e-12)


def test_level3_base_identity_and_functional_equation(sqrt2_l3):
    assert abs(tower_eval(sqrt2_l3, 1) - SQRT2) < 1e-9
    assert verify_functional_equation(sqrt2_l3, z=1.0) < 1e-6
    z = np.array([0.5 + 0.5j, 1.8 - 1.2j, 3.0 + 0.1j])
    assert np.max(verify_functional_equation(sqrt2_l3, z=z)) < 1e-5


def test_level3_interpolation_and_monotonicity(sqrt2_l3):
    vals = evaluate(sqrt2_l3, np.arange(1.0, 10.0))
    assert np.max(np.abs(vals - np.array(sqrt2_l3.orbit_values[:9]))) < 1e-9
    assert verify_monotone_real(sqrt2_l3, [0.3, 0.8, 1.5, 2.5, 4.0, 7.5])


def test_level3_raw_seam(pool):
    ctx = pool.level(1.2, 3)
    half = 0.5 * ctx.period
    for x in (1.0, 2.5):
        above = ctx.transform.evaluate(np.array([complex(x, half + 0.1)]))[0]
        below = ctx.transform.evaluate(np.array([complex(x, -half + 0.1)]))[0]
        assert abs(above - below) < 1e-5


def test_level4_hexation_step(pool):
    ctx4 = pool.level(SQRT2, 4)
    assert 1 < ctx4.omega < math.e and 0 < ctx4.lam < 1
    vals = evaluate(ctx4, np.arange(1.0, 10.0))
    assert np.max(np.abs(vals - np.array(ctx4.orbit_values[:9]))) < 1e-9
    z = np.array([0.7 + 0.3j, 2.0 - 0.5j])
    assert np.max(verify_functional_equation(ctx4, z=z)) < 1e-5
