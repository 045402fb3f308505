"""Fractional iteration through the Koenigs linearization.

For a holomorphic map ``phi`` with an attracting fixed point ``xi0`` and
multiplier ``lam`` in (0, 1), the Koenigs function

    Psi(xi) = lim_n lam^-n (phi^n(xi) - xi0)

solves ``Psi(phi(xi)) = lam Psi(xi)`` and fractional iterates are
``phi^z(xi) = Psi^-1(lam^z Psi(xi))``. Everything here runs in mpmath and
is independent of the transform path, which it is used to verify.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import mpmath

from .errors import BasinEscapeError, DomainError, MultiplierRangeError, NoConvergenceError
from .numerics import as_complex

__all__ = [
    "FixedPointData",
    "SchroderModel",
    "find_fixed_point",
    "koenigs",
    "koenigs_derivative",
    "koenigs_inverse",
    "fractional_iterate_oracle",
    "iterate",
]


def _num(x):
    if isinstance(x, (mpmath.mpf, mpmath.mpc)):
        return x
    x = complex(x)
    return mpmath.mpf(x.real) if x.imag == 0 else mpmath.mpc(x.real, x.imag)


@dataclass(frozen=True)
class FixedPointData:
    """Attracting fixed point, its multiplier and a forward-invariant disk radius."""

    xi0: object
    lam: object
    basin_hint: float

    def __post_init__(self) -> None:
        if not self.basin_hint > 0:
            raise ValueError("basin_hint must be positive")
        if not 0 < abs(self.lam) < 1:
            raise MultiplierRangeError(f"multiplier {self.lam} is not attracting")


def _mp_derivative(phi: Callable, x, radius, nodes: int = 48):
    # Cauchy-integral derivative in mpmath, the same rule as contour_derivative
    acc = 0
    for k in range(nodes):
        e = mpmath.expjpi(mpmath.mpf(2 * k) / nodes)
        acc += phi(x + radius * e) / e
    return acc / (nodes * radius)


def find_fixed_point(
    phi: Callable,
    seed,
    dphi: Callable | None = None,
    bits: int = 256,
    max_iter: int = 100000,
    tol: float = 1e-13,
) -> FixedPointData:
    """Attracting fixed point of ``phi`` reached from ``seed``.

    Forward iteration until the steps stall, Newton polishing on
    ``phi(x) - x``, then the multiplier by a Cauchy-integral derivative.

    Raises
    ------
    NoConvergenceError
        If iteration or polishing does not converge.
    MultiplierRangeError
        If the multiplier is not a real number in (0, 1).
    """
    with mpmath.workprec(bits):
        x = _num(seed)
        step_tol = mpmath.ldexp(1, -bits // 3)
        for _ in range(max_iter):
            nxt = phi(x)
            if not mpmath.isfinite(nxt):
                raise NoConvergenceError("iteration diverged")
            if abs(nxt - x) < step_tol:
                x = nxt
                break
            x = nxt
        else:
            raise NoConvergenceError("forward iteration did not settle")
        radius = mpmath.ldexp(1, -bits // 4)

        def deriv(v):
            return dphi(v) if dphi is not None else _mp_derivative(phi, v, radius)

        for _ in range(60):
            d = deriv(x) - 1
            if d == 0:
                break
            dx = (phi(x) - x) / d
            x = x - dx
            if abs(dx) <= mpmath.ldexp(abs(x) + 1, -bits + 8):
                break
        if abs(phi(x) - x) >= tol:
            raise NoConvergenceError("Newton polishing failed")
        r = mpmath.mpf(10) ** -6 * max(1, abs(x))
        lam = _mp_derivative(phi, x, r)
        if abs(mpmath.im(lam)) > 1e-12 or not 0 < mpmath.re(lam) < 1:
            raise MultiplierRangeError(f"multiplier {complex(lam)} outside (0, 1)")
        lam = mpmath.re(lam)
        if isinstance(x, mpmath.mpc) and abs(mpmath.im(x)) <= tol:
            x = mpmath.re(x)
        hint = _basin_radius(phi, x)
    return FixedPointData(x, lam, hint)


def _basin_radius(phi: Callable, xi0, samples: int = 64) -> float:
    # largest tested radius r whose circle maps strictly inside itself
    r = 1.0
    for _ in range(40):
        ok = True
        for k in range(samples):
            p = xi0 + r * mpmath.expjpi(mpmath.mpf(2 * k) / samples)
            try:
                v = phi(p)
            except (ValueError, ZeroDivisionError, OverflowError):
                ok = False
                break
            if not (mpmath.isfinite(v) and abs(v - xi0) < r):
                ok = False
                break
        if ok:
            return r
        r *= 0.5
    raise NoConvergenceError("no forward-invariant disk found about the fixed point")


@dataclass(frozen=True)
class SchroderModel:
    """Koenigs linearization of ``phi`` about an attracting fixed point.

    Parameters
    ----------
    phi
        The map; must accept mpmath numbers.
    fp
        Fixed point data from :func:`find_fixed_point`.
    dphi
        Optional analytic derivative of ``phi``; a Cauchy-integral
        derivative is used otherwise.
    bits
        Target precision of results (working precision is about twice this).
    psi_n_cap
        Maximum depth of the Koenigs limit.
    newton_steps
        Maximum Newton steps of the inverse.
    tol
        Convergence tolerance of the limit and of Newton.
    """

    phi: Callable
    fp: FixedPointData
    dphi: Callable | None = None
    bits: int = 56
    psi_n_cap: int = 20000
    newton_steps: int = 60
    tol: float | None = None

    def __post_init__(self) -> None:
        if self.tol is None:
            object.__setattr__(self, "tol", 2.0 ** -(self.bits - 8))
        # the Koenigs limit divides by lam^n, so the fixed point must be known
        # to the full working precision
        with mpmath.workprec(self.workprec + 32):
            x = _num(self.fp.xi0)
            for _ in range(60):
                dx = (self.phi(x) - x) / (self._dphi(x) - 1)
                x = x - dx
                if abs(dx) <= mpmath.ldexp(abs(x) + 1, -self.workprec - 16):
                    break
            if isinstance(x, mpmath.mpc) and mpmath.im(x) == 0:
                x = mpmath.re(x)
            lam = self._dphi(x)
            if isinstance(lam, mpmath.mpc):
                lam = mpmath.re(lam)
        object.__setattr__(self, "xi0", x)
        object.__setattr__(self, "lam", lam)

    @property
    def workprec(self) -> int:
        return 2 * self.bits + 64

    @property
    def log_lam(self):
        return mpmath.log(self.lam)

    def _dphi(self, x):
        if self.dphi is not None:
            return self.dphi(x)
        return _mp_derivative(self.phi, x, mpmath.mpf(2) ** -8 * max(1, abs(x)))

    def _limit(self, xi, with_derivative: bool):
        # Richardson-accelerated Koenigs limit and, optionally, its derivative
        lam = self.lam
        xi0 = self.xi0
        x = _num(xi)
        d = mpmath.mpf(1)
        scale = mpmath.mpf(1)
        prev_r = prev_rd = None
        e_prev = ed_prev = None
        quiet = 0
        escape = 1e6 * max(1.0, float(abs(xi0)), float(abs(x - xi0)))
        for n in range(self.psi_n_cap):
            e_n = (x - xi0) / scale
            ed_n = d / scale
            if e_prev is not None:
                r = (e_n - lam * e_prev) / (1 - lam)
                rd = (ed_n - lam * ed_prev) / (1 - lam)
                if prev_r is not None:
                    small = abs(r - prev_r) <= self.tol * max(1, abs(r))
                    if with_derivative:
                        small = small and abs(rd - prev_rd) <= self.tol * max(1, abs(rd))
                    inside = abs(x - xi0) < self.fp.basin_hint
                    quiet = quiet + 1 if (small and inside) else 0
                    if quiet >= 3:
                        return r, rd
                prev_r, prev_rd = r, rd
            e_prev, ed_prev = e_n, ed_n
            if with_derivative:
                d = d * self._dphi(x)
            x = self.phi(x)
            if not mpmath.isfinite(x) or abs(x - xi0) > escape:
                raise BasinEscapeError(f"orbit of {complex(xi)} left the basin")
            scale = scale * lam
        raise NoConvergenceError("Koenigs limit did not converge")


def koenigs(model: SchroderModel, xi):
    """Koenigs function ``Psi(xi)`` with ``Psi(xi0) = 0`` and ``Psi'(xi0) = 1``."""
    with mpmath.workprec(model.workprec):
        return model._limit(xi, False)[0]


def koenigs_derivative(model: SchroderModel, xi):
    """``Psi'(xi)`` from the chain rule along the orbit."""
    with mpmath.workprec(model.workprec):
        return model._limit(xi, True)[1]


def koenigs_inverse(model: SchroderModel, u, seed=None):
    """Solve ``Psi(xi) = u`` by Newton's method from ``xi0 + u`` (or ``seed``).

    Raises
    ------
    NoConvergenceError
        If Newton does not converge; callers should pull ``u`` toward zero.
    """
    with mpmath.workprec(model.workprec):
        u = _num(u)
        if u == 0:
            return model.xi0
        x = model.xi0 + u if seed is None else _num(seed)
        for _ in range(model.newton_steps):
            try:
                psi, dpsi = model._limit(x, True)
            except BasinEscapeError as exc:
                raise NoConvergenceError("Newton iterate left the basin") from exc
            dx = (psi - u) / dpsi
            x = x - dx
            if abs(dx) <= model.tol * max(1, abs(x)):
                return x
        raise NoConvergenceError(f"Newton for the Koenigs inverse at {complex(u)} did not converge")


def fractional_iterate_oracle(model: SchroderModel, xi, z, step: float = 2.0):
    """``phi^z(xi) = Psi^-1(lam^z Psi(xi))`` for ``Re z > 0``.

    The target ``v = lam^z Psi(xi)`` may be far from the fixed point, where
    Newton from ``xi0 + v`` fails. The equivalent family
    ``Psi(zeta(t)) = lam^t v`` is therefore solved first for a shift ``t``
    large enough that ``|lam^t v| < basin_hint / 10``, where Newton from the
    first-order seed is safe, and then followed back to ``t = 0`` in steps of
    ``step`` with an Euler predictor. Only forward iterates of ``phi`` are
    used, and ``lam^z`` takes the real principal logarithm of ``lam``.
    """
    z = as_complex(z)
    if z.real <= 0:
        raise DomainError("fractional_iterate_oracle needs Re z > 0")
    with mpmath.workprec(model.workprec):
        ll = model.log_lam
        v = mpmath.exp(_num(z) * ll) * koenigs(model, xi)
        if v == 0:
            return model.xi0
        target = model.fp.basin_hint / 10
        t = max(0.0, math.ceil(float(mpmath.log(abs(v) / target) / -ll) / step) * step)
        zeta = koenigs_inverse(model, v * mpmath.exp(t * ll))
        while t > 0:
            t_new = max(0.0, t - step)
            u_new = v * mpmath.exp(t_new * ll)
            dpsi = model._limit(zeta, True)[1]
            predictor = zeta + (u_new - v * mpmath.exp(t * ll)) / dpsi
            zeta = koenigs_inverse(model, u_new, seed=predictor)
            t = t_new
        return zeta


def iterate(phi: Callable, xi, n: int):
    """``phi`` composed ``n`` times with itself, applied to ``xi``."""
    x = xi
    for _ in range(n):
        x = phi(x)
    return x
