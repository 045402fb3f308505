"""Complex-arithmetic foundation.

Gamma function family, the Stirling estimate, tanh-sinh quadrature on
geometric panels along a ray, and Cauchy-integral differentiation.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import mpmath
import numpy as np

from .errors import (
    DecayError,
    DomainError,
    GammaOverflowError,
    NoConvergenceError,
    PoleError,
    PrecisionCapError,
)

__all__ = [
    "PrecisionPolicy",
    "RayContour",
    "QuadratureResult",
    "gamma",
    "recip_gamma",
    "loggamma",
    "stirling_estimate",
    "euler_gamma_continuation",
    "tanh_sinh_rule",
    "panel_edges",
    "ray_quadrature",
    "contour_derivative",
    "as_complex",
]

LOG2E = 1.0 / math.log(2.0)
_LOG_DBL_MAX = math.log(np.finfo(float).max)
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)

# Lanczos approximation, g = 7, n = 9
_LANCZOS_G = 7.0
_LANCZOS_P = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)


def as_complex(z) -> complex:
    """Convert a number (including mpmath types) to a finite Python complex."""
    if isinstance(z, (mpmath.mpf, mpmath.mpc)):
        z = complex(z)
    z = complex(z)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise DomainError(f"non-finite complex value {z!r}")
    return z


@dataclass(frozen=True)
class PrecisionPolicy:
    """Working-precision schedule.

    Parameters
    ----------
    target_digits
        Decimal digits wanted in the output.
    base_bits
        Mantissa bits used when no cancellation is expected.
    guard_bits
        Extra bits added on top of every escalation.
    max_bits
        Hard cap; requests above it raise :class:`PrecisionCapError`.
    """

    target_digits: int = 15
    base_bits: int = 53
    guard_bits: int = 32
    max_bits: int = 4096

    def __post_init__(self) -> None:
        if self.base_bits < 53:
            raise ValueError("base_bits must be at least 53")
        if self.max_bits < self.base_bits:
            raise ValueError("max_bits must not be below base_bits")
        if self.target_digits < 1 or self.guard_bits < 0:
            raise ValueError("target_digits must be positive, guard_bits non-negative")

    @property
    def target_bits(self) -> int:
        return int(math.ceil(self.target_digits * math.log2(10.0)))

    def escalated_bits(self, cancellation_bits: float) -> int:
        """Bits needed when a computation loses ``cancellation_bits`` to cancellation."""
        extra = max(0.0, float(cancellation_bits))
        bits = max(self.base_bits, self.target_bits) + int(math.ceil(extra)) + self.guard_bits
        if bits > self.max_bits:
            raise PrecisionCapError(
                f"{bits} working bits required, cap is {self.max_bits}"
            )
        return bits


@dataclass(frozen=True)
class RayContour:
    """A straight integration ray ``w = y exp(i angle)`` split at ``split_point``.

    Parameters
    ----------
    angle
        Ray direction in radians, ``|angle| < pi/2``.
    split_point
        Where the Taylor-series part hands over to the quadrature part.
    y_max
        Largest radius the quadrature may reach.
    """

    angle: float = 0.0
    split_point: float = 1.0
    y_max: float = 640.0

    def __post_init__(self) -> None:
        if not abs(self.angle) < 0.5 * math.pi:
            raise ValueError("ray angle must satisfy |angle| < pi/2")
        if not 0.0 < self.split_point < self.y_max:
            raise ValueError("need 0 < split_point < y_max")

    @property
    def direction(self) -> complex:
        return cmath.exp(1j * self.angle)


# ---------------------------------------------------------------- Gamma family


def _is_nonpositive_integer(z: complex) -> bool:
    return z.imag == 0.0 and z.real <= 0.0 and z.real == math.floor(z.real)


def _lanczos_loggamma(z: complex) -> complex:
    # valid for Re z >= 1/2
    z = z - 1.0
    acc = _LANCZOS_P[0]
    for i in range(1, len(_LANCZOS_P)):
        acc += _LANCZOS_P[i] / (z + i)
    t = z + _LANCZOS_G + 0.5
    return _HALF_LOG_2PI + (z + 0.5) * cmath.log(t) - t + cmath.log(acc)


def loggamma(z) -> complex:
    """A logarithm of Gamma(z) (branch unspecified, real part exact).

    Raises
    ------
    PoleError
        At the nonpositive integers.
    """
    z = as_complex(z)
    if _is_nonpositive_integer(z):
        raise PoleError(f"Gamma has a pole at {z.real:g}")
    if z.real >= 0.5:
        return _lanczos_loggamma(z)
    s = cmath.sin(math.pi * z)
    return math.log(math.pi) - cmath.log(s) - _lanczos_loggamma(1.0 - z)


def gamma(z) -> complex:
    """Gamma function at double precision.

    Lanczos approximation for ``Re z >= 1/2`` and the reflection formula
    elsewhere.

    Raises
    ------
    PoleError
        At ``z = 0, -1, -2, ...``.
    GammaOverflowError
        When ``|Gamma(z)|`` exceeds the double range.
    """
    z = as_complex(z)
    if _is_nonpositive_integer(z):
        raise PoleError(f"Gamma has a pole at {z.real:g}")
    if z.imag == 0.0 and z.real == math.floor(z.real) and z.real <= 171:
        return complex(math.factorial(int(z.real) - 1))
    lg = loggamma(z)
    if lg.real > _LOG_DBL_MAX:
        raise GammaOverflowError(f"|Gamma({z})| exceeds the double range")
    out = cmath.exp(lg)
    if z.imag == 0.0:
        out = complex(out.real, 0.0)
    return out


def recip_gamma(z) -> complex:
    """Reciprocal Gamma function, an entire function.

    Returns exactly zero at the nonpositive integers. For ``Re z < 1/2`` the
    reflection ``1/Gamma(z) = sin(pi z) Gamma(1 - z) / pi`` avoids the
    overflow of ``Gamma(z)`` itself.
    """
    z = as_complex(z)
    if _is_nonpositive_integer(z):
        return 0j
    if z.real >= 0.5:
        lg = _lanczos_loggamma(z)
        out = cmath.exp(-lg)
    else:
        lg = _lanczos_loggamma(1.0 - z)
        if lg.real > _LOG_DBL_MAX + 50:
            raise GammaOverflowError(f"1/Gamma({z}) exceeds the double range")
        out = cmath.sin(math.pi * z) * cmath.exp(lg) / math.pi
    if z.imag == 0.0:
        out = complex(out.real, 0.0)
    return out


def stirling_estimate(z) -> complex:
    """Leading Stirling term ``sqrt(2 pi) z^(z - 1/2) exp(-z)``.

    Only an estimator, used for overflow prediction and decay bounds.

    Raises
    ------
    DomainError
        On the closed negative real axis (including zero).
    """
    z = as_complex(z)
    if z.imag == 0.0 and z.real <= 0.0:
        raise DomainError("Stirling estimate needs |arg z| < pi and z != 0")
    return cmath.exp(_HALF_LOG_2PI + (z - 0.5) * cmath.log(z) - z)


def euler_gamma_continuation(z, n_terms: int = 40, contour: RayContour | None = None) -> complex:
    """Gamma(z) from the split Euler integral.

    ``sum_n (-1)^n c^(n+z) / (n! (n+z)) + int_c^oo exp(-t) t^(z-1) dt``
    with ``c`` the split point. Valid off the poles for any ``z``; used as an
    independent check of :func:`gamma`.
    """
    z = as_complex(z)
    if _is_nonpositive_integer(z):
        raise PoleError(f"Gamma has a pole at {z.real:g}")
    contour = contour or RayContour(y_max=60.0)
    c = contour.split_point
    series = 0j
    term = 1.0
    for n in range(n_terms):
        series += term * c ** (n + z) / (n + z)
        term *= -1.0 / (n + 1)
    tail = ray_quadrature(
        lambda t: cmath.exp(-t) * t ** (z - 1.0),
        contour,
        PrecisionPolicy(),
        decay_rate=1.0,
    )
    return series + tail.value


# ------------------------------------------------------------------ quadrature


@lru_cache(maxsize=32)
def tanh_sinh_rule(level: int, t_max: float = 4.0) -> tuple[np.ndarray, np.ndarray]:
    """Nodes in (-1, 1) and weights of the tanh-sinh rule with step ``2**-level``.

    The rule of level ``L`` contains every node of level ``L - 1``.
    """
    h = 2.0 ** (-level)
    k_max = int(math.ceil(t_max / h))
    t = h * np.arange(-k_max, k_max + 1)
    u = 0.5 * math.pi * np.sinh(t)
    x = np.tanh(u)
    w = h * 0.5 * math.pi * np.cosh(t) / np.cosh(u) ** 2
    keep = w > 1e-300
    x, w = x[keep], w[keep]
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def panel_edges(split_point: float, y_max: float) -> list[tuple[float, float]]:
    """Geometric panels ``[s 2^k, s 2^(k+1)]`` covering ``[split_point, y_max]``."""
    edges = []
    a = float(split_point)
    while a < y_max * (1.0 - 1e-15):
        b = min(2.0 * a, y_max)
        if y_max - b < 0.25 * (b - a):
            b = y_max
        edges.append((a, b))
        a = b
    return edges


@dataclass(frozen=True)
class QuadratureResult:
    """Value of a ray integral with its error estimate and truncation radius."""

    value: complex
    error: float
    y_end: float
    evaluations: int


def ray_quadrature(
    integrand: Callable[[complex], complex],
    contour: RayContour,
    policy: PrecisionPolicy | None = None,
    decay_rate: float | None = None,
    tol: float | None = None,
    max_level: int = 9,
) -> QuadratureResult:
    """Integrate ``integrand(w) dw`` along ``w = y exp(i angle)``, ``y`` in ``[split, oo)``.

    Panels ``[s 2^k, s 2^(k+1)]`` are integrated with nested tanh-sinh rules
    until two consecutive levels agree. Panels are appended until the
    exponential tail bound implied by ``decay_rate`` falls below ``tol``, or
    until ``contour.y_max``.

    Parameters
    ----------
    integrand
        Function of the complex point on the ray.
    decay_rate
        Asserted rate ``r`` with ``|integrand(y)| <~ C exp(-r y)``.
    tol
        Absolute tolerance; defaults to ``10**-target_digits``.

    Raises
    ------
    NoConvergenceError
        If a panel does not settle by ``max_level``.
    DecayError
        If the integrand is still large at the last panel, contradicting the
        asserted decay.
    """
    policy = policy or PrecisionPolicy()
    if tol is None:
        tol = 10.0 ** (-policy.target_digits)
    direction = contour.direction
    total = 0j
    err = 0.0
    evals = 0
    scale = 0.0
    y_end = contour.split_point
    for a, b in panel_edges(contour.split_point, contour.y_max):
        half, mid = 0.5 * (b - a), 0.5 * (b + a)
        prev = None
        level = 2
        while True:
            x, w = tanh_sinh_rule(level)
            vals = np.array([integrand(direction * (mid + half * xi)) for xi in x], dtype=complex)
            evals += len(x)
            if not np.all(np.isfinite(vals)):
                raise DomainError("integrand produced a non-finite value")
            s = direction * half * np.dot(w, vals)
            if prev is not None and abs(s - prev) <= max(tol, 1e-15 * abs(s)) * 0.1:
                break
            if level >= max_level:
                raise NoConvergenceError(f"panel [{a}, {b}] did not converge")
            prev = s
            level += 1
        total += s
        err += abs(s - prev)
        y_end = b
        vmax = float(np.max(np.abs(vals)))
        scale = max(scale, vmax)
        edge = abs(integrand(direction * b))
        if decay_rate is not None and decay_rate > 0:
            tail_bound = edge / decay_rate
            if tail_bound < 0.1 * tol:
                break
        elif edge * b < 0.1 * tol:
            break
    else:
        if decay_rate is not None and decay_rate > 0:
            edge = abs(integrand(direction * y_end))
            if edge / decay_rate > max(tol, 1e-8 * max(scale, 1.0)):
                raise DecayError(
                    f"integrand is {edge:.3e} at y = {y_end:g}, inconsistent with decay rate {decay_rate}"
                )
    return QuadratureResult(total, err, y_end, evals)


# --------------------------------------------------------- contour derivative


def contour_derivative(
    f: Callable,
    z,
    radius: float,
    nodes: int = 32,
    order: int = 1,
) -> complex:
    """Derivative of an analytic ``f`` by the trapezoidal rule on a circle.

    ``f^(k)(z) = k! / (2 pi i) oint f(s) / (s - z)^(k+1) ds``; the
    trapezoidal rule converges geometrically in ``nodes``.

    Raises
    ------
    DomainError
        If ``f`` fails or returns a non-finite value at some node.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    z = as_complex(z)
    acc = 0j
    for k in range(nodes):
        e = cmath.exp(2j * math.pi * k / nodes)
        try:
            v = as_complex(f(z + radius * e))
        except Exception as exc:  # any failure at a node is a domain failure
            raise DomainError(f"f failed at contour node {z + radius * e}: {exc}") from exc
        acc += v * e ** (-order)
    return acc * math.factorial(order) / (nodes * radius**order)

