"""Hyper-operator levels built by fractional iteration.

Level 0 is ``alpha z``, level 1 is ``alpha^z``, and level ``n >= 2`` is the
fractional iterate ``F_n(z) = phi^z(1)`` of ``phi = F_(n-1)``, obtained as the
transform of the exponential generating series of the orbit
``a_k = phi^(k+1)(1)``. Each built level is a :class:`LevelContext` holding
the compiled transform, the fixed point ``omega_n`` of ``phi``, its
multiplier ``lambda_n`` and the imaginary period ``2 pi / |log lambda_n|``.
"""

from __future__ import annotations

import cmath
import hashlib
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import mpmath
import numpy as np

from .differintegral import (
    EvalPolicy,
    MellinTransform,
    SingularTerm,
    ThetaSeries,
    build_transform,
)
from .errors import (
    DomainError,
    MultiplierRangeError,
    NoConvergenceError,
    RangeError,
    RangeViolation,
)
from .numerics import LOG2E, as_complex, contour_derivative
from .schroder import SchroderModel, find_fixed_point, fractional_iterate_oracle

__all__ = [
    "ETA",
    "TowerConfig",
    "LevelContext",
    "Tower",
    "check_alpha",
    "level0",
    "level1",
    "build_level",
    "eval",
    "evaluate",
    "verify_functional_equation",
    "verify_monotone_real",
    "range_excess",
    "derivative_nonvanishing",
]

log = logging.getLogger(__name__)

ETA = math.exp(1.0 / math.e)
_RE_MAX = 5.0  # larger real parts are reached by forward steps of phi (the Gamma factor grows like (Re z)!)


def check_alpha(alpha: float) -> float:
    """Validate ``1 < alpha < e^(1/e)``.

    Raises
    ------
    RangeError
        Outside the open interval (with a margin of ``1e-12`` at the top).
    """
    alpha = float(alpha)
    if not (1.0 < alpha < ETA - 1e-12):
        raise RangeError(f"alpha = {alpha!r} is outside (1, e^(1/e))")
    return alpha


def level0(alpha: float, z) -> complex:
    """``alpha * z``."""
    return check_alpha(alpha) * as_complex(z)


def level1(alpha: float, z) -> complex:
    """``alpha^z`` with the real logarithm of ``alpha``."""
    return cmath.exp(as_complex(z) * math.log(check_alpha(alpha)))


@dataclass(frozen=True)
class TowerConfig:
    """Build settings shared by all levels.

    Parameters
    ----------
    max_level
        Highest level that may be built.
    orbit_tol
        Orbit iteration stops once ``|a_k - omega| < orbit_tol``; ``None``
        selects ``2**-bits`` with the precision implied by the quadrature
        radius, which is what the transform needs.
    cache_path
        Directory of the persistent level cache, or ``None``.
    policy
        Transform settings.
    range_tol
        Slack of the range post-check in :func:`eval`.
    upper_tail_error
        Bound on the estimated tail error for levels ``n >= 3``. Their
        theta-series keep a slowly decaying log-periodic residual after the
        leading singularity family is removed, so the policy's bound (aimed
        at level 2) is relaxed to this value there.
    """

    max_level: int = 4
    orbit_tol: float | None = None
    cache_path: str | None = None
    policy: EvalPolicy = field(default_factory=EvalPolicy)
    range_tol: float = 1e-7
    upper_tail_error: float = 1e-4

    def __post_init__(self) -> None:
        if self.max_level < 2:
            raise ValueError("max_level must be at least 2")
        if self.orbit_tol is not None and not self.orbit_tol > 0:
            raise ValueError("orbit_tol must be positive")

    def fingerprint(self) -> str:
        """Digest of every setting that changes a built level."""
        text = f"{self.policy.fingerprint()};bits={self.orbit_bits};upper={self.upper_tail_error!r}"
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    @property
    def orbit_bits(self) -> int:
        """Absolute precision (bits) of orbit coefficients and level arithmetic."""
        bits = int(math.ceil(self.policy.contour.y_max * LOG2E)) + 96
        if self.orbit_tol is not None:
            bits = max(bits, int(math.ceil(-math.log2(self.orbit_tol))))
        return 64 * int(math.ceil(bits / 64))


@dataclass(frozen=True, eq=False)
class LevelContext:
    """Everything defining one built level ``F_n``.

    ``transform`` is the compiled function; ``orbit`` the theta-series it was
    built from (``coeffs`` hold ``a_k``, ``xi0`` is ``omega``).
    """

    alpha: float
    level: int
    orbit: ThetaSeries
    omega: float
    lam: float
    period: float
    policy: EvalPolicy
    transform: MellinTransform
    prev: "LevelContext | None" = None
    build_info: dict = field(default_factory=dict)
    _oracle: dict = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        check_alpha(self.alpha)
        if self.level < 2:
            raise ValueError("levels 0 and 1 are closed forms")
        if not 1.0 < self.omega < math.e:
            raise RangeError(f"fixed point {self.omega} outside (1, e)")
        if not 0.0 < self.lam < 1.0:
            raise MultiplierRangeError(f"multiplier {self.lam} outside (0, 1)")
        coeffs = self.orbit.coeffs
        if any(isinstance(a, mpmath.mpc) for a in coeffs):
            raise RangeError("orbit coefficients must be real")
        if coeffs and not (1 < coeffs[0] and coeffs[-1] < math.e):
            raise RangeError("orbit leaves (1, e)")
        if any(b <= a for a, b in zip(coeffs, coeffs[1:])):
            raise RangeError("orbit is not strictly increasing")

    @property
    def orbit_values(self) -> list[float]:
        with mpmath.workprec(64):
            return [float(a) for a in self.orbit.coeffs]

    def phi(self, w):
        """The map being iterated, ``F_(n-1)``, in double precision."""
        if self.level == 2:
            return np.exp(np.asarray(w, dtype=complex) * math.log(self.alpha))
        return evaluate(self.prev, w, check_range=False)

    def phi_mp(self, x, prec: int):
        """``F_(n-1)`` at one point with ``prec`` working bits."""
        with mpmath.workprec(prec):
            if self.level == 2:
                return mpmath.power(mpmath.mpf(self.alpha), x)
        return self.prev.eval_mp(x, prec)

    def eval_mp(self, z, prec: int):
        """``F_n`` at one point with ``prec`` working bits (real axis for real ``z``)."""
        with mpmath.workprec(prec):
            z = z if isinstance(z, (mpmath.mpf, mpmath.mpc)) else mpmath.mpmathify(z)
            shift = 0
            if mpmath.re(z) > _RE_MAX:
                shift = int(math.ceil(float(mpmath.re(z)) - _RE_MAX))
                z = z - shift
            im = mpmath.im(z)
            if im:
                z = z - self.period * mpmath.nint(im / self.period) * 1j
            v = self.transform.evaluate_mp(z, prec)
            if isinstance(v, mpmath.mpc) and mpmath.im(z) == 0:
                v = mpmath.re(v)
        for _ in range(shift):
            v = self.phi_mp(v, prec)
        return v


def _fixed_point_real(phi: Callable, x0, prec: int, tol_bits: int):
    # forward iteration then secant-accelerated Newton on phi(x) - x
    with mpmath.workprec(prec):
        x = x0
        for _ in range(2000):
            nx = phi(x)
            if abs(nx - x) < 1e-6:
                x = nx
                break
            x = nx
        h = mpmath.ldexp(1, -prec // 3)
        for _ in range(40):
            d = (phi(x + h) - phi(x - h)) / (2 * h) - 1
            dx = (phi(x) - x) / d
            x = x - dx
            if abs(dx) < mpmath.ldexp(1, -tol_bits):
                break
        else:
            raise NoConvergenceError("fixed point polishing did not converge")
        lam = (phi(x + h) - phi(x - h)) / (2 * h)
        return x, lam


def _orbit(phi: Callable, omega, prec: int, eps, max_terms: int = 100000):
    # a_0 = phi(1), a_(k+1) = phi(a_k), stopped once |a_k - omega| < eps
    coeffs = []
    with mpmath.workprec(prec):
        a = phi(mpmath.mpf(1))
        while abs(a - omega) >= eps:
            coeffs.append(a)
            if len(coeffs) > max_terms:
                raise NoConvergenceError("orbit did not reach the fixed point")
            a = phi(a)
    return coeffs


def _tetration_orbit(alpha: float, prec: int, eps):
    # the orbit of the exponential in deviation form, b -> omega expm1(b log alpha)
    with mpmath.workprec(prec + 32):
        a = mpmath.mpf(alpha)
        la = mpmath.log(a)
        w = mpmath.mpf(1)
        for _ in range(100000):
            nw = mpmath.exp(w * la)
            if abs(nw - w) < 1e-6:
                break
            w = nw
        for _ in range(60):
            dw = (w * la - mpmath.log(w)) / (la - 1 / w)
            w -= dw
            if abs(dw) < mpmath.ldexp(1, -prec - 16):
                break
        else:
            raise NoConvergenceError("fixed point of alpha^x did not converge")
        b = a - w
        coeffs = []
        while abs(b) >= eps:
            coeffs.append(w + b)
            b = w * mpmath.expm1(b * la)
        return coeffs, w, mpmath.log(w)


def _half_period_root(plan: MellinTransform, period: float, target: float, singular=()) -> float | None:
    # real x with F(x + i P/2) = target; F is real on that line
    def g(x):
        return float(plan.evaluate(np.array([complex(x, 0.5 * period)]))[0].real) - target

    xs = np.linspace(0.05, 4.0, 80)
    vals = [g(x) for x in xs]
    for i in range(len(xs) - 1):
        if np.sign(vals[i]) != np.sign(vals[i + 1]):
            lo, hi = xs[i], xs[i + 1]
            flo = vals[i]
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                fm = g(mid)
                if np.sign(fm) == np.sign(flo):
                    lo, flo = mid, fm
                else:
                    hi = mid
                if hi - lo < 1e-14:
                    break
            return 0.5 * (lo + hi)
    return None


def build_level(cfg: TowerConfig, alpha: float, n: int, prev: LevelContext | None = None) -> LevelContext:
    """Build level ``n >= 2`` from level ``n - 1``.

    The orbit ``a_k = phi^(k+1)(1)`` of ``phi = F_(n-1)`` is computed at the
    precision the quadrature radius demands and stopped once it is within
    ``2**-bits`` of the fixed point, after which it is padded with
    ``omega_n`` exactly. ``omega_n`` is polished by Newton's method and
    ``lambda_n = phi'(omega_n)`` is checked to lie in (0, 1).

    For ``n = 2`` the singularity family ``log(1 - lambda^(z+2)) / log alpha``
    (from ``F_2(-1) = 0``) is subtracted before quadrature. For ``n >= 3`` the
    family sits half a period off the real axis, where ``F_n(z + 1)`` equals
    ``omega_(n-1)``; it is located from the transform itself and refined.

    Raises
    ------
    NoConvergenceError, MultiplierRangeError, PrecisionCapError
    """
    alpha = check_alpha(alpha)
    if n < 2:
        raise ValueError("levels 0 and 1 are closed forms")
    if n > cfg.max_level:
        raise ValueError(f"level {n} exceeds max_level = {cfg.max_level}")
    if n >= 3 and (prev is None or prev.level != n - 1):
        raise ValueError(f"building level {n} needs the built level {n - 1}")
    bits = cfg.orbit_bits
    policy = cfg.policy
    eps = mpmath.ldexp(1, -bits)

    if n == 2:
        coeffs, omega, lam = _tetration_orbit(alpha, bits, eps)
        kappa = 1.0 / math.log(alpha)
        singular = (SingularTerm(kappa, float(lam), -2.0, 1),)
    else:
        with mpmath.workprec(bits + 32):
            omega, lam = _fixed_point_real(lambda x: prev.eval_mp(x, bits + 32), mpmath.mpf(prev.omega), bits + 32, bits + 8)
            coeffs = _orbit(lambda x: prev.eval_mp(x, bits + 32), omega, bits + 32, eps)
        singular = ()
    phi_mp = (lambda x: mpmath.power(mpmath.mpf(alpha), x)) if n == 2 else (lambda x: prev.eval_mp(x, bits + 32))
    with mpmath.workprec(bits + 32):
        fp_residual = float(abs(phi_mp(omega) - omega))
    if not fp_residual < 1e-12:
        raise NoConvergenceError(f"fixed point residual {fp_residual:.3e}")
    if n == 2:
        lam_f = float(lam)  # phi'(omega) = log(omega) for phi = alpha^x
    else:
        lam_f = float(contour_derivative(lambda w: prev.transform.evaluate(np.array([w]))[0], float(omega), 0.25).real)
    if not 0.0 < lam_f < 1.0:
        raise MultiplierRangeError(f"multiplier {lam_f} outside (0, 1)")
    period = 2.0 * math.pi / abs(math.log(lam_f))
    # eval reduces Im z into [-period/2, period/2], so accuracy is only
    # needed that far off the real axis
    policy = replace(policy, im_cap=min(policy.im_cap, 0.5 * period))
    series = ThetaSeries(
        coeffs=tuple(coeffs),
        xi0=omega,
        decay_rate=lam_f,
        coeff_bits=bits,
        singular=singular,
    )
    info = {"orbit_bits": bits, "orbit_terms": len(coeffs), "fixed_point_residual": fp_residual}
    if n == 2:
        plan = build_transform(series, policy)
    else:
        kappa = 1.0 / math.log(prev.lam)
        loose = replace(policy, max_tail_error=math.inf)
        plan = build_transform(series, loose, singular=())
        shift = None
        for _ in range(8):
            root = _half_period_root(plan, period, prev.omega)
            if root is None:
                log.warning("level %d: no singularity found on the half-period line", n)
                break
            new_shift = root - 1.0
            singular = (SingularTerm(kappa, lam_f, new_shift, -1),)
            plan = build_transform(series, loose, singular=singular)
            if shift is not None and abs(new_shift - shift) < 1e-12:
                shift = new_shift
                break
            shift = new_shift
        info["singular_shift"] = None if shift is None else float(shift)
        # the final plan must meet the tail bound for upper levels
        bound = max(policy.max_tail_error, cfg.upper_tail_error)
        plan = build_transform(series, replace(policy, max_tail_error=bound), singular=singular)
    with mpmath.workprec(64):
        omega_f = float(omega)
    ctx = LevelContext(
        alpha=alpha,
        level=n,
        orbit=series,
        omega=omega_f,
        lam=lam_f,
        period=period,
        policy=policy,
        transform=plan,
        prev=prev,
        build_info=info,
    )
    return ctx


def _reduce_period(z: np.ndarray, period: float) -> np.ndarray:
    k = np.round(z.imag / period)
    return z - 1j * period * k


def evaluate(ctx: LevelContext, z, check_range: bool = True, range_tol: float = 1e-7) -> np.ndarray:
    """Vectorized :func:`eval` returning an array."""
    zs = np.atleast_1d(np.asarray(z, dtype=complex)).copy()
    if np.any(zs.real <= 0):
        raise DomainError("Re(z) must be positive")
    zs = _reduce_period(zs, ctx.period)
    shifts = np.maximum(0, np.ceil(zs.real - _RE_MAX)).astype(int)
    zs = zs - shifts
    out = np.empty_like(zs)
    wide = np.abs(zs.imag) > ctx.policy.im_cap
    if np.any(~wide):
        out[~wide] = ctx.transform.evaluate(zs[~wide])
    if np.any(wide):
        model = _oracle_model(ctx)
        for i in np.nonzero(wide)[0]:
            out[i] = complex(fractional_iterate_oracle(model, 1, complex(zs[i])))
    real = zs.imag == 0
    out[real] = out[real].real
    for i in np.nonzero(shifts)[0]:
        v = out[i]
        for _ in range(shifts[i]):
            v = complex(ctx.phi(np.array([v]))[0])
        out[i] = v
    if check_range:
        bad = range_excess(ctx, out) > range_tol
        if np.any(bad):
            i = int(np.nonzero(bad)[0][0])
            raise RangeViolation(f"F({complex(np.atleast_1d(z)[i])}) = {out[i]} leaves the proven range")
    return out


def range_excess(ctx: LevelContext, values) -> np.ndarray:
    """How far values lie outside the proven range (non-positive when inside).

    Every level maps ``Re z > 0`` into ``Re F > 0``; level 2 also stays in
    the disk ``|F - omega| <= |1 - omega|``. Levels 3 and up leave that
    disk close to ``Im z = +-period/2`` for small ``Re z``, so it is not
    imposed there.
    """
    v = np.asarray(values, dtype=complex)
    excess = -v.real
    if ctx.level == 2:
        excess = np.maximum(excess, np.abs(v - ctx.omega) - abs(1.0 - ctx.omega))
    return excess


def _oracle_model(ctx: LevelContext) -> SchroderModel:
    # Koenigs model of alpha^x, used beyond im_cap where the Gamma factor
    # amplifies the transform's constant errors past any useful accuracy
    if "model" not in ctx._oracle:
        if ctx.level != 2:
            raise DomainError("points beyond im_cap only arise at level 2")
        a = ctx.alpha

        def phi(x):
            return mpmath.power(mpmath.mpf(a), x)

        def dphi(x):
            return mpmath.log(mpmath.mpf(a)) * mpmath.power(mpmath.mpf(a), x)

        fp = find_fixed_point(phi, mpmath.mpf(1), dphi=dphi, bits=128)
        ctx._oracle["model"] = SchroderModel(phi, fp, dphi=dphi)
    return ctx._oracle["model"]


def eval(ctx: LevelContext, z, check_range: bool = True, range_tol: float = 1e-7):  # noqa: A001
    """``F_n(z)`` for ``Re z > 0``.

    ``Im z`` is reduced modulo the period first and real parts beyond 5
    are reached by forward steps of the lower level. Level-2 points whose
    reduced ``|Im z|`` exceeds ``policy.im_cap`` go through the Koenigs
    linearization of ``alpha^x`` instead of the transform (about a second
    per point).

    Raises
    ------
    DomainError
        For ``Re z <= 0``.
    RangeViolation
        If a value lies more than ``range_tol`` outside the proven range
        (see :func:`range_excess`; checked unless ``check_range`` is false).
    """
    scalar = np.ndim(z) == 0
    out = evaluate(ctx, z, check_range, range_tol)
    return complex(out[0]) if scalar else out


def _prev_callable(ctx: LevelContext, prev) -> Callable:
    if prev is None:
        return lambda w: ctx.phi(np.atleast_1d(w))
    if isinstance(prev, LevelContext):
        return lambda w: evaluate(prev, w, check_range=False)
    return lambda w: np.asarray([complex(prev(complex(v))) for v in np.atleast_1d(w)])


def verify_functional_equation(ctx: LevelContext, prev=None, z=1.0):
    """``|F_(n-1)(F_n(z)) - F_n(z + 1)|`` (scalar or array ``z``).

    ``prev`` is the lower level (a :class:`LevelContext` or a callable);
    ``None`` uses the one the level was built from.
    """
    scalar = np.ndim(z) == 0
    zs = np.atleast_1d(np.asarray(z, dtype=complex))
    f = evaluate(ctx, zs, check_range=False)
    f1 = evaluate(ctx, zs + 1.0, check_range=False)
    res = np.abs(_prev_callable(ctx, prev)(f) - f1)
    return float(res[0]) if scalar else res


def verify_monotone_real(ctx: LevelContext, xs: Sequence[float], tol: float = 1e-12) -> bool:
    """True iff ``F`` increases strictly along ``xs`` with values in (1, e).

    Consecutive values that agree to rounding are accepted only when both
    are within ``tol`` of ``omega`` (the orbit has converged there).
    """
    xs = np.asarray(xs, dtype=float)
    if xs.size == 0:
        return True
    if np.any(np.diff(xs) <= 0) or np.any(xs <= 0):
        raise DomainError("xs must be positive and increasing")
    vals = evaluate(ctx, xs, check_range=False).real
    if np.any(vals <= 1.0) or np.any(vals >= math.e) or np.any(vals > ctx.omega + tol):
        return False
    for a, b in zip(vals[:-1], vals[1:]):
        if b > a:
            continue
        if b == a and ctx.omega - a < tol:
            continue
        return False
    return True


def derivative_nonvanishing(ctx: LevelContext | None, z, radius: float | None = None, alpha: float | None = None) -> float:
    """``|F'(z)|`` by a Cauchy integral on a circle inside ``Re z > 0``.

    With ``ctx = None`` the closed-form level 1 ``alpha^z`` is used.
    """
    z = as_complex(z)
    if z.real <= 0:
        raise DomainError("Re(z) must be positive")
    r = radius if radius is not None else min(0.1, 0.5 * z.real)
    if ctx is None:
        return abs(contour_derivative(lambda s: level1(alpha, s), z, r))
    return abs(contour_derivative(lambda s: eval(ctx, s, check_range=False), z, r))


class Tower:
    """Lazily built levels for one base, optionally backed by the disk cache."""

    def __init__(self, alpha: float, config: TowerConfig | None = None):
        self.alpha = check_alpha(alpha)
        self.config = config or TowerConfig()
        self._levels: dict[int, LevelContext] = {}

    def level(self, n: int) -> LevelContext:
        if n < 2:
            raise ValueError("levels 0 and 1 are closed forms")
        if n not in self._levels:
            from . import cache

            prev = self.level(n - 1) if n >= 3 else None
            ctx = None
            if self.config.cache_path:
                ctx = cache.load_level(
                    self.config.cache_path, self.alpha, n, self.config.policy, self.config.fingerprint(), prev
                )
            if ctx is None:
                ctx = build_level(self.config, self.alpha, n, prev)
                if self.config.cache_path:
                    cache.save_level(self.config.cache_path, ctx, self.config.fingerprint())
            self._levels[n] = ctx
        return self._levels[n]

    def __call__(self, n: int, z, check_range: bool = True):
        if n == 0:
            return level0(self.alpha, z)
        if n == 1:
            return level1(self.alpha, z)
        return eval(self.level(n), z, check_range, self.config.range_tol)
