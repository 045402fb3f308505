"""Continued differintegral of exponential generating series.

A :class:`ThetaSeries` holds coefficients ``a_k`` of
``theta(w) = sum_k a_k w^k / k!``. Its transform

    F(z) = d^(z-1)/dw^(z-1) theta |_(w=0)
         = 1/Gamma(1-z) int_0^oo theta(-y) y^(-z) dy

interpolates the coefficients, ``F(k+1) = a_k``. The integral is split at a
point ``c`` of a ray: the part ``[0, c]`` becomes a Taylor series with a
simple pole at every positive integer, the rest is a tanh-sinh quadrature on
geometric panels. The transform is compiled once per series and policy into
a :class:`MellinTransform`, a fixed analytic function described by
double-precision constants, which is then evaluated in batches by the kernels
or at arbitrary precision with mpmath.

Slowly decaying tails are handled by subtracting known logarithmic
singularity families (:class:`SingularTerm`) whose transforms are available
in closed form, and by a fitted power-law model of what is left beyond the
last panel.
"""

from __future__ import annotations

import cmath
import hashlib
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import mpmath
import numpy as np
import scipy.linalg

from . import kernels
from .errors import (
    DecayError,
    DefectiveMatrixError,
    DomainError,
    NoConvergenceError,
    PoleError,
    PrecisionCapError,
    SectorError,
)
from .numerics import (
    LOG2E,
    PrecisionPolicy,
    RayContour,
    as_complex,
    panel_edges,
    tanh_sinh_rule,
)

__all__ = [
    "SingularTerm",
    "ThetaSeries",
    "EvalPolicy",
    "MellinTransform",
    "DecayReport",
    "theta_eval",
    "theta_neg_real",
    "build_transform",
    "differintegral_eval",
    "near_integer_eval",
    "rmt_interpolation_check",
    "decay_diagnostic",
    "matrix_fractional_power",
    "matrix_power_eig",
]

_ABS_BITS = 64  # absolute accuracy of theta(-y) values, in bits
_THETA_NOISE = 2.0**-60  # conservative absolute noise of computed theta values
_MP = mpmath.mp


def _mp_number(x):
    if isinstance(x, (mpmath.mpf, mpmath.mpc)):
        return x
    if isinstance(x, complex) or np.iscomplexobj(x):
        x = complex(x)
        if x.imag == 0.0:
            return mpmath.mpf(x.real)
        return mpmath.mpc(x.real, x.imag)
    return mpmath.mpf(x)


# ------------------------------------------------------------ singular terms


@dataclass(frozen=True)
class SingularTerm:
    """A periodic family of logarithmic singularities, ``kappa log(1 - sign lam^(z - shift))``.

    With ``sign = 1`` the singularities sit at ``shift + 2 pi i k / log lam``;
    ``sign = -1`` moves them by half a period. The function is analytic and
    bounded for ``Re z > shift`` and real on the real axis. Its generating
    series ``g(w) = -kappa sum_m sign^m lam^(m(1-shift)) exp(lam^m w) / m`` is
    an exponential sum, so subtracting it from a theta-series removes the
    slowly decaying part of ``theta(-y)`` while its transform is known exactly.
    """

    kappa: float
    lam: float
    shift: float
    sign: int = 1

    def __post_init__(self) -> None:
        if not 0.0 < self.lam < 1.0:
            raise ValueError("lam must lie in (0, 1)")
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")

    @property
    def log_lam(self) -> float:
        return math.log(self.lam)

    @property
    def z0(self) -> complex:
        """One singularity of the family."""
        half = 0.0 if self.sign == 1 else math.pi / -self.log_lam
        return complex(self.shift, half)

    def value(self, z) -> complex:
        z = as_complex(z)
        return complex(kernels.singular_sum(np.array([z]), *_singular_arrays((self,)))[0])

    def value_mp(self, z):
        q = mpmath.exp(mpmath.log(mpmath.mpf(self.lam)) * (z - mpmath.mpf(self.shift)))
        return mpmath.mpf(self.kappa) * mpmath.log(1 - self.sign * q)

    def _n_modes(self) -> int:
        rate = (1.0 - self.shift) * -self.log_lam
        return max(4, int(math.ceil(50.0 / rate)) + 2)

    def theta_neg(self, y: np.ndarray) -> np.ndarray:
        """Generating series at ``-y`` for the array ``y``."""
        y = np.asarray(y)
        out = np.zeros(y.shape, dtype=y.dtype if np.iscomplexobj(y) else float)
        ll = self.log_lam
        for m in range(1, self._n_modes() + 1):
            amp = self.sign**m * math.exp(m * ll * (1.0 - self.shift)) / m
            out = out + amp * np.exp(-math.exp(m * ll) * y)
        return -self.kappa * out


def _singular_arrays(terms: Sequence[SingularTerm]):
    return (
        np.array([t.kappa for t in terms], dtype=float),
        np.array([t.log_lam for t in terms], dtype=float),
        np.array([t.shift for t in terms], dtype=float),
        np.array([t.sign for t in terms], dtype=float),
    )


# -------------------------------------------------------------- theta series


@dataclass(frozen=True, eq=False)
class ThetaSeries:
    """Exponential generating series ``sum_k a_k w^k / k!`` with bounded coefficients.

    Parameters
    ----------
    coeffs
        Stored prefix ``a_0, a_1, ...`` (mpmath or Python numbers).
    xi0
        Limit of ``a_k``; beyond the stored prefix (and without a generator)
        the coefficients are padded with this value.
    decay_rate
        Estimated ``lam`` with ``|a_k - xi0| <= C lam^k``; fitted when omitted.
    coeff_bits
        Absolute accuracy of the stored prefix in bits, ``None`` when exact.
    generator
        Optional ``k -> a_k`` evaluated at the current mpmath precision, used
        for indices past the stored prefix.
    singular
        Known singularity families of the interpolating function, subtracted
        before quadrature.
    """

    coeffs: tuple = ()
    xi0: object = 0
    decay_rate: float | None = None
    coeff_bits: int | None = None
    generator: Callable[[int], object] | None = None
    singular: tuple[SingularTerm, ...] = ()
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        coeffs = tuple(_mp_number(a) for a in self.coeffs)
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "xi0", _mp_number(self.xi0))
        object.__setattr__(self, "singular", tuple(self.singular))
        for a in coeffs:
            if not mpmath.isfinite(a):
                raise DomainError("theta-series coefficients must be finite")
        if not coeffs and self.generator is None:
            raise ValueError("need stored coefficients or a generator")
        if self.decay_rate is None:
            object.__setattr__(self, "decay_rate", self._fit_decay()[1])

    # construction helpers

    @classmethod
    def from_function(
        cls,
        H: Callable,
        xi0=0,
        decay_rate: float | None = None,
        singular: Sequence[SingularTerm] = (),
    ) -> "ThetaSeries":
        """Series with ``a_k = H(k + 1)``, ``H`` accepting mpmath numbers."""
        return cls(
            xi0=xi0,
            decay_rate=decay_rate,
            generator=lambda k: H(mpmath.mpf(k + 1)),
            singular=tuple(singular),
        )

    # coefficient access

    @property
    def is_real(self) -> bool:
        if isinstance(self.xi0, mpmath.mpc):
            return False
        if self.generator is not None and not self.coeffs:
            return isinstance(self.generator(0), mpmath.mpf)
        return all(isinstance(a, mpmath.mpf) for a in self.coeffs)

    def coefficient(self, k: int):
        """``a_k`` as an mpmath number."""
        if k < 0:
            raise IndexError(k)
        if k < len(self.coeffs):
            return self.coeffs[k]
        if self.generator is not None:
            return _mp_number(self.generator(k))
        return self.xi0

    def reduced(self, k: int):
        """``b_k = a_k - xi0``."""
        return self.coefficient(k) - self.xi0

    @property
    def padded(self) -> bool:
        """True when coefficients past the stored prefix equal ``xi0`` exactly."""
        return self.generator is None

    def _sample_count(self) -> int:
        return len(self.coeffs) if self.coeffs else 40

    def _fit_decay(self) -> tuple[float, float]:
        ks, logs = [], []
        for k in range(self._sample_count()):
            b = abs(self.reduced(k))
            if b > 0:
                ks.append(k)
                logs.append(float(mpmath.log(b)))
        if len(ks) < 2:
            return 1.0, 0.0
        slope, icpt = np.polyfit(ks, logs, 1)
        rate = float(min(1.0, max(0.0, math.exp(slope))))
        c = float(max(np.exp(np.array(logs) - slope * np.array(ks))))
        return c, rate

    def decay_constant(self) -> float:
        """Smallest ``C`` with ``|b_k| <= C decay_rate^k`` on the stored prefix."""
        if "decay_constant" in self._cache:
            return self._cache["decay_constant"]
        lam = self.decay_rate
        best = -math.inf
        for k in range(self._sample_count()):
            b = abs(self.reduced(k))
            if b == 0:
                continue
            if lam == 0.0:
                best = math.inf
                break
            best = max(best, float(mpmath.log(b)) - k * math.log(lam))
        out = math.exp(best) if best > -math.inf else 0.0
        self._cache["decay_constant"] = out
        return out

    # fixed point integer images of b_k

    def _fixed_ints(self, bits: int, count: int) -> tuple[list[int], list[int]]:
        key = ("fixed", bits)
        re_ints, im_ints = self._cache.get(key, ([], []))
        if len(re_ints) < count:
            with mpmath.workprec(bits + 32):
                for k in range(len(re_ints), count):
                    b = self.reduced(k)
                    re_ints.append(int(mpmath.nint(mpmath.ldexp(mpmath.re(b), bits))))
                    im_ints.append(int(mpmath.nint(mpmath.ldexp(mpmath.im(b), bits))))
            self._cache[key] = (re_ints, im_ints)
        return re_ints, im_ints

    def y_limit(self) -> float:
        """Largest ``y`` at which stored-coefficient rounding stays below ``2**-64``."""
        if self.coeff_bits is None:
            return math.inf
        return max(0.0, (self.coeff_bits - _ABS_BITS) / LOG2E)


@dataclass(frozen=True)
class EvalPolicy:
    """Truncation and accuracy settings of the transform.

    Parameters
    ----------
    series_order
        Number ``N_max`` of Taylor terms on the segment ``[0, split]``.
    contour
        Integration ray, split point and truncation radius.
    pole_tol
        Distance to a positive integer below which the pole-free limit form
        is used. Zero disables it, and exact integers then raise.
    im_cap
        ``|Im z|`` up to which quadrature accuracy is certified; beyond it
        the Gamma factor amplifies rounding and the multiprecision path is
        used where available.
    tol
        Absolute accuracy goal for the quadrature bracket.
    tail_model
        ``"power"`` fits ``A y^-p`` or a conjugate pair of complex powers to
        the residual beyond the last panel,
        ``"none"`` drops it.
    max_tail_error
        Estimated discarded-tail error above which :class:`DecayError` is raised.
    """

    series_order: int = 64
    contour: RayContour = field(default_factory=RayContour)
    pole_tol: float = 1e-3
    im_cap: float = 4.0
    tol: float = 1e-14
    tail_model: str = "power"
    max_tail_error: float = 1e-6
    precision: PrecisionPolicy = field(default_factory=PrecisionPolicy)

    def __post_init__(self) -> None:
        if self.series_order < 8:
            raise ValueError("series_order must be at least 8")
        if not 0.0 <= self.pole_tol < 0.5:
            raise ValueError("pole_tol must lie in [0, 0.5)")
        if self.im_cap <= 0:
            raise ValueError("im_cap must be positive")
        if self.tail_model not in ("power", "none"):
            raise ValueError("tail_model must be 'power' or 'none'")

    def fingerprint(self) -> str:
        """Stable digest of every setting that changes computed values."""
        c = self.contour
        text = (
            f"N={self.series_order};angle={c.angle!r};split={c.split_point!r};"
            f"ymax={c.y_max!r};pole={self.pole_tol!r};imcap={self.im_cap!r};"
            f"tol={self.tol!r};tail={self.tail_model};"
            f"prec={self.precision.base_bits},{self.precision.guard_bits},"
            f"{self.precision.max_bits},{self.precision.target_digits}"
        )
        return hashlib.sha256(text.encode()).hexdigest()[:16]


# -------------------------------------------------------------- theta values


def _terms_needed(series: ThetaSeries, y: float, bits: int) -> int:
    """Number of Taylor terms of the reduced series needed at ``-y``."""
    lam = max(series.decay_rate or 0.0, 1e-3)
    if series.padded:
        return len(series.coeffs)
    k_min = int(math.e * lam * y) + 40
    re_ints, im_ints = series._fixed_ints(bits, k_min)
    k = k_min
    thresh = -(_ABS_BITS + 16) / LOG2E
    while True:
        re_ints, im_ints = series._fixed_ints(bits, k + 32)
        ok = True
        for j in range(k, k + 32):
            mag = max(abs(re_ints[j]), abs(im_ints[j]))
            if mag == 0:
                continue
            log_term = (mag.bit_length() - bits) / LOG2E + j * math.log(max(y, 1e-300)) - math.lgamma(j + 1)
            if log_term > thresh:
                ok = False
                break
        if ok:
            return k
        k += 32


def _horner_neg(ints: list[int], count: int, y: float, bits: int) -> int:
    """``sum_{k<count} b_k (-y)^k / k!`` in fixed point with ``bits`` fraction bits."""
    mant, ex = math.frexp(y)
    m = int(mant * (1 << 53))
    s = 53 - ex
    acc = 0
    if s >= 0:
        for k in range(count - 1, -1, -1):
            acc = ints[k] - ((acc * m) >> s) // (k + 1)
    else:
        for k in range(count - 1, -1, -1):
            acc = ints[k] - ((acc * m) << -s) // (k + 1)
    return acc


def _split_fixed(acc: int, bits: int) -> tuple[float, float]:
    hi = acc / (1 << bits) if acc else 0.0
    lo = float(Fraction(acc, 1 << bits) - Fraction(hi)) if acc else 0.0
    return hi, lo


def _working_bits(series: ThetaSeries, y_max: float, policy: EvalPolicy) -> int:
    # coefficient rounding is amplified by sum_k y^k/k! = e^y, the partial
    # sums reach C e^(decay_rate y); both must stay below the fixed-point ulp
    lam = series.decay_rate or 0.0
    scale = math.log2(max(series.decay_constant(), 1.0))
    cancel = (1.0 + lam) * y_max * LOG2E + scale + _ABS_BITS - policy.precision.target_bits
    bits = policy.precision.escalated_bits(cancel)
    return 64 * int(math.ceil(bits / 64))


def theta_neg_real(series: ThetaSeries, ys, policy: EvalPolicy | None = None) -> tuple[np.ndarray, np.ndarray]:
    """``theta(-y)`` for an array of nonnegative ``y``, as a double-double pair.

    The limit is split off, ``theta(-y) = xi0 exp(-y) + sum_k b_k (-y)^k/k!``,
    and the reduced sum is evaluated by exact integer Horner steps in fixed
    point, escalated by the expected cancellation of about
    ``decay_rate * y * log2(e)`` bits.

    Returns
    -------
    hi, lo
        Complex arrays whose sum carries about ``2**-64`` absolute accuracy.
    """
    policy = policy or EvalPolicy()
    ys = np.atleast_1d(np.asarray(ys, dtype=float))
    if np.any(ys < 0):
        raise DomainError("theta_neg_real needs y >= 0")
    hi = np.zeros(ys.shape, dtype=complex)
    lo = np.zeros(ys.shape, dtype=complex)
    if ys.size == 0:
        return hi, lo
    bits = _working_bits(series, float(ys.max()), policy)
    real = series.is_real
    with mpmath.workprec(bits + 32):
        xi_re = mpmath.re(series.xi0)
        xi_im = mpmath.im(series.xi0)
        for i, y in enumerate(ys):
            y = float(y)
            count = _terms_needed(series, y, bits)
            re_ints, im_ints = series._fixed_ints(bits, count)
            decay = mpmath.exp(-mpmath.mpf(y))
            acc = _horner_neg(re_ints, count, y, bits) + int(mpmath.nint(mpmath.ldexp(xi_re * decay, bits)))
            rh, rl = _split_fixed(acc, bits)
            if real:
                ih = il = 0.0
            else:
                acc = _horner_neg(im_ints, count, y, bits) + int(mpmath.nint(mpmath.ldexp(xi_im * decay, bits)))
                ih, il = _split_fixed(acc, bits)
            hi[i] = complex(rh, ih)
            lo[i] = complex(rl, il)
    return hi, lo


def _theta_mp(series: ThetaSeries, w: complex, policy: EvalPolicy):
    lam = series.decay_rate or 0.0
    r = abs(w)
    bits = policy.precision.escalated_bits((r + lam * r) * LOG2E)
    with mpmath.workprec(bits):
        wm = _mp_number(w)
        total = series.xi0 * mpmath.exp(wm)
        term = mpmath.mpf(1)
        eps = mpmath.ldexp(1, -bits)
        if series.padded:
            limit = len(series.coeffs)
        else:
            limit = None
        k = 0
        quiet = 0
        while True:
            if limit is not None and k >= limit:
                break
            t = series.reduced(k) * term
            total += t
            if limit is None and k > math.e * max(lam, 1e-3) * r + 10:
                quiet = quiet + 1 if abs(t) < eps else 0
                if quiet >= 8:
                    break
            k += 1
            term = term * wm / k
        return total


def theta_eval(series: ThetaSeries, w, policy: EvalPolicy | None = None) -> complex:
    """Evaluate ``theta(w)``.

    Uses the stabilized form ``xi0 exp(w) + sum_k b_k w^k/k!`` with the
    working precision raised by ``(|w| + decay_rate |w|) log2(e)`` bits.

    Raises
    ------
    PrecisionCapError
        When the required precision exceeds ``policy.precision.max_bits``.
    """
    policy = policy or EvalPolicy()
    w = as_complex(w)
    if w == 0:
        return complex(series.coefficient(0))
    if w.imag == 0.0 and w.real < 0.0:
        hi, lo = theta_neg_real(series, [-w.real], policy)
        return complex(hi[0] + lo[0])
    return complex(_theta_mp(series, w, policy))


# -------------------------------------------------------------- the transform


@dataclass(frozen=True, eq=False)
class MellinTransform:
    """A compiled transform ``z -> F(z)`` defined by double-precision constants.

    Columns allow several series sharing one set of quadrature nodes (used by
    the matrix demo); scalar series have a single column.
    """

    log_split: complex
    series_coeffs: np.ndarray  # (N, d): (a_n - h_n) (-1)^n split^(n+1) / n!
    nodes: np.ndarray  # (m,) radii y_j
    weights: np.ndarray  # (m,) quadrature weights along the radius
    theta_hi: np.ndarray  # (m, d) subtracted theta values at -y_j e^(i angle)
    theta_lo: np.ndarray
    angle: float
    tail_amp: np.ndarray  # (K, d): theta(-y) ~ sum_j A_j y^(-p_j) past y_end
    tail_power: np.ndarray  # (K, d) complex exponents p_j
    y_end: float
    singular: tuple[SingularTerm, ...]
    pole_tol: float
    quad_error: float
    tail_error: float
    _mp_cache: dict = field(default_factory=dict, repr=False)

    @property
    def columns(self) -> int:
        return self.series_coeffs.shape[1]

    @property
    def log_nodes(self) -> np.ndarray:
        return np.log(self.nodes) + 1j * self.angle

    def evaluate(self, z, column: int = 0, pole_tol: float | None = None) -> np.ndarray:
        """Double-precision batch evaluation at the points ``z``."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        pole = self.pole_tol if pole_tol is None else pole_tol
        if pole == 0.0:
            hit = (z.imag == 0) & (z.real >= 1) & (z.real == np.floor(z.real))
            if np.any(hit):
                raise PoleError("transform evaluated exactly at a positive integer with pole_tol = 0")
        direction = cmath.exp(1j * self.angle)
        wt = direction * self.weights * self.theta_hi[:, column]
        kappa, loglam, shift, sign = _singular_arrays(self.singular)
        return kernels.transform_eval(
            z,
            np.ascontiguousarray(self.series_coeffs[:, column]),
            complex(self.log_split),
            np.ascontiguousarray(self.log_nodes),
            np.ascontiguousarray(wt),
            np.ascontiguousarray(self.tail_amp[:, column], dtype=complex),
            np.ascontiguousarray(self.tail_power[:, column], dtype=complex),
            math.log(self.y_end),
            kappa,
            loglam,
            shift,
            sign,
            float(pole),
        )

    def _mp_constants(self, prec: int, column: int):
        key = (prec, column)
        if key not in self._mp_cache:
            with mpmath.workprec(prec):
                logs = [mpmath.log(mpmath.mpf(float(y))) for y in self.nodes]
                real = self.angle == 0.0 and not np.any(self.theta_hi[:, column].imag) and not np.any(
                    self.series_coeffs[:, column].imag
                )
                direction = mpmath.expjpi(mpmath.mpf(self.angle) / mpmath.pi) if self.angle else mpmath.mpf(1)
                wts = []
                for j in range(len(self.nodes)):
                    th = _mp_number(complex(self.theta_hi[j, column])) + _mp_number(complex(self.theta_lo[j, column]))
                    wts.append(direction * mpmath.mpf(float(self.weights[j])) * th)
                coeffs = [_mp_number(complex(c)) for c in self.series_coeffs[:, column]]
                if real:
                    wts = [mpmath.re(v) for v in wts]
                    coeffs = [mpmath.re(c) for c in coeffs]
                self._mp_cache[key] = (logs, wts, coeffs, real)
        return self._mp_cache[key]

    def evaluate_mp(self, z, prec: int, column: int = 0):
        """Evaluate at one point with ``prec`` working bits.

        The constants are the same doubles used by :meth:`evaluate`, so this
        is the same function computed without rounding noise.
        """
        logs, wts, coeffs, real = self._mp_constants(prec, column)
        with mpmath.workprec(prec):
            z = _mp_number(z)
            if isinstance(z, mpmath.mpf) and not real:
                z = mpmath.mpc(z)
            angle = mpmath.mpf(self.angle)
            if self.angle:
                log_split = mpmath.mpc(self.log_split.real, self.log_split.imag)
            else:
                log_split = mpmath.mpf(self.log_split.real)
            m = int(mpmath.nint(mpmath.re(z)))
            near = 1 <= m <= len(coeffs) and abs(z - m) < self.pole_tol
            if self.pole_tol == 0.0 and mpmath.im(z) == 0 and mpmath.re(z) == m and m >= 1:
                raise PoleError("transform evaluated exactly at a positive integer with pole_tol = 0")
            split_pow = mpmath.exp(-z * log_split)
            series = 0
            for n, c in enumerate(coeffs):
                if near and n == m - 1:
                    continue
                series += c / (n + 1 - z)
            bracket = split_pow * series
            if angle:
                for lj, wj in zip(logs, wts):
                    bracket += wj * mpmath.exp(-z * (lj + 1j * angle))
            else:
                for lj, wj in zip(logs, wts):
                    bracket += wj * mpmath.exp(-z * lj)
            log_end = mpmath.log(mpmath.mpf(self.y_end))
            for amp, p in zip(self.tail_amp[:, column], self.tail_power[:, column]):
                if amp != 0:
                    p = _mp_number(complex(p))
                    bracket += _mp_number(complex(amp)) * mpmath.exp((1 - p - z) * log_end) / (p + z - 1)
            out = mpmath.rgamma(1 - z) * bracket
            if near:
                sign = 1 if m % 2 == 1 else -1
                out += sign * mpmath.gamma(z) * mpmath.sincpi(z - m) * coeffs[m - 1] * split_pow
            for t in self.singular:
                out += t.value_mp(z)
            if real and isinstance(z, mpmath.mpf):
                # conjugate tail terms cancel on the real axis
                out = mpmath.re(out)
            return out


_TAIL_TERMS = 2


def _fit_window(ys: np.ndarray, f: np.ndarray, pair: bool | None = None):
    # four samples at y_0 2^(-k/4): two powers by Prony's method (a conjugate
    # pair for log-periodic tails), or one real power when the samples are
    # too close to a single power for Prony; amplitudes refer to y = 1
    if np.any(f == 0) or not np.all(np.isfinite(f)):
        return None
    step = math.log(ys[0] / ys[1])
    if pair is not False:
        m = np.array([[f[1], -f[0]], [f[2], -f[1]]])
        if np.linalg.cond(m) < 1e10:
            s_, q_ = np.linalg.solve(m, f[2:4])
            u = np.roots([1.0, -s_, q_]).astype(complex)
            # u = 2^(p/4); a half turn or more per sample is not resolved
            if np.all(u != 0) and np.all(np.abs(np.angle(u)) < 0.5 * math.pi) and abs(u[0] - u[1]) > 1e-8 * abs(u[0]):
                powers = np.log(u) / step
                if np.all(powers.real > 1.0):
                    at_start = np.linalg.solve(np.vstack([np.ones(2), u]), f[:2])
                    return at_start * ys[0] ** powers, powers
        if pair:
            return None
    if not np.all((f[1:] / f[:-1]).real > 0):
        return None
    p = math.log(abs(f[3]) / abs(f[0])) / (3 * step)
    if p <= 1.0:
        return None
    return np.array([f[0] * ys[0] ** p]), np.array([complex(p)])


def _fit_tail(ys: np.ndarray, f: np.ndarray):
    """Fit ``theta(-y) ~ sum_j A_j y^(-p_j)`` at the end of the quadrature range.

    ``ys`` are eight points ``Y 2^(-k/4)``. The model is fitted on the four
    nearest ``Y`` and, for an error estimate, again on the four below.
    Returns ``((amps, powers), (amps, powers) | None)`` or ``None``.
    """
    f = np.asarray(f, dtype=complex)
    near = _fit_window(ys[:4], f[:4])
    if near is None:
        return None
    return near, _fit_window(ys[4:8], f[4:8], pair=len(near[0]) == 2)


def _tail_integral(fit, y_end: float, z: np.ndarray) -> np.ndarray:
    """``int_Y^oo sum_j A_j y^(-p_j - z) dy`` at the points ``z``."""
    amps, powers = fit
    out = np.zeros(z.shape, dtype=complex)
    for amp, p in zip(amps, powers):
        out += amp * np.exp((1.0 - p - z) * math.log(y_end)) / (p + z - 1.0)
    return out


def _rgamma_probe(probes: np.ndarray) -> np.ndarray:
    return np.abs(kernels.recip_gamma_array(1.0 - probes))


def _build_plan(
    theta_fn: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]],
    coeff_fn: Callable[[int], np.ndarray],
    columns: int,
    singular: tuple[SingularTerm, ...],
    policy: EvalPolicy,
    y_limit: float,
    decay_rate: float,
) -> MellinTransform:
    contour = policy.contour
    c = contour.split_point
    angle = contour.angle
    split = c * cmath.exp(1j * angle)
    log_split = complex(math.log(c), angle)

    coeffs = np.zeros((policy.series_order, columns), dtype=complex)
    term = split  # split^(n+1) / n!
    for n in range(policy.series_order):
        coeffs[n] = coeff_fn(n) * ((-1) ** n) * term
        term = term * split / (n + 1)

    probes = np.array([0.0, 0.5 + 1j * policy.im_cap, 1.5 - 1j * policy.im_cap, 8.0])
    amplify = _rgamma_probe(probes)
    y_cap = min(contour.y_max, y_limit)
    if y_cap <= c:
        raise PrecisionCapError("coefficient precision does not reach past the split point")

    cache: dict[float, tuple[np.ndarray, np.ndarray]] = {}

    def thetas(ys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        missing = [y for y in ys if y not in cache]
        if missing:
            hi, lo = theta_fn(np.array(missing))
            for y, h, l in zip(missing, hi, lo):
                cache[y] = (h, l)
        return (
            np.array([cache[y][0] for y in ys]).reshape(len(ys), columns),
            np.array([cache[y][1] for y in ys]).reshape(len(ys), columns),
        )

    all_y, all_w, all_hi, all_lo = [], [], [], []
    quad_err = 0.0
    stopped = False
    y_end = c
    for a, b in panel_edges(c, y_cap):
        half, mid = 0.5 * (b - a), 0.5 * (b + a)
        prev = None
        level = 3
        while True:
            x, w = tanh_sinh_rule(level)
            ys = mid + half * x
            hi, _ = thetas(ys)
            powers = np.exp(-np.outer(probes, np.log(ys)))  # (probes, m)
            terms = half * w[:, None] * hi
            s = powers @ terms  # (probes, d)
            if prev is not None:
                # converged at the goal or at the rounding floor of the sum
                noise = np.abs(terms) * 64 * np.finfo(float).eps + half * w[:, None] * _THETA_NOISE
                floor = np.abs(powers) @ noise
                excess = amplify[:, None] * np.maximum(np.abs(s - prev) - floor, 0.0)
                diff = float(np.max(amplify[:, None] * np.abs(s - prev)))
                if float(np.max(excess)) <= 0.05 * policy.tol:
                    break
            if level >= 10:
                raise NoConvergenceError(f"quadrature panel [{a:g}, {b:g}] did not converge")
            prev = s
            level += 1
        quad_err += diff
        hi, lo = thetas(ys)
        all_y.append(ys)
        all_w.append(half * np.asarray(w))
        all_hi.append(hi)
        all_lo.append(lo)
        y_end = b
        edge_hi, _ = thetas(np.array([b]))
        reach = max(b, 1.0 / max(decay_rate, 1e-3))
        edge = max(float(np.max(np.abs(edge_hi))) - _THETA_NOISE, 0.0)
        if edge * reach * float(amplify.max()) < 0.05 * policy.tol:
            stopped = True
            break

    tail_amp = np.zeros((_TAIL_TERMS, columns), dtype=complex)
    tail_power = np.zeros((_TAIL_TERMS, columns), dtype=complex)
    tail_err = 0.0
    if not stopped:
        ys_tail = y_end * 2.0 ** (-np.arange(8) / 4.0)
        samples, _ = thetas(ys_tail)
        for col in range(columns):
            f = samples[:, col]
            fit = _fit_tail(ys_tail, f) if policy.tail_model == "power" and angle == 0.0 else None
            if fit is None:
                # nothing known about the decay: the crude bound |theta(Y)| Y
                tail_err = max(tail_err, abs(f[0]) * y_end * float(amplify.max()))
                continue
            near, far = fit
            k = len(near[0])
            tail_amp[:k, col], tail_power[:k, col] = near
            # model error: disagreement with the fit one octave further in
            t_near = _tail_integral(near, y_end, probes)
            diff = np.abs(t_near - _tail_integral(far, y_end, probes)) if far is not None else np.abs(t_near)
            tail_err = max(tail_err, float(np.max(amplify * diff)))
        if tail_err > policy.max_tail_error:
            raise DecayError(
                f"theta(-y) is still {np.abs(samples[0]).max():.3e} at y = {y_end:g}; "
                f"estimated tail error {tail_err:.3e}"
            )

    nodes = np.concatenate(all_y)
    return MellinTransform(
        log_split=log_split,
        series_coeffs=coeffs,
        nodes=nodes,
        weights=np.concatenate(all_w),
        theta_hi=np.concatenate(all_hi),
        theta_lo=np.concatenate(all_lo),
        angle=angle,
        tail_amp=tail_amp,
        tail_power=tail_power,
        y_end=y_end,
        singular=singular,
        pole_tol=policy.pole_tol,
        quad_error=quad_err,
        tail_error=tail_err,
    )


def _two_sum(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def _series_theta_fn(series: ThetaSeries, policy: EvalPolicy, singular: tuple[SingularTerm, ...]):
    angle = policy.contour.angle
    direction = cmath.exp(1j * angle)
    store = series._cache.setdefault(("theta", angle, policy.precision), {})

    def raw(ys: np.ndarray):
        missing = np.array([y for y in ys if y not in store], dtype=float)
        if missing.size:
            if angle == 0.0:
                hi, lo = theta_neg_real(series, missing, policy)
            else:
                hi = np.array([complex(_theta_mp(series, -direction * y, policy)) for y in missing])
                lo = np.zeros_like(hi)
            for y, h, l in zip(missing, hi, lo):
                store[float(y)] = (h, l)
        return (
            np.array([store[y][0] for y in ys], dtype=complex),
            np.array([store[y][1] for y in ys], dtype=complex),
        )

    def theta_fn(ys: np.ndarray):
        hi, lo = raw(ys)
        for t in singular:
            hi, err = _two_sum(hi, -t.theta_neg(direction * ys))
            lo = lo + err
        return hi, lo

    return theta_fn


def build_transform(
    series: ThetaSeries,
    policy: EvalPolicy | None = None,
    singular: Sequence[SingularTerm] | None = None,
) -> MellinTransform:
    """Compile the transform of ``series`` under ``policy`` (cached on the series).

    ``singular`` overrides the singularity families of the series.
    """
    policy = policy or EvalPolicy()
    singular = series.singular if singular is None else tuple(singular)
    key = ("plan", policy, singular)
    if key in series._cache:
        return series._cache[key]

    def coeff_fn(n: int) -> np.ndarray:
        with mpmath.workprec(80):
            a = complex(series.coefficient(n))
        h = sum(t.value(n + 1) for t in singular)
        return np.array([a - h])

    plan = _build_plan(
        _series_theta_fn(series, policy, singular),
        coeff_fn,
        1,
        singular,
        policy,
        series.y_limit(),
        series.decay_rate or 0.0,
    )
    series._cache[key] = plan
    return plan


def differintegral_eval(
    series: ThetaSeries,
    z,
    policy: EvalPolicy | None = None,
    shift: int = 1,
):
    """The continued differintegral ``d^(z - shift) theta`` at ``w = 0``.

    With the default ``shift = 1`` this is ``F(z)``, the function with
    ``F(k + 1) = a_k``; ``shift = 0`` gives ``d^z theta = F(z + 1)``, the
    convention of the interpolation theorem for ``sum H(k) w^k/k!``.

    Accepts a scalar or an array of points; arrays are evaluated in one
    batch. Points within ``policy.pole_tol`` of a positive integer use the
    limit form of :func:`near_integer_eval` automatically.
    """
    policy = policy or EvalPolicy()
    plan = build_transform(series, policy)
    scalar = np.ndim(z) == 0
    zz = np.atleast_1d(np.asarray(z, dtype=complex)) + (1 - shift)
    out = plan.evaluate(zz)
    return complex(out[0]) if scalar else out


def near_integer_eval(series: ThetaSeries, z, policy: EvalPolicy | None = None) -> complex:
    """``F(z)`` near a positive integer ``m`` via the pole-free limit form.

    The term ``n = m - 1`` of the split series is combined with the
    reciprocal Gamma factor as ``(-1)^(m+1) Gamma(z) sinc(z - m)``, so
    ``F(m) = a_(m-1)`` holds exactly in the limit.
    """
    policy = policy or EvalPolicy()
    z = as_complex(z)
    m = round(z.real)
    if m < 1 or abs(z - m) >= 0.5:
        raise DomainError("near_integer_eval needs z within 1/2 of a positive integer")
    plan = build_transform(series, policy)
    return complex(plan.evaluate(np.array([z]), pole_tol=0.4999)[0])


def rmt_interpolation_check(
    H: Callable,
    z,
    policy: EvalPolicy | None = None,
    xi0=0,
    decay_rate: float | None = None,
) -> float:
    """``|F(z) - H(z)|`` for the series with coefficients ``a_k = H(k + 1)``.

    ``H`` must accept mpmath numbers (for the coefficients) and Python
    complex numbers (for the comparison).
    """
    z = as_complex(z)
    series = ThetaSeries.from_function(H, xi0=xi0, decay_rate=decay_rate)
    return abs(differintegral_eval(series, z, policy) - complex(H(_mp_number(z))))


# ---------------------------------------------------------------- diagnostic


@dataclass(frozen=True)
class DecayReport:
    """Samples of ``log|Gamma(1-z) F(z)|`` against ``|Im z|`` and their fitted slope."""

    im: tuple[float, ...]
    log_abs: tuple[float, ...]
    slope: float | None


def decay_diagnostic(series: ThetaSeries, z_line, policy: EvalPolicy | None = None) -> DecayReport:
    """Empirical decay of the transform bracket along a vertical line.

    Reports ``log|Gamma(1-z) F(z)|`` against ``|Im z|`` and the least-squares
    slope; families decaying in the right half-plane sector give slopes near
    ``-pi/2``. Diagnostic only.
    """
    zs = [as_complex(z) for z in z_line]
    if not zs:
        return DecayReport((), (), None)
    values = differintegral_eval(series, np.array(zs), policy)
    ims, logs = [], []
    for z, f in zip(zs, values):
        g = complex(mpmath.gamma(1 - z))
        ims.append(abs(z.imag))
        logs.append(math.log(abs(g * f)))
    slope = float(np.polyfit(ims, logs, 1)[0]) if len(set(ims)) >= 2 else None
    return DecayReport(tuple(ims), tuple(logs), slope)


# ------------------------------------------------------------ matrix powers


def _check_matrix(A: np.ndarray, cond_max: float) -> tuple[np.ndarray, np.ndarray]:
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DomainError("matrix must be square")
    if A.shape[0] > 8:
        raise DomainError("matrix demo supports n <= 8")
    evals, vecs = np.linalg.eig(A)
    if np.min(evals.real) <= 0:
        raise SectorError("every eigenvalue needs a positive real part")
    if np.linalg.cond(vecs) > cond_max:
        raise DefectiveMatrixError("eigenvector matrix is too ill-conditioned")
    return evals, vecs


def matrix_power_eig(A, z) -> np.ndarray:
    """``A^z = V diag(lam_j^z) V^-1`` with principal powers (the independent oracle)."""
    evals, vecs = _check_matrix(np.asarray(A), 1e12)
    z = as_complex(z)
    return vecs @ np.diag(np.exp(z * np.log(evals))) @ np.linalg.inv(vecs)


def matrix_fractional_power(
    A,
    z,
    policy: EvalPolicy | None = None,
    cond_max: float = 1e8,
    crosscheck_tol: float | None = 1e-6,
) -> np.ndarray:
    """``A^z`` as the transform of ``theta(w) = A exp(A w)``, entry by entry.

    The coefficients ``a_k = A^(k+1)`` make the transform equal to ``A^z``
    directly. The quadrature uses ``theta(-y) = A expm(-A y)``, which decays
    like ``exp(-min Re(lam_j) y)``.

    Raises
    ------
    SectorError
        If an eigenvalue has nonpositive real part.
    DefectiveMatrixError
        If the eigenvector condition number exceeds ``cond_max``.
    NoConvergenceError
        If the result disagrees with the eigendecomposition by more than
        ``crosscheck_tol`` (skipped when ``None``).
    """
    policy = policy or EvalPolicy()
    A = np.asarray(A, dtype=complex)
    evals, _ = _check_matrix(A, cond_max)
    n = A.shape[0]
    z = as_complex(z)
    direction = cmath.exp(1j * policy.contour.angle)

    powers = [A.copy()]
    for _ in range(policy.series_order):
        powers.append(powers[-1] @ A)

    def coeff_fn(k: int) -> np.ndarray:
        return powers[k].reshape(-1)

    def theta_fn(ys: np.ndarray):
        vals = np.array([(A @ scipy.linalg.expm(-A * (direction * y))).reshape(-1) for y in ys])
        return vals, np.zeros_like(vals)

    plan = _build_plan(
        theta_fn,
        coeff_fn,
        n * n,
        (),
        policy,
        math.inf,
        float(np.min(evals.real)),
    )
    out = np.array([plan.evaluate(np.array([z]), column=j)[0] for j in range(n * n)]).reshape(n, n)
    if crosscheck_tol is not None:
        ref = matrix_power_eig(A, z)
        if np.max(np.abs(out - ref)) > crosscheck_tol * max(1.0, np.max(np.abs(ref))):
            raise NoConvergenceError("transform and eigendecomposition disagree")
    return out
