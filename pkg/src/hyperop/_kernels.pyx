# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled batched kernels; same functions and signatures as ``_fallback``."""

import numpy as np

from libc.complex cimport cexp, clog, csin, cabs, creal, cimag
from libc.math cimport M_PI, floor, fabs, sin, log

cdef double _G = 7.0
cdef double[9] _P = [
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
]
cdef double _HALF_LOG_2PI = 0.5 * log(2.0 * M_PI)


cdef inline double complex _lanczos_loggamma(double complex z) nogil:
    cdef double complex zm = z - 1.0
    cdef double complex acc = _P[0]
    cdef int i
    for i in range(1, 9):
        acc = acc + _P[i] / (zm + i)
    cdef double complex t = zm + _G + 0.5
    return _HALF_LOG_2PI + (zm + 0.5) * clog(t) - t + clog(acc)


cdef inline double complex _gamma(double complex z) nogil:
    if creal(z) >= 0.5:
        return cexp(_lanczos_loggamma(z))
    return M_PI / (csin(M_PI * z) * cexp(_lanczos_loggamma(1.0 - z)))


cdef inline double complex _rgamma(double complex z) nogil:
    cdef double re = creal(z)
    if cimag(z) == 0.0 and re <= 0.0 and re == floor(re):
        return 0.0
    if re >= 0.5:
        return cexp(-_lanczos_loggamma(z))
    return csin(M_PI * z) * cexp(_lanczos_loggamma(1.0 - z)) / M_PI


cdef inline double complex _sinc_pi(double complex e) nogil:
    cdef double complex x = M_PI * e
    cdef double complex x2
    if cabs(x) < 1e-4:
        x2 = x * x
        return 1.0 - x2 / 6.0 + x2 * x2 / 120.0
    return csin(x) / x


cdef inline double complex _singular(double complex z, const double[::1] kappa, const double[::1] loglam,
                                     const double[::1] shift, const double[::1] sign) nogil:
    cdef double complex out = 0.0
    cdef double complex q, v
    cdef Py_ssize_t k
    for k in range(kappa.shape[0]):
        q = sign[k] * cexp(loglam[k] * (z - shift[k]))
        if cabs(q) < 1e-5:
            v = -(q + q * q / 2.0 + q * q * q / 3.0 + q * q * q * q / 4.0)
        else:
            v = clog(1.0 - q)
        out = out + kappa[k] * v
    return out


def gamma_array(z):
    """Gamma at every entry of ``z`` (no pole checks, poles give inf/nan)."""
    cdef double complex[::1] zv = np.ascontiguousarray(np.asarray(z, dtype=complex).ravel())
    out = np.empty(zv.shape[0], dtype=complex)
    cdef double complex[::1] ov = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(zv.shape[0]):
            ov[i] = _gamma(zv[i])
    return out.reshape(np.shape(z))


def recip_gamma_array(z):
    """Reciprocal Gamma at every entry of ``z``; exact zeros at 0, -1, -2, ..."""
    cdef double complex[::1] zv = np.ascontiguousarray(np.asarray(z, dtype=complex).ravel())
    out = np.empty(zv.shape[0], dtype=complex)
    cdef double complex[::1] ov = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(zv.shape[0]):
            ov[i] = _rgamma(zv[i])
    return out.reshape(np.shape(z))


def singular_sum(z, kappa, loglam, shift, sign):
    """``sum_j kappa_j log(1 - sign_j exp(loglam_j (z - shift_j)))`` at every ``z``."""
    cdef double complex[::1] zv = np.ascontiguousarray(np.asarray(z, dtype=complex).ravel())
    cdef const double[::1] kv = np.ascontiguousarray(kappa, dtype=float)
    cdef const double[::1] lv = np.ascontiguousarray(loglam, dtype=float)
    cdef const double[::1] sv = np.ascontiguousarray(shift, dtype=float)
    cdef const double[::1] gv = np.ascontiguousarray(sign, dtype=float)
    out = np.empty(zv.shape[0], dtype=complex)
    cdef double complex[::1] ov = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(zv.shape[0]):
            ov[i] = _singular(zv[i], kv, lv, sv, gv)
    return out.reshape(np.shape(z))


def transform_eval(
    z,
    series_coeffs,
    double complex log_split,
    log_nodes,
    weighted_theta,
    tail_amp,
    tail_power,
    double log_tail_start,
    sing_kappa,
    sing_loglam,
    sing_shift,
    sing_sign,
    double delta_pole,
):
    """Evaluate the continued transform at every entry of ``z`` (see ``_fallback.transform_eval``)."""
    cdef double complex[::1] zv = np.ascontiguousarray(np.atleast_1d(np.asarray(z, dtype=complex)).ravel())
    cdef const double complex[::1] c = np.ascontiguousarray(series_coeffs, dtype=complex)
    cdef const double complex[::1] ln = np.ascontiguousarray(log_nodes, dtype=complex)
    cdef const double complex[::1] wt = np.ascontiguousarray(weighted_theta, dtype=complex)
    cdef const double complex[::1] ta = np.ascontiguousarray(np.atleast_1d(tail_amp), dtype=complex)
    cdef const double complex[::1] tp = np.ascontiguousarray(np.atleast_1d(tail_power), dtype=complex)
    cdef const double[::1] kv = np.ascontiguousarray(sing_kappa, dtype=float)
    cdef const double[::1] lv = np.ascontiguousarray(sing_loglam, dtype=float)
    cdef const double[::1] sv = np.ascontiguousarray(sing_shift, dtype=float)
    cdef const double[::1] gv = np.ascontiguousarray(sing_sign, dtype=float)
    out = np.empty(zv.shape[0], dtype=complex)
    cdef double complex[::1] ov = out
    cdef Py_ssize_t i, n, j, nc = c.shape[0], nn = ln.shape[0]
    cdef double complex zc, series, split_pow, mellin, bracket, res
    cdef double m, sgn
    cdef Py_ssize_t skip
    with nogil:
        for i in range(zv.shape[0]):
            zc = zv[i]
            m = floor(creal(zc) + 0.5)
            skip = -1
            if m >= 1 and m <= nc and cabs(zc - m) < delta_pole:
                skip = <Py_ssize_t>m - 1
            series = 0.0
            for n in range(nc):
                if n != skip:
                    series = series + c[n] / ((n + 1.0) - zc)
            split_pow = cexp(-zc * log_split)
            mellin = 0.0
            for j in range(nn):
                mellin = mellin + cexp(-zc * ln[j]) * wt[j]
            bracket = split_pow * series + mellin
            for j in range(ta.shape[0]):
                if ta[j] != 0:
                    bracket = bracket + ta[j] * cexp((1.0 - tp[j] - zc) * log_tail_start) / (tp[j] + zc - 1.0)
            res = _rgamma(1.0 - zc) * bracket
            if skip >= 0:
                sgn = 1.0 if (<long>m) % 2 == 1 else -1.0
                res = res + sgn * _gamma(zc) * _sinc_pi(zc - m) * c[skip] * split_pow
            if kv.shape[0]:
                res = res + _singular(zc, kv, lv, sv, gv)
            ov[i] = res
    return out
