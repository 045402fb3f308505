"""Pure numpy implementation of the batched kernels.

Mirrors ``_kernels.pyx`` function for function; selected when the compiled
extension is unavailable or ``HYPEROP_PURE=1`` is set.
"""

from __future__ import annotations

import math

import numpy as np

_G = 7.0
_P = np.array(
    [
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
)
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)
_CHUNK = 256


def _lanczos_loggamma(z: np.ndarray) -> np.ndarray:
    zm = z - 1.0
    acc = np.full(z.shape, _P[0], dtype=complex)
    for i in range(1, len(_P)):
        acc = acc + _P[i] / (zm + i)
    t = zm + _G + 0.5
    return _HALF_LOG_2PI + (zm + 0.5) * np.log(t) - t + np.log(acc)


def gamma_array(z: np.ndarray) -> np.ndarray:
    """Gamma at every entry of ``z`` (no pole checks, poles give inf/nan)."""
    z = np.asarray(z, dtype=complex)
    out = np.empty_like(z)
    right = z.real >= 0.5
    out[right] = np.exp(_lanczos_loggamma(z[right]))
    zl = z[~right]
    with np.errstate(all="ignore"):
        out[~right] = np.pi / (np.sin(np.pi * zl) * np.exp(_lanczos_loggamma(1.0 - zl)))
    return out


def recip_gamma_array(z: np.ndarray) -> np.ndarray:
    """Reciprocal Gamma at every entry of ``z``; exact zeros at 0, -1, -2, ..."""
    z = np.asarray(z, dtype=complex)
    out = np.empty_like(z)
    right = z.real >= 0.5
    out[right] = np.exp(-_lanczos_loggamma(z[right]))
    zl = z[~right]
    out[~right] = np.sin(np.pi * zl) * np.exp(_lanczos_loggamma(1.0 - zl)) / np.pi
    pole = (z.imag == 0.0) & (z.real <= 0.0) & (z.real == np.floor(z.real))
    out[pole] = 0.0
    return out


def _sinc_pi(e: np.ndarray) -> np.ndarray:
    # sin(pi e) / (pi e) with the removable point handled
    x = np.pi * e
    small = np.abs(x) < 1e-4
    out = np.empty_like(x)
    xs = x[small]
    out[small] = 1.0 - xs * xs / 6.0 + xs**4 / 120.0
    xl = x[~small]
    out[~small] = np.sin(xl) / xl
    return out


def singular_sum(z, kappa, loglam, shift, sign) -> np.ndarray:
    """``sum_j kappa_j log(1 - sign_j exp(loglam_j (z - shift_j)))`` at every ``z``."""
    z = np.asarray(z, dtype=complex)
    out = np.zeros(z.shape, dtype=complex)
    for k, ll, s, sg in zip(kappa, loglam, shift, sign):
        q = sg * np.exp(ll * (z - s))
        small = np.abs(q) < 1e-5
        v = np.empty_like(q)
        qs = q[small]
        v[small] = -(qs + qs * qs / 2.0 + qs**3 / 3.0 + qs**4 / 4.0)
        v[~small] = np.log(1.0 - q[~small])
        out += k * v
    return out


def transform_eval(
    z,
    series_coeffs,
    log_split,
    log_nodes,
    weighted_theta,
    tail_amp,
    tail_power,
    log_tail_start,
    sing_kappa,
    sing_loglam,
    sing_shift,
    sing_sign,
    delta_pole,
) -> np.ndarray:
    """Evaluate the continued transform at every entry of ``z``.

    ``F(z) = rg(1-z) [exp(-z log_split) sum_n c_n/(n+1-z) + sum_j v_j exp(-z l_j)
    + sum_k A_k exp((1-p_k-z) log Y)/(p_k+z-1)] + singular_sum(z)``, where ``rg`` is the
    reciprocal Gamma function. Within ``delta_pole`` of a positive integer
    ``m`` the term ``n = m-1`` is combined with ``rg`` through
    ``rg(1-z)/(m-z) = (-1)^(m+1) Gamma(z) sinc(z-m)``.
    """
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    c = np.asarray(series_coeffs, dtype=complex)
    ln = np.asarray(log_nodes, dtype=complex)
    wt = np.asarray(weighted_theta, dtype=complex)
    out = np.empty_like(z)
    n_idx = np.arange(len(c), dtype=float)
    for start in range(0, len(z), _CHUNK):
        zc = z[start : start + _CHUNK]
        m = np.rint(zc.real)
        near = (m >= 1) & (m <= len(c)) & (np.abs(zc - m) < delta_pole)
        denom = (n_idx[None, :] + 1.0) - zc[:, None]
        if np.any(near):
            rows = np.nonzero(near)[0]
            denom[rows, (m[rows] - 1).astype(int)] = np.inf
        with np.errstate(divide="ignore", invalid="ignore"):
            series = (c[None, :] / denom).sum(axis=1)
        split_pow = np.exp(-zc * log_split)
        mellin = np.exp(-zc[:, None] * ln[None, :]) @ wt
        bracket = split_pow * series + mellin
        for amp, p in zip(tail_amp, tail_power):
            if amp != 0:
                bracket = bracket + amp * np.exp((1.0 - p - zc) * log_tail_start) / (p + zc - 1.0)
        res = recip_gamma_array(1.0 - zc) * bracket
        if np.any(near):
            rows = np.nonzero(near)[0]
            mm = m[rows]
            eps = zc[rows] - mm
            sign = np.where(mm.astype(int) % 2 == 1, 1.0, -1.0)
            special = c[(mm - 1).astype(int)] * split_pow[rows]
            res[rows] += sign * gamma_array(zc[rows]) * _sinc_pi(eps) * special
        if len(sing_kappa):
            res = res + singular_sum(zc, sing_kappa, sing_loglam, sing_shift, sing_sign)
        out[start : start + _CHUNK] = res
    return out
