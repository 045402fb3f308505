"""Persistent JSON cache of built levels.

A file holds one :class:`~hyperop.tower.LevelContext`: the fixed point,
multiplier and orbit (as decimal strings at full precision) and every
constant of the compiled transform (as 17-significant-digit floats, which
round-trip exactly). Reloading therefore reproduces evaluation bit for bit.
Files are keyed by ``(alpha, level, config fingerprint)`` and written to a
temporary name first, then renamed into place.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
from dataclasses import replace
from pathlib import Path

import mpmath
import numpy as np

from .differintegral import MellinTransform, SingularTerm, ThetaSeries
from .errors import CacheFormatError

__all__ = ["FORMAT_VERSION", "ENV_VAR", "default_cache_dir", "cache_file", "save_level", "load_level", "dumps_level", "loads_level"]

FORMAT_VERSION = 1
ENV_VAR = "HYPEROP_CACHE_DIR"


def default_cache_dir() -> str | None:
    """Directory named by ``$HYPEROP_CACHE_DIR``, or ``None``."""
    return os.environ.get(ENV_VAR) or None


def _f(x: float) -> float:
    # 17 significant digits; json writes the shortest repr, which round-trips too
    return float(format(float(x), ".17g"))


def _c(z) -> list[float]:
    z = complex(z)
    return [_f(z.real), _f(z.imag)]


def _carray(a: np.ndarray) -> list:
    a = np.asarray(a, dtype=complex)
    return [np.real(a).tolist(), np.imag(a).tolist()]


def _from_carray(obj, shape=None) -> np.ndarray:
    re, im = (np.asarray(v, dtype=float) for v in obj)
    out = re + 1j * im
    return out.reshape(shape) if shape is not None else out


def _alpha_key(alpha: float) -> str:
    return format(float(alpha), ".15e")


def cache_file(directory, alpha: float, level: int, fingerprint: str) -> Path:
    """Path of the cache file for one level."""
    digest = hashlib.sha256(f"{_alpha_key(alpha)}|{level}|{fingerprint}".encode()).hexdigest()[:20]
    return Path(directory) / f"level{level}-{digest}.json"


def _transform_dict(t: MellinTransform) -> dict:
    return {
        "log_split": _c(t.log_split),
        "series_coeffs": _carray(t.series_coeffs),
        "series_shape": list(t.series_coeffs.shape),
        "nodes": [_f(v) for v in t.nodes],
        "weights": [_f(v) for v in t.weights],
        "theta_hi": _carray(t.theta_hi),
        "theta_lo": _carray(t.theta_lo),
        "theta_shape": list(t.theta_hi.shape),
        "angle": _f(t.angle),
        "tail_amp": _carray(t.tail_amp),
        "tail_power": _carray(t.tail_power),
        "tail_shape": list(t.tail_amp.shape),
        "y_end": _f(t.y_end),
        "singular": [[_f(s.kappa), _f(s.lam), _f(s.shift), int(s.sign)] for s in t.singular],
        "pole_tol": _f(t.pole_tol),
        "quad_error": _f(t.quad_error),
        "tail_error": _f(t.tail_error),
    }


def _transform_from(d: dict) -> MellinTransform:
    return MellinTransform(
        log_split=complex(*d["log_split"]),
        series_coeffs=_from_carray(d["series_coeffs"], tuple(d["series_shape"])),
        nodes=np.asarray(d["nodes"], dtype=float),
        weights=np.asarray(d["weights"], dtype=float),
        theta_hi=_from_carray(d["theta_hi"], tuple(d["theta_shape"])),
        theta_lo=_from_carray(d["theta_lo"], tuple(d["theta_shape"])),
        angle=float(d["angle"]),
        tail_amp=_from_carray(d["tail_amp"], tuple(d["tail_shape"])),
        tail_power=_from_carray(d["tail_power"], tuple(d["tail_shape"])),
        y_end=float(d["y_end"]),
        singular=tuple(SingularTerm(k, l, s, int(g)) for k, l, s, g in d["singular"]),
        pole_tol=float(d["pole_tol"]),
        quad_error=float(d["quad_error"]),
        tail_error=float(d["tail_error"]),
    )


def dumps_level(ctx, fingerprint: str) -> str:
    """Serialize a level context to a JSON string."""
    bits = ctx.orbit.coeff_bits or 64
    digits = int(math.ceil(bits * math.log10(2))) + 5
    with mpmath.workprec(bits + 32):
        orbit = [mpmath.nstr(a, digits, strip_zeros=False) for a in ctx.orbit.coeffs]
        xi0 = mpmath.nstr(ctx.orbit.xi0, digits, strip_zeros=False)
    doc = {
        "format_version": FORMAT_VERSION,
        "alpha": _f(ctx.alpha),
        "level": ctx.level,
        "fingerprint": fingerprint,
        "omega": _f(ctx.omega),
        "lambda": _f(ctx.lam),
        "period": _f(ctx.period),
        "im_cap": _f(ctx.policy.im_cap),
        "orbit": {
            "count": len(orbit),
            "tolerance": _f(2.0**-bits),
            "bits": bits,
            "xi0": xi0,
            "decay_rate": _f(ctx.orbit.decay_rate),
            "coefficients": orbit,
        },
        "transform": _transform_dict(ctx.transform),
        "build_info": ctx.build_info,
    }
    return json.dumps(doc, separators=(",", ":"))


def loads_level(text: str, policy, prev=None):
    """Rebuild a level context from :func:`dumps_level` output.

    Raises
    ------
    CacheFormatError
        If the text is not a well-formed cache document.
    """
    from .tower import LevelContext

    try:
        doc = json.loads(text)
        if doc.get("format_version") != FORMAT_VERSION:
            raise CacheFormatError(f"unsupported cache format {doc.get('format_version')!r}")
        orb = doc["orbit"]
        bits = int(orb["bits"])
        with mpmath.workprec(bits + 32):
            coeffs = tuple(mpmath.mpf(a) for a in orb["coefficients"])
            xi0 = mpmath.mpf(orb["xi0"])
        if len(coeffs) != int(orb["count"]):
            raise CacheFormatError("orbit count does not match the stored coefficients")
        transform = _transform_from(doc["transform"])
        series = ThetaSeries(
            coeffs=coeffs,
            xi0=xi0,
            decay_rate=float(orb["decay_rate"]),
            coeff_bits=bits,
            singular=transform.singular if int(doc["level"]) == 2 else (),
        )
        return LevelContext(
            alpha=float(doc["alpha"]),
            level=int(doc["level"]),
            orbit=series,
            omega=float(doc["omega"]),
            lam=float(doc["lambda"]),
            period=float(doc["period"]),
            policy=replace(policy, im_cap=float(doc["im_cap"])),
            transform=transform,
            prev=prev,
            build_info=dict(doc.get("build_info", {})),
        )
    except CacheFormatError:
        raise
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise CacheFormatError(f"malformed cache document: {exc}") from exc


def save_level(directory, ctx, fingerprint: str) -> Path:
    """Write ``ctx`` atomically; returns the file path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = cache_file(directory, ctx.alpha, ctx.level, fingerprint)
    text = dumps_level(ctx, fingerprint)
    fd, tmp = tempfile.mkstemp(prefix=path.name, suffix=".tmp", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def load_level(directory, alpha: float, level: int, policy, fingerprint: str, prev=None):
    """Load the cached level, or ``None`` when there is no matching file.

    A file whose stored ``alpha``, level or fingerprint disagree with the
    request is ignored (returns ``None``); a malformed one raises
    :class:`CacheFormatError`.
    """
    path = cache_file(directory, alpha, level, fingerprint)
    if not path.exists():
        return None
    text = path.read_text(encoding="utf-8")
    ctx = loads_level(text, policy, prev)
    if abs(ctx.alpha - alpha) > 1e-15 or ctx.level != level:
        return None
    if json.loads(text).get("fingerprint") != fingerprint:
        return None
    return ctx
