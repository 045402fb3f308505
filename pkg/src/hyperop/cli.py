"""Command-line interface: point and grid evaluation, verification, orbits, cache.

Exit codes: 0 success, 1 a check or grid point failed, 2 usage or parse
error, 3 numeric failure (the engine's error name is printed).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import re
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import mpmath
import numpy as np

from . import cache
from .differintegral import EvalPolicy
from .errors import HyperopError
from .numerics import PrecisionPolicy, RayContour
from .schroder import fractional_iterate_oracle
from .tower import (
    ETA,
    LevelContext,
    Tower,
    TowerConfig,
    _oracle_model,
    evaluate,
    level0,
    level1,
    range_excess,
    verify_monotone_real,
)

__all__ = ["main", "parse_complex", "format_complex", "GridJob", "build_parser"]

log = logging.getLogger("hyperop")

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3
CSV_HEADER = ["re_z", "im_z", "re_f", "im_f", "abs_f", "feq_residual"]

_NUM = r"(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?"
_REAL_RE = re.compile(rf"^[+-]?{_NUM}$")
_IMAG_RE = re.compile(rf"^(?P<im>[+-]?(?:{_NUM})?)i$")
_FULL_RE = re.compile(rf"^(?P<re>[+-]?{_NUM})(?P<im>[+-](?:{_NUM})?)i$")


class UsageError(Exception):
    """Bad command-line input (exit code 2)."""


def _imag(text: str) -> float:
    if text in ("", "+"):
        return 1.0
    if text == "-":
        return -1.0
    return float(text)


def parse_complex(text: str) -> complex:
    """Parse ``a+bi``, ``a-bi``, ``a`` or ``bi`` (no whitespace).

    >>> parse_complex("0.5-2i")
    (0.5-2j)
    """
    text = text or ""
    if _REAL_RE.match(text):
        return complex(float(text), 0.0)
    m = _IMAG_RE.match(text)
    if m:
        return complex(0.0, _imag(m.group("im")))
    m = _FULL_RE.match(text)
    if m:
        return complex(float(m.group("re")), _imag(m.group("im")))
    raise UsageError(f"cannot parse complex number {text!r}; use a+bi")


def _fmt(x: float, digits: int) -> str:
    if math.isnan(x):
        return "nan"
    return format(float(x), f".{digits}g")


def format_complex(z: complex, digits: int = 17) -> str:
    """Inverse of :func:`parse_complex` with ``digits`` significant digits."""
    z = complex(z)
    if z.imag == 0:
        return _fmt(z.real, digits)
    im = _fmt(abs(z.imag), digits)
    sign = "-" if z.imag < 0 or (z.imag == 0 and math.copysign(1, z.imag) < 0) else "+"
    return f"{_fmt(z.real, digits)}{sign}{im}i"


def _parse_range(text: str) -> tuple[float, float, int]:
    parts = text.split(",")
    if len(parts) != 3:
        raise UsageError(f"range {text!r} must be min,max,count")
    try:
        lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as exc:
        raise UsageError(f"range {text!r} must be min,max,count") from exc
    if count < 1:
        raise UsageError("range count must be at least 1")
    if count > 1 and not hi >= lo:
        raise UsageError(f"range {text!r} has max < min")
    return lo, hi, count


def _linspace(r: tuple[float, float, int]) -> np.ndarray:
    lo, hi, count = r
    return np.array([lo]) if count == 1 else np.linspace(lo, hi, count)


@dataclass(frozen=True)
class GridJob:
    """A rectangular grid of evaluation points, ordered with ``Re z`` outermost."""

    alpha: float
    level: int
    re_range: tuple[float, float, int]
    im_range: tuple[float, float, int]
    output: str = "csv"

    def __post_init__(self) -> None:
        if self.re_range[2] < 1 or self.im_range[2] < 1:
            raise UsageError("grid counts must be at least 1")
        if min(self.re_range[0], self.re_range[1]) <= 0:
            raise UsageError("Re(z) must be positive")
        if self.output not in ("csv", "json"):
            raise UsageError("grid output must be csv or json")

    def points(self) -> np.ndarray:
        return np.array([complex(r, i) for r in _linspace(self.re_range) for i in _linspace(self.im_range)])


# ------------------------------------------------------------------ engine


def _config(args) -> TowerConfig:
    precision = PrecisionPolicy(max_bits=args.max_bits) if args.max_bits else PrecisionPolicy()
    contour = RayContour(y_max=args.y_max) if args.y_max else RayContour()
    policy = EvalPolicy(contour=contour, precision=precision)
    cache_dir = args.cache_dir or cache.default_cache_dir()
    return TowerConfig(max_level=max(4, args.level), cache_path=cache_dir, policy=policy)


def _check_alpha(alpha: float) -> None:
    if not 1.0 < alpha < ETA - 1e-12:
        raise UsageError(f"--alpha must lie in (1, e^(1/e)); got {alpha}")


class _Engine:
    """Evaluates one level (closed forms for levels 0 and 1)."""

    def __init__(self, alpha: float, level: int, config: TowerConfig):
        self.alpha = alpha
        self.level = level
        self.tower = Tower(alpha, config)
        self.ctx: LevelContext | None = self.tower.level(level) if level >= 2 else None

    def values(self, zs: np.ndarray, check_range: bool = True) -> np.ndarray:
        if self.level == 0:
            return np.array([level0(self.alpha, z) for z in zs])
        if self.level == 1:
            return np.array([level1(self.alpha, z) for z in zs])
        return evaluate(self.ctx, zs, check_range=check_range)

    def prev(self, ws: np.ndarray) -> np.ndarray:
        if self.level == 0:
            return ws + 0j  # level -1 is not defined; residual reported against z + alpha
        if self.level == 1:
            return np.array([level0(self.alpha, w) for w in ws])
        if self.level == 2:
            return np.array([level1(self.alpha, w) for w in ws])
        return evaluate(self.ctx.prev, ws, check_range=False)

    def residuals(self, zs: np.ndarray, values: np.ndarray) -> np.ndarray:
        if self.level == 0:
            return np.abs(values + self.alpha - self.values(zs + 1))
        return np.abs(self.prev(values) - self.values(zs + 1, check_range=False))


def _numeric_failure(exc: Exception) -> int:
    print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
    return EXIT_NUMERIC


# ---------------------------------------------------------------- commands


def cmd_eval(args) -> int:
    z = parse_complex(args.z)
    if z.real <= 0:
        raise UsageError("Re(z) must be positive")
    t0 = time.perf_counter()
    engine = _Engine(args.alpha, args.level, _config(args))
    value = complex(engine.values(np.array([z]))[0])
    residual = float(engine.residuals(np.array([z]), np.array([value]))[0])
    elapsed = (time.perf_counter() - t0) * 1000.0
    d = args.digits
    record = {
        "alpha": _fmt(args.alpha, d),
        "level": args.level,
        "z": format_complex(z, d),
        "value": format_complex(value, d),
        "residual_of_functional_equation": _fmt(residual, d),
        "elapsed_ms": f"{elapsed:.1f}",
    }
    if args.format == "json":
        print(json.dumps(record))
    elif args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(record.keys())
        w.writerow(record.values())
        sys.stdout.write(buf.getvalue())
    else:
        for k, v in record.items():
            print(f"{k}: {v}")
    return EXIT_OK


def _grid_rows(engine: _Engine, zs: np.ndarray) -> tuple[list[tuple], int]:
    try:
        vals = engine.values(zs)
        res = engine.residuals(zs, vals)
        failed = 0
    except (HyperopError, ArithmeticError, ValueError):
        # fall back to point-by-point so one bad point does not sink the grid
        vals = np.full(len(zs), np.nan + 1j * np.nan)
        res = np.full(len(zs), np.nan)
        failed = 0
        for i, z in enumerate(zs):
            try:
                v = engine.values(np.array([z]))
                vals[i] = v[0]
                res[i] = engine.residuals(np.array([z]), v)[0]
            except (HyperopError, ArithmeticError, ValueError) as exc:
                log.warning("point %s failed: %s: %s", z, type(exc).__name__, exc)
                failed += 1
    rows = [
        (z.real, z.imag, v.real, v.imag, abs(v) if not np.isnan(v.real) else math.nan, r)
        for z, v, r in zip(zs, vals, res)
    ]
    return rows, failed


def write_grid(rows: list[tuple], fmt: str, digits: int, stream) -> None:
    """Write grid rows as CSV or JSON with fixed float formatting and '\\n' line ends."""
    if fmt == "csv":
        stream.write(",".join(CSV_HEADER) + "\n")
        for row in rows:
            stream.write(",".join(_fmt(x, digits) for x in row) + "\n")
    else:
        items = []
        for row in rows:
            fields = ", ".join(f'"{k}": {json.dumps(_fmt(x, digits)) if math.isnan(x) else _fmt(x, digits)}' for k, x in zip(CSV_HEADER, row))
            items.append("  {" + fields + "}")
        stream.write("[\n" + ",\n".join(items) + "\n]\n")


def cmd_grid(args) -> int:
    job = GridJob(
        alpha=args.alpha,
        level=args.level,
        re_range=_parse_range(args.re),
        im_range=_parse_range(args.im),
        output="json" if args.format == "json" else "csv",
    )
    engine = _Engine(job.alpha, job.level, _config(args))
    rows, failed = _grid_rows(engine, job.points())
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            write_grid(rows, job.output, args.digits, fh)
    else:
        write_grid(rows, job.output, args.digits, sys.stdout)
    if failed:
        print(f"{failed} of {len(rows)} points failed", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


@dataclass
class CheckResult:
    name: str
    worst: float
    tol: float
    where: complex | None

    @property
    def passed(self) -> bool:
        return bool(self.worst <= self.tol)


def _worst(name: str, values: np.ndarray, zs: np.ndarray, tol: float) -> CheckResult:
    values = np.asarray(values, dtype=float)
    values = np.where(np.isnan(values), np.inf, values)
    i = int(np.argmax(values))
    return CheckResult(name, float(values[i]), tol, complex(zs[i]))


def run_checks(ctx: LevelContext, zs: np.ndarray, feq_tol: float, with_oracle: bool = True) -> list[CheckResult]:
    """The invariant suite of one level on the points ``zs``."""
    checks = []
    vals = evaluate(ctx, zs, check_range=False)
    nxt = evaluate(ctx, zs + 1.0, check_range=False)
    lower = ctx.phi(vals) if ctx.level == 2 else evaluate(ctx.prev, vals, check_range=False)
    checks.append(_worst("functional_equation", np.abs(lower - nxt), zs, feq_tol))
    shifted = evaluate(ctx, zs + 1j * ctx.period, check_range=False)
    checks.append(_worst("periodicity", np.abs(shifted - vals), zs, 1e-8))
    checks.append(_worst("range", range_excess(ctx, vals), zs, 1e-7))
    xs = np.linspace(0.25, 8.0, 32)
    mono = verify_monotone_real(ctx, xs)
    checks.append(CheckResult("monotone_real", 0.0 if mono else math.inf, 0.0, None if mono else complex(xs[0])))
    ks = np.arange(1, 10, dtype=float)
    with mpmath.workprec(64):
        orbit = np.array([float(ctx.orbit.coefficient(k - 1)) for k in ks.astype(int)])
    interp = np.abs(evaluate(ctx, ks, check_range=False) - orbit)
    checks.append(_worst("interpolation", interp, ks.astype(complex), 1e-9))
    if ctx.level == 2 and with_oracle:
        model = _oracle_model(ctx)
        sample = zs[np.abs(zs.imag) <= ctx.policy.im_cap]
        diffs = [abs(complex(fractional_iterate_oracle(model, 1, z)) - v) for z, v in zip(sample, vals[np.abs(zs.imag) <= ctx.policy.im_cap])]
        if diffs:
            checks.append(_worst("oracle_equivalence", np.array(diffs), sample, 1e-8))
    return checks


def cmd_verify(args) -> int:
    count = 3 if args.coarse else 5
    re_r = _parse_range(args.re) if args.re else (0.25, 4.0, count)
    im_r = _parse_range(args.im) if args.im else (-2.0, 2.0, count)
    if args.level < 2:
        raise UsageError("verify needs --level 2 or higher")
    job = GridJob(args.alpha, args.level, re_r, im_r)
    engine = _Engine(args.alpha, args.level, _config(args))
    feq_tol = args.tol if args.tol is not None else (1e-7 if args.level == 2 else 1e-5)
    checks = run_checks(engine.ctx, job.points(), feq_tol, with_oracle=not args.no_oracle)
    ok = True
    for c in checks:
        status = "PASS" if c.passed else "FAIL"
        where = f"  worst at z = {format_complex(c.where, 6)}" if (c.where is not None and not c.passed) else ""
        print(f"{status} {c.name:20s} max = {c.worst:.3e}  tol = {c.tol:.1e}{where}")
        ok = ok and c.passed
    return EXIT_OK if ok else EXIT_FAIL


def cmd_orbit(args) -> int:
    if args.level < 2:
        raise UsageError("levels 0 and 1 are closed forms without an orbit")
    engine = _Engine(args.alpha, args.level, _config(args))
    ctx = engine.ctx
    d = args.digits
    print("k,a_k,abs_a_k_minus_omega")
    with mpmath.workprec(ctx.orbit.coeff_bits or 64):
        omega = ctx.orbit.xi0
        for k, a in enumerate(ctx.orbit.coeffs[: args.rows]):
            print(f"{k},{mpmath.nstr(a, d)},{mpmath.nstr(abs(a - omega), 3)}")
        print(f"# omega = {mpmath.nstr(omega, d)}")
    print(f"# lambda = {_fmt(ctx.lam, d)}")
    print(f"# period = {_fmt(ctx.period, d)}")
    print(f"# orbit_terms = {len(ctx.orbit.coeffs)}")
    return EXIT_OK


def cmd_cache(args) -> int:
    directory = args.cache_dir or cache.default_cache_dir()
    if not directory:
        raise UsageError(f"no cache directory; pass --cache-dir or set {cache.ENV_VAR}")
    path = Path(directory)
    if args.action == "build":
        engine = _Engine(args.alpha, args.level, _config(args))
        cfg = engine.tower.config
        print(cache.cache_file(path, args.alpha, args.level, cfg.fingerprint()))
    elif args.action == "list":
        for f in sorted(path.glob("level*.json")) if path.exists() else []:
            print(f)
    elif args.action == "clear":
        for f in path.glob("level*.json") if path.exists() else []:
            f.unlink()
    return EXIT_OK


# ------------------------------------------------------------------ parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse's own exit code is already 2
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--alpha", type=float, default=math.sqrt(2.0), help="base in (1, e^(1/e)) (default sqrt 2)")
    common.add_argument("--level", type=int, default=2, help="hyper-operator level (default 2)")
    common.add_argument("--format", choices=["text", "csv", "json"], default="text", help="output format")
    common.add_argument("--digits", type=int, default=17, help="significant digits of printed numbers (default 17)")
    common.add_argument("--max-bits", type=int, default=None, help="cap on working precision in bits")
    common.add_argument("--y-max", type=float, default=None, help="truncation radius of the quadrature ray")
    common.add_argument("--cache-dir", default=None, help=f"level cache directory (default ${cache.ENV_VAR})")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    p = _Parser(prog="hyperop", description="Bounded analytic hyper-operators on the right half-plane.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    e = sub.add_parser("eval", parents=[common], help="evaluate F_n at one point")
    e.add_argument("--z", required=True, help="point as a+bi")
    e.set_defaults(func=cmd_eval)

    g = sub.add_parser("grid", parents=[common], help="evaluate on a rectangular grid")
    g.add_argument("--re", required=True, help="Re z range as min,max,count")
    g.add_argument("--im", required=True, help="Im z range as min,max,count")
    g.add_argument("--out", default=None, help="output file (default stdout)")
    g.set_defaults(func=cmd_grid)

    v = sub.add_parser("verify", parents=[common], help="run the invariant suite")
    v.add_argument("--re", default=None, help="Re z range (default 0.25,4,5)")
    v.add_argument("--im", default=None, help="Im z range (default -2,2,5)")
    v.add_argument("--coarse", action="store_true", help="3x3 default grid")
    v.add_argument("--tol", type=float, default=None, help="functional-equation tolerance")
    v.add_argument("--no-oracle", action="store_true", help="skip the Koenigs oracle comparison")
    v.set_defaults(func=cmd_verify)

    o = sub.add_parser("orbit", parents=[common], help="print the integer orbit and fixed point")
    o.add_argument("--rows", type=int, default=40, help="number of orbit rows (default 40)")
    o.set_defaults(func=cmd_orbit)

    c = sub.add_parser("cache", parents=[common], help="manage the level cache")
    c.add_argument("action", choices=["build", "list", "clear"])
    c.set_defaults(func=cmd_cache)
    return p


_VALUE_FLAGS = ("--z", "--re", "--im")


def _bind_values(argv: list[str]) -> list[str]:
    # values such as "-1,1,2" or "-2i" would otherwise be taken for flags
    out, i = [], 0
    while i < len(argv):
        if argv[i] in _VALUE_FLAGS and i + 1 < len(argv):
            out.append(f"{argv[i]}={argv[i + 1]}")
            i += 2
        else:
            out.append(argv[i])
            i += 1
    return out


def main(argv=None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parser.parse_args(_bind_values(argv))
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.digits < 1 or args.digits > 40:
            raise UsageError("--digits must lie in 1..40")
        if args.level < 0:
            raise UsageError("--level must be non-negative")
        _check_alpha(args.alpha)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (HyperopError, ArithmeticError, ValueError) as exc:
        return _numeric_failure(exc)


if __name__ == "__main__":
    sys.exit(main())
