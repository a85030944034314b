"""Command-line front end: ``ksexact <command> ...``.

Every command prints one JSON report on stdout. ``band``, ``tau`` and
``crit`` can also write their table as CSV via ``--out``.

Exit codes: 0 success (a rejected null is still a success), 2 usage
error, 3 data error, 4 numerical error.
"""

import argparse
import csv
import io
import json
import math
import os
import re
import sys
from fractions import Fraction

import numpy as np

from . import __version__, oracle
from .asymptotic import (
    Method,
    TailResult,
    dkwm_bound,
    kolmogorov_critical,
    kolmogorov_series_tail,
    two_sample_asymptotic_pvalue,
)
from .empirical import TIE_WARNING, Sample, dkwm_band, ks_one_sample, ks_two_sample
from .errors import DataError, InvalidParameterError, KsError, NumericalError
from .exact_one_sample import sbt_tail, tau_law
from .exact_two_sample import two_sample_exact_pvalue
from .param_gof import bootstrap_pvalue, dbr_pvalue, get_family
from .param_gof.pvalue import DEFAULT_GRID_SIZE, DEFAULT_REPS

__all__ = ["main", "parse_input", "parse_dist", "dumps", "resolve_seed"]

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 2, 3, 4
SEED_ENV = "KS_SEED"

_NUMBER = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")


# input

def _parse_float(token, lineno):
    token = token.strip()
    if not _NUMBER.match(token):
        raise DataError(f"line {lineno}: not a decimal number: {token!r}")
    value = float(token)
    if not math.isfinite(value):
        raise DataError(f"line {lineno}: value out of range: {token!r}")
    return value


def _read_text(path):
    if path == "-":
        return sys.stdin.read()
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except UnicodeDecodeError as exc:
        raise DataError(f"{path}: not UTF-8 text ({exc.reason})") from None
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror}") from None


def parse_input(path, col=None):
    """Read a :class:`Sample` from a file (``-`` for stdin).

    Without ``col`` the file holds one number per line. With ``col`` it
    is CSV and ``col`` is a header name or a 0-based column index; for an
    index, a first row that does not parse is taken as the header. Blank
    lines are skipped everywhere.
    """
    text = _read_text(path)
    values = []
    if col is None:
        for lineno, line in enumerate(text.splitlines(), start=1):
            if line.strip():
                values.append(_parse_float(line, lineno))
    else:
        rows = [(i, r) for i, r in enumerate(csv.reader(io.StringIO(text)), start=1)
                if any(cell.strip() for cell in r)]
        if not rows:
            raise DataError("empty input")
        if str(col).isdigit():
            idx = int(col)
            first = rows[0][1]
            if idx < len(first) and not _NUMBER.match(first[idx].strip()):
                rows = rows[1:]
        else:
            header = [h.strip() for h in rows[0][1]]
            if col not in header:
                raise DataError(f"column {col!r} not in header {header}")
            idx = header.index(col)
            rows = rows[1:]
        for lineno, row in rows:
            if idx >= len(row):
                raise DataError(f"line {lineno}: missing column {col!r}")
            values.append(_parse_float(row[idx], lineno))
    if not values:
        raise DataError("empty input: no numeric values")
    return Sample.from_data(values)


def parse_dist(spec):
    """``uniform``, ``normal:MU,SIGMA`` or ``exponential:RATE`` to ``(label, cdf)``."""
    from scipy.special import ndtr

    name, _, params = spec.partition(":")
    try:
        args = [float(p) for p in params.split(",")] if params else []
    except ValueError:
        raise InvalidParameterError(f"bad parameters in --dist {spec!r}") from None
    if name == "uniform" and not args:
        return "uniform", lambda t: np.clip(t, 0.0, 1.0)
    if name == "normal" and len(args) == 2:
        mu, sigma = args
        if not sigma > 0:
            raise InvalidParameterError("normal SIGMA must be positive")
        return f"normal:{mu!r},{sigma!r}", lambda t: ndtr((np.asarray(t) - mu) / sigma)
    if name == "exponential" and len(args) == 1:
        (rate,) = args
        if not rate > 0:
            raise InvalidParameterError("exponential RATE must be positive")
        return (f"exponential:{rate!r}",
                lambda t: -np.expm1(-rate * np.maximum(np.asarray(t, dtype=float), 0.0)))
    raise InvalidParameterError(
        f"--dist must be uniform, normal:MU,SIGMA or exponential:RATE, got {spec!r}")


def resolve_seed(seed):
    """Explicit seed, else ``$KS_SEED``, else fresh entropy (reported back)."""
    if seed is not None:
        return seed
    env = os.environ.get(SEED_ENV)
    if env not in (None, ""):
        try:
            return int(env)
        except ValueError:
            raise InvalidParameterError(f"{SEED_ENV} must be an integer, got {env!r}") from None
    return int(np.random.SeedSequence().entropy % (1 << 63))


# output

def _fmt_float(x):
    if not math.isfinite(x):
        return "null"
    s = format(x, ".17g")
    if not any(c in s for c in ".e"):
        s += ".0"
    return s


def _encode(obj):
    if obj is None or isinstance(obj, bool):
        return {None: "null", True: "true", False: "false"}[obj]
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, Fraction):
        return _encode(f"{obj.numerator}/{obj.denominator}")
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        items = (f"{_encode(str(k))}: {_encode(v)}" for k, v in obj.items())
        return "{" + ", ".join(items) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_encode(v) for v in obj) + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj):
    """JSON text with every float written to 17 significant digits."""
    return _encode(obj) + "\n"


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v
                        for v in row])


def _report(test, p_value, **fields):
    out = {"test": test}
    out.update(fields)
    out["p_value"] = p_value.as_dict()
    out["method"] = p_value.label
    out.setdefault("warnings", [])
    out.setdefault("seed", None)
    return out


# commands

def _cmd_ks1(args):
    sample = parse_input(args.file, args.col)
    dist, cdf = parse_dist(args.dist)
    stats = ks_one_sample(sample, cdf)
    n = sample.n
    method = args.method
    side = args.side or ("plus" if method == "exact-one-sided" else "two")
    if method == "exact-one-sided" and side == "two":
        raise InvalidParameterError("exact-one-sided needs --side plus or minus")
    seed = None
    d = {"plus": stats.d_plus, "minus": stats.d_minus, "two": stats.d}[side]
    if method == "mc":
        seed = resolve_seed(args.seed)
        est = oracle.mc_one_sample_tail(n, d, side=side, reps=args.reps, seed=seed,
                                        workers=args.workers)
        res = TailResult(est.estimate, Method.MONTE_CARLO, err=est.se, label="monte-carlo",
                         details={"reps": est.reps})
    elif side != "two" and method in ("auto", "exact-one-sided"):
        res = TailResult(sbt_tail(n, d), Method.EXACT, label="exact-one-sided")
    elif side != "two":
        res = TailResult(dkwm_bound(n, d, "one"), Method.BOUND, label="dkwm-bound")
    else:
        # P(D > d) <= P(D+ > d) + P(D- > d), both sides sharing one law
        res = TailResult(min(1.0, 2.0 * sbt_tail(n, d)), Method.BOUND, label="bound")
    warnings = [TIE_WARNING] if sample.has_ties else []
    return _report("ks1", res, n=n, side=side, dist=dist, statistic=stats.as_dict(),
                   warnings=warnings, seed=seed)


def _cmd_ks2(args):
    x = parse_input(args.x, args.col)
    y = parse_input(args.y, args.col)
    stats = ks_two_sample(x, y)
    n, m = x.n, y.n
    side = args.side
    if side == "two":
        if args.method == "exact":
            raise InvalidParameterError("no exact two-sided two-sample law; use --side plus/minus")
        res = two_sample_asymptotic_pvalue(n, m, stats.d)
    else:
        # D- of (x, y) is D+ of (y, x)
        a, b, d = (n, m, stats.d_plus) if side == "plus" else (m, n, stats.d_minus)
        height = round(d * a * b)
        if args.method == "asymptotic":
            lam = math.sqrt(a * b / (a + b)) * d
            res = TailResult(math.exp(-2.0 * lam * lam), Method.ASYMPTOTIC, terms_used=1,
                             label="asymptotic-one-sided", details={"lambda": lam})
        else:
            res = two_sample_exact_pvalue(a, b, Fraction(height, a * b))
    merged = np.concatenate((x.values, y.values))
    warnings = [TIE_WARNING] if np.unique(merged).size < merged.size else []
    return _report("ks2", res, n=n, m=m, side=side, dist="two-sample",
                   statistic=stats.as_dict(), warnings=warnings)


def _cmd_gof(args):
    sample = parse_input(args.file, args.col)
    fam = get_family(args.family)
    seed = resolve_seed(args.seed)
    if args.method == "dbr":
        res = dbr_pvalue(sample, fam, grid_size=args.grid_size, reps=args.reps or DEFAULT_REPS,
                         seed=seed, workers=args.workers)
    else:
        res = bootstrap_pvalue(sample, fam, reps=args.reps or 1000, seed=seed,
                               workers=args.workers)
    warnings = [TIE_WARNING] if sample.has_ties else []
    theta = [float(t) for t in res.details["theta_hat"]]
    if fam.name == "normal":
        # same MU,SIGMA convention as --dist
        theta = [theta[0], math.sqrt(theta[1])]
    return _report("gof", res, n=sample.n, family=fam.name,
                   dist=f"{fam.name}:" + ",".join(repr(t) for t in theta),
                   statistic={"sqrt_n_d": res.details["statistic"]},
                   warnings=warnings, seed=seed)


def _cmd_band(args):
    sample = parse_input(args.file, args.col)
    band = dkwm_band(sample, args.level)
    rows = band.as_rows()
    if args.out:
        _write_csv(args.out, ["knot", "ecdf", "lower", "upper"], rows)
    warnings = [TIE_WARNING] if sample.has_ties else []
    return {"test": "band", "n": sample.n, "level": band.level, "epsilon": band.epsilon,
            "knots": len(rows) - 1, "out": args.out, "warnings": warnings}


def _cmd_tau(args):
    if (args.lam is None) == (args.eps is None):
        raise InvalidParameterError("give exactly one of --lam and --eps")
    law = tau_law(args.n, lam=args.lam, eps=args.eps)
    if args.out:
        _write_csv(args.out, ["j", "support_point", "prob"], law.atoms)
    out = {"test": "tau"}
    out.update(law.as_dict())
    out["out"] = args.out
    return out


def _cmd_crit(args):
    if args.m is not None and args.n is None:
        raise InvalidParameterError("--m needs --n")
    if args.n is None:
        scale = None
    elif args.m is None:
        scale = math.sqrt(args.n)
    else:
        scale = math.sqrt(args.n * args.m / (args.n + args.m))
    rows = []
    for alpha in args.alpha:
        lam = kolmogorov_critical(alpha)
        rows.append({"alpha": alpha, "lambda": lam,
                     "p_check": kolmogorov_series_tail(lam).p,
                     "d": lam / scale if scale else None})
    if args.out:
        _write_csv(args.out, ["alpha", "lambda", "d"],
                   [(r["alpha"], r["lambda"], "" if r["d"] is None else r["d"]) for r in rows])
    return {"test": "crit", "n": args.n, "m": args.m, "table": rows, "out": args.out}


def _cmd_oracle(args):
    if args.oracle_cmd == "enumerate":
        dist = oracle.enumerate_interleavings(args.n, args.m, args.statistic)
        return {"test": "oracle-enumerate", "n": args.n, "m": args.m,
                "statistic": args.statistic,
                "law": [{"level": lvl, "level_float": float(lvl), "prob": p,
                         "prob_float": float(p)} for lvl, p in dist.items()]}
    seed = resolve_seed(args.seed)
    if args.oracle_cmd == "mc-tail":
        est = oracle.mc_one_sample_tail(args.n, args.eps, side=args.side, reps=args.reps,
                                        seed=seed, workers=args.workers)
        return {"test": "oracle-mc-tail", "n": args.n, "eps": args.eps, "side": args.side,
                **est.as_dict()}
    if args.oracle_cmd == "hitting":
        if (args.lam is None) == (args.eps is None):
            raise InvalidParameterError("give exactly one of --lam and --eps")
        hf = oracle.mc_hitting_time(args.n, lam=args.lam, eps=args.eps, reps=args.reps,
                                    seed=seed, workers=args.workers)
        return {"test": "oracle-hitting", "n": args.n, "epsilon": hf.epsilon,
                "reps": hf.reps, "seed": seed,
                "counts": hf.counts.tolist(), "pmf": hf.pmf.tolist(), "se": hf.se.tolist(),
                "prob_infinity": hf.prob_infinity, "off_support": hf.off_support}
    fam = get_family(args.family)
    res = oracle.null_calibration(fam, args.n, args.replicates, args.alpha, method=args.method,
                                  seed=seed, reps=args.reps, grid_size=args.grid_size,
                                  workers=args.workers)
    return {"test": "oracle-calibrate", "family": fam.name, "n": args.n, "alpha": args.alpha,
            "method": args.method, "seed": seed, **res.as_dict()}


# parser

def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be positive: {value}")
    return value


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _add_input(p, name="file"):
    p.add_argument(name, help="data file, one number per line, or '-' for stdin")


def _add_common(p, mc=True):
    p.add_argument("--col", help="CSV column name or 0-based index")
    if mc:
        p.add_argument("--seed", type=int, help=f"RNG seed (default ${SEED_ENV})")
        p.add_argument("--workers", type=_positive_int, default=1)


def build_parser():
    p = _Parser(prog="ksexact", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    ks1 = sub.add_parser("ks1", help="one-sample test against a fully specified CDF")
    _add_input(ks1)
    _add_common(ks1)
    ks1.add_argument("--dist", default="uniform",
                     help="uniform | normal:MU,SIGMA | exponential:RATE")
    ks1.add_argument("--method", default="auto",
                     choices=["auto", "exact-one-sided", "bound", "mc"])
    ks1.add_argument("--side", choices=["two", "plus", "minus"])
    ks1.add_argument("--reps", type=_positive_int, default=10**5)
    ks1.set_defaults(run=_cmd_ks1)

    ks2 = sub.add_parser("ks2", help="two-sample test")
    _add_input(ks2, "x")
    _add_input(ks2, "y")
    _add_common(ks2, mc=False)
    ks2.add_argument("--method", default="auto", choices=["auto", "exact", "asymptotic"])
    ks2.add_argument("--side", default="two", choices=["two", "plus", "minus"])
    ks2.set_defaults(run=_cmd_ks2)

    gof = sub.add_parser("gof", help="test with parameters estimated from the data")
    _add_input(gof)
    _add_common(gof)
    gof.add_argument("--family", required=True, choices=["normal", "exponential"])
    gof.add_argument("--method", default="dbr", choices=["dbr", "bootstrap"])
    gof.add_argument("--reps", type=_positive_int)
    gof.add_argument("--grid-size", type=_positive_int, default=DEFAULT_GRID_SIZE)
    gof.set_defaults(run=_cmd_gof)

    band = sub.add_parser("band", help="DKWM confidence band")
    _add_input(band)
    _add_common(band, mc=False)
    band.add_argument("--level", type=float, default=0.95)
    band.add_argument("--out", help="CSV output path")
    band.set_defaults(run=_cmd_band)

    tau = sub.add_parser("tau", help="hitting-time law of the empirical process")
    tau.add_argument("--n", type=_positive_int, required=True)
    tau.add_argument("--lam", type=float)
    tau.add_argument("--eps", type=float)
    tau.add_argument("--out", help="CSV output path")
    tau.set_defaults(run=_cmd_tau)

    crit = sub.add_parser("crit", help="Kolmogorov critical values")
    crit.add_argument("--alpha", type=float, nargs="+", default=[0.1, 0.05, 0.01])
    crit.add_argument("--n", type=_positive_int)
    crit.add_argument("--m", type=_positive_int)
    crit.add_argument("--out", help="CSV output path")
    crit.set_defaults(run=_cmd_crit)

    orc = sub.add_parser("oracle", help="brute-force reference computations")
    osub = orc.add_subparsers(dest="oracle_cmd", required=True, parser_class=_Parser)
    orc.set_defaults(run=_cmd_oracle)

    mct = osub.add_parser("mc-tail", help="Monte Carlo one-sample tail")
    mct.add_argument("--n", type=_positive_int, required=True)
    mct.add_argument("--eps", type=float, required=True)
    mct.add_argument("--side", default="minus", choices=["minus", "plus", "two"])
    mct.add_argument("--reps", type=_positive_int, default=10**6)
    hit = osub.add_parser("hitting", help="simulated hitting-time frequencies")
    hit.add_argument("--n", type=_positive_int, required=True)
    hit.add_argument("--lam", type=float)
    hit.add_argument("--eps", type=float)
    hit.add_argument("--reps", type=_positive_int, default=10**6)
    enum = osub.add_parser("enumerate", help="exact two-sample law by enumeration")
    enum.add_argument("--n", type=_positive_int, required=True)
    enum.add_argument("--m", type=_positive_int, required=True)
    enum.add_argument("--statistic", default="d_plus", choices=["d_plus", "d"])
    cal = osub.add_parser("calibrate", help="null rejection rate of the gof p-values")
    cal.add_argument("--family", default="normal", choices=["normal", "exponential"])
    cal.add_argument("--n", type=_positive_int, default=100)
    cal.add_argument("--replicates", type=_positive_int, default=2000)
    cal.add_argument("--alpha", type=float, default=0.05)
    cal.add_argument("--method", default="dbr", choices=["dbr", "bootstrap"])
    cal.add_argument("--reps", type=_positive_int)
    cal.add_argument("--grid-size", type=_positive_int)
    for q in (mct, hit, cal):
        q.add_argument("--seed", type=int, help=f"RNG seed (default ${SEED_ENV})")
        q.add_argument("--workers", type=_positive_int, default=1)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        report = args.run(args)
    except InvalidParameterError as exc:
        print(f"ksexact: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"ksexact: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, KsError) as exc:
        print(f"ksexact: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    sys.stdout.write(dumps(report))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
