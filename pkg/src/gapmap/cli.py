"""Command-line entry point: ``gapmap {verify,blowup,spectrum,orbit}``.

Exit codes: 0 when every check passes, 1 on a failed check, 2 on bad usage.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import warnings
from dataclasses import asdict, dataclass

import numpy as np

from . import __version__
from .experiments import (
    LemmaId,
    LemmaReport,
    bv_blowup,
    orbit_statistics,
    trial_functions,
    verify_lasota_yorke,
    verify_lemma3,
    verify_measure_preservation,
    verify_series_bound,
)
from .map_core import GapError, ParameterError, make_params, make_partition
from .spectral import DegenerateIterateError, peripheral_check, power_iterate_gap
from .transfer import tail_bound

USAGE_ERROR = 2
CHECK_FAILED = 1


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    c: float = 0.01
    N: int = 4
    n_max: int = 8
    grid_m: int = 2**20
    seed: int = 42
    output_path: str | None = None
    format: str = "json"

    def __post_init__(self):
        if self.grid_m < 2:
            raise UsageError("--grid must be >= 2")
        if self.format not in ("json", "csv"):
            raise UsageError("--format must be json or csv")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def _emit(config: RunConfig, params, results, rows=None, columns=None):
    """Write the output file; every file carries the config and tail bound."""
    if config.output_path is None:
        return
    tb = tail_bound(params).to_dict()
    cfg = asdict(config)
    cfg["output_path"] = None  # keep files identical whatever they are named
    if config.format == "json" or rows is None:
        doc = {"config": cfg, "results": results, "tail_bound": tb, "version": __version__}
        text = json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n"
    else:
        buf = io.StringIO()
        buf.write(f"# config: {json.dumps(_jsonable(cfg), sort_keys=True)}\n")
        buf.write(f"# tail_bound: {json.dumps(_jsonable(tb), sort_keys=True)}\n")
        buf.write(f"# version: {__version__}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in columns])
        text = buf.getvalue()
    with open(config.output_path, "w") as fh:
        fh.write(text)


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def _parse_n_list(text: str) -> list[int]:
    out = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    if not out:
        raise UsageError("--n-list is empty")
    return out


def _config(args, **overrides) -> RunConfig:
    vals = dict(
        c=args.c,
        N=args.N,
        n_max=args.n_max if args.n_max is not None else 8,
        grid_m=args.grid,
        seed=args.seed,
        output_path=args.out,
        format=args.format,
    )
    vals.update(overrides)
    return RunConfig(**vals)


def _params(config: RunConfig):
    p = make_params(config.c, config.N, config.n_max)
    return p, make_partition(p)


def _lemma2_report(p, part) -> LemmaReport:
    n_list = list(range(1, part.n_max + 1))
    rows = bv_blowup(p, part, n_list, 1)
    errs = [abs(r["var_out"] / r["predicted"] - 1.0) for r in rows]
    ratios = [r["ratio"] for r in rows]
    increasing = all(b > a for a, b in zip(ratios, ratios[1:]))
    return LemmaReport(
        lemma_id=LemmaId.LEMMA2_BV,
        trials=len(rows),
        worst_ratio=max(errs) / 0.01,
        bound=0.01,
        passed=increasing and max(errs) <= 0.01,
        slack=0.0,
        params_used={"c": p.c, "N": p.N, "n_max": p.n_max, "grid_factor": 1000},
        details={
            "rows": rows,
            "ratios_increasing": increasing,
            "lower_bound": "exact closed form 8 a_n n^4 (|J|/N)^(k-1) in place of C(k) a_n n^4",
        },
    )


def cmd_verify(args) -> int:
    config = _config(args)
    p, part = _params(config)
    fs = trial_functions(config.seed, 20, config.grid_m)
    reports = [
        verify_measure_preservation(p, part, seed=config.seed),
        _lemma2_report(p, part),
        verify_lemma3(p, part, config.seed, 20, m=config.grid_m, functions=fs),
        verify_series_bound(p, part, config.seed, 20, m=config.grid_m, functions=fs),
        verify_lasota_yorke(p, part, config.seed, 20, m=config.grid_m, functions=fs),
    ]
    print(f"{'check':<22}{'trials':>8}{'worst_ratio':>16}{'pass':>7}")
    for r in reports:
        print(f"{r.lemma_id.value:<22}{r.trials:>8}{r.worst_ratio:>16.6g}{str(r.passed):>7}")
    ok = all(r.passed for r in reports)
    rows = [
        {"lemma": r.lemma_id.value, "trials": r.trials, "worst_ratio": r.worst_ratio,
         "bound": r.bound, "pass": r.passed}
        for r in reports
    ]
    _emit(config, p, [r.to_dict() for r in reports], rows,
          ["lemma", "trials", "worst_ratio", "bound", "pass"])
    return 0 if ok else CHECK_FAILED


def cmd_blowup(args) -> int:
    n_list = _parse_n_list(args.n_list)
    if args.k < 1:
        raise UsageError("--k must be >= 1")
    n_max = args.n_max if args.n_max is not None else max(8, max(n_list))
    config = _config(args, n_max=n_max)
    p, part = _params(config)
    bad = [n for n in n_list if not 1 <= n <= n_max]
    if bad:
        raise UsageError(f"n values {bad} outside [1, n_max={n_max}]")
    rows = bv_blowup(p, part, n_list, args.k, affine_j=args.affine_j)
    cols = ["n", "k", "var_in", "var_out", "ratio", "predicted"]
    print(",".join(cols))
    for r in rows:
        print(",".join(_fmt(r[c]) for c in cols))
    ratios = [r["ratio"] for r in rows]
    increasing = all(b > a for a, b in zip(ratios, ratios[1:]))
    _emit(config, p, {"rows": rows, "n_list": n_list, "k": args.k,
                      "ratios_increasing": increasing}, rows, cols)
    return 0 if increasing else CHECK_FAILED


def cmd_spectrum(args) -> int:
    if args.iters < 10:
        raise UsageError("--iters must be >= 10")
    config = _config(args)
    p, part = _params(config)
    try:
        reports = [power_iterate_gap(p, part, s, args.iters, m=config.grid_m)
                   for s in (config.seed, config.seed + 1)]
    except DegenerateIterateError as exc:
        print(f"iterate vanished ({exc}); gap is maximal")
        return 0
    lam = [r.lambda2_estimate for r in reports]
    agree = abs(lam[0] - lam[1]) <= 0.05 * max(lam)
    peripheral = peripheral_check(p, part, reports[0], angles=args.angles)
    fixed = abs(reports[0].lambda1 - 1.0) <= reports[0].tail.sup_tail + 1e-10
    ok = lam[0] < 1.0 and agree and peripheral and fixed
    print(f"lambda1           {reports[0].lambda1:.15g}")
    for r in reports:
        print(f"lambda2 seed={r.seed:<5}{r.lambda2_estimate:.10g}  residual={r.residual:.3g}")
    print(f"seeds agree       {agree}")
    print(f"no peripheral     {peripheral}")
    results = {
        "reports": [r.to_dict() for r in reports],
        "seeds_agree": agree,
        "peripheral_check": peripheral,
        "lambda1_fixed": fixed,
        "pass": ok,
    }
    rows = [{"seed": r.seed, "lambda1": r.lambda1, "lambda2_estimate": r.lambda2_estimate,
             "residual": r.residual, "iterations": r.iterations} for r in reports]
    _emit(config, p, results, rows, ["seed", "lambda1", "lambda2_estimate", "residual", "iterations"])
    return 0 if ok else CHECK_FAILED


ORBIT_FUNCTIONS = {
    "identity": (lambda x: x, lambda p: 0.5),
    "cos1": (lambda x: np.cos(2.0 * np.pi * x), lambda p: 0.0),
    "indicator_J": (None, lambda p: p.j_len),
}


def cmd_orbit(args) -> int:
    if args.steps < 1000:
        raise UsageError("--steps must be >= 1000")
    if args.fn not in ORBIT_FUNCTIONS:
        raise UsageError(f"--fn must be one of {sorted(ORBIT_FUNCTIONS)}")
    n_max = args.n_max if args.n_max is not None else args.orbit_n_max
    config = _config(args, n_max=n_max)
    p, part = _params(config)
    fn, expected = ORBIT_FUNCTIONS[args.fn]
    if fn is None:
        s_inf = p.s_inf
        fn = lambda x: (np.asarray(x) >= s_inf).astype(float)  # noqa: E731
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            stats = orbit_statistics(p, part, args.x0, args.steps, fn)
    except GapError as exc:
        print(f"warning: {exc}")
        _emit(config, p, {"error": str(exc), "gap_hits": exc.count})
        return CHECK_FAILED
    for w in caught:
        print(f"warning: {w.message}")
    target = expected(p)
    z = (stats.mean - target) / stats.stderr if stats.stderr > 0 else 0.0
    ok = stats.gap_hits == 0 and abs(z) <= 3.0
    print(f"mean {stats.mean:.10g} +- {stats.stderr:.3g} (expected {target:.10g}, z={z:.3g})")
    print(f"fraction in J {stats.fraction_in_J:.6g} +- {stats.stderr_J:.3g}; steps {stats.steps}")
    results = dict(stats.to_dict(), fn=args.fn, x0=args.x0, expected=target, z=z, pass_=ok)
    results["pass"] = results.pop("pass_")
    _emit(config, p, results, [results], ["fn", "x0", "steps", "mean", "stderr", "expected",
                                          "fraction_in_J", "stderr_J", "gap_hits"])
    return 0 if ok else CHECK_FAILED


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--c", type=float, default=0.01, help="a_n = c / n^3")
    common.add_argument("--N", type=int, default=4, help="number of affine branches on J")
    common.add_argument("--n-max", type=int, default=None, help="truncation index (default 8)")
    common.add_argument("--grid", type=int, default=2**20, help="grid resolution m")
    common.add_argument("--seed", type=int, default=42)
    common.add_argument("--out", default=None, help="output file")
    common.add_argument("--format", default="json", choices=["json", "csv"])

    parser = argparse.ArgumentParser(prog="gapmap", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("verify", parents=[common], help="run every lemma check")

    b = sub.add_parser("blowup", parents=[common], help="variation growth of L^k chi_n")
    b.add_argument("--n-list", default="1-10")
    b.add_argument("--k", type=int, default=1)
    b.add_argument("--affine-j", type=int, default=0, help="affine branch used for k > 1")

    s = sub.add_parser("spectrum", parents=[common], help="second eigenvalue estimate")
    s.add_argument("--iters", type=int, default=30)
    s.add_argument("--angles", type=int, default=16)

    o = sub.add_parser("orbit", parents=[common], help="Birkhoff averages along an orbit")
    o.add_argument("--x0", type=float, default=0.3)
    o.add_argument("--steps", type=int, default=10**6)
    o.add_argument("--fn", default="identity")
    o.add_argument("--orbit-n-max", type=int, default=2000,
                   help="truncation index for the forward map when --n-max is not given")
    return parser


COMMANDS = {"verify": cmd_verify, "blowup": cmd_blowup, "spectrum": cmd_spectrum, "orbit": cmd_orbit}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return USAGE_ERROR if exc.code else 0
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ParameterError, ValueError) as exc:
        print(f"gapmap: error: {exc}", file=sys.stderr)
        return USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())
