"""Verification suites for the map's quantitative claims.

Every ``verify_*`` function returns a :class:`LemmaReport` whose
``worst_ratio`` is the largest observed value of (measured quantity) / (bound),
so a report passes when ``worst_ratio <= 1 + slack``.
"""

from __future__ import annotations

import bisect
import enum
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .function_space import (
    GridFunction,
    Indicator,
    grid,
    integral,
    lip_norm,
    lip_seminorm,
    random_lipschitz,
    sup_norm,
    variation,
)
from .map_core import (
    BranchKind,
    GapError,
    MapParams,
    Partition,
    _bisect_scalar,
    branches,
    eval_branch,
    eval_branch_deriv,
    forward_map_array,
    zeta_series,
)
from .transfer import (
    apply_L,
    apply_L_power,
    apply_Ln,
    apply_Ln_split,
    lasota_yorke_constant,
    tail_bound,
)

__all__ = [
    "LemmaId",
    "LemmaReport",
    "OrbitStats",
    "trial_functions",
    "series_constant",
    "largest_admissible_c",
    "verify_measure_preservation",
    "duality_defect",
    "bv_blowup",
    "verify_lemma3",
    "verify_series_bound",
    "verify_lasota_yorke",
    "orbit_statistics",
    "ensemble_gap_hits",
    "mc_correlation",
]

VERIFY_GRID = 2**20
LIP_SLACK = 0.01
TRIAL_MODES = (1, 2, 4, 8, 16, 32)


class LemmaId(enum.Enum):
    MEASURE_PRESERVATION = "MeasurePreservation"
    LEMMA2_BV = "Lemma2_BV"
    LEMMA3_LN = "Lemma3_Ln"
    EQ_SERIES_BOUND = "Eq_SeriesBound"
    LEMMA4_LY = "Lemma4_LY"


@dataclass
class LemmaReport:
    lemma_id: LemmaId
    trials: int
    worst_ratio: float
    bound: float
    passed: bool
    slack: float
    params_used: dict
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lemma_id"] = self.lemma_id.value
        d["pass"] = d.pop("passed")
        return d


def _params_dict(p: MapParams, m: int | None = None, seed: int | None = None) -> dict:
    d = {"c": p.c, "N": p.N, "n_max": p.n_max}
    if m is not None:
        d["grid_m"] = m
    if seed is not None:
        d["seed"] = seed
    return d


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("GAPMAP_THREADS", "1")))
    except ValueError:
        return 1


def _map(fn, items):
    # results come back in input order whatever the thread count
    items = list(items)
    n = _workers()
    if n == 1 or len(items) < 2:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def trial_functions(seed: int, trials: int, m: int = VERIFY_GRID):
    """Deterministic family of random Lipschitz test functions.

    Frequency content cycles through 1..32 modes and the Lipschitz constant is
    drawn from [0.25, 4] so both slow and fast functions are exercised.
    """
    children = np.random.SeedSequence(seed).spawn(trials)
    out = []
    for t, child in enumerate(children):
        rng = np.random.default_rng(child)
        K = float(rng.uniform(0.25, 4.0))
        sub_seed = int(rng.integers(2**63))
        out.append(random_lipschitz(sub_seed, K, TRIAL_MODES[t % len(TRIAL_MODES)], m))
    return out


# --------------------------------------------------------------------------
# measure preservation and duality


def _inverse_derivative_sum(p, part, x):
    total = np.zeros_like(x)
    for b in branches(part):
        total += eval_branch_deriv(p, b, x)
    return total


def duality_defect(p, part, f: GridFunction, g: GridFunction, fine_m: int = 2**22):
    """Compare ``int (L f) g`` with ``int f (g o T)``.

    The right side is a trapezoid sum on ``fine_m`` cells with ``T`` from the
    forward map; the truncation gap contributes zero, so the two sides agree
    up to quadrature error for the truncated operator.

    Returns ``(defect, tolerance)``.
    """
    Lf, tb = apply_L(p, part, f)
    lhs = integral(Lf * g)
    xs = grid(fine_m)[:-1]
    Tx, code = forward_map_array(p, part, xs)
    gT = np.where(code >= 0, g(np.nan_to_num(Tx)), 0.0)
    integrand = np.append(f(xs) * gT, 0.0)
    # value at x = 1 is the left limit: last piece of J maps onto [0, 1)
    integrand[-1] = f.values[-1] * g.values[-1]
    rhs = integral(GridFunction(integrand))
    sf, sg = sup_norm(f), sup_norm(g)
    pieces = len(branches(part)) + 1
    # a jump per branch boundary costs at most one cell of width 1/fine_m;
    # smooth parts of (L f) g on the coarse grid cost O(Lip / m^2)
    quad_tol = 2.0 * pieces * sf * sg / fine_m + (lip_norm(Lf) * lip_norm(g)) / f.m**2
    return abs(lhs - rhs), tb.sup_tail * sg + quad_tol


def verify_measure_preservation(
    p: MapParams,
    part: Partition,
    samples: int = 10_000,
    seed: int = 0,
    duality_trials: int = 2,
    duality_m: int = 2**14,
) -> LemmaReport:
    """Pointwise ``sum_b 1/T'(y) = 1`` (minus the analytic tail) and duality."""
    if samples < 100:
        raise ValueError("samples must be >= 100")
    rng = np.random.default_rng(seed)
    x = np.concatenate(([0.0, 1.0], rng.uniform(size=samples - 2)))
    tb = tail_bound(p)
    expected = 1.0 - tb.sup_tail
    dev = float(np.max(np.abs(_inverse_derivative_sum(p, part, x) - expected)))
    tol = 1e-12
    ratio = dev / tol

    defects = []
    fs = trial_functions(seed + 1, 2 * duality_trials, duality_m)
    for f, g in zip(fs[::2], fs[1::2]):
        d, t = duality_defect(p, part, f, g)
        defects.append((d, t))
    dual_ratio = max(d / t for d, t in defects) if defects else 0.0
    worst = max(ratio, dual_ratio)
    return LemmaReport(
        lemma_id=LemmaId.MEASURE_PRESERVATION,
        trials=samples,
        worst_ratio=worst,
        bound=tol,
        passed=worst <= 1.0,
        slack=0.0,
        params_used=_params_dict(p, duality_m, seed),
        details={
            "max_deviation": dev,
            "analytic_tail": tb.sup_tail,
            "duality": [{"defect": d, "tolerance": t} for d, t in defects],
        },
    )


# --------------------------------------------------------------------------
# bounded variation blow-up


def blowup_indicator(p, part, n: int, k: int, affine_j: int = 0) -> Indicator:
    """Indicator of ``v^{k-1}(v_n([0, 1]))`` with ``v`` the affine branch ``affine_j``."""
    v = part.branch(BranchKind.AFFINE, affine_j)
    b = part.branch(BranchKind.COS, n)
    lo, hi = b.image_left, b.image_right
    for _ in range(k - 1):
        lo, hi = float(eval_branch(p, part, v, lo)), float(eval_branch(p, part, v, hi))
    return Indicator(lo, hi)


def bv_blowup(p, part, n_list, k: int, affine_j: int = 0, grid_factor: int = 1000):
    """Variation of ``L^k chi_n`` for interval indicators ``chi_n`` (variation <= 2).

    Rows hold ``n, k, var_in, var_out, ratio, predicted``; ``var_in`` is the
    uniform bound 2 on the input variation and the prediction is
    ``8 a_n n^4 (|J|/N)^(k-1)``: the exact variation of
    ``a_n (2 + cos(4 pi n^4 x)) (|J|/N)^(k-1)`` over ``2 n^4`` periods.  The
    grid has ``grid_factor * n^4`` cells so every extremum is a node.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    rows = []
    for n in n_list:
        if not 1 <= n <= part.n_max:
            raise ValueError(f"n={n} outside [1, n_max={part.n_max}]")
        chi = blowup_indicator(p, part, n, k, affine_j)
        out, _ = apply_L_power(p, part, chi, k, m=grid_factor * n**4)
        # uniform bound Var(chi_n) <= 2; exact only when the interval avoids 0
        var_in = 2.0
        var_out = variation(out)
        rows.append(
            {
                "n": int(n),
                "k": int(k),
                "var_in": var_in,
                "var_out": var_out,
                "ratio": var_out / var_in,
                "predicted": 8.0 * float(p.a(n)) * n**4 * p.slope_J ** (k - 1),
            }
        )
    return rows


# --------------------------------------------------------------------------
# Lipschitz bounds


def lemma3_coefficient(p: MapParams, n: int) -> float:
    """``a_n (32 pi n^4 a_n + 8)``."""
    a = float(p.a(n))
    return a * (32.0 * math.pi * n**4 * a + 8.0)


def verify_lemma3(
    p, part, seed: int = 42, trials: int = 20, n_list=None, m: int = VERIFY_GRID, functions=None
) -> LemmaReport:
    """Check ``||L_n f||_Lip <= a_n (32 pi n^4 a_n + 8) ||f||_Lip`` and the two
    bounds behind it: ``||g1||_Lip <= 4 ||f||_Lip`` and
    ``Lip(g2) <= (16 pi n^4 a_n + 2) Lip(f)`` (with the matching sup bounds
    ``4 sup|f|`` and ``2 sup|f|``).
    """
    if trials < 20:
        raise ValueError("trials must be >= 20")
    n_list = list(range(1, part.n_max + 1)) if n_list is None else list(n_list)
    fs = trial_functions(seed, trials, m) if functions is None else functions

    def one(f):
        nf, lf, sf = lip_norm(f), lip_seminorm(f), sup_norm(f)
        worst = {"Ln": 0.0, "split1": 0.0, "split2": 0.0, "c0": 0.0, "consistency": 0.0}
        for n in n_list:
            a = float(p.a(n))
            Ln = apply_Ln(p, part, n, f)
            g1, g2 = apply_Ln_split(p, part, n, f)
            worst["Ln"] = max(worst["Ln"], lip_norm(Ln) / (lemma3_coefficient(p, n) * nf))
            worst["split1"] = max(worst["split1"], lip_norm(g1) / (4.0 * nf))
            worst["split2"] = max(
                worst["split2"], lip_seminorm(g2) / ((16.0 * math.pi * n**4 * a + 2.0) * lf)
            )
            worst["c0"] = max(
                worst["c0"], sup_norm(g1) / (4.0 * sf), sup_norm(g2) / (2.0 * sf)
            )
            gap = float(np.max(np.abs(a * (g1.values + 2.0 * g2.values) - Ln.values)))
            worst["consistency"] = max(worst["consistency"], gap)
        return worst

    results = _map(one, fs)
    merged = {key: max(r[key] for r in results) for key in results[0]}
    worst = max(merged["Ln"], merged["split1"], merged["split2"], merged["c0"])
    ok = worst <= 1.0 + LIP_SLACK and merged["consistency"] <= 1e-12
    return LemmaReport(
        lemma_id=LemmaId.LEMMA3_LN,
        trials=len(fs),
        worst_ratio=worst,
        bound=max(lemma3_coefficient(p, n) for n in n_list),
        passed=ok,
        slack=LIP_SLACK,
        params_used=_params_dict(p, m, seed),
        details={
            "n_list": n_list,
            "coefficients": {str(n): lemma3_coefficient(p, n) for n in n_list},
            "worst_by_check": merged,
        },
    )


def series_constant(c: float) -> float:
    """``32 pi c^2 zeta(2) + 8 c zeta(3)``: the per-pair coefficients summed over n."""
    return 32.0 * math.pi * c**2 * zeta_series(2) + 8.0 * c * zeta_series(3)


def largest_admissible_c(target: float = 0.5) -> float:
    """Positive root of ``series_constant(c) = target``."""
    qa = 32.0 * math.pi * zeta_series(2)
    qb = 8.0 * zeta_series(3)
    # stable form of (-qb + sqrt(qb^2 + 4 qa target)) / (2 qa)
    return 2.0 * target / (qb + math.sqrt(qb * qb + 4.0 * qa * target))


def verify_series_bound(
    p, part, seed: int = 42, trials: int = 20, m: int = VERIFY_GRID, functions=None
) -> LemmaReport:
    """``sum_n ||L_n f||_Lip <= ||f||_Lip / 2``: analytic constant and measured sums."""
    if trials < 20:
        raise ValueError("trials must be >= 20")
    fs = trial_functions(seed, trials, m) if functions is None else functions
    analytic = series_constant(p.c)
    lip_tail = tail_bound(p).lip_tail

    def one(f):
        nf = lip_norm(f)
        total = math.fsum(lip_norm(apply_Ln(p, part, n, f)) for n in range(1, part.n_max + 1))
        return total / ((0.5 + lip_tail) * nf)

    measured = max(_map(one, fs))
    worst = max(measured, analytic / 0.5)
    return LemmaReport(
        lemma_id=LemmaId.EQ_SERIES_BOUND,
        trials=len(fs),
        worst_ratio=worst,
        bound=0.5,
        passed=analytic <= 0.5 and measured <= 1.0 + LIP_SLACK,
        slack=LIP_SLACK,
        params_used=_params_dict(p, m, seed),
        details={
            "analytic_constant": analytic,
            "measured_worst_ratio": measured,
            "largest_admissible_c": largest_admissible_c(),
            "lip_tail": lip_tail,
        },
    )


def verify_lasota_yorke(
    p, part, seed: int = 42, trials: int = 20, m: int = VERIFY_GRID, functions=None
) -> LemmaReport:
    """``||L f||_Lip <= 3/4 ||f||_Lip + sup|f|`` plus the truncation tail."""
    if trials < 20:
        raise ValueError("trials must be >= 20")
    if p.N < 4:
        raise ValueError("the inequality needs N >= 4")
    fs = trial_functions(seed, trials, m) if functions is None else functions
    coeff = lasota_yorke_constant(p)

    def one(f):
        Lf, tb = apply_L(p, part, f)
        bound = 0.75 * lip_norm(f) + sup_norm(f) + tb.lip_tail
        return lip_norm(Lf) / bound

    measured = max(_map(one, fs))
    return LemmaReport(
        lemma_id=LemmaId.LEMMA4_LY,
        trials=len(fs),
        worst_ratio=measured,
        bound=0.75,
        passed=measured <= 1.0 + LIP_SLACK and coeff <= 0.75,
        slack=LIP_SLACK,
        params_used=_params_dict(p, m, seed),
        details={"analytic_coefficient": coeff, "j_len": p.j_len},
    )


# --------------------------------------------------------------------------
# orbits


@dataclass(frozen=True)
class OrbitStats:
    mean: float
    stderr: float
    steps: int
    gap_hits: int
    fraction_in_J: float
    stderr_J: float

    def __iter__(self):
        # unpacks as (mean, stderr)
        return iter((self.mean, self.stderr))

    def to_dict(self) -> dict:
        return asdict(self)


def _batch_means(values: np.ndarray, batches: int):
    size = values.size // batches
    if size == 0:
        return float(np.mean(values)), float("nan")
    means = values[: size * batches].reshape(batches, size).mean(axis=1)
    return float(np.mean(values)), float(np.std(means, ddof=1) / math.sqrt(batches))


def _orbit(p, part, x0: float, steps: int):
    lefts = part._lefts
    blist = part.branch_list
    s_last, s_inf = part.gap
    below_one = math.nextafter(1.0, 0.0)
    pts = np.empty(steps)
    y = x0
    for i in range(steps):
        pts[i] = y
        if s_last <= y < s_inf:
            return pts[:i], True
        b = blist[bisect.bisect_right(lefts, y) - 1]
        if b.kind is BranchKind.AFFINE:
            y = (y - b.image_left) / b.image_len
        else:
            y = _bisect_scalar(b, y)
        if y >= 1.0:
            y = below_one
    return pts, False


def orbit_statistics(p, part, x0: float, steps: int, f, batches: int = 100) -> OrbitStats:
    """Birkhoff average of ``f`` along the orbit of ``x0``.

    The standard error comes from ``batches`` batch means.  An orbit that
    enters the truncation gap stops there with a warning; the statistics
    cover the steps taken.

    Raises
    ------
    GapError
        If ``x0`` itself lies in the gap.
    """
    if steps < 1000:
        raise ValueError("steps must be >= 1000")
    if not 0.0 <= x0 < 1.0:
        raise ValueError("x0 must lie in [0, 1)")
    s_last, s_inf = part.gap
    if s_last <= x0 < s_inf:
        raise GapError(x0, part.gap)
    pts, hit = _orbit(p, part, float(x0), steps)
    if hit:
        warnings.warn(
            f"orbit entered the truncation gap after {pts.size} steps; raise n_max",
            RuntimeWarning,
            stacklevel=2,
        )
    mean, se = _batch_means(np.asarray(f(pts), dtype=np.float64), batches)
    fj, se_j = _batch_means((pts >= s_inf).astype(np.float64), batches)
    return OrbitStats(mean, se, int(pts.size), int(hit), fj, se_j)


def ensemble_gap_hits(p, part, starts, steps: int) -> int:
    """Number of orbits (one per start) that reach the truncation gap within ``steps``."""
    y = np.asarray(starts, dtype=np.float64)
    alive = np.ones(y.size, dtype=bool)
    below_one = math.nextafter(1.0, 0.0)
    for _ in range(steps):
        x, code = forward_map_array(p, part, y[alive])
        idx = np.flatnonzero(alive)
        dead = code < 0
        alive[idx[dead]] = False
        y[idx[~dead]] = np.minimum(x[~dead], below_one)
    return int(np.count_nonzero(~alive))


def mc_correlation(p, part, f, g, k_max: int, samples: int = 10**6, seed: int = 0):
    """Monte-Carlo ``Cov_k = E[(f - int f)(x) g(T^k x)]`` over uniform ``x``.

    Samples whose orbit enters the truncation gap are dropped from that lag on.
    Returns ``(cov, stderr, dropped)``.
    """
    rng = np.random.default_rng(seed)
    x = rng.uniform(size=samples)
    f0 = f(x) - integral(f)
    y = x.copy()
    alive = np.ones(samples, dtype=bool)
    below_one = math.nextafter(1.0, 0.0)
    cov = np.empty(k_max)
    err = np.empty(k_max)
    for k in range(k_max):
        idx = np.flatnonzero(alive)
        tx, code = forward_map_array(p, part, y[idx])
        dead = code < 0
        alive[idx[dead]] = False
        y[idx[~dead]] = np.minimum(tx[~dead], below_one)
        prod = f0[alive] * g(y[alive])
        cov[k] = prod.mean()
        err[k] = prod.std(ddof=1) / math.sqrt(prod.size)
    return cov, err, int(samples - np.count_nonzero(alive))
