"""Numerical checks of the spectral picture on Lipschitz functions.

The constant function is the fixed point of ``L``.  On the zero-mean subspace
the iterates of ``L`` should shrink geometrically in ``||.||_Lip``; the rate is
estimated by power iteration, and :func:`peripheral_check` looks for any
sustained oscillation that an eigenvalue on the unit circle would produce.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .function_space import GridFunction, integral, lip_norm, random_lipschitz, sup_norm
from .map_core import MapParams, Partition
from .transfer import TailBound, apply_L, tail_bound

__all__ = [
    "SpectralReport",
    "DegenerateIterateError",
    "power_iterate_gap",
    "correlation_decay",
    "peripheral_check",
    "decay_slope",
]

DEFAULT_SPECTRAL_GRID = 2**16
# below this the iterate is numerically zero: lambda_2 is effectively 0
UNDERFLOW = 1e-280


class DegenerateIterateError(ArithmeticError):
    """The zero-mean iterate vanished, so no decay rate can be read off."""


@dataclass(frozen=True)
class SpectralReport:
    lambda1: float
    lambda2_estimate: float
    iterations: int
    residual: float
    grid_m: int
    n_max: int
    tail: TailBound
    seed: int = 0
    modes: int = 8
    c0_ratio: float = float("nan")
    ratios: tuple = field(default=(), repr=False)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["tail"] = self.tail.to_dict()
        d["ratios"] = list(self.ratios)
        return d


def _center(f: GridFunction) -> GridFunction:
    return f - integral(f)


def _initial(seed, modes, m, f0):
    f = random_lipschitz(seed, 1.0, modes, m) if f0 is None else f0
    f = _center(f)
    nrm = lip_norm(f)
    if not nrm > UNDERFLOW:
        raise DegenerateIterateError("initial function is constant (zero after centering)")
    return f / nrm


def power_iterate_gap(
    p: MapParams,
    part: Partition,
    seed: int,
    iters: int,
    m: int = DEFAULT_SPECTRAL_GRID,
    modes: int = 8,
    f0: GridFunction | None = None,
) -> SpectralReport:
    """Estimate the modulus of the second eigenvalue of ``L`` on Lip.

    Each step applies ``L``, re-centres to zero mean (quadrature drift would
    otherwise feed the eigenvalue 1) and normalises in ``||.||_Lip``.  The
    estimate is the geometric mean of the last ``ceil(iters/2)`` norm ratios.
    """
    if iters < 10:
        raise ValueError("iters must be >= 10")
    if f0 is not None:
        m = f0.m
    u = _initial(seed, modes, m, f0)

    ratios, c0 = [], []
    for _ in range(iters):
        w, _ = apply_L(p, part, u)
        w = _center(w)
        r = lip_norm(w)
        if not r > UNDERFLOW:
            raise DegenerateIterateError("iterate underflowed: second eigenvalue is ~0")
        ratios.append(r)
        c0.append(sup_norm(w) / sup_norm(u))
        u = w / r

    h = math.ceil(iters / 2)
    lam2 = math.exp(math.fsum(np.log(ratios[-h:])) / h)
    lu = _center(apply_L(p, part, u)[0])
    residual = min(lip_norm(lu - lam2 * u), lip_norm(lu + lam2 * u)) / lip_norm(u)
    one, _ = apply_L(p, part, GridFunction.constant(1.0, m))

    return SpectralReport(
        lambda1=sup_norm(one),
        lambda2_estimate=lam2,
        iterations=iters,
        residual=residual,
        grid_m=m,
        n_max=p.n_max,
        tail=tail_bound(p),
        seed=seed,
        modes=modes,
        c0_ratio=math.exp(math.fsum(np.log(c0[-h:])) / h),
        ratios=tuple(ratios),
    )


def correlation_decay(p: MapParams, part: Partition, f: GridFunction, g: GridFunction, k_max: int):
    """``Cov_k = int (L^k f) g - int f int g`` for ``k = 1..k_max``.

    Computed as ``int (L^k f0) g0`` with both functions centred, which is the
    same number for the exact operator (``int L h = int h``) and keeps the
    truncation loss of mass out of the covariance.
    """
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    g0 = _center(g.resample(f.m) if g.m != f.m else g)
    u = _center(f)
    out = np.empty(k_max)
    for k in range(k_max):
        u = _center(apply_L(p, part, u)[0])
        out[k] = integral(u * g0)
    return out


def decay_slope(cov) -> float:
    """Least-squares slope of ``log|Cov_k|`` against ``k``."""
    cov = np.asarray(cov, dtype=np.float64)
    k = np.arange(1, cov.size + 1)
    return float(np.polyfit(k, np.log(np.abs(cov)), 1)[0])


def peripheral_check(
    p: MapParams,
    part: Partition,
    report: SpectralReport,
    angles: int = 16,
    f0: GridFunction | None = None,
    step=None,
    window: int = 10,
) -> bool:
    """True when zero-mean iterates show no eigenvalue on the unit circle.

    Two conditions over ``report.iterations`` steps from a zero-mean start:

    * the last ``window`` norm ratios stay below ``r = lambda2_estimate + 0.05``;
    * for each angle ``theta = 2 pi j / angles`` the Cesaro mean of
      ``e^{-i k theta} L^k f`` over the last ``window`` steps is at most half the
      iterate size.  An eigenvalue ``e^{i theta}`` would keep that mean at full
      size; decaying iterates make it ``O(r / window)``.

    ``step`` replaces ``L`` (used to calibrate the detector).
    """
    if angles < 8:
        raise ValueError("angles must be >= 8")
    iters = report.iterations
    if iters < window + 1:
        raise ValueError("report has too few iterations for the window")
    if step is None:
        def step(u):
            return _center(apply_L(p, part, u)[0])

    m = report.grid_m if f0 is None else f0.m
    u = _initial(report.seed, report.modes, m, f0)
    theta = 2.0 * np.pi * np.arange(angles) / angles
    r = report.lambda2_estimate + 0.05

    # u_k is kept normalised; log_scale[k] = log ||L^k f||_Lip
    log_scale = [0.0]
    start = iters - window
    acc_re = acc_im = None
    for k in range(1, iters + 1):
        w = step(u)
        nrm = lip_norm(w)
        if not nrm > UNDERFLOW:
            return True  # iterates vanished outright
        log_scale.append(log_scale[-1] + math.log(nrm))
        u = w / nrm
        if k == start:
            acc_re = np.zeros((angles, m + 1))
            acc_im = np.zeros((angles, m + 1))
        if k > start:
            weight = math.exp(log_scale[k] - log_scale[start])
            acc_re += weight * np.cos(k * theta)[:, None] * u.values
            acc_im -= weight * np.sin(k * theta)[:, None] * u.values

    ratios = np.exp(np.diff(log_scale))[-window:]
    decaying = bool(np.all(ratios <= r)) and r < 1.0

    mass = []
    for j in range(angles):
        re = GridFunction(acc_re[j] / window)
        im = GridFunction(acc_im[j] / window)
        mass.append(max(lip_norm(re), lip_norm(im)))
    no_resonance = max(mass) <= 0.5
    return decaying and no_resonance
