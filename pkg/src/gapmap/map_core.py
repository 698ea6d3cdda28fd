"""Geometry of the expanding interval map.

The map ``T`` on ``[0, 1)`` is built from a sequence ``a_n = c / n**3`` and an
integer ``N``.  The interval ``I_n = [s_{n-1}, s_n)`` with ``s_n = 4 sum_{k<=n} a_k``
is split into two halves of length ``2 a_n``; each half is the image of a full
inverse branch with derivative

    v_n'(x) = a_n (2 + cos(4 pi n^4 x))      (cosine branch, left half)
    w_n'(x) = a_n (2 - cos(4 pi n^4 x))      (sine branch, right half)

The tail interval ``J = [s_inf, 1)`` is cut into ``N`` equal pieces, each sent
affinely onto ``[0, 1)``.  Branches with ``n > n_max`` are dropped; the
uncovered set ``[s_{n_max}, s_inf)`` is the truncation gap.
"""

from __future__ import annotations

import bisect
import enum
import functools
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "BranchKind",
    "Branch",
    "MapParams",
    "Partition",
    "GapError",
    "ParameterError",
    "zeta_series",
    "power_tail",
    "make_params",
    "make_partition",
    "branches",
    "eval_branch",
    "eval_branch_deriv",
    "invert_branch",
    "forward_map",
    "forward_map_array",
]

ZETA_TERMS = 10**6
BISECTION_STEPS = 60


class ParameterError(ValueError):
    """Raised when map parameters violate the construction's hypotheses."""


class GapError(ValueError):
    """A point fell in the truncation gap ``[s_{n_max}, s_inf)``.

    The caller must raise ``n_max`` to resolve points there.
    """

    def __init__(self, y, gap, count=1):
        self.y = y
        self.gap = gap
        self.count = count
        super().__init__(
            f"y={y!r} lies in the truncation gap [{gap[0]!r}, {gap[1]!r}); raise n_max"
        )


@functools.lru_cache(maxsize=None)
def zeta_series(p: int, terms: int = ZETA_TERMS) -> float:
    """Riemann zeta at integer ``p >= 2`` from a partial sum plus tail bracket.

    The tail ``sum_{k>M} k**-p`` lies in
    ``[1/((p-1)(M+1)**(p-1)), 1/((p-1) M**(p-1))]``; the midpoint is used, which
    leaves an error below ``1e-18`` for ``M = 10**6`` and ``p = 3``.
    """
    if p < 2:
        raise ValueError("series diverges for p < 2")
    k = np.arange(terms, 0, -1, dtype=np.float64)
    partial = math.fsum(k**-p)
    lo = 1.0 / ((p - 1) * (terms + 1) ** (p - 1))
    hi = 1.0 / ((p - 1) * terms ** (p - 1))
    return partial + 0.5 * (lo + hi)


def power_tail(p: int, n_max: int) -> float:
    """``sum_{n > n_max} n**-p``, computed as zeta minus the head."""
    head = math.fsum(float(n) ** -p for n in range(1, n_max + 1))
    return zeta_series(p) - head


@dataclass(frozen=True)
class MapParams:
    """Construction parameters: ``a_n = c/n**3``, ``N`` affine branches on J.

    ``n_max`` truncates every infinite sum over branch pairs.
    """

    c: float
    N: int
    n_max: int
    zeta3: float

    def __post_init__(self):
        if not (self.c > 0 and math.isfinite(self.c)):
            raise ParameterError(f"c must be positive and finite, got {self.c!r}")
        if self.N < 4:
            raise ParameterError(
                f"N={self.N} < 4: the Lasota-Yorke inequality needs N >= 4"
            )
        if self.n_max < 1:
            raise ParameterError(f"n_max must be >= 1, got {self.n_max}")
        if self.c * self.zeta3 >= 0.25:
            raise ParameterError(
                f"sum a_n = c*zeta(3) = {self.c * self.zeta3:.10g} must be < 1/4 "
                f"(need c < {1.0 / (4.0 * self.zeta3):.10g})"
            )

    def a(self, n):
        """``a_n = c / n**3`` for scalar or array ``n``."""
        return self.c / np.power(n, 3, dtype=np.float64)

    @property
    def s_inf(self) -> float:
        return 4.0 * self.c * self.zeta3

    @property
    def j_len(self) -> float:
        return 1.0 - self.s_inf

    @property
    def slope_J(self) -> float:
        return self.j_len / self.N


def make_params(c: float = 0.01, N: int = 4, n_max: int = 8) -> MapParams:
    """Validated parameters; the defaults are ``a_n = 1/(100 n^3)``, ``N = 4``."""
    if isinstance(N, bool) or int(N) != N:
        raise ParameterError(f"N must be an integer, got {N!r}")
    if isinstance(n_max, bool) or int(n_max) != n_max:
        raise ParameterError(f"n_max must be an integer, got {n_max!r}")
    return MapParams(c=float(c), N=int(N), n_max=int(n_max), zeta3=zeta_series(3))


class BranchKind(enum.Enum):
    COS = "cos"
    SIN = "sin"
    AFFINE = "affine"


@dataclass(frozen=True)
class Branch:
    """One inverse branch of ``T``.

    ``index`` is ``n`` (1-based) for the cosine/sine branches and ``j``
    (0-based) for affine ones.  The image is ``[image_left, image_right)``.
    """

    kind: BranchKind
    index: int
    image_left: float
    image_right: float

    @property
    def image_len(self) -> float:
        return self.image_right - self.image_left

    def __str__(self):
        name = {"cos": "Cos", "sin": "Sin", "affine": "Affine"}[self.kind.value]
        return f"{name}({self.index})"


@dataclass(frozen=True)
class Partition:
    """Precomputed endpoints of the Markov partition.

    ``s[n] = 4 * sum_{k<=n} a_k`` for ``0 <= n <= n_max`` and ``mid[n-1]`` is
    the boundary between the cosine and sine halves of ``I_n``.
    """

    s: np.ndarray
    mid: np.ndarray
    s_inf: float
    j_len: float
    slope_J: float
    affine_edges: np.ndarray
    branch_list: tuple = field(repr=False)
    _lefts: tuple = field(repr=False)

    @property
    def n_max(self) -> int:
        return len(self.s) - 1

    @property
    def gap(self) -> tuple[float, float]:
        return float(self.s[-1]), self.s_inf

    def branch(self, kind: BranchKind, index: int) -> Branch:
        n_max = self.n_max
        if kind is BranchKind.AFFINE:
            if not 0 <= index < len(self.affine_edges) - 1:
                raise IndexError(f"affine branch {index} out of range")
            return self.branch_list[2 * n_max + index]
        if not 1 <= index <= n_max:
            raise IndexError(f"branch index {index} outside [1, {n_max}]")
        return self.branch_list[2 * (index - 1) + (kind is BranchKind.SIN)]


def make_partition(p: MapParams) -> Partition:
    n = np.arange(1, p.n_max + 1, dtype=np.float64)
    a = p.c / n**3
    s = np.concatenate(([0.0], np.cumsum(4.0 * a)))
    mid = s[:-1] + 2.0 * a
    s_inf = p.s_inf
    if not s[-1] < s_inf:
        raise ParameterError("partial sums reached s_inf; n_max too large for float64")
    j_len = 1.0 - s_inf
    slope = j_len / p.N
    edges = np.array([s_inf + j * slope for j in range(p.N)] + [1.0])
    for arr in (s, mid, edges):
        arr.setflags(write=False)

    blist = []
    for k in range(p.n_max):
        blist.append(Branch(BranchKind.COS, k + 1, float(s[k]), float(mid[k])))
        blist.append(Branch(BranchKind.SIN, k + 1, float(mid[k]), float(s[k + 1])))
    for j in range(p.N):
        blist.append(Branch(BranchKind.AFFINE, j, float(edges[j]), float(edges[j + 1])))
    lefts = tuple(b.image_left for b in blist)
    return Partition(s, mid, s_inf, j_len, slope, edges, tuple(blist), lefts)


def branches(part: Partition):
    """All inverse branches in the fixed summation order Cos(1), Sin(1), ..., Affine(N-1)."""
    return part.branch_list


def _phase(n: int, x):
    # (2 n^4 x) mod 1, so that 4 pi n^4 x == 2 pi * phase (mod 2 pi) without
    # losing the argument's low bits; phase(1) == 0 exactly.
    return np.mod(2.0 * float(n) ** 4 * np.asarray(x, dtype=np.float64), 1.0)


def eval_branch(p: MapParams, part: Partition, b: Branch, x):
    """Value of the inverse branch ``b`` at ``x`` in ``[0, 1]`` (scalar or array).

    Cosine branch: ``s_{n-1} + a_n (2x + sin(4 pi n^4 x)/(4 pi n^4))``; the sine
    branch flips the sign of the oscillating term and starts at the midpoint;
    affine branches are linear.  Written as ``left + len * phi(x)`` so that the
    endpoints ``x = 0, 1`` land exactly on the partition points.
    """
    x = np.asarray(x, dtype=np.float64)
    if b.kind is BranchKind.AFFINE:
        out = b.image_left + b.image_len * x
    else:
        n = b.index
        wobble = np.sin(2.0 * np.pi * _phase(n, x)) / (8.0 * np.pi * float(n) ** 4)
        if b.kind is BranchKind.SIN:
            wobble = -wobble
        out = b.image_left + b.image_len * (x + wobble)
    return out[()] if out.ndim == 0 else out


def eval_branch_deriv(p: MapParams, b: Branch, x):
    """Derivative of the inverse branch; lies in ``[a_n, 3 a_n]`` for the pairs."""
    x = np.asarray(x, dtype=np.float64)
    if b.kind is BranchKind.AFFINE:
        out = np.full_like(x, p.slope_J)
    else:
        a_n = p.c / float(b.index) ** 3
        osc = np.cos(2.0 * np.pi * _phase(b.index, x))
        out = a_n * (2.0 + osc) if b.kind is BranchKind.COS else a_n * (2.0 - osc)
    return out[()] if out.ndim == 0 else out


def invert_branch(p: MapParams, part: Partition, b: Branch, y):
    """Solve ``eval_branch(b, x) = y`` for ``x`` in ``[0, 1]``.

    Affine branches are inverted in closed form.  The oscillating branches use
    60 bisection steps: their derivative is bounded below by ``a_n > 0`` so the
    branch is strictly increasing, while Newton steps can be thrown across the
    ``4 pi n^4`` oscillations.
    """
    y = np.asarray(y, dtype=np.float64)
    if b.kind is BranchKind.AFFINE:
        x = np.clip((y - b.image_left) / b.image_len, 0.0, 1.0)
        return x[()] if x.ndim == 0 else x
    lo = np.zeros_like(y)
    hi = np.ones_like(y)
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        below = eval_branch(p, part, b, mid) <= y
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    # pick whichever bracket end reproduces y more closely
    x = np.where(
        np.abs(eval_branch(p, part, b, lo) - y) <= np.abs(eval_branch(p, part, b, hi) - y),
        lo,
        hi,
    )
    return x[()] if x.ndim == 0 else x


def forward_map(p: MapParams, part: Partition, y: float) -> tuple[float, Branch]:
    """``T(y)`` together with the inverse branch whose image contains ``y``.

    Raises
    ------
    GapError
        If ``y`` lies in ``[s_{n_max}, s_inf)``.
    ValueError
        If ``y`` is outside ``[0, 1)``.
    """
    y = float(y)
    if not 0.0 <= y < 1.0:
        raise ValueError(f"y={y!r} outside [0, 1)")
    s_last, s_inf = part.gap
    if s_last <= y < s_inf:
        raise GapError(y, part.gap)
    k = bisect.bisect_right(part._lefts, y) - 1
    b = part.branch_list[k]
    if b.kind is BranchKind.AFFINE:
        return (y - b.image_left) / b.image_len, b
    return float(_bisect_scalar(b, y)), b


def _bisect_scalar(b: Branch, y: float) -> float:
    # scalar twin of invert_branch for orbit loops (avoids numpy call overhead)
    n4 = float(b.index) ** 4
    two_n4 = 2.0 * n4
    scale = 1.0 / (8.0 * math.pi * n4)
    if b.kind is BranchKind.SIN:
        scale = -scale
    left, length = b.image_left, b.image_len
    twopi = 2.0 * math.pi
    lo, hi = 0.0, 1.0
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        val = left + length * (mid + scale * math.sin(twopi * ((two_n4 * mid) % 1.0)))
        if val <= y:
            lo = mid
        else:
            hi = mid
    return lo


def forward_map_array(p: MapParams, part: Partition, y):
    """Vectorised ``forward_map``.

    Returns ``(x, code)`` where ``code[i]`` indexes ``branches(part)`` and is
    ``-1`` for points in the truncation gap (their ``x`` is NaN).
    """
    y = np.asarray(y, dtype=np.float64)
    if np.any((y < 0.0) | (y >= 1.0)):
        raise ValueError("forward_map_array expects points in [0, 1)")
    lefts = np.asarray(part._lefts)
    code = np.searchsorted(lefts, y, side="right") - 1
    s_last, s_inf = part.gap
    code[(y >= s_last) & (y < s_inf)] = -1
    x = np.full_like(y, np.nan)
    for k in np.unique(code):
        if k < 0:
            continue
        sel = code == k
        x[sel] = invert_branch(p, part, part.branch_list[k], y[sel])
    return x, code
