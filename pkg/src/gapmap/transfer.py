"""Transfer operator of the map and its pieces.

``L f(x) = sum_b b'(x) f(b(x))`` over inverse branches ``b``.  The sum splits
as ``L = sum_n L_n + M`` where ``L_n`` collects the cosine/sine pair of
``I_n`` and ``M`` the ``N`` affine branches on ``J``.  Pairs with
``n > n_max`` are dropped and the resulting error is returned as a
:class:`TailBound` instead of being folded into the values.

Observables other than :class:`~gapmap.function_space.GridFunction` (such as
:class:`~gapmap.function_space.Indicator`) are pulled back exactly.  At the
node ``x = 1``, which lies outside ``[0, 1)``, the continuous extension from
the left is used, i.e. ``f`` is read through its left limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .function_space import GridFunction, grid, lip_norm, sup_norm
from .map_core import (
    Branch,
    BranchKind,
    MapParams,
    Partition,
    branches,
    invert_branch,
    power_tail,
)

__all__ = [
    "TailBound",
    "tail_bound",
    "apply_Ln",
    "apply_Ln_split",
    "apply_M",
    "apply_L",
    "apply_L_power",
    "PulledBack",
    "lasota_yorke_constant",
]

# constant of Lip(L g) <= (3/4) ||g||_Lip + ||g||_C0 <= (7/4) ||g||_Lip
LY_LIP_GROWTH = 1.75


@dataclass(frozen=True)
class TailBound:
    """Error committed by dropping the pairs ``n > n_max``.

    ``sup_tail`` bounds the sup-norm error, ``lip_tail`` the Lipschitz-norm
    error.  From :func:`tail_bound` these are per unit norm of the input;
    operator applications return them scaled by the input's norms.
    """

    sup_tail: float
    lip_tail: float

    def scaled(self, sup: float, lip: float) -> "TailBound":
        return TailBound(self.sup_tail * sup, self.lip_tail * lip)

    def to_dict(self) -> dict:
        return {"sup_tail": self.sup_tail, "lip_tail": self.lip_tail}


def tail_bound(p: MapParams) -> TailBound:
    """``sup_tail = 4c sum_{n>n_max} n^-3`` and
    ``lip_tail = sum_{n>n_max} a_n (32 pi n^4 a_n + 8)``.
    """
    t2 = power_tail(2, p.n_max)
    t3 = power_tail(3, p.n_max)
    return TailBound(
        sup_tail=4.0 * p.c * t3,
        lip_tail=32.0 * math.pi * p.c**2 * t2 + 8.0 * p.c * t3,
    )


def lasota_yorke_constant(p: MapParams) -> float:
    """``1/2 + |J|^2 / N``: contraction factor of the Lipschitz part."""
    return 0.5 + p.j_len**2 / p.N


def _overlaps(b: Branch, support) -> bool:
    if support is None:
        return True
    lo, hi = support
    return b.image_left < hi and lo < b.image_right


def _pair_geometry(p, part, n, x):
    # images and derivatives of v_n, w_n at x, sharing one sin/cos evaluation
    v, w = part.branch(BranchKind.COS, n), part.branch(BranchKind.SIN, n)
    phase = 2.0 * np.pi * np.mod(2.0 * float(n) ** 4 * x, 1.0)
    s, c = np.sin(phase), np.cos(phase)
    wobble = s / (8.0 * np.pi * float(n) ** 4)
    a_n = p.a(n)
    yv = v.image_left + v.image_len * (x + wobble)
    yw = w.image_left + w.image_len * (x - wobble)
    return (yv, a_n * (2.0 + c)), (yw, a_n * (2.0 - c))


def _read(f, y, at_end, left):
    if left:
        return f.left_limit(y)
    vals = np.asarray(f(y), dtype=np.float64)
    if at_end is not None and not isinstance(f, GridFunction):
        vals = vals.copy()
        vals[at_end] = f.left_limit(y[at_end])
    return vals


def _transfer(p, part, f, x, selected, left=False):
    # sum over the given branches of b'(x) f(b(x)); fixed order for reproducibility
    x = np.asarray(x, dtype=np.float64)
    at_end = None if left else (x == 1.0)
    if at_end is not None and not at_end.any():
        at_end = None
    out = np.zeros_like(x)
    support = getattr(f, "support", None)
    geometry = {}
    for b in selected:
        if not _overlaps(b, support):
            continue
        if b.kind is BranchKind.AFFINE:
            y, d = b.image_left + b.image_len * x, p.slope_J
        else:
            if b.index not in geometry:
                geometry[b.index] = _pair_geometry(p, part, b.index, x)
            y, d = geometry[b.index][b.kind is BranchKind.SIN]
        out += d * _read(f, y, at_end, left)
    return out


def _grid_m(f, m):
    if m is not None:
        return int(m)
    if isinstance(f, GridFunction):
        return f.m
    raise ValueError("m is required when f is not a GridFunction")


def _pair(part: Partition, n: int):
    if not 1 <= n <= part.n_max:
        raise ValueError(f"n={n} outside [1, n_max={part.n_max}]")
    return part.branch(BranchKind.COS, n), part.branch(BranchKind.SIN, n)


def apply_Ln(p: MapParams, part: Partition, n: int, f, m: int | None = None) -> GridFunction:
    """``L_n f(x) = v_n'(x) f(v_n x) + w_n'(x) f(w_n x)`` on the grid."""
    m = _grid_m(f, m)
    return GridFunction(_transfer(p, part, f, grid(m), _pair(part, n)))


def apply_Ln_split(p: MapParams, part: Partition, n: int, f, m: int | None = None):
    """The decomposition ``L_n f / a_n = g1 + 2 g2`` with

    ``g1(x) = f(v_n x) + 3 f(w_n x)`` and
    ``g2(x) = cos^2(2 pi n^4 x) (f(v_n x) - f(w_n x))``.
    """
    m = _grid_m(f, m)
    x = grid(m)
    _pair(part, n)
    at_end = x == 1.0
    (yv, dv), (yw, _) = _pair_geometry(p, part, n, x)
    fv = _read(f, yv, at_end, False)
    fw = _read(f, yw, at_end, False)
    # v_n' = a_n (1 + 2 cos^2(2 pi n^4 x))
    cos2 = 0.5 * (dv / p.a(n) - 1.0)
    return GridFunction(fv + 3.0 * fw), GridFunction(cos2 * (fv - fw))


def apply_M(p: MapParams, part: Partition, f, m: int | None = None) -> GridFunction:
    """Affine part: ``(|J|/N) sum_j f(s_inf + (j + x)|J|/N)``."""
    m = _grid_m(f, m)
    affine = branches(part)[2 * part.n_max :]
    return GridFunction(_transfer(p, part, f, grid(m), affine))


def _norms(f):
    if isinstance(f, GridFunction):
        return sup_norm(f), lip_norm(f)
    sup = float(getattr(f, "sup", math.inf))
    return sup, math.inf


def apply_L(p: MapParams, part: Partition, f, m: int | None = None):
    """Truncated transfer operator ``sum_{n<=n_max} L_n f + M f``.

    Returns
    -------
    (GridFunction, TailBound)
        The tail bound is scaled by ``sup|f|`` and ``||f||_Lip``.
    """
    m = _grid_m(f, m)
    values = _transfer(p, part, f, grid(m), branches(part))
    sup, lip = _norms(f)
    return GridFunction(values), tail_bound(p).scaled(sup, lip)


class PulledBack:
    """Lazy exact ``L f`` for an exact observable ``f``.

    Evaluates ``sum_b b'(x) f(b(x))`` at arbitrary points, skipping branches
    whose image misses the support of ``f``.  Chains of these stay exact, which
    a grid representation of a discontinuous function cannot.
    """

    def __init__(self, p: MapParams, part: Partition, f):
        self.p, self.part, self.f = p, part, f
        inner = getattr(f, "support", None)
        self.branches = tuple(b for b in branches(part) if _overlaps(b, inner))
        self.sup = float(getattr(f, "sup", math.inf))
        self.support = self._preimage_hull(inner)

    def _preimage_hull(self, inner):
        if inner is None:
            return None
        if not self.branches:
            return (0.0, 0.0)
        lo, hi = inner
        ends = []
        for b in self.branches:
            ends.append(invert_branch(self.p, self.part, b, max(lo, b.image_left)))
            ends.append(invert_branch(self.p, self.part, b, min(hi, b.image_right)))
        return float(min(ends)), float(max(ends))

    def __call__(self, x):
        return _transfer(self.p, self.part, self.f, x, self.branches)

    def left_limit(self, x):
        return _transfer(self.p, self.part, self.f, x, self.branches, left=True)


def apply_L_power(p: MapParams, part: Partition, f, k: int, m: int | None = None):
    """``L^k f`` with accumulated truncation error.

    Grid functions are iterated on their grid.  Exact observables are
    composed lazily through ``k - 1`` applications and sampled once at the end.
    The sup tail adds up to ``k * sup_tail * sup|f|`` because ``||L||_{C0} <= 1``;
    the Lipschitz tail of step ``j`` is propagated through the remaining steps
    with growth ``7/4`` from the Lasota-Yorke bound.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    m = _grid_m(f, m)
    unit = tail_bound(p)
    if not isinstance(f, GridFunction):
        g = f
        for _ in range(k - 1):
            g = PulledBack(p, part, g)
        out, _ = apply_L(p, part, g, m)
        sup, _ = _norms(f)
        return out, TailBound(k * unit.sup_tail * sup, math.inf)

    sup0 = sup_norm(f)
    lip_err = 0.0
    g = f
    for _ in range(k):
        lip_err = LY_LIP_GROWTH * lip_err + unit.lip_tail * lip_norm(g)
        g, _ = apply_L(p, part, g)
    return g, TailBound(k * unit.sup_tail * sup0, lip_err)
