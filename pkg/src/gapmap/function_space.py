"""Grid-sampled functions on [0, 1] and the norms used on them.

A :class:`GridFunction` stores ``f(i/m)`` for ``i = 0..m`` and is evaluated
between nodes by linear interpolation.  Its discrete Lipschitz constant and
variation are then *exact* for the interpolant, which is what lets the operator
inequalities be asserted rather than merely estimated.

:class:`Indicator` is the one exact (non-grid) observable: the transfer
operator can pull it back through branches without interpolation smearing its
jumps.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "GridFunction",
    "Indicator",
    "grid",
    "sample",
    "sup_norm",
    "lip_seminorm",
    "lip_norm",
    "variation",
    "integral",
    "random_lipschitz",
    "write_csv",
    "read_csv",
]


def grid(m: int) -> np.ndarray:
    """The nodes ``i/m``, ``i = 0..m``; the last node is exactly 1."""
    return np.arange(m + 1, dtype=np.float64) / m


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Real function on [0, 1] given by its values at ``m + 1`` uniform nodes."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.ndim != 1 or v.size < 2:
            raise ValueError("a grid function needs at least two values")
        if not np.all(np.isfinite(v)):
            raise ValueError("grid values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def m(self) -> int:
        return self.values.size - 1

    @property
    def x(self) -> np.ndarray:
        return grid(self.m)

    support = None

    def __call__(self, y):
        """Piecewise-linear interpolation; points are clipped to [0, 1]."""
        m = self.m
        y = np.clip(np.asarray(y, dtype=np.float64), 0.0, 1.0)
        t = y * m
        i = np.minimum(t.astype(np.int64), m - 1)
        frac = t - i
        v = self.values
        return v[i] + frac * (v[i + 1] - v[i])

    # continuous, so one-sided limits agree with the value
    left_limit = __call__

    @classmethod
    def from_callable(cls, fn, m: int) -> "GridFunction":
        return cls(fn(grid(m)))

    @classmethod
    def constant(cls, value: float, m: int) -> "GridFunction":
        return cls(np.full(m + 1, float(value)))

    def resample(self, m: int) -> "GridFunction":
        return GridFunction(self(grid(m)))

    def _coerce(self, other):
        if isinstance(other, GridFunction):
            if other.m != self.m:
                raise ValueError(f"grid mismatch: {self.m} vs {other.m}")
            return other.values
        return other

    def __add__(self, other):
        return GridFunction(self.values + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return GridFunction(self.values - self._coerce(other))

    def __rsub__(self, other):
        return GridFunction(self._coerce(other) - self.values)

    def __mul__(self, other):
        return GridFunction(self.values * self._coerce(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return GridFunction(self.values / self._coerce(other))

    def __neg__(self):
        return GridFunction(-self.values)

    def __repr__(self):
        return f"GridFunction(m={self.m}, sup={sup_norm(self):.6g})"


@dataclass(frozen=True)
class Indicator:
    """Exact indicator of the half-open interval ``[left, right)``."""

    left: float
    right: float

    def __post_init__(self):
        if not self.left < self.right:
            raise ValueError("empty interval")

    @property
    def support(self) -> tuple[float, float]:
        return self.left, self.right

    sup = 1.0

    def __call__(self, y):
        y = np.asarray(y, dtype=np.float64)
        return ((y >= self.left) & (y < self.right)).astype(np.float64)

    def left_limit(self, y):
        y = np.asarray(y, dtype=np.float64)
        return ((y > self.left) & (y <= self.right)).astype(np.float64)

    @property
    def total_variation(self) -> float:
        """Exact variation on [0, 1]: one jump at each endpoint inside (0, 1)."""
        return float(0.0 < self.left < 1.0) + float(0.0 < self.right < 1.0)

    def on_grid(self, m: int) -> GridFunction:
        return GridFunction(self(grid(m)))


def sample(f, m: int) -> GridFunction:
    """Sample any observable (grid function, indicator, callable) at ``i/m``."""
    if isinstance(f, GridFunction) and f.m == m:
        return f
    return GridFunction(np.asarray(f(grid(m)), dtype=np.float64))


def sup_norm(f: GridFunction) -> float:
    return float(np.max(np.abs(f.values)))


def lip_seminorm(f: GridFunction) -> float:
    """Largest slope between neighbouring nodes (the interpolant's Lip constant)."""
    return float(np.max(np.abs(np.diff(f.values)))) * f.m


def lip_norm(f: GridFunction) -> float:
    """``sup|f| + Lip(f)``."""
    return sup_norm(f) + lip_seminorm(f)


def variation(f: GridFunction) -> float:
    return math.fsum(np.abs(np.diff(f.values)))


def integral(f: GridFunction) -> float:
    """Composite trapezoid rule on the uniform grid."""
    v = f.values
    return (math.fsum(v[1:-1]) + 0.5 * (v[0] + v[-1])) / f.m


def random_lipschitz(seed: int, K: float, modes: int, m: int = 2**20) -> GridFunction:
    """Seeded random trigonometric polynomial rescaled to ``Lip = K``.

    Coefficients of ``1, cos 2 pi k x, sin 2 pi k x`` for ``k <= modes`` are
    standard normal draws from a PCG64 stream.  Evaluation goes through an
    inverse real FFT on the ``m`` periodic nodes.
    """
    if modes < 1:
        raise ValueError("modes must be >= 1")
    if not 2 * modes < m:
        raise ValueError("grid too coarse for the requested modes")
    rng = np.random.default_rng(seed)
    alpha = rng.standard_normal(modes + 1)
    beta = rng.standard_normal(modes + 1)
    coeffs = np.zeros(m // 2 + 1, dtype=np.complex128)
    coeffs[0] = alpha[0] * m
    coeffs[1 : modes + 1] = 0.5 * m * (alpha[1:] - 1j * beta[1:])
    periodic = np.fft.irfft(coeffs, n=m)
    values = np.append(periodic, periodic[0])
    lip = float(np.max(np.abs(np.diff(values)))) * m
    return GridFunction(values * (K / lip))


def write_csv(f: GridFunction, path) -> None:
    """Header ``x,value``; 17 significant digits so values round-trip."""
    m = f.m
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "value"])
        for i, v in enumerate(f.values):
            w.writerow([f"{i / m:.17g}", f"{v:.17g}"])


def read_csv(path) -> GridFunction:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return GridFunction(np.array([float(r["value"]) for r in rows]))
