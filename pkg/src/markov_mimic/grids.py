"""Uniform grids on [0,1], piecewise-linear sampled functions and cell partitions.

Everything downstream is built on a uniform grid with M subintervals.  All
distinguished points (partition representatives, ramp kinks) are snapped to
grid points so that piecewise-linear evaluation, sup norms and endpoint
values are exact.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import GridMismatchError, MarkovMimicError


@dataclass(frozen=True)
class Grid:
    """Uniform grid 0, 1/M, ..., 1 on the unit interval."""

    m: int

    def __post_init__(self):
        if self.m < 2:
            raise MarkovMimicError(f"grid needs at least 2 subintervals, got M={self.m}")

    @property
    def size(self) -> int:
        return self.m + 1

    @property
    def points(self) -> np.ndarray:
        return np.arange(self.m + 1) / self.m

    def point(self, i: int) -> Fraction:
        return Fraction(i, self.m)

    def snap(self, x) -> Fraction:
        """Nearest grid point to x, as an exact fraction."""
        if isinstance(x, Fraction):
            i = round(x * self.m)
        else:
            i = int(round(float(x) * self.m))
        i = min(max(i, 0), self.m)
        return Fraction(i, self.m)

    def index_of(self, x) -> int:
        """Index of a grid point; raises if x is not on the grid."""
        i = int(round(float(x) * self.m))
        if not (0 <= i <= self.m) or abs(float(x) - i / self.m) > 1e-12:
            raise MarkovMimicError(f"{x} is not a grid point of M={self.m}")
        return i


class SampledFunction:
    """A continuous function on [0,1] stored by its values on a uniform grid.

    Between grid points the function is the linear interpolant, so members of
    this class are exactly the piecewise-linear functions with kinks on the
    grid.  The sup norm is the max of |values|, exactly.
    """

    __slots__ = ("grid", "values")

    def __init__(self, grid: Grid, values):
        values = np.asarray(values, dtype=float)
        if values.shape != (grid.size,):
            raise MarkovMimicError(
                f"expected {grid.size} values for M={grid.m}, got shape {values.shape}"
            )
        self.grid = grid
        self.values = values

    @classmethod
    def from_callable(cls, grid: Grid, fn: Callable[[float], float]) -> "SampledFunction":
        return cls(grid, [float(fn(x)) for x in grid.points])

    @classmethod
    def constant(cls, grid: Grid, c: float) -> "SampledFunction":
        return cls(grid, np.full(grid.size, float(c)))

    def __call__(self, x):
        return np.interp(x, self.grid.points, self.values)

    def value_at_index(self, i: int) -> float:
        return float(self.values[i])

    @property
    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def __add__(self, other):
        if isinstance(other, SampledFunction):
            self._check_grid(other)
            return SampledFunction(self.grid, self.values + other.values)
        return SampledFunction(self.grid, self.values + float(other))

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, SampledFunction):
            self._check_grid(other)
            return SampledFunction(self.grid, self.values - other.values)
        return SampledFunction(self.grid, self.values - float(other))

    def __mul__(self, scalar):
        return SampledFunction(self.grid, self.values * float(scalar))

    __rmul__ = __mul__

    def _check_grid(self, other: "SampledFunction"):
        if self.grid.m != other.grid.m:
            raise GridMismatchError(
                f"grids differ: M={self.grid.m} vs M={other.grid.m}"
            )

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            for x, v in zip(self.grid.points, self.values):
                writer.writerow([f"{x:.12g}", f"{v:.12g}"])

    @classmethod
    def from_csv(cls, path) -> "SampledFunction":
        rows = []
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row:
                    continue
                rows.append(float(row[1]))
        if len(rows) < 3:
            raise MarkovMimicError(f"{path}: need at least 3 rows for a grid function")
        return cls(Grid(len(rows) - 1), rows)

    def __repr__(self):
        return f"SampledFunction(M={self.grid.m}, sup={self.sup_norm:.4g})"


def sup_distance(f: SampledFunction, g: SampledFunction) -> float:
    """Sup-norm distance between two functions on the same grid."""
    f._check_grid(g)
    return float(np.max(np.abs(f.values - g.values)))


def modulus_delta(functions: Sequence[SampledFunction], eps_prime: float) -> Fraction:
    """Largest radius j/M such that all pairs closer than j/M oscillate below eps_prime.

    Always returns at least 1/M: pairs strictly closer than one grid step
    coincide, so the floor is trivially valid and callers must judge whether
    the returned radius is fine enough for their budget.
    """
    if eps_prime <= 0:
        raise MarkovMimicError("oscillation tolerance must be positive")
    functions = list(functions)
    if not functions:
        raise MarkovMimicError("need at least one function")
    m = functions[0].grid.m
    vals = np.stack([f.values for f in functions])
    # osc[lag] = max |f(x) - f(x')| over pairs exactly lag grid steps apart
    best = m
    for lag in range(1, m + 1):
        osc = float(np.max(np.abs(vals[:, lag:] - vals[:, :-lag])))
        if osc >= eps_prime:
            best = lag  # pairs < (lag+1)/M apart include this offending pair... see below
            break
    else:
        return Fraction(1)
    # pairs with |x - x'| < j/M are at most (j-1)/M apart; the first bad lag
    # found above caps j at that lag.
    return Fraction(max(best, 1), m)


def dense_points(delta0, grid: Grid) -> list[Fraction]:
    """Uniformly spaced grid points 0 = x_1 < ... < x_n = 1 with spacing <= delta0."""
    d0 = Fraction(delta0) if not isinstance(delta0, Fraction) else delta0
    if d0 < Fraction(1, grid.m):
        raise MarkovMimicError(f"radius {d0} below grid resolution 1/{grid.m}")
    if d0 > 1:
        d0 = Fraction(1)
    n = math.ceil(1 / d0) + 1
    while True:
        pts = sorted({grid.snap(Fraction(i, n - 1)) for i in range(n)})
        if pts[0] == 0 and pts[-1] == 1 and len(pts) >= 2:
            gaps = [b - a for a, b in zip(pts, pts[1:])]
            if max(gaps) <= d0:
                return pts
        n += 1


@dataclass(frozen=True)
class CellPartition:
    """Partition of the grid into n connected cells around representative points.

    cell_of[i] gives the cell index (0-based) of grid point i.  Cells are the
    Voronoi regions of the representatives; a grid point equidistant to two
    representatives goes to the cell on its right, matching half-open cells
    [mid_{i-1}, mid_i).
    """

    grid: Grid
    representatives: tuple[Fraction, ...]
    cell_of: np.ndarray = field(repr=False)
    radius: Fraction

    @property
    def n_cells(self) -> int:
        return len(self.representatives)

    def cell_indices(self, c: int) -> np.ndarray:
        return np.nonzero(self.cell_of == c)[0]

    def validate(self):
        n = self.n_cells
        counts = np.bincount(self.cell_of, minlength=n)
        if counts.sum() != self.grid.size:
            raise MarkovMimicError("cells do not cover the grid")
        if np.any(counts == 0):
            raise MarkovMimicError("empty cell")
        # connectedness: indices of each cell form one contiguous block
        for c in range(n):
            idx = self.cell_indices(c)
            if idx[-1] - idx[0] + 1 != len(idx):
                raise MarkovMimicError(f"cell {c} is not connected")
        for i in range(self.grid.size):
            x = Fraction(i, self.grid.m)
            if abs(x - self.representatives[self.cell_of[i]]) >= self.radius:
                raise MarkovMimicError(
                    f"grid point {x} farther than {self.radius} from its representative"
                )


def make_partition(points: Iterable[Fraction], grid: Grid) -> CellPartition:
    """Voronoi cells around the given representatives, ties broken rightward."""
    reps = [Fraction(p) for p in points]
    if len(reps) < 2:
        raise MarkovMimicError("need at least two representatives (0 and 1)")
    if reps[0] != 0 or reps[-1] != 1 or sorted(reps) != reps:
        raise MarkovMimicError("representatives must be sorted with x_1=0, x_n=1")
    mids = [(a + b) / 2 for a, b in zip(reps, reps[1:])]
    cell_of = np.empty(grid.size, dtype=int)
    c = 0
    for i in range(grid.size):
        x = Fraction(i, grid.m)
        while c < len(mids) and x >= mids[c]:
            c += 1
        cell_of[i] = c
    max_gap = max(b - a for a, b in zip(reps, reps[1:]))
    # achieved covering radius: half the widest gap, with strict-inequality slack
    radius = max_gap / 2 + Fraction(1, 2 * grid.m)
    part = CellPartition(grid, tuple(reps), cell_of, radius)
    part.validate()
    return part
