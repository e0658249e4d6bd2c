"""Discretized row-stochastic operators on grid functions.

A kernel assigns to every grid point y a probability measure over grid
points; applying it to a function integrates the function row by row.  An
off-grid target of a composition map is split linearly between the two
bracketing grid points, which keeps rows summing to one exactly and keeps the
action exact on piecewise-linear functions with grid kinks.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .errors import GridMismatchError, MarkovMimicError
from .grids import Grid, SampledFunction
from .subspace import SubspaceSpec, test_function

ROW_TOL = 1e-12
CONCENTRATION_TOL = 1e-9


@dataclass(frozen=True)
class DiscreteMeasure:
    """Nonnegative weights on grid points summing to one."""

    grid: Grid
    weights: np.ndarray

    def mass_at(self, x) -> float:
        return float(self.weights[self.grid.index_of(x)])

    def integrate(self, f: SampledFunction) -> float:
        return float(self.weights @ f.values)


@dataclass(frozen=True)
class MarkovKernel:
    """One measure per grid point y, stored as a row-stochastic matrix."""

    grid: Grid
    rows: np.ndarray  # shape (M+1, M+1); rows[i] is the measure at y = i/M

    def row(self, i: int) -> DiscreteMeasure:
        return DiscreteMeasure(self.grid, self.rows[i])

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            for row in self.rows:
                w.writerow([f"{v:.17g}" for v in row])

    @classmethod
    def from_csv(cls, path) -> "MarkovKernel":
        data = []
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if row:
                    data.append([float(v) for v in row])
        mat = np.asarray(data)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1] or mat.shape[0] < 3:
            raise MarkovMimicError(f"{path}: expected a square matrix of size M+1 >= 3")
        kernel = cls(Grid(mat.shape[0] - 1), mat)
        report = validate_kernel(kernel)
        if not report.passed:
            raise MarkovMimicError(f"{path}: not row-stochastic: {report}")
        return kernel


def _point_mass_row(grid: Grid, target: float) -> np.ndarray:
    """Point mass at target, split between the bracketing grid points."""
    if not (-ROW_TOL <= target <= 1 + ROW_TOL):
        raise MarkovMimicError(f"composition target {target} outside [0,1]")
    t = min(max(target, 0.0), 1.0) * grid.m
    lo = int(np.floor(t))
    row = np.zeros(grid.size)
    if lo >= grid.m:
        row[grid.m] = 1.0
    else:
        frac = t - lo
        row[lo] = 1.0 - frac
        row[lo + 1] = frac
    return row


def from_composition(lam: SampledFunction) -> MarkovKernel:
    """Kernel of f -> f o lam for a map lam of [0,1] into itself."""
    grid = lam.grid
    rows = np.stack([_point_mass_row(grid, v) for v in lam.values])
    return MarkovKernel(grid, rows)


def from_weighted_compositions(
    maps: Sequence[SampledFunction], weights: Sequence[SampledFunction]
) -> MarkovKernel:
    """Kernel of f -> sum_i w_i(y) f(lam_i(y)) / sum_i w_i(y)."""
    if len(maps) != len(weights) or not maps:
        raise MarkovMimicError("need equally many maps and weights, at least one")
    grid = maps[0].grid
    total = np.zeros(grid.size)
    for w in weights:
        if np.any(w.values < -ROW_TOL):
            raise MarkovMimicError("weights must be nonnegative")
        total = total + w.values
    if np.any(total <= 0):
        raise MarkovMimicError("total weight vanishes at some grid point")
    rows = np.zeros((grid.size, grid.size))
    for lam, w in zip(maps, weights):
        for i in range(grid.size):
            rows[i] += (w.values[i] / total[i]) * _point_mass_row(grid, lam.values[i])
    return MarkovKernel(grid, rows)


@dataclass(frozen=True)
class KernelReport:
    max_row_sum_deviation: float
    most_negative_weight: float

    @property
    def passed(self) -> bool:
        return (
            self.max_row_sum_deviation <= ROW_TOL
            and self.most_negative_weight >= -ROW_TOL
        )

    def __str__(self):
        return (
            f"row-sum deviation {self.max_row_sum_deviation:.3g}, "
            f"most negative weight {self.most_negative_weight:.3g}"
        )


def validate_kernel(kernel: MarkovKernel) -> KernelReport:
    sums = kernel.rows.sum(axis=1)
    return KernelReport(
        max_row_sum_deviation=float(np.max(np.abs(sums - 1.0))),
        most_negative_weight=float(np.min(kernel.rows)),
    )


def apply(kernel: MarkovKernel, f: SampledFunction) -> SampledFunction:
    if kernel.grid.m != f.grid.m:
        raise GridMismatchError(f"kernel M={kernel.grid.m}, function M={f.grid.m}")
    return SampledFunction(f.grid, kernel.rows @ f.values)


def endpoint_measures(kernel: MarkovKernel) -> tuple[DiscreteMeasure, DiscreteMeasure]:
    return kernel.row(0), kernel.row(kernel.grid.m)


def induced_ratio(
    kernel: MarkovKernel, spec_in: SubspaceSpec, basis_size: int = 12, seed: int = 0
) -> tuple[float, float]:
    """Empirical output ratio phi(f)(0)/phi(f)(1) over random subspace members.

    Probes have f(1) bounded away from zero so the ratio is well conditioned;
    a small defect certifies that the kernel maps the input subspace into the
    ratio-beta subspace on the tested family.
    """
    if basis_size < 3:
        raise MarkovMimicError("need at least 3 probes")
    rng = np.random.default_rng(seed)
    grid = kernel.grid
    alpha = float(spec_in.alpha)
    ratios = []
    for _ in range(basis_size):
        v = rng.uniform(-1, 1, grid.size)
        v[-1] = rng.uniform(0.5, 2.0)
        v[0] = alpha * v[-1]
        out = kernel.rows @ v
        if abs(out[-1]) < 1e-9:
            continue
        ratios.append(out[0] / out[-1])
    if not ratios:
        raise MarkovMimicError("output value at 1 vanished for every probe")
    beta = float(np.mean(ratios))
    defect = float(np.max(np.abs(np.asarray(ratios) - beta)))
    return beta, defect


def concentration_check(
    kernel: MarkovKernel, spec: SubspaceSpec
) -> tuple[float, float, Optional[SampledFunction]]:
    """Endpoint rows of a subspace-preserving kernel must be point masses.

    Returns (mu0({0}), mu1({1}), witness).  When either mass falls short, the
    witness is a ramp test function whose image violates the boundary ratio,
    demonstrating the kernel does not preserve the subspace.
    """
    grid = kernel.grid
    mass0 = float(kernel.rows[0, 0])
    mass1 = float(kernel.rows[-1, -1])
    if mass0 >= 1 - CONCENTRATION_TOL and mass1 >= 1 - CONCENTRATION_TOL:
        return mass0, mass1, None
    alpha = float(spec.alpha)
    best = (0.0, None)
    for j in range(1, grid.m + 1):
        e = test_function("lower", Fraction(j, grid.m), spec, grid)
        out = kernel.rows @ e.values
        defect = abs(out[0] - alpha * out[-1])
        if defect > best[0]:
            best = (defect, e)
    for j in range(0, grid.m):
        g = test_function("upper", Fraction(j, grid.m), spec, grid)
        out = kernel.rows @ g.values
        defect = abs(out[0] - alpha * out[-1])
        if defect > best[0]:
            best = (defect, g)
    return mass0, mass1, best[1]
