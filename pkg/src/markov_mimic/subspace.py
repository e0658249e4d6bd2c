"""Boundary-ratio subspaces {f : f(0) = alpha * f(1)} and their positive maps.

A ratio alpha = a/(a+k) in (0,1) pins the value at 0 to a multiple of the
value at 1.  The subspace has co-dimension one: every continuous function
splits uniquely into a constant plus a member.  Positive maps defined only on
the subspace extend canonically to unital maps on everything; whether the
extension stays positive is decided by sweeping two one-parameter families of
ramp test functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional

import numpy as np

from .errors import InfeasibleError, MarkovMimicError
from .grids import Grid, SampledFunction

Operator = Callable[[SampledFunction], SampledFunction]

MEMBERSHIP_RTOL = 1e-12


@dataclass(frozen=True)
class SubspaceSpec:
    """A boundary ratio alpha in (0,1) together with its integer form a/(a+k)."""

    alpha: Fraction
    a: int
    k: int

    def __post_init__(self):
        if not (0 < self.alpha < 1):
            raise MarkovMimicError(f"alpha must lie in (0,1), got {self.alpha}")
        if self.a <= 0 or self.k <= 0:
            raise MarkovMimicError("integer realization needs a >= 1, k >= 1")
        if Fraction(self.a, self.a + self.k) != self.alpha:
            raise MarkovMimicError(
                f"a/(a+k) = {self.a}/{self.a + self.k} does not equal alpha = {self.alpha}"
            )

    @classmethod
    def from_alpha(cls, alpha) -> "SubspaceSpec":
        alpha = Fraction(alpha)
        ratio = alpha / (1 - alpha)  # = a/k in lowest terms
        return cls(alpha, ratio.numerator, ratio.denominator)

    def is_member(self, f: SampledFunction, exact: bool = False) -> bool:
        lhs = f.values[0]
        rhs = float(self.alpha) * f.values[-1]
        if exact:
            return lhs == rhs
        return abs(lhs - rhs) <= MEMBERSHIP_RTOL * (1 + abs(f.values[-1]))


def realize_integers(alpha, beta) -> tuple[int, int, int]:
    """Common-k integer realization (a, k, b) with a/(a+k)=alpha, b/(b+k)=beta.

    Requires alpha <= beta; the reverse ordering admits no unital positive map.
    """
    alpha, beta = Fraction(alpha), Fraction(beta)
    if not (0 < alpha < 1 and 0 < beta < 1):
        raise MarkovMimicError("ratios must lie in (0,1)")
    if beta < alpha:
        raise InfeasibleError(f"beta = {beta} < alpha = {alpha}: no such positive map")
    ra = alpha / (1 - alpha)
    rb = beta / (1 - beta)
    k = math.lcm(ra.denominator, rb.denominator)
    a = int(ra * k)
    b = int(rb * k)
    return a, k, b


def decompose(f: SampledFunction, spec: SubspaceSpec) -> tuple[float, SampledFunction]:
    """Unique split f = lam + g with g a subspace member.

    lam = ((a+k) f(0) - a f(1)) / k, and g = f - lam satisfies
    g(0) = alpha * g(1) exactly up to float rounding.
    """
    a, k = spec.a, spec.k
    lam = ((a + k) * f.values[0] - a * f.values[-1]) / k
    g = SampledFunction(f.grid, f.values - lam)
    return lam, g


def test_function(kind: str, param, spec: SubspaceSpec, grid: Grid) -> SampledFunction:
    """Ramp members probing the constant function 1 from below or above.

    kind="lower": value alpha at 0, ramp up to 1 at x=param, then flat 1.
    kind="upper": flat 1 up to x=1-param, ramp up to 1/alpha at 1.
    The ramp endpoint is snapped to the grid so the function is exactly
    piecewise linear on grid kinks.
    """
    alpha = float(spec.alpha)
    p = grid.snap(param)
    xs = grid.points
    if kind == "lower":
        if not (0 < p <= 1):
            raise MarkovMimicError(f"lower ramp width must lie in (0,1], got {p}")
        ramp = alpha + (1 - alpha) * np.minimum(xs / float(p), 1.0)
        return SampledFunction(grid, ramp)
    if kind == "upper":
        if not (0 <= p < 1):
            raise MarkovMimicError(f"upper ramp width must lie in [0,1), got {p}")
        start = 1 - float(p)
        inv = 1 / alpha
        if p == 0:
            vals = np.ones(grid.size)
            vals[-1] = inv
        else:
            vals = 1 + (inv - 1) * np.clip((xs - start) / float(p), 0.0, 1.0)
        return SampledFunction(grid, vals)
    raise MarkovMimicError(f"unknown test function kind {kind!r}")


def _linearity_probe(phi_sub: Operator, spec: SubspaceSpec, grid: Grid, tol=1e-9):
    """Spot-check additivity and homogeneity of phi_sub on random members."""
    rng = np.random.default_rng(7)
    alpha = float(spec.alpha)
    members = []
    for _ in range(6):
        v = rng.uniform(-1, 1, grid.size)
        v[0] = alpha * v[-1]
        members.append(SampledFunction(grid, v))
    for g1, g2 in zip(members[::2], members[1::2]):
        lhs = phi_sub(g1 + g2).values
        rhs = phi_sub(g1).values + phi_sub(g2).values
        if np.max(np.abs(lhs - rhs)) > tol * (1 + np.max(np.abs(rhs))):
            raise MarkovMimicError("map is not additive on subspace members")
        lhs = phi_sub(g1 * 2.5).values
        rhs = 2.5 * phi_sub(g1).values
        if np.max(np.abs(lhs - rhs)) > tol * (1 + np.max(np.abs(rhs))):
            raise MarkovMimicError("map is not homogeneous on subspace members")


def extend_map(phi_sub: Operator, spec: SubspaceSpec, grid: Grid) -> Operator:
    """Canonical unital extension f = lam + g  ->  lam + phi_sub(g)."""
    _linearity_probe(phi_sub, spec, grid)

    def extended(f: SampledFunction) -> SampledFunction:
        lam, g = decompose(f, spec)
        return phi_sub(g) + lam

    return extended


def check_extendibility(
    phi_sub: Operator, spec: SubspaceSpec, grid: Grid, tol: float = 1e-9
) -> tuple[bool, Optional[SampledFunction]]:
    """Decide positivity of the canonical extension by a grid sweep of test ramps.

    The extension is positive iff phi maps every upper ramp to >= 1 and every
    lower ramp to <= 1, pointwise.  Ramp parameters are swept over all grid
    values, which brackets the true extremes within one grid step.  Returns
    (verdict, witness); the witness is a violating ramp when the verdict is
    False.
    """
    m = grid.m
    worst = (0.0, None)
    for j in range(1, m + 1):
        e = test_function("lower", Fraction(j, m), spec, grid)
        excess = float(np.max(phi_sub(e).values)) - 1
        if excess > worst[0]:
            worst = (excess, e)
    for j in range(0, m):
        gam = test_function("upper", Fraction(j, m), spec, grid)
        shortfall = 1 - float(np.min(phi_sub(gam).values))
        if shortfall > worst[0]:
            worst = (shortfall, gam)
    if worst[0] > tol:
        return False, worst[1]
    return True, None
