"""Exact cell-mass relations forced on endpoint measures by the boundary ratios.

A kernel sending the ratio-alpha subspace into the ratio-beta subspace pins
the distribution of its endpoint measures over any partition: interior cells
carry masses in ratio beta, and the two boundary cells satisfy an affine
relation.  These relations are checked numerically on empirical masses and
reproduced exactly by rational snapshots, which is what makes exact integer
index selection possible downstream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .errors import CapExceededError, InfeasibleError, MarkovMimicError

DEFAULT_N1_CAP = 10_000_000
SELF_SNAPSHOT_DENOMINATOR_CAP = 10_000
RELATION_TOL = 1e-9


@dataclass(frozen=True)
class CellMasses:
    """Endpoint-measure masses per partition cell."""

    mu0_cells: tuple[float, ...]
    mu1_cells: tuple[float, ...]

    def __post_init__(self):
        n = len(self.mu0_cells)
        if n < 2 or len(self.mu1_cells) != n:
            raise MarkovMimicError("need matching mass vectors of length >= 2")
        for vec in (self.mu0_cells, self.mu1_cells):
            if min(vec) < -RELATION_TOL:
                raise MarkovMimicError("cell masses must be nonnegative")
            if abs(sum(vec) - 1) > 1e-9:
                raise MarkovMimicError("cell masses must sum to 1")

    @property
    def n(self) -> int:
        return len(self.mu0_cells)


@dataclass(frozen=True)
class RationalSnapshot:
    """Exact rational cell masses satisfying the boundary relations exactly.

    r approximates the measure at 0, s the measure at 1; both dominate the
    empirical masses by at most eta per cell.
    """

    r: tuple[Fraction, ...]
    s: tuple[Fraction, ...]
    eta: Fraction

    def __post_init__(self):
        if sum(self.r) != 1 or sum(self.s) != 1:
            raise MarkovMimicError("snapshot masses must sum to 1 exactly")
        for v in (*self.r, *self.s):
            if not (0 <= v <= 1):
                raise MarkovMimicError(f"snapshot entry {v} outside [0,1]")

    @property
    def n(self) -> int:
        return len(self.r)

    def denominators(self) -> set[int]:
        return {v.denominator for v in (*self.r, *self.s)}

    def verify_relations(self, alpha: Fraction, beta: Fraction):
        n = self.n
        for i in range(1, n - 1):
            if self.r[i] != beta * self.s[i]:
                raise MarkovMimicError(f"interior relation fails at cell {i}")
        if alpha * self.r[0] + self.r[-1] != beta * (alpha * self.s[0] + self.s[-1]):
            raise MarkovMimicError("boundary relation fails")


def check_relations(masses: CellMasses, alpha, beta) -> dict[str, float]:
    """Residuals of the four mass relations; all zero for a true beta-mapping operator."""
    a, b = float(Fraction(alpha)), float(Fraction(beta))
    mu0, mu1 = masses.mu0_cells, masses.mu1_cells
    res = {}
    for i in range(1, masses.n - 1):
        res[f"interior_{i}"] = abs(mu0[i] - b * mu1[i])
    res["boundary_pair"] = abs(
        a * mu0[0] + mu0[-1] - b * (a * mu1[0] + mu1[-1])
    )
    shift = (1 - b) / (1 - a)
    res["first_cell"] = abs(mu0[0] - b * mu1[0] - shift)
    res["last_cell"] = abs(mu0[-1] - b * mu1[-1] + a * shift)
    return res


@dataclass(frozen=True)
class FeasibilityVerdict:
    feasible: bool
    reason: str

    def __bool__(self):
        return self.feasible


def feasibility(alpha, beta) -> FeasibilityVerdict:
    """beta < alpha is impossible: the first-cell relation would force mass > 1."""
    alpha, beta = Fraction(alpha), Fraction(beta)
    if not (0 < alpha < 1 and 0 < beta < 1):
        raise MarkovMimicError("ratios must lie in (0,1)")
    if beta < alpha:
        shift = (1 - beta) / (1 - alpha)
        return FeasibilityVerdict(
            False,
            f"(1-beta)/(1-alpha) = {shift} > 1 forces the first-cell mass "
            f"mu0(X_1) >= {shift} > 1",
        )
    return FeasibilityVerdict(True, "beta >= alpha")


def _relation_r(s: Sequence[Fraction], alpha: Fraction, beta: Fraction) -> list[Fraction]:
    """The r-vector forced by a given s-vector: interior proportional, boundary affine."""
    n = len(s)
    shift = alpha * (1 - beta) / (1 - alpha)
    r = [Fraction(0)] * n
    for i in range(1, n - 1):
        r[i] = beta * s[i]
    r[-1] = beta * s[-1] - shift
    r[0] = 1 - sum(r[1:])
    return r


def rational_snapshot(masses: CellMasses, eta, alpha, beta) -> RationalSnapshot:
    """Rational cell masses dominating the empirical ones and obeying the relations exactly.

    Tries the masses themselves first (they are often exactly rational); else
    rounds the measure-at-1 masses up to a fixed denominator ceil(n/eta) and
    derives the measure-at-0 masses from the relations.
    """
    alpha, beta = Fraction(alpha), Fraction(beta)
    eta = Fraction(eta)
    if eta <= 0:
        raise MarkovMimicError("eta must be positive")
    if beta < alpha:
        raise InfeasibleError(f"beta = {beta} < alpha = {alpha}")
    residuals = check_relations(masses, alpha, beta)
    if max(residuals.values()) > RELATION_TOL:
        raise MarkovMimicError(
            f"masses violate the relations (max residual {max(residuals.values()):.3g}); "
            "refine the grid or fix the kernel"
        )
    n = masses.n
    shift = alpha * (1 - beta) / (1 - alpha)

    # fast path: the masses may already be exact rationals satisfying everything
    cand_s = [
        Fraction(v).limit_denominator(SELF_SNAPSHOT_DENOMINATOR_CAP)
        for v in masses.mu1_cells
    ]
    if all(abs(float(c) - v) <= 1e-12 for c, v in zip(cand_s, masses.mu1_cells)):
        cand_r = _relation_r(cand_s, alpha, beta)
        if (
            sum(cand_s) == 1
            and all(0 <= v <= 1 for v in cand_r)
            and all(
                abs(float(c) - v) <= 1e-12
                for c, v in zip(cand_r, masses.mu0_cells)
            )
        ):
            snap = RationalSnapshot(tuple(cand_r), tuple(cand_s), eta)
            snap.verify_relations(alpha, beta)
            return snap

    # general path: round the measure-at-1 masses up on a fixed denominator
    den = math.ceil(n / eta)
    s = [Fraction(0)] * n
    for i in range(1, n):
        s[i] = Fraction(math.ceil(masses.mu1_cells[i] * den - 1e-12), den)
    if masses.mu0_cells[-1] <= RELATION_TOL:
        # force an exactly vanishing last r so the stunted last block disappears
        s_exact = shift / beta
        if not (-RELATION_TOL <= float(s_exact) - masses.mu1_cells[-1] <= float(eta)):
            raise MarkovMimicError(
                "cannot zero the last cell: forced s_n outside the eta window"
            )
        s[-1] = s_exact
    s[0] = 1 - sum(s[1:])
    r = _relation_r(s, alpha, beta)
    if r[-1] < 0:
        raise InfeasibleError(
            f"last-cell mass too small: forced r_n = {r[-1]} < 0 "
            f"(need mu1(X_n) >= {float(shift / beta):.6g})"
        )
    for i, (lo, v) in enumerate(zip(masses.mu1_cells, s)):
        if not (-RELATION_TOL <= float(v) - lo <= float(eta) + RELATION_TOL):
            raise MarkovMimicError(
                f"eta = {eta} too large: s_{i + 1} = {v} leaves the window around {lo}"
            )
    for i, (lo, v) in enumerate(zip(masses.mu0_cells, r)):
        # the first cell takes the remainder and may sit below its empirical
        # mass by up to eta; all others are pure round-ups
        low = -float(eta) if i == 0 else 0.0
        if not (low - RELATION_TOL <= float(v) - lo <= float(eta) + RELATION_TOL):
            raise MarkovMimicError(
                f"eta = {eta} too large: r_{i + 1} = {v} leaves the window around {lo}"
            )
    snap = RationalSnapshot(tuple(r), tuple(s), eta)
    snap.verify_relations(alpha, beta)
    return snap


def boundary_count_identity(
    c0_interior: Sequence[int],
    c0_0: int,
    c0_1: int,
    c1_interior: Sequence[int],
    c1_0: int,
    c1_1: int,
    alpha,
    beta,
) -> bool:
    """Exact integer test that averaged endpoint evaluations satisfy the beta relation.

    c0_* count how often each representative value occurs among the selected
    maps evaluated at y=0 (c0_0 at value 0, c0_1 at value 1, c0_interior per
    interior representative); c1_* likewise at y=1.  True iff every subspace
    member's averaged evaluations at 0 and 1 are in ratio beta, exactly.
    """
    alpha, beta = Fraction(alpha), Fraction(beta)
    if len(c0_interior) != len(c1_interior):
        raise MarkovMimicError("interior count vectors must have equal length")
    if min([c0_0, c0_1, c1_0, c1_1, *c0_interior, *c1_interior], default=0) < 0:
        raise MarkovMimicError("counts must be nonnegative")
    for p, q in zip(c0_interior, c1_interior):
        if Fraction(p) != beta * q:
            return False
    return alpha * c0_0 + Fraction(c0_1) == beta * (alpha * c1_0 + c1_1)


def select_modulus_N1(
    delta, delta0, denominators: set[int], cap: int = DEFAULT_N1_CAP
) -> int:
    """Smallest index count making delta and all snapshot masses integral.

    N1 is the least multiple of lcm(denominator(delta), denominators)
    strictly exceeding 1/(delta * delta0).
    """
    delta = Fraction(delta)
    d0 = Fraction(delta0)
    if delta <= 0 or d0 <= 0:
        raise MarkovMimicError("delta and delta0 must be positive")
    base = math.lcm(delta.denominator, *denominators) if denominators else delta.denominator
    bound = 1 / (delta * d0)
    mult = math.floor(bound / base) + 1
    n1 = base * mult
    if n1 > cap:
        raise CapExceededError(
            f"N1 = {n1} exceeds cap {cap}; eta/delta too aggressive for this instance"
        )
    return n1


def snapshot_oracle(
    masses: CellMasses,
    alpha,
    beta,
    eta,
    max_denominator: int = 50,
    search_cap: int = 100_000_000,
) -> list[RationalSnapshot]:
    """Brute-force enumeration of all rational snapshots up to a denominator bound.

    Independent of rational_snapshot: enumerates candidate s-vectors on every
    denominator, solves the two boundary linear equations for the r-vector and
    keeps candidates where everything lands in the required windows.
    """
    alpha, beta = Fraction(alpha), Fraction(beta)
    eta = Fraction(eta)
    n = masses.n
    if n > 4:
        raise MarkovMimicError("oracle limited to at most 4 cells")
    if max_denominator > 50:
        raise MarkovMimicError("oracle limited to denominators <= 50")
    found = []
    explored = 0
    for q in range(1, max_denominator + 1):
        ranges = []
        for i in range(n):
            lo = masses.mu1_cells[i]
            c_lo = math.ceil(lo * q - 1e-12)
            c_hi = math.floor((lo + float(eta)) * q + 1e-12)
            ranges.append(range(max(c_lo, 0), min(c_hi, q) + 1))
        explored += int(np.prod([len(r) for r in ranges]))
        if explored > search_cap:
            raise CapExceededError("oracle search space exceeds cap")
        for combo in _compositions(ranges, q):
            s = [Fraction(c, q) for c in combo]
            r = _relation_r(s, alpha, beta)
            if not all(0 <= v <= 1 for v in r):
                continue
            ok = True
            for i, (lo, v) in enumerate(zip(masses.mu0_cells, r)):
                low = -float(eta) if i == 0 else 0.0
                if not (low - RELATION_TOL <= float(v) - lo <= float(eta) + RELATION_TOL):
                    ok = False
                    break
            if ok:
                found.append(RationalSnapshot(tuple(r), tuple(s), eta))
    return found


def _compositions(ranges, total):
    """All tuples with one entry per range summing to total."""
    def rec(i, remaining, prefix):
        if i == len(ranges) - 1:
            if remaining in ranges[i]:
                yield (*prefix, remaining)
            return
        for c in ranges[i]:
            if c > remaining:
                break
            yield from rec(i + 1, remaining - c, (*prefix, c))

    yield from rec(0, total, ())
