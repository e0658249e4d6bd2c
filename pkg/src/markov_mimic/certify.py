"""Independent verification of an assembled family against its kernel.

Nothing here trusts pipeline intermediates: the sup error is re-measured
from the kernel and the family's maps, and the boundary tallies are
recomputed from the exact endpoint breakpoints by a separate classification
pass.  A certificate that merely replays construction state would certify
nothing.
"""

from __future__ import annotations

import math
from bisect import bisect_left
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .errors import MarkovMimicError
from .grids import SampledFunction
from .kernels import MarkovKernel, apply
from .relations import boundary_count_identity, snapshot_oracle  # noqa: F401

__all__ = [
    "BoundaryTally",
    "Certificate",
    "sup_error",
    "evaluate",
    "boundary_tally",
    "certify_boundary",
    "snapshot_oracle",
]


@dataclass(frozen=True)
class BoundaryTally:
    """Exact multiset of endpoint values over the family, per side."""

    c0: dict  # Fraction -> count, values of the maps at y=0
    c1: dict  # Fraction -> count, values at y=1
    n: int

    def __post_init__(self):
        if sum(self.c0.values()) != self.n or sum(self.c1.values()) != self.n:
            raise MarkovMimicError("tally counts do not sum to the family size")
        if any(v < 0 for v in (*self.c0.values(), *self.c1.values())):
            raise MarkovMimicError("negative tally count")

    @property
    def representatives(self) -> tuple[Fraction, ...]:
        return tuple(sorted(set(self.c0) | set(self.c1)))


@dataclass(frozen=True)
class Certificate:
    """Outcome of the full verification of one family against one kernel."""

    sup_error: float
    eps: float
    budgets: tuple[float, float, float, float]
    boundary_ok: bool
    tally: BoundaryTally
    n: int
    n1: int

    @property
    def passed(self) -> bool:
        return self.sup_error < self.eps and self.boundary_ok

    def to_json(self) -> dict:
        def q(x: Fraction) -> str:
            return f"{x.numerator}/{x.denominator}"

        return {
            "sup_error": self.sup_error,
            "eps": self.eps,
            "budgets": list(self.budgets),
            "boundary_ok": self.boundary_ok,
            "passed": self.passed,
            "tally": {
                "c0": {q(k): v for k, v in sorted(self.tally.c0.items())},
                "c1": {q(k): v for k, v in sorted(self.tally.c1.items())},
            },
            "N": self.n,
            "N1": self.n1,
        }


def sup_error(
    kernel: MarkovKernel, family, functions: Sequence[SampledFunction]
) -> tuple[float, tuple[float, float, float, float]]:
    """Worst deviation between the kernel and the family average, with budgets.

    The four budgets decompose the error path: (kernel -> weighted points),
    (points -> profile integral), (integral -> full Riemann sum),
    (full sum -> trimmed average).  Their sum bounds the measured sup error.
    """
    worst = 0.0
    budgets = [0.0, 0.0, 0.0, 0.0]
    for f in functions:
        target = apply(kernel, f).values
        if hasattr(family, "sums"):
            agg = family.sums(f)
            avg = agg.selected / family.n
            full_avg = agg.full / family.n1
            budgets[0] = max(budgets[0], float(np.max(np.abs(target - agg.schedule))))
            budgets[1] = max(
                budgets[1], float(np.max(np.abs(agg.schedule - agg.integral)))
            )
            budgets[2] = max(
                budgets[2], float(np.max(np.abs(agg.integral - full_avg)))
            )
            budgets[3] = max(budgets[3], float(np.max(np.abs(full_avg - avg))))
        else:
            avg = family.average(f).values
        worst = max(worst, float(np.max(np.abs(target - avg))))
    return worst, tuple(budgets)


def _classify_side(profile, side: int, n1: int) -> list:
    """Constant-value segments of d -> h(side, d/N1): (lo, hi, value or None).

    None marks ramp territory where the value varies with d; retained indices
    must never land there.
    """
    cums = profile.endpoint_cum(side)
    targets = profile.schedule.targets
    dn = Fraction(profile.delta) * n1
    if dn.denominator != 1:
        raise MarkovMimicError("delta*N1 is not an integer")
    dn = int(dn)
    segs = []
    for j in range(profile.count):
        lo_f, hi_f = cums[j] * n1, cums[j + 1] * n1
        if lo_f.denominator != 1 or hi_f.denominator != 1:
            raise MarkovMimicError("endpoint breakpoint times N1 is not an integer")
        lo, hi = int(lo_f), int(hi_f)
        if hi == lo:
            continue
        x = targets[j]
        if x == 0:
            segs.append((lo + 1, hi, Fraction(0)))
        elif hi - lo >= 2 * dn:
            if lo + 1 <= lo + dn - 1:
                segs.append((lo + 1, lo + dn - 1, None))
            segs.append((lo + dn, hi - dn, x))
            segs.append((hi - dn + 1, hi, None))
        else:
            segs.append((lo + 1, hi, None))
    return segs


def _tally_side(family, side: int) -> Counter:
    segs = _classify_side(family.profile, side, family.n1)
    starts = [s[0] for s in segs]
    tally: Counter = Counter()
    for lo, hi in family.ranges:
        i = bisect_left(starts, lo)
        if i > 0 and segs[i - 1][1] >= lo:
            i -= 1
        d = lo
        while d <= hi:
            slo, shi, val = segs[i]
            if d < slo:
                raise MarkovMimicError(f"index {d} not covered by any segment")
            upto = min(hi, shi)
            if val is None:
                for dd in range(d, upto + 1):
                    v = family.profile.endpoint_value(side, Fraction(dd, family.n1))
                    raise MarkovMimicError(
                        f"retained map {dd} has non-plateau endpoint value {v} "
                        f"at y={side}"
                    )
            tally[val] += upto - d + 1
            d = upto + 1
            i += 1
    return tally


def boundary_tally(family) -> BoundaryTally:
    """Recompute the exact endpoint value counts of a family from scratch."""
    if hasattr(family, "profile"):
        c0 = _tally_side(family, 0)
        c1 = _tally_side(family, 1)
        return BoundaryTally(dict(c0), dict(c1), family.n)
    # materialized family: endpoint columns are floats on grid points
    grid = family.grid
    c0: Counter = Counter()
    c1: Counter = Counter()
    reps = set(family.representatives)
    for row_idx in range(family.maps.shape[0]):
        for side, counter in ((0, c0), (1, c1)):
            v = family.maps[row_idx, 0 if side == 0 else -1]
            snapped = grid.snap(v)
            if abs(float(snapped) - v) > 1e-9 or snapped not in reps:
                raise MarkovMimicError(
                    f"map {row_idx} endpoint value {v} at y={side} is not a "
                    "representative point"
                )
            counter[snapped] += 1
    return BoundaryTally(dict(c0), dict(c1), family.n)


def certify_boundary(tally: BoundaryTally, alpha, beta) -> bool:
    """True iff the averaged endpoint evaluations obey the ratio relation exactly.

    Sufficient for every subspace member at once: the average at y=0 is a
    fixed rational combination of f at the representatives, and the identity
    below makes it equal beta times the average at y=1 for all such f.
    """
    alpha, beta = Fraction(alpha), Fraction(beta)
    reps = tally.representatives
    interior = [x for x in reps if 0 < x < 1]
    c0_int = [tally.c0.get(x, 0) for x in interior]
    c1_int = [tally.c1.get(x, 0) for x in interior]
    return boundary_count_identity(
        c0_int,
        tally.c0.get(Fraction(0), 0),
        tally.c0.get(Fraction(1), 0),
        c1_int,
        tally.c1.get(Fraction(0), 0),
        tally.c1.get(Fraction(1), 0),
        alpha,
        beta,
    )


def evaluate(
    kernel: MarkovKernel,
    family,
    functions: Sequence[SampledFunction],
    eps: float,
    alpha=None,
    beta=None,
) -> Certificate:
    """Full certificate: sup error with budgets plus the exact boundary check."""
    err, budgets = sup_error(kernel, family, functions)
    tally = boundary_tally(family)
    if alpha is None:
        alpha = family.meta.get("alpha")
    if beta is None:
        beta = family.meta.get("beta")
    ok = certify_boundary(tally, alpha, beta)
    return Certificate(err, float(eps), budgets, ok, tally, family.n, family.n1)
