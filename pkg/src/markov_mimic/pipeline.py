"""Averaging pipeline: from a kernel to a finite family of composition maps.

The construction proceeds in stages.  Cell masses of the kernel's measures
become weight functions over a partition (coefficients); weights are laid out
as consecutive blocks on a time axis, each block carrying one representative
point (schedule); a trapezoid profile h(y, t) rises from 0 to the block's
point and back within each block (profile); slicing t at N1 equally spaced
values and discarding slices near ramps yields composition maps whose average
reproduces the kernel up to eps.  Endpoint bookkeeping is exact rational
arithmetic throughout so the averaged family preserves the boundary-ratio
subspace exactly, not approximately.
"""

from __future__ import annotations

import math
from bisect import bisect_left
from collections import Counter
from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .errors import CapExceededError, MarkovMimicError, StageError
from .grids import (
    CellPartition,
    Grid,
    SampledFunction,
    dense_points,
    make_partition,
    modulus_delta,
)
from .kernels import MarkovKernel, apply, concentration_check, induced_ratio, validate_kernel
from .relations import (
    CellMasses,
    RationalSnapshot,
    rational_snapshot,
    select_modulus_N1,
    DEFAULT_N1_CAP,
)
from .subspace import SubspaceSpec, realize_integers

DEFAULT_FAMILY_ROW_CAP = 20000
WIDTH_TOL = 1e-9


@dataclass(frozen=True)
class CoefficientField:
    """Per-cell weight functions lambda_i(y), one per partition cell.

    end0/end1 hold exact rational endpoint values once the field has been
    snapped; before snapping they are None and only floats are available.
    """

    lambdas: tuple[SampledFunction, ...]
    partition: CellPartition
    end0: Optional[tuple[Fraction, ...]] = None
    end1: Optional[tuple[Fraction, ...]] = None

    @property
    def n(self) -> int:
        return len(self.lambdas)

    @property
    def grid(self) -> Grid:
        return self.lambdas[0].grid

    def weight_matrix(self) -> np.ndarray:
        return np.stack([lam.values for lam in self.lambdas])

    def endpoint_masses(self) -> CellMasses:
        mat = self.weight_matrix()
        mu0 = np.clip(mat[:, 0], 0.0, None)
        mu1 = np.clip(mat[:, -1], 0.0, None)
        return CellMasses(tuple(mu0 / mu0.sum()), tuple(mu1 / mu1.sum()))


def build_coefficients(
    kernel: MarkovKernel,
    partition: CellPartition,
    functions: Optional[Sequence[SampledFunction]] = None,
    eps: Optional[float] = None,
) -> CoefficientField:
    """Weight functions lambda_i(y) = (mass of cell i under the measure at y).

    When functions and eps are given, verifies that replacing each measure by
    the weighted point masses at the representatives moves no function value
    by eps/4 or more; failure means the partition is too coarse.
    """
    grid = kernel.grid
    n = partition.n_cells
    mat = np.zeros((n, grid.size))
    for c in range(n):
        mat[c] = kernel.rows[:, partition.cell_indices(c)].sum(axis=1)
    if np.min(mat) < -WIDTH_TOL:
        raise StageError("coefficients", "negative cell mass")
    if np.max(np.abs(mat.sum(axis=0) - 1.0)) > 1e-9:
        raise StageError("coefficients", "cell masses do not sum to 1")
    field = CoefficientField(
        tuple(SampledFunction(grid, row) for row in mat), partition
    )
    if functions is not None and eps is not None:
        err = step_one_error(kernel, field, functions)
        if err >= eps / 4:
            raise StageError(
                "coefficients",
                f"point-mass replacement error {err:.3g} >= eps/4 = {eps / 4:.3g}; "
                "cell radius too coarse for the function set",
            )
    return field


def step_one_error(
    kernel: MarkovKernel, field: CoefficientField, functions: Sequence[SampledFunction]
) -> float:
    """Max over f and grid y of |(kernel f)(y) - sum_i lambda_i(y) f(x_i)|."""
    grid = kernel.grid
    reps_idx = [int(x * grid.m) for x in field.partition.representatives]
    mat = field.weight_matrix()
    worst = 0.0
    for f in functions:
        target = apply(kernel, f).values
        approx = mat.T @ f.values[reps_idx]
        worst = max(worst, float(np.max(np.abs(target - approx))))
    return worst


def snap_endpoints(
    field: CoefficientField, snapshot: RationalSnapshot, slack: Optional[float] = None
) -> CoefficientField:
    """Force exact rational endpoint values onto the weight functions.

    The value at each endpoint becomes the snapshot rational; the adjacent
    grid value absorbs half the shift so the functions stay gently varying;
    two grid steps in, nothing changes.  Column sums stay exactly 1 because
    the shifts sum to zero on each side.
    """
    if field.n != snapshot.n:
        raise MarkovMimicError("snapshot size does not match the field")
    grid = field.grid
    if grid.m < 4:
        raise MarkovMimicError("grid too small to taper endpoint shifts")
    mat = field.weight_matrix().copy()
    shifts0 = np.array([float(r) - mat[i, 0] for i, r in enumerate(snapshot.r)])
    shifts1 = np.array([float(s) - mat[i, -1] for i, s in enumerate(snapshot.s)])
    worst = float(max(np.max(np.abs(shifts0)), np.max(np.abs(shifts1))))
    if slack is not None and worst > slack:
        raise StageError(
            "snapshot",
            f"endpoint shift {worst:.3g} exceeds the step-one budget slack {slack:.3g}",
        )
    mat[:, 0] += shifts0
    mat[:, 1] += shifts0 / 2
    mat[:, -1] += shifts1
    mat[:, -2] += shifts1 / 2
    return CoefficientField(
        tuple(SampledFunction(grid, row) for row in mat),
        field.partition,
        tuple(snapshot.r),
        tuple(snapshot.s),
    )


@dataclass(frozen=True)
class BlockSchedule:
    """Consecutive blocks on the t axis, each carrying one target point.

    widths are functions of y summing to 1; widths0/widths1 are the exact
    endpoint widths; targets are grid points, with 0 allowed (a zero target
    makes the profile vanish on the block).
    """

    widths: tuple[SampledFunction, ...]
    targets: tuple[Fraction, ...]
    widths0: tuple[Fraction, ...]
    widths1: tuple[Fraction, ...]

    def __post_init__(self):
        b = len(self.widths)
        if not (b == len(self.targets) == len(self.widths0) == len(self.widths1)):
            raise MarkovMimicError("schedule component lengths differ")
        total = np.zeros(self.widths[0].grid.size)
        for w in self.widths:
            if float(np.min(w.values)) < -WIDTH_TOL:
                raise MarkovMimicError("negative block width")
            total += w.values
        if float(np.max(np.abs(total - 1.0))) > 1e-9:
            raise MarkovMimicError("block widths do not sum to 1")
        if sum(self.widths0) != 1 or sum(self.widths1) != 1:
            raise MarkovMimicError("exact endpoint widths do not sum to 1")

    @property
    def count(self) -> int:
        return len(self.widths)

    @classmethod
    def from_field(cls, field: CoefficientField) -> "BlockSchedule":
        """One block per cell, in cell order; the layout for the equal-ratio case."""
        if field.end0 is None or field.end1 is None:
            raise StageError("schedule", "field endpoints not snapped")
        return cls(
            field.lambdas,
            tuple(field.partition.representatives),
            field.end0,
            field.end1,
        )


def interleave_coefficients(field: CoefficientField) -> BlockSchedule:
    """Alternating layout for the unequal-ratio case.

    Odd block 2i-1 carries representative x_{i+1} with width lambda_{i+1}(y);
    the even block after it carries the point 0 with the slack width that
    shifts weight toward the point 0 as y moves from 1 to 0; block 2n-1
    carries 0 with the remainder, block 2n is empty.  Even cumulative widths
    agree at y=0 and y=1 exactly, which is what makes one index selection
    serve both endpoints.
    """
    if field.end0 is None or field.end1 is None:
        raise StageError("schedule", "field endpoints not snapped")
    n = field.n
    r, s = field.end0, field.end1
    if r[0] < s[0]:
        raise StageError("schedule", "first-cell weight must not increase toward y=1")
    for i in range(1, n):
        if r[i] > s[i]:
            raise StageError(
                "schedule", f"cell {i + 1} weight must not decrease toward y=1"
            )
    grid = field.grid
    reps = field.partition.representatives
    lam = field.weight_matrix()
    head = lam[0] - float(s[0])
    zero = Fraction(0)
    widths, targets, w0, w1 = [], [], [], []
    cum_even = np.zeros(grid.size)
    for i in range(1, n):
        widths.append(SampledFunction(grid, lam[i]))
        targets.append(reps[i])
        w0.append(r[i])
        w1.append(s[i])
        even = np.maximum(0.0, np.minimum(head - cum_even, float(s[i]) - lam[i]))
        cum_even += even
        widths.append(SampledFunction(grid, even))
        targets.append(zero)
        w0.append(s[i] - r[i])
        w1.append(zero)
    rem = np.clip(lam[0] - cum_even, 0.0, None)
    widths.append(SampledFunction(grid, rem))
    targets.append(zero)
    w0.append(s[0])
    w1.append(s[0])
    widths.append(SampledFunction.constant(grid, 0.0))
    targets.append(zero)
    w0.append(zero)
    w1.append(zero)
    return BlockSchedule(tuple(widths), tuple(targets), tuple(w0), tuple(w1))


def _delta_candidates():
    """The 1-2-5 unit series 1/5, 1/10, 1/20, ..., descending, below 1/2."""
    for e in range(1, 10):
        for u in (5, 2, 1):
            cand = Fraction(u, 10**e)
            if cand < Fraction(1, 2):
                yield cand


def choose_delta(
    mode: str,
    eps: float,
    functions: Sequence[SampledFunction],
    n: int,
    tau: int,
    a: int,
    k: int,
    b: int,
    masses: Optional[tuple[Sequence[Fraction], Sequence[Fraction]]] = None,
) -> Fraction:
    """Largest ramp width from the 1-2-5 series satisfying every budget constraint.

    mode "same" uses the two averaging budgets; mode "cross" additionally
    requires each exclusion count to fit inside its block, which ties delta to
    the endpoint masses (passed as exact rationals r, s).
    """
    sup = Fraction(max(f.sup_norm for f in functions))
    eps_q = Fraction(eps) / 4
    if mode not in ("same", "cross"):
        raise MarkovMimicError(f"unknown mode {mode!r}")
    if mode == "cross" and masses is None:
        raise MarkovMimicError("cross mode needs endpoint masses")

    def ok(d: Fraction) -> bool:
        if mode == "same":
            return 4 * n * d * sup < eps_q and 5 * d * sup <= eps_q
        if not (8 * n * d * sup < eps_q and 4 * d * (1 + tau) * (b + k) * b * sup <= eps_q):
            return False
        r, s = masses
        r = [Fraction(v) for v in r]
        s = [Fraction(v) for v in s]
        interior = [i for i in range(1, n - 1) if s[i] > 0]
        if r[-1] == 0:
            for i in interior:
                if not 3 * d * b * (b - a) <= r[i]:
                    return False
            return (
                3 * d * (a + k) * b * tau <= r[0]
                and 3 * d * (b + k) * a * tau <= s[-1]
            )
        for i in interior:
            if not 3 * d * (b - a) * b < r[i]:
                return False
        return (
            3 * d * (b - a) * b < r[-1]
            and 3 * d * (a + k) * (b + b * tau) < r[0]
            and 3 * d * (b + k) * (a * tau + b) < s[-1]
        )

    for cand in _delta_candidates():
        if ok(cand):
            return cand
    raise StageError(
        "delta",
        "no feasible ramp width above 1e-9; endpoint masses too small, "
        "refine the partition or relax eps",
    )


@dataclass(frozen=True)
class TransportProfile:
    """The two-variable trapezoid profile h(y, t) over a block schedule.

    cum holds float cumulative block widths per grid y; cum0/cum1 are the
    exact rational cumulative widths at the endpoints, on which all index
    selection and tally arithmetic is performed.
    """

    schedule: BlockSchedule
    delta: Fraction
    grid: Grid
    cum: np.ndarray = dc_field(repr=False)
    cum0: tuple[Fraction, ...] = dc_field(repr=False)
    cum1: tuple[Fraction, ...] = dc_field(repr=False)

    @property
    def count(self) -> int:
        return self.schedule.count

    def value(self, y_idx: int, t: float) -> float:
        """h(y, t) for a grid y index and a float time."""
        row = self.cum[y_idx]
        j = int(np.searchsorted(row, t, side="left")) - 1
        j = min(max(j, 0), self.count - 1)
        x = float(self.schedule.targets[j])
        if x == 0.0:
            return 0.0
        w = row[j + 1] - row[j]
        if w <= 0:
            return 0.0
        d = float(self.delta)
        p = x * min(1.0, w / (2 * d))
        return float(max(0.0, min(x * (t - row[j]) / d, x * (row[j + 1] - t) / d, p)))

    def endpoint_cum(self, side: int) -> tuple[Fraction, ...]:
        if side == 0:
            return self.cum0
        if side == 1:
            return self.cum1
        raise MarkovMimicError("side must be 0 or 1")

    def endpoint_value(self, side: int, t: Fraction) -> Fraction:
        """Exact h(side, t) for rational t."""
        cums = self.endpoint_cum(side)
        j = bisect_left(cums, t) - 1
        j = min(max(j, 0), self.count - 1)
        if t > cums[j + 1]:
            j = min(j + 1, self.count - 1)
        x = self.schedule.targets[j]
        w = cums[j + 1] - cums[j]
        if x == 0 or w == 0:
            return Fraction(0)
        p = x * min(Fraction(1), w / (2 * self.delta))
        up = x * (t - cums[j]) / self.delta
        down = x * (cums[j + 1] - t) / self.delta
        return max(Fraction(0), min(up, down, p))


def build_profile(schedule: BlockSchedule, delta: Fraction) -> TransportProfile:
    """Cumulative breakpoints plus the trapezoid evaluation rules."""
    if not (0 < delta < Fraction(1, 2)):
        raise MarkovMimicError(f"ramp width must lie in (0, 1/2), got {delta}")
    grid = schedule.widths[0].grid
    mat = np.clip(np.stack([w.values for w in schedule.widths]), 0.0, None)
    cum = np.zeros((grid.size, schedule.count + 1))
    cum[:, 1:] = np.cumsum(mat, axis=0).T
    total = cum[:, -1]
    if float(np.max(np.abs(total - 1.0))) > 1e-9:
        raise MarkovMimicError("block widths do not sum to 1")
    cum /= total[:, None]
    cum[:, -1] = 1.0
    cum0, acc = [Fraction(0)], Fraction(0)
    for w in schedule.widths0:
        acc += w
        cum0.append(acc)
    cum1, acc = [Fraction(0)], Fraction(0)
    for w in schedule.widths1:
        acc += w
        cum1.append(acc)
    if cum0[-1] != 1 or cum1[-1] != 1:
        raise MarkovMimicError("exact endpoint widths do not sum to 1")
    cum[0] = [float(c) for c in cum0]
    cum[-1] = [float(c) for c in cum1]
    return TransportProfile(schedule, delta, grid, cum, tuple(cum0), tuple(cum1))


@dataclass(frozen=True)
class SelectionResult:
    """Retained index ranges plus the exclusion bookkeeping that justifies them."""

    ranges: tuple[tuple[int, int], ...]  # inclusive [lo, hi] ranges of retained d
    count: int
    exclusions: dict
    case: Optional[str] = None

    def __post_init__(self):
        total = sum(hi - lo + 1 for lo, hi in self.ranges)
        if total != self.count:
            raise MarkovMimicError("range lengths do not sum to the count")


def _as_integer(x: Fraction, what: str) -> int:
    if x.denominator != 1:
        raise StageError("select", f"{what} = {x} is not an integer; N1 badly chosen")
    return int(x)


def select_indices_same(n1: int, delta: Fraction) -> SelectionResult:
    """Keep every t index at distance at least delta from 0 and 1."""
    delta = Fraction(delta)
    if delta >= Fraction(1, 2):
        raise StageError("select", f"ramp width {delta} >= 1/2 leaves no usable indices")
    lo = math.ceil(delta * n1)
    hi = math.floor((1 - delta) * n1)
    if hi <= lo:
        raise StageError("select", "no indices survive trimming; increase N1")
    n = hi - lo + 1
    return SelectionResult(((lo, hi),), n, {"delta_n1": lo, "trimmed": n1 - n}, None)


def select_indices_cross(
    profile: TransportProfile,
    snapshot: RationalSnapshot,
    n1: int,
    delta: Fraction,
    tau: int,
    a: int,
    k: int,
    b: int,
) -> SelectionResult:
    """Index selection for the unequal-ratio layout, with exact exclusion counts.

    Each retained block pair keeps two stretches: one where the profile sits
    on the pair's representative at both endpoints, one where it reads 0 at
    y=0 and the representative at y=1.  The per-pair exclusion counts (m, z)
    are chosen so the retained counts satisfy the boundary relation in exact
    integer arithmetic; the constants come from the common-k realization
    (a, k, b) of the two ratios.
    """
    if b <= a:
        raise StageError("select-cross", "equal ratios: use the same-subspace selection")
    n = snapshot.n
    alpha, beta = Fraction(a, a + k), Fraction(b, b + k)
    dn = _as_integer(Fraction(delta) * n1, "delta*N1")
    R = [_as_integer(ri * n1, f"r_{i + 1}*N1") for i, ri in enumerate(snapshot.r)]
    S = [_as_integer(si * n1, f"s_{i + 1}*N1") for i, si in enumerate(snapshot.s)]
    case = "I" if R[-1] == 0 else "II"
    interior_nonzero = sum(1 for i in range(1, n - 1) if S[i] > 0)
    if tau != interior_nonzero:
        raise StageError(
            "select-cross", f"tau = {tau} but {interior_nonzero} interior cells carry mass"
        )
    m_int = 2 * dn * (b - a) * b
    z_int = 2 * dn * (b - a) * (b + k)
    if case == "I":
        if tau == 0:
            raise StageError(
                "select-cross",
                "vanishing last-cell mass with no interior mass: the exact "
                "exclusion budget is forced to zero, so ramp indices cannot "
                "be removed; no exact selection exists",
            )
        m_n, z_n = 0, 2 * dn * a * tau * (b + k)
        m_1 = 2 * dn * (a + k) * tau * b
    else:
        m_n, z_n = m_int, 2 * dn * (a * tau + b) * (b + k)
        m_1 = 2 * dn * b * (a + k) * (1 + tau)

    ranges: list[tuple[int, int]] = []
    excl_m: dict[int, int] = {}
    excl_z: dict[int, int] = {}
    pos = 0
    kept0_zero = 0  # retained indices reading 0 at y=0
    for i in range(1, n):
        gamma = i + 1
        if S[i] == 0:
            continue
        m, z = (m_n, z_n) if gamma == n else (m_int, z_int)
        excl_m[gamma], excl_z[gamma] = m, z
        A = pos
        if R[i] > 0:
            if m % 2 or m // 2 < dn or R[i] < m:
                raise StageError(
                    "select-cross",
                    f"exclusion count m = {m} exceeds block width {R[i]} at cell "
                    f"{gamma}; ramp-width constraints violated",
                )
            zm = z - m
            if zm < dn or zm > S[i] - R[i]:
                raise StageError(
                    "select-cross",
                    f"exclusion count z - m = {zm} does not fit block width "
                    f"{S[i] - R[i]} at cell {gamma}",
                )
            if R[i] > m:
                ranges.append((A + m // 2 + 1, A + R[i] - m // 2))
            if S[i] - R[i] > zm:
                ranges.append((A + R[i] + 1, A + S[i] - zm))
                kept0_zero += S[i] - R[i] - zm
        else:
            if z % 2 or z // 2 < dn or S[i] < z:
                raise StageError(
                    "select-cross",
                    f"exclusion count z = {z} does not fit block width {S[i]} "
                    f"at cell {gamma}",
                )
            if S[i] > z:
                ranges.append((A + z // 2 + 1, A + S[i] - z // 2))
                kept0_zero += S[i] - z
        pos = A + S[i]
    ranges.append((pos + 1, pos + S[0]))
    kept0_zero += S[0]
    pos += S[0]
    if pos != n1:
        raise StageError("select-cross", "block layout does not cover all indices")
    if kept0_zero != R[0] - m_1:
        raise StageError(
            "select-cross", "first-cell exclusion bookkeeping is inconsistent"
        )
    # exact relation residuals must vanish
    for i in range(1, n - 1):
        if S[i] > 0 and Fraction(R[i] - excl_m[i + 1]) != beta * (S[i] - excl_z[i + 1]):
            raise StageError("select-cross", f"interior count identity fails at cell {i + 1}")
    lhs = alpha * (R[0] - m_1) + (R[-1] - m_n)
    rhs = beta * (alpha * S[0] + (S[-1] - z_n))
    if lhs != rhs:
        raise StageError("select-cross", "boundary count identity fails")
    count = sum(hi - lo + 1 for lo, hi in ranges)
    exclusions = {
        "delta_n1": dn,
        "m": excl_m,
        "z": excl_z,
        "m_1": m_1,
        "z_1": 0,
        "m_n": m_n,
        "z_n": z_n,
    }
    return SelectionResult(tuple(ranges), count, exclusions, case)


def _exact_endpoint_tally(
    profile: TransportProfile,
    side: int,
    ranges: Sequence[tuple[int, int]],
    n1: int,
    representatives: Sequence[Fraction],
) -> Counter:
    """Exact multiset of h(side, d/N1) over retained d, by interval arithmetic.

    Each retained range is classified against the exact block breakpoints:
    whole sub-ranges land on a plateau or a zero block and are counted at
    once; any index falling on a ramp is evaluated exactly and must hit a
    representative, otherwise the selection was wrong and we fail loudly.
    """
    cums = profile.endpoint_cum(side)
    targets = profile.schedule.targets
    dn = _as_integer(Fraction(profile.delta) * n1, "delta*N1")
    C = [_as_integer(c * n1, "breakpoint*N1") for c in cums]
    rep_set = set(representatives) | {Fraction(0)}
    tally: Counter = Counter()
    for lo, hi in ranges:
        d = lo
        while d <= hi:
            j = bisect_left(C, d) - 1
            j = min(max(j, 0), profile.count - 1)
            while C[j + 1] < d:
                j += 1
            block_hi = min(hi, C[j + 1])
            x = targets[j]
            width = C[j + 1] - C[j]
            if x == 0 or width == 0:
                tally[Fraction(0)] += block_hi - d + 1
                d = block_hi + 1
                continue
            p_lo, p_hi = C[j] + dn, C[j + 1] - dn
            if width >= 2 * dn and d >= p_lo and block_hi <= p_hi:
                tally[x] += block_hi - d + 1
                d = block_hi + 1
                continue
            # ramp territory: evaluate index by index, demanding exactness
            for dd in range(d, block_hi + 1):
                v = profile.endpoint_value(side, Fraction(dd, n1))
                if v not in rep_set:
                    raise MarkovMimicError(
                        f"retained index {dd} evaluates to non-representative "
                        f"{v} at y={side}"
                    )
                tally[v] += 1
            d = block_hi + 1
    return tally


@dataclass(frozen=True)
class FamilySums:
    """Per-grid-y aggregates of one function over the family's time axis."""

    selected: np.ndarray  # sum over retained d of f(h(y, d/N1))
    full: np.ndarray  # sum over all d = 1..N1
    integral: np.ndarray  # exact integral of f(h(y, t)) dt over [0, 1]
    schedule: np.ndarray  # sum_j width_j(y) f(target_j)


class EigenvalueFamily:
    """N composition maps t -> h(., d/N1), stored lazily through the profile.

    The family can be huge (millions of maps), so maps are never materialized
    wholesale; averages are computed per block with closed forms on plateaus
    and direct evaluation on the few ramp indices.
    """

    def __init__(
        self,
        profile: TransportProfile,
        n1: int,
        delta0: Fraction,
        selection: SelectionResult,
        tally0: Counter,
        tally1: Counter,
        meta: dict,
    ):
        self.profile = profile
        self.grid = profile.grid
        self.delta = profile.delta
        self.delta0 = Fraction(delta0)
        self.n1 = n1
        self.selection = selection
        self.ranges = selection.ranges
        self.n = selection.count
        self.tally0 = dict(tally0)
        self.tally1 = dict(tally1)
        self.meta = dict(meta)
        self._mask: Optional[np.ndarray] = None
        self._prefix: Optional[np.ndarray] = None
        if sum(tally0.values()) != self.n or sum(tally1.values()) != self.n:
            raise MarkovMimicError("endpoint tallies do not sum to the family size")

    @property
    def representatives(self) -> tuple[Fraction, ...]:
        return tuple(self.meta["representatives"])

    def _mask_prefix(self) -> tuple[np.ndarray, np.ndarray]:
        if self._mask is None:
            mask = np.zeros(self.n1 + 1, dtype=bool)
            for lo, hi in self.ranges:
                mask[lo : hi + 1] = True
            self._mask = mask
            self._prefix = np.cumsum(mask, dtype=np.int64)
        return self._mask, self._prefix

    def indices(self):
        for lo, hi in self.ranges:
            yield from range(lo, hi + 1)

    def map_values(self, d: int) -> SampledFunction:
        """The d-th composition map y -> h(y, d/N1) sampled on the grid."""
        prof = self.profile
        t = d / self.n1
        cum = prof.cum
        bcount = prof.count
        jj = np.clip(np.sum(cum < t, axis=1) - 1, 0, bcount - 1)
        rows = np.arange(self.grid.size)
        left = cum[rows, jj]
        right = cum[rows, jj + 1]
        x = np.array([float(v) for v in prof.schedule.targets])[jj]
        w = right - left
        dl = float(self.delta)
        with np.errstate(divide="ignore", invalid="ignore"):
            p = np.where(w > 0, x * np.minimum(1.0, w / (2 * dl)), 0.0)
            h = np.minimum(x * (t - left) / dl, x * (right - t) / dl)
        h = np.clip(np.where((x > 0) & (w > 0), h, 0.0), 0.0, p)
        return SampledFunction(self.grid, h)

    def endpoint_value(self, side: int, d: int) -> Fraction:
        return self.profile.endpoint_value(side, Fraction(d, self.n1))

    def sums(self, f: SampledFunction) -> FamilySums:
        """All per-y aggregates of f in one pass over the block structure."""
        grid = self.grid
        if f.grid.m != grid.m:
            raise MarkovMimicError("function grid does not match the family grid")
        fv = f.values
        m = grid.m
        prof = self.profile
        cum = prof.cum
        targets_f = np.array([float(x) for x in prof.schedule.targets])
        t_idx = np.array([round(float(x) * m) for x in prof.schedule.targets])
        f_at = fv[t_idx]
        dl = float(self.delta)
        n1 = self.n1
        mask, prefix = self._mask_prefix()
        cum_f = np.concatenate([[0.0], np.cumsum((fv[:-1] + fv[1:]) / 2)]) / m

        def f_antideriv(p: np.ndarray) -> np.ndarray:
            i = np.minimum((p * m + 1e-12).astype(int), m - 1)
            frac = p - i / m
            slope = (fv[i + 1] - fv[i]) * m
            return cum_f[i] + fv[i] * frac + slope * frac * frac / 2

        ysz = grid.size
        sel = np.zeros(ysz)
        full = np.zeros(ysz)
        integ = np.zeros(ysz)
        sched = np.zeros(ysz)
        for yi in range(ysz):
            row = cum[yi]
            w = np.diff(row)
            sched[yi] = float(w @ f_at)
            pos = w > 1e-15
            x = targets_f
            zt = pos & (x == 0.0)
            integ[yi] += float(w[zt].sum()) * fv[0]
            wide = pos & (x > 0) & (w >= 2 * dl)
            narrow = pos & (x > 0) & ~wide
            if np.any(wide):
                integ[yi] += float(
                    ((w[wide] - 2 * dl) * f_at[wide]).sum()
                    + (2 * dl / x[wide] * f_antideriv(x[wide])).sum()
                )
            if np.any(narrow):
                peak = x[narrow] * w[narrow] / (2 * dl)
                integ[yi] += float((2 * dl / x[narrow] * f_antideriv(peak)).sum())
            lo = np.floor(row * n1 + 1e-9).astype(np.int64)
            direct_d, direct_h = [], []
            for j in np.nonzero(lo[1:] > lo[:-1])[0]:
                blo, bhi = int(lo[j]), int(lo[j + 1])
                xj = targets_f[j]
                if xj == 0.0:
                    full[yi] += (bhi - blo) * fv[0]
                    sel[yi] += int(prefix[bhi] - prefix[blo]) * fv[0]
                    continue
                plo = max(blo + 1, int(math.ceil((row[j] + dl) * n1 - 1e-9)))
                phi = min(bhi, int(math.floor((row[j + 1] - dl) * n1 + 1e-9)))
                if w[j] >= 2 * dl and plo <= phi:
                    full[yi] += (phi - plo + 1) * f_at[j]
                    sel[yi] += int(prefix[phi] - prefix[plo - 1]) * f_at[j]
                    dd = np.concatenate(
                        [np.arange(blo + 1, plo), np.arange(phi + 1, bhi + 1)]
                    )
                else:
                    dd = np.arange(blo + 1, bhi + 1)
                if dd.size:
                    t = dd / n1
                    pj = xj * min(1.0, w[j] / (2 * dl))
                    h = np.minimum(xj * (t - row[j]) / dl, xj * (row[j + 1] - t) / dl)
                    direct_d.append(dd)
                    direct_h.append(np.clip(h, 0.0, pj))
            if direct_d:
                dd = np.concatenate(direct_d)
                hh = np.concatenate(direct_h)
                vals = np.interp(hh, grid.points, fv)
                full[yi] += float(vals.sum())
                sel[yi] += float(vals[mask[dd]].sum())
        return FamilySums(sel, full, integ, sched)

    def average(self, f: SampledFunction) -> SampledFunction:
        """(1/N) sum over retained d of f(h(., d/N1))."""
        return SampledFunction(self.grid, self.sums(f).selected / self.n)

    def to_json_meta(self) -> dict:
        def q(x: Fraction) -> str:
            return f"{x.numerator}/{x.denominator}"

        return {
            "n1": self.n1,
            "count": self.n,
            "delta": q(self.delta),
            "delta0": q(self.delta0),
            "ranges": [[lo, hi] for lo, hi in self.ranges],
            "representatives": [q(x) for x in self.representatives],
            "tally0": {q(k_): v for k_, v in sorted(self.tally0.items())},
            "tally1": {q(k_): v for k_, v in sorted(self.tally1.items())},
            "case": self.selection.case,
            "exclusions": {
                k_: (v if not isinstance(v, dict) else {str(c): x for c, x in v.items()})
                for k_, v in self.selection.exclusions.items()
            },
            "grid_m": self.grid.m,
        }

    def to_csv(self, path, max_rows: int = DEFAULT_FAMILY_ROW_CAP):
        """Materialize the map matrix, one map per row; guarded by a row cap."""
        if self.n > max_rows:
            raise CapExceededError(
                f"family has {self.n} maps, above the CSV cap {max_rows}; "
                "the JSON metadata still identifies the family exactly"
            )
        import csv as _csv

        with open(path, "w", newline="") as fh:
            wr = _csv.writer(fh)
            for d in self.indices():
                wr.writerow([f"{v:.12g}" for v in self.map_values(d).values])


def assemble_family(
    profile: TransportProfile,
    selection: SelectionResult,
    n1: int,
    delta0,
    meta: Optional[dict] = None,
) -> EigenvalueFamily:
    """Bind a profile and an index selection into a family with exact tallies."""
    if not selection.ranges:
        raise StageError("assemble", "empty index selection")
    meta = dict(meta or {})
    reps = meta.get("representatives")
    if reps is None:
        reps = sorted(set(profile.schedule.targets) | {Fraction(0), Fraction(1)})
        meta["representatives"] = tuple(reps)
    tally0 = _exact_endpoint_tally(profile, 0, selection.ranges, n1, reps)
    tally1 = _exact_endpoint_tally(profile, 1, selection.ranges, n1, reps)
    return EigenvalueFamily(profile, n1, Fraction(delta0), selection, tally0, tally1, meta)


RATIO_TOL = 1e-7


def _point_mass_snapshot(n: int) -> RationalSnapshot:
    """Snapshot of the equal-ratio case: all mass at 0 for y=0, at 1 for y=1."""
    r = tuple(Fraction(1 if i == 0 else 0) for i in range(n))
    s = tuple(Fraction(1 if i == n - 1 else 0) for i in range(n))
    return RationalSnapshot(r, s, Fraction(1))


def approximate(
    kernel: MarkovKernel,
    functions: Sequence[SampledFunction],
    eps: float,
    spec_in: SubspaceSpec,
    spec_out: SubspaceSpec,
    n1_override: Optional[int] = None,
    n1_cap: int = DEFAULT_N1_CAP,
):
    """Full pipeline from kernel to certified family.

    Returns an EigenvalueFamily whose average reproduces the kernel within
    eps on the given functions while preserving the boundary-ratio relation
    exactly.  If the assembled family fails its own certificate, the failing
    Certificate is returned instead so callers can inspect the budgets.
    Stage failures raise StageError with the stage name.
    """
    from . import certify as _certify
    from .kernels import validate_kernel as _vk
    from .relations import feasibility as _feas

    grid = kernel.grid
    alpha, beta = spec_in.alpha, spec_out.alpha
    if eps <= 0:
        raise StageError("input", "eps must be positive")
    for f in functions:
        if f.grid.m != grid.m:
            raise StageError("input", "function grid does not match the kernel grid")
        if abs(f.values[0] - float(alpha) * f.values[-1]) > 1e-9 * (1 + abs(f.values[-1])):
            raise StageError("input", "function is not a subspace member")
    report = _vk(kernel)
    if not report.passed:
        raise StageError("validate", f"kernel is not row-stochastic: {report}")
    verdict = _feas(alpha, beta)
    if not verdict:
        raise StageError("feasibility", f"infeasible: beta < alpha ({verdict.reason})")
    beta_emp, defect = induced_ratio(kernel, spec_in)
    if abs(beta_emp - float(beta)) > RATIO_TOL or defect > RATIO_TOL:
        raise StageError(
            "ratio",
            f"kernel maps the subspace with ratio {beta_emp:.9g} (defect "
            f"{defect:.3g}), not the requested beta = {beta}",
        )
    mode = "same" if alpha == beta else "cross"
    a, k, b = realize_integers(alpha, beta)

    delta0 = modulus_delta(functions, eps / 4)
    points = dense_points(delta0, grid)
    partition = make_partition(points, grid)
    n = partition.n_cells
    field = build_coefficients(kernel, partition, functions, eps)

    if mode == "same":
        mass0, mass1, witness = concentration_check(kernel, spec_in)
        if witness is not None or min(mass0, mass1) < 1 - 1e-9:
            raise StageError(
                "concentration",
                f"endpoint measures not concentrated (masses {mass0:.6g}, "
                f"{mass1:.6g}); the kernel does not preserve the subspace",
            )
        snapshot = _point_mass_snapshot(n)
        tau = 0
        delta = choose_delta(mode, eps, functions, n, tau, a, k, b)
    else:
        masses = field.endpoint_masses()
        prov = (
            tuple(Fraction(v) for v in masses.mu0_cells),
            tuple(Fraction(v) for v in masses.mu1_cells),
        )
        tau = sum(1 for v in masses.mu1_cells[1:-1] if v > 1e-9)
        delta = choose_delta(mode, eps, functions, n, tau, a, k, b, prov)
        snapshot = None
        for _ in range(8):
            eta = delta / n
            snapshot = rational_snapshot(masses, eta, alpha, beta)
            tau = sum(1 for v in snapshot.s[1:-1] if v > 0)
            delta2 = choose_delta(
                mode, eps, functions, n, tau, a, k, b, (snapshot.r, snapshot.s)
            )
            if delta2 == delta:
                break
            delta = delta2
        else:
            raise StageError("delta", "ramp width failed to stabilize")

    field = snap_endpoints(field, snapshot)
    err1 = step_one_error(kernel, field, functions)
    if err1 >= eps / 4:
        raise StageError(
            "snapshot",
            f"endpoint snapping pushed the step-one error to {err1:.3g} "
            f">= eps/4 = {eps / 4:.3g}",
        )

    schedule = (
        BlockSchedule.from_field(field)
        if mode == "same"
        else interleave_coefficients(field)
    )
    if n1_override is not None:
        base = math.lcm(delta.denominator, *snapshot.denominators())
        if n1_override % base or n1_override * delta * Fraction(delta0) < 1:
            raise StageError(
                "modulus", f"override N1 = {n1_override} incompatible with delta/eta"
            )
        n1 = n1_override
    else:
        n1 = select_modulus_N1(delta, delta0, snapshot.denominators(), cap=n1_cap)
    profile = build_profile(schedule, delta)
    if mode == "same":
        selection = select_indices_same(n1, delta)
    else:
        selection = select_indices_cross(profile, snapshot, n1, delta, tau, a, k, b)
    meta = {
        "alpha": alpha,
        "beta": beta,
        "a": a,
        "k": k,
        "b": b,
        "mode": mode,
        "tau": tau,
        "n_cells": n,
        "representatives": tuple(partition.representatives),
        "eps": float(eps),
    }
    family = assemble_family(profile, selection, n1, delta0, meta)
    cert = _certify.evaluate(kernel, family, functions, eps, alpha, beta)
    if not cert.passed:
        return cert
    family.certificate = cert
    return family

