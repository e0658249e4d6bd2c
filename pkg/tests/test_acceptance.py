"""Acceptance criteria: end-to-end guarantees at their stated tolerances.

Each test prints one PASS line once its assertions have all held; a failing
assertion surfaces as a normal pytest failure for that criterion.
"""

import math
import time
from fractions import Fraction

import numpy as np
import pytest

from markov_mimic import (
    CellMasses,
    Grid,
    MarkovKernel,
    SampledFunction,
    SubspaceSpec,
    approximate,
    boundary_tally,
    certify_boundary,
    check_extendibility,
    check_relations,
    concentration_check,
    extend_map,
    feasibility,
    from_composition,
    boundary_count_identity,
    rational_snapshot,
    snapshot_oracle,
)
from markov_mimic.certify import Certificate
from markov_mimic.relations import _relation_r
from conftest import member_line, member_quad, kernel_square, kernel_two_map

EPS_1, EPS_2 = 0.05, 0.1
GRID_M = 400


@pytest.fixture(scope="module")
def probe_functions(grid400):
    return [member_line(grid400), member_quad(grid400)]


@pytest.fixture(scope="module")
def spec_out_57():
    return SubspaceSpec.from_alpha(Fraction(5, 7))


@pytest.fixture(scope="module")
def run_one(grid400, probe_functions, spec_half):
    t0 = time.time()
    family = approximate(
        kernel_square(grid400), probe_functions, EPS_1, spec_half, spec_half
    )
    elapsed = time.time() - t0
    assert not isinstance(family, Certificate)
    return family, elapsed


@pytest.fixture(scope="module")
def run_two(grid400, probe_functions, spec_half, spec_out_57):
    t0 = time.time()
    family = approximate(
        kernel_two_map(grid400), probe_functions, EPS_2, spec_half, spec_out_57
    )
    elapsed = time.time() - t0
    assert not isinstance(family, Certificate)
    return family, elapsed


def test_criterion_1_same_subspace_square_map(run_one):
    family, elapsed = run_one
    cert = family.certificate
    assert elapsed < 60
    assert cert.sup_error < EPS_1
    assert cert.boundary_ok
    # frozen construction parameters for this instance
    assert family.delta0 == Fraction(3, 200)
    assert family.meta["n_cells"] == 68
    assert family.delta == Fraction(1, 50000)
    assert family.n1 == 3_350_000
    assert family.n == 3_349_867
    # the boundary relation holds exactly, not within tolerance
    tally = boundary_tally(family)
    assert tally.c0 == {Fraction(0): family.n}
    assert tally.c1 == {Fraction(1): family.n}
    print(
        f"\nACCEPTANCE criterion 1: PASS - sup_error {cert.sup_error:.6g} < {EPS_1}, "
        f"boundary exact, {elapsed:.2f}s"
    )


def test_criterion_2_cross_subspace_two_map_kernel(run_two):
    family, elapsed = run_two
    cert = family.certificate
    assert elapsed < 300
    assert cert.sup_error < EPS_2
    assert cert.boundary_ok
    assert family.selection.case == "II"
    assert family.delta0 == Fraction(11, 400)
    assert family.meta["n_cells"] == 38
    assert family.delta == Fraction(1, 20000)
    assert family.n1 == 740_000
    assert family.n == 737_410
    excl = family.selection.exclusions
    assert (excl["m_1"], excl["m_n"], excl["z_n"]) == (1480, 1110, 2590)
    # zero-residual identities in exact integer arithmetic
    alpha, beta = Fraction(1, 2), Fraction(5, 7)
    tally = boundary_tally(family)
    lhs = alpha * tally.c0.get(Fraction(0), 0) + tally.c0.get(Fraction(1), 0)
    rhs = beta * (alpha * tally.c1.get(Fraction(0), 0) + tally.c1.get(Fraction(1), 0))
    assert lhs == rhs
    assert certify_boundary(tally, alpha, beta)
    print(
        f"\nACCEPTANCE criterion 2: PASS - sup_error {cert.sup_error:.6g} < {EPS_2}, "
        f"count identities exact, {elapsed:.2f}s"
    )


def test_criterion_3_concentration_screen(spec_half):
    grid = Grid(50)
    rng = np.random.default_rng(11)
    clean_ok = 0
    for _ in range(50):
        vals = rng.uniform(0, 1, grid.size)
        vals[0], vals[-1] = 0.0, 1.0
        kernel = from_composition(SampledFunction(grid, vals))
        mass0, mass1, witness = concentration_check(kernel, spec_half)
        assert (mass0, mass1) == (1.0, 1.0) and witness is None
        clean_ok += 1
    witnessed = 0
    for _ in range(50):
        vals = rng.uniform(0, 1, grid.size)
        vals[0], vals[-1] = 0.0, 1.0
        kernel = from_composition(SampledFunction(grid, vals))
        rows = kernel.rows.copy()
        u = rng.integers(1, grid.size - 1)
        rows[0] = 0.0
        rows[0, 0] = 0.9
        rows[0, u] = 0.1
        leaky = MarkovKernel(grid, rows)
        mass0, _, witness = concentration_check(leaky, spec_half)
        assert mass0 == pytest.approx(0.9)
        assert witness is not None
        out = leaky.rows @ witness.values
        defect = abs(out[0] - float(spec_half.alpha) * out[-1])
        assert defect >= 0.01
        witnessed += 1
    print(
        f"\nACCEPTANCE criterion 3: PASS - {clean_ok}/50 clean kernels concentrated, "
        f"{witnessed}/50 leaky kernels produced witnesses with defect >= 0.01"
    )


def test_criterion_4_infeasible_pair():
    alpha, beta = Fraction(1, 2), Fraction(1, 4)
    verdict = feasibility(alpha, beta)
    assert not verdict
    # symbolic forcing: the first-cell relation demands mu0(X_1) >= shift > 1
    shift = (1 - beta) / (1 - alpha)
    assert shift == Fraction(3, 2) > 1
    # so no nonnegative mass vector summing to 1 can satisfy it: the residual
    # of the first-cell relation is at least shift - 1 for every valid instance
    rng = np.random.default_rng(4)
    floor = float(shift - 1)
    for _ in range(1000):
        n = int(rng.integers(2, 6))
        masses = CellMasses(
            tuple(rng.dirichlet(np.ones(n))), tuple(rng.dirichlet(np.ones(n)))
        )
        res = check_relations(masses, alpha, beta)
        assert res["first_cell"] >= floor - 1e-9
    print(
        "\nACCEPTANCE criterion 4: PASS - (1/2, 1/4) infeasible; first-cell "
        f"residual >= {floor} on 1000 random mass vectors"
    )


def test_criterion_5_non_extendible_point_evaluation(grid400, spec_half):
    a, k = spec_half.a, spec_half.k
    ray = SampledFunction(grid400, (a + k * grid400.points) / (a + k))

    def phi(g):
        return ray * float(g(0.5))

    verdict, witness = check_extendibility(phi, spec_half, grid400)
    assert not verdict and witness is not None
    out = phi(witness)
    assert float(np.min(out.values)) < 1 - 1e-9
    extended = extend_map(phi, spec_half, grid400)
    fv = np.where(grid400.points <= 0.5, 0.0, 2 * k * (grid400.points - 1) + k)
    image = extended(SampledFunction(grid400, fv))
    target = -a * k / (a + k)
    assert float(np.min(image.values)) == pytest.approx(target, abs=1 / GRID_M)
    print(
        f"\nACCEPTANCE criterion 5: PASS - witness found, extension minimum "
        f"{float(np.min(image.values)):.6g} within 1/{GRID_M} of {target}"
    )


def test_criterion_6_snapshot_oracle_agreement():
    rng = np.random.default_rng(6)
    ratio_pool = [
        (Fraction(1, 2), Fraction(3, 4)),
        (Fraction(1, 2), Fraction(5, 7)),
        (Fraction(1, 3), Fraction(3, 5)),
        (Fraction(2, 5), Fraction(2, 3)),
    ]
    eta = Fraction(1, 10)
    checked = 0
    while checked < 200:
        n = int(rng.integers(3, 5))
        q = int(rng.integers(2, 51))
        parts = rng.multinomial(q, np.ones(n) / n)
        s = [Fraction(int(c), q) for c in parts]
        alpha, beta = ratio_pool[rng.integers(len(ratio_pool))]
        r = _relation_r(s, alpha, beta)
        if not all(0 <= v <= 1 for v in r):
            continue
        masses = CellMasses(tuple(float(v) for v in r), tuple(float(v) for v in s))
        snap = rational_snapshot(masses, eta, alpha, beta)
        snap.verify_relations(alpha, beta)
        found = snapshot_oracle(masses, alpha, beta, eta, 50)
        assert any(c.r == snap.r and c.s == snap.s for c in found)
        # scaled integer counts pass the boundary identity exactly
        scale = math.lcm(*snap.denominators())
        ident = boundary_count_identity(
            [int(v * scale) for v in snap.r[1:-1]],
            int(snap.r[0] * scale),
            int(snap.r[-1] * scale),
            [int(v * scale) for v in snap.s[1:-1]],
            int(snap.s[0] * scale),
            int(snap.s[-1] * scale),
            alpha,
            beta,
        )
        assert ident
        checked += 1
    print(
        "\nACCEPTANCE criterion 6: PASS - 200 random instances agree with the "
        "brute-force oracle and pass the count identity"
    )


def test_criterion_7_doubled_modulus(run_one, grid400, probe_functions, spec_half):
    family, _ = run_one
    doubled = 2 * family.n1
    t0 = time.time()
    family2 = approximate(
        kernel_square(grid400),
        probe_functions,
        EPS_1,
        spec_half,
        spec_half,
        n1_override=doubled,
    )
    elapsed = time.time() - t0
    assert not isinstance(family2, Certificate)
    cert = family2.certificate
    assert family2.n1 == doubled
    assert cert.sup_error < EPS_1
    assert cert.boundary_ok
    tally = boundary_tally(family2)
    assert certify_boundary(tally, spec_half.alpha, spec_half.alpha)
    print(
        f"\nACCEPTANCE criterion 7: PASS - N1 doubled to {doubled}, sup_error "
        f"{cert.sup_error:.6g} < {EPS_1}, boundary exact, {elapsed:.2f}s"
    )


def test_criterion_8_budget_decomposition(run_one, run_two):
    for label, (family, _), eps in (("1", run_one, EPS_1), ("2", run_two, EPS_2)):
        budgets = family.certificate.budgets
        bound = eps / 4 + 2 / GRID_M
        for b in budgets:
            assert b <= bound
        assert family.certificate.sup_error <= sum(budgets) + 1e-9
    print(
        f"\nACCEPTANCE criterion 8: PASS - all budgets within eps/4 + 2/M "
        f"on both reference runs"
    )


def test_criterion_9_determinism_across_kernels(grid400, probe_functions, spec_half):
    fam_a = approximate(
        kernel_square(grid400), probe_functions, EPS_1, spec_half, spec_half
    )
    cube = from_composition(SampledFunction(grid400, grid400.points**3))
    fam_b = approximate(cube, probe_functions, EPS_1, spec_half, spec_half)
    assert not isinstance(fam_a, Certificate) and not isinstance(fam_b, Certificate)
    assert fam_a.n == fam_b.n
    assert fam_a.n1 == fam_b.n1
    assert fam_a.delta == fam_b.delta
    assert fam_a.ranges == fam_b.ranges
    print(
        f"\nACCEPTANCE criterion 9: PASS - two kernels with identical (F, eps) "
        f"produce identical N = {fam_a.n}"
    )
