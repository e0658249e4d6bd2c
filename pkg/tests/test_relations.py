"""Cell-mass relations, rational snapshots, count identities and the modulus."""

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from markov_mimic import (
    CapExceededError,
    CellMasses,
    InfeasibleError,
    MarkovMimicError,
    RationalSnapshot,
    boundary_count_identity,
    check_relations,
    feasibility,
    make_partition,
    rational_snapshot,
    select_modulus_N1,
    snapshot_oracle,
)
from markov_mimic.kernels import endpoint_measures
from conftest import random_masses


class TestCellMasses:
    def test_validation(self):
        with pytest.raises(MarkovMimicError):
            CellMasses((1.0,), (1.0,))
        with pytest.raises(MarkovMimicError):
            CellMasses((0.5, 0.6), (0.5, 0.5))
        with pytest.raises(MarkovMimicError):
            CellMasses((-0.1, 1.1), (0.5, 0.5))

    def test_n(self, toy_masses):
        assert toy_masses.n == 3


class TestCheckRelations:
    def test_two_map_kernel_residuals_vanish(self, grid100, kernel_two_map_100):
        part = make_partition([Fraction(0), Fraction(1, 2), Fraction(1)], grid100)
        mu0, mu1 = endpoint_measures(kernel_two_map_100)
        m0 = tuple(float(mu0.weights[part.cell_indices(c)].sum()) for c in range(3))
        m1 = tuple(float(mu1.weights[part.cell_indices(c)].sum()) for c in range(3))
        res = check_relations(CellMasses(m0, m1), Fraction(1, 2), Fraction(5, 7))
        assert set(res) == {"interior_1", "boundary_pair", "first_cell", "last_cell"}
        assert max(res.values()) < 1e-12

    def test_toy_masses(self, toy_masses):
        res = check_relations(toy_masses, Fraction(1, 2), Fraction(3, 4))
        assert max(res.values()) < 1e-12

    @given(seed=st.integers(0, 100_000), n=st.integers(2, 6))
    @settings(max_examples=40, deadline=None)
    def test_constructed_masses_satisfy_relations(self, seed, n):
        rng = np.random.default_rng(seed)
        alpha, beta = Fraction(1, 3), Fraction(3, 5)
        masses = random_masses(rng, n, alpha, beta)
        if masses is None:
            return
        assert max(check_relations(masses, alpha, beta).values()) < 1e-9


class TestFeasibility:
    def test_infeasible_pair(self):
        verdict = feasibility(Fraction(1, 2), Fraction(1, 4))
        assert not verdict
        assert "> 1" in verdict.reason

    def test_feasible_pair(self):
        assert feasibility(Fraction(1, 2), Fraction(5, 7))
        assert feasibility(Fraction(1, 2), Fraction(1, 2))

    def test_out_of_range(self):
        with pytest.raises(MarkovMimicError):
            feasibility(Fraction(0), Fraction(1, 2))


class TestRationalSnapshot:
    def test_toy_exact_instance(self, toy_masses):
        snap = rational_snapshot(
            toy_masses, Fraction(1, 20), Fraction(1, 2), Fraction(3, 4)
        )
        assert snap.r == (Fraction(29, 40), Fraction(0), Fraction(11, 40))
        assert snap.s == (Fraction(3, 10), Fraction(0), Fraction(7, 10))
        snap.verify_relations(Fraction(1, 2), Fraction(3, 4))
        assert snap.denominators() == {40, 1, 10}

    def test_round_up_path(self):
        """Masses perturbed off any small rational force the fixed-denominator path."""
        alpha, beta = Fraction(1, 2), Fraction(3, 4)
        shift = alpha * (1 - beta) / (1 - alpha)
        base_s = np.array([3 / 10, 1 / 5, 1 / 2])
        bump = np.array([2e-10, -1e-10, -1e-10])
        mu1 = base_s + bump
        mu0 = np.empty(3)
        mu0[1] = float(beta) * mu1[1]
        mu0[2] = float(beta) * mu1[2] - float(shift)
        mu0[0] = 1 - mu0[1:].sum()
        masses = CellMasses(tuple(mu0), tuple(mu1))
        eta = Fraction(1, 30)
        snap = rational_snapshot(masses, eta, alpha, beta)
        snap.verify_relations(alpha, beta)
        # round-ups dominate within eta on each cell except the remainder cells
        for lo, v in zip(masses.mu1_cells[1:], snap.s[1:]):
            assert 0 <= float(v) - lo <= float(eta) + 1e-9
        for lo, v in zip(masses.mu0_cells[1:], snap.r[1:]):
            assert 0 <= float(v) - lo <= float(eta) + 1e-9
        assert abs(float(snap.r[0]) - masses.mu0_cells[0]) <= float(eta) + 1e-9

    def test_vanishing_last_cell_forces_exact_zero(self):
        alpha, beta = Fraction(1, 2), Fraction(3, 4)
        # s = (7/15, 1/5, 1/3) gives r = (17/20, 3/20, 0) exactly
        mu1 = (7 / 15 + 1e-10, 1 / 5, 1 / 3 - 1e-10)
        mu0 = (17 / 20, 3 / 20, 0.0)
        masses = CellMasses(mu0, mu1)
        snap = rational_snapshot(masses, Fraction(1, 30), alpha, beta)
        assert snap.r[-1] == 0
        assert snap.s[-1] == Fraction(1, 3)
        snap.verify_relations(alpha, beta)

    def test_rejects_relation_violations(self):
        masses = CellMasses((0.5, 0.5), (0.5, 0.5))
        with pytest.raises(MarkovMimicError):
            rational_snapshot(masses, Fraction(1, 10), Fraction(1, 2), Fraction(3, 4))

    def test_rejects_infeasible_ratios(self, toy_masses):
        with pytest.raises(InfeasibleError):
            rational_snapshot(toy_masses, Fraction(1, 10), Fraction(1, 2), Fraction(1, 4))

    def test_rejects_bad_eta(self, toy_masses):
        with pytest.raises(MarkovMimicError):
            rational_snapshot(toy_masses, 0, Fraction(1, 2), Fraction(3, 4))

    def test_snapshot_type_validation(self):
        with pytest.raises(MarkovMimicError):
            RationalSnapshot((Fraction(1, 2),), (Fraction(1),), Fraction(1, 10))

    @given(seed=st.integers(0, 100_000))
    @settings(max_examples=40, deadline=None)
    def test_random_instances_verify_exactly(self, seed):
        rng = np.random.default_rng(seed)
        alpha, beta = Fraction(1, 2), Fraction(5, 7)
        masses = random_masses(rng, 4, alpha, beta)
        if masses is None or masses.mu0_cells[-1] < 1e-6:
            return
        eta = Fraction(1, 50)
        try:
            snap = rational_snapshot(masses, eta, alpha, beta)
        except (MarkovMimicError, InfeasibleError):
            return
        snap.verify_relations(alpha, beta)
        assert sum(snap.r) == 1 and sum(snap.s) == 1


class TestBoundaryCountIdentity:
    def test_sample_true(self):
        assert boundary_count_identity(
            [0], 29, 11, [0], 12, 28, Fraction(1, 2), Fraction(3, 4)
        )

    def test_sample_false(self):
        assert not boundary_count_identity(
            [0], 29, 0, [0], 12, 28, Fraction(1, 2), Fraction(3, 4)
        )

    def test_interior_mismatch(self):
        assert not boundary_count_identity(
            [5], 29, 11, [4], 12, 28, Fraction(1, 2), Fraction(3, 4)
        )

    def test_rejects_negative_counts(self):
        with pytest.raises(MarkovMimicError):
            boundary_count_identity([-1], 0, 0, [0], 0, 0, Fraction(1, 2), Fraction(3, 4))

    def test_rejects_length_mismatch(self):
        with pytest.raises(MarkovMimicError):
            boundary_count_identity([1, 2], 0, 0, [1], 0, 0, Fraction(1, 2), Fraction(3, 4))


class TestSelectModulusN1:
    def test_example(self):
        assert select_modulus_N1(Fraction(1, 100), Fraction(1, 10), {4}) == 1100

    def test_small_example(self):
        assert select_modulus_N1(Fraction(1, 2), Fraction(1), set()) == 4

    def test_cap(self):
        with pytest.raises(CapExceededError):
            select_modulus_N1(Fraction(1, 100), Fraction(1, 10), {10**9})

    def test_positivity(self):
        with pytest.raises(MarkovMimicError):
            select_modulus_N1(Fraction(0), Fraction(1, 10), set())

    @given(
        dn=st.integers(1, 9),
        dd=st.integers(10, 400),
        d0d=st.integers(2, 50),
        q=st.integers(1, 200),
    )
    @settings(max_examples=60, deadline=None)
    def test_divisibility_and_bound(self, dn, dd, d0d, q):
        delta = Fraction(dn, dd)
        if delta >= Fraction(1, 2):
            return
        delta0 = Fraction(1, d0d)
        try:
            n1 = select_modulus_N1(delta, delta0, {q})
        except CapExceededError:
            return
        base = math.lcm(delta.denominator, q)
        assert n1 % base == 0
        assert n1 * delta * delta0 > 1
        assert (n1 - base) * delta * delta0 <= 1  # minimality


class TestSnapshotOracle:
    def test_toy_agreement(self, toy_masses):
        alpha, beta, eta = Fraction(1, 2), Fraction(3, 4), Fraction(1, 10)
        snap = rational_snapshot(toy_masses, eta, alpha, beta)
        found = snapshot_oracle(toy_masses, alpha, beta, eta, 40)
        assert any(c.r == snap.r and c.s == snap.s for c in found)
        for cand in found:
            cand.verify_relations(alpha, beta)

    def test_size_limits(self, toy_masses):
        big = CellMasses((0.2,) * 5, (0.2,) * 5)
        with pytest.raises(MarkovMimicError):
            snapshot_oracle(big, Fraction(1, 2), Fraction(3, 4), Fraction(1, 10))
        with pytest.raises(MarkovMimicError):
            snapshot_oracle(
                toy_masses, Fraction(1, 2), Fraction(3, 4), Fraction(1, 10), 60
            )
