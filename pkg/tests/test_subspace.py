"""Boundary-ratio subspaces: integer realizations, decomposition, extendibility."""

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from markov_mimic import (
    Grid,
    InfeasibleError,
    MarkovMimicError,
    SampledFunction,
    SubspaceSpec,
    apply,
    check_extendibility,
    decompose,
    extend_map,
    from_composition,
    realize_integers,
    test_function as ramp_function,
)


class TestSubspaceSpec:
    def test_from_alpha(self):
        spec = SubspaceSpec.from_alpha(Fraction(1, 2))
        assert (spec.a, spec.k) == (1, 1)
        spec = SubspaceSpec.from_alpha(Fraction(5, 7))
        assert (spec.a, spec.k) == (5, 2)

    def test_rejects_bad_alpha(self):
        with pytest.raises(MarkovMimicError):
            SubspaceSpec.from_alpha(Fraction(0))
        with pytest.raises(MarkovMimicError):
            SubspaceSpec.from_alpha(Fraction(3, 2))
        with pytest.raises(MarkovMimicError):
            SubspaceSpec(Fraction(1, 2), 2, 1)

    def test_is_member(self, grid100, spec_half):
        f = SampledFunction(grid100, (1 + grid100.points) / 2)
        assert spec_half.is_member(f)
        assert spec_half.is_member(f, exact=True)
        assert not spec_half.is_member(SampledFunction(grid100, grid100.points**2))


class TestRealizeIntegers:
    def test_equal_halves(self):
        assert realize_integers(Fraction(1, 2), Fraction(1, 2)) == (1, 1, 1)

    def test_half_to_five_sevenths(self):
        assert realize_integers(Fraction(1, 2), Fraction(5, 7)) == (2, 2, 5)

    def test_third_to_three_fifths(self):
        assert realize_integers(Fraction(1, 3), Fraction(3, 5)) == (1, 2, 3)

    def test_infeasible_order(self):
        with pytest.raises(InfeasibleError):
            realize_integers(Fraction(1, 2), Fraction(1, 4))

    def test_out_of_range(self):
        with pytest.raises(MarkovMimicError):
            realize_integers(Fraction(0), Fraction(1, 2))

    @given(
        an=st.integers(1, 20),
        ad=st.integers(2, 21),
        bn=st.integers(1, 20),
        bd=st.integers(2, 21),
    )
    @settings(max_examples=60, deadline=None)
    def test_realization_reproduces_ratios(self, an, ad, bn, bd):
        alpha, beta = Fraction(an, an + ad), Fraction(bn, bn + bd)
        if beta < alpha:
            alpha, beta = beta, alpha
        a, k, b = realize_integers(alpha, beta)
        assert Fraction(a, a + k) == alpha
        assert Fraction(b, b + k) == beta
        assert a >= 1 and k >= 1 and b >= a


class TestDecompose:
    def test_identity_function(self, grid100, spec_half):
        f = SampledFunction(grid100, grid100.points)
        lam, g = decompose(f, spec_half)
        assert lam == -1.0
        assert np.allclose(g.values, grid100.points + 1)
        assert spec_half.is_member(g)

    @given(seed=st.integers(0, 10_000))
    @settings(max_examples=30, deadline=None)
    def test_split_is_exact_and_member(self, seed):
        rng = np.random.default_rng(seed)
        grid = Grid(40)
        spec = SubspaceSpec.from_alpha(Fraction(2, 7))
        f = SampledFunction(grid, rng.uniform(-2, 2, grid.size))
        lam, g = decompose(f, spec)
        assert np.allclose(f.values, g.values + lam)
        assert abs(g.values[0] - float(spec.alpha) * g.values[-1]) < 1e-12


class TestTestFunction:
    def test_lower_ramp(self, grid100, spec_half):
        e = ramp_function("lower", Fraction(1, 2), spec_half, grid100)
        assert e.values[0] == 0.5
        assert e.values[50] == 1.0
        assert e.values[-1] == 1.0
        assert e.values[25] == pytest.approx(0.75)
        assert spec_half.is_member(e)

    def test_upper_ramp(self, grid100, spec_half):
        g = ramp_function("upper", Fraction(1, 4), spec_half, grid100)
        assert g.values[0] == 1.0
        assert g.values[75] == 1.0
        assert g.values[-1] == 2.0
        assert spec_half.is_member(g)

    def test_upper_ramp_zero_width(self, grid100, spec_half):
        g = ramp_function("upper", 0, spec_half, grid100)
        assert np.all(g.values[:-1] == 1.0)
        assert g.values[-1] == 2.0

    def test_bad_parameters(self, grid100, spec_half):
        with pytest.raises(MarkovMimicError):
            ramp_function("lower", 0, spec_half, grid100)
        with pytest.raises(MarkovMimicError):
            ramp_function("upper", 1, spec_half, grid100)
        with pytest.raises(MarkovMimicError):
            ramp_function("sideways", Fraction(1, 2), spec_half, grid100)


class TestExtendMap:
    def test_extension_is_unital(self, grid100, spec_half):
        kernel = from_composition(SampledFunction(grid100, grid100.points**2))
        extended = extend_map(lambda g: apply(kernel, g), spec_half, grid100)
        one = SampledFunction.constant(grid100, 1.0)
        assert np.allclose(extended(one).values, 1.0)

    def test_extension_agrees_on_members(self, grid100, spec_half):
        kernel = from_composition(SampledFunction(grid100, grid100.points**2))
        phi = lambda g: apply(kernel, g)  # noqa: E731
        extended = extend_map(phi, spec_half, grid100)
        f = SampledFunction(grid100, (1 + grid100.points) / 2)
        assert np.allclose(extended(f).values, phi(f).values)

    def test_rejects_nonlinear_map(self, grid100, spec_half):
        def phi(g):
            return SampledFunction(grid100, g.values**2)

        with pytest.raises(MarkovMimicError):
            extend_map(phi, spec_half, grid100)


class TestCheckExtendibility:
    def test_composition_map_extends(self, grid100, spec_half):
        kernel = from_composition(SampledFunction(grid100, grid100.points**2))
        verdict, witness = check_extendibility(
            lambda g: apply(kernel, g), spec_half, grid100
        )
        assert verdict and witness is None

    def test_point_evaluation_does_not_extend(self, grid100, spec_half):
        a, k = spec_half.a, spec_half.k
        ray = SampledFunction(grid100, (a + k * grid100.points) / (a + k))

        def phi(g):
            return ray * float(g(0.5))

        verdict, witness = check_extendibility(phi, spec_half, grid100)
        assert not verdict
        assert witness is not None
        # the witness is an upper ramp whose image dips below 1
        assert float(np.min(phi(witness).values)) < 1 - 1e-9

    def test_point_evaluation_extension_minimum(self, grid100, spec_half):
        """The canonical extension attains -a*k/(a+k) on a suitable hat function."""
        a, k = spec_half.a, spec_half.k
        ray = SampledFunction(grid100, (a + k * grid100.points) / (a + k))

        def phi(g):
            return ray * float(g(0.5))

        extended = extend_map(phi, spec_half, grid100)
        x0 = 0.5
        fv = np.where(
            grid100.points <= x0, 0.0, k / (1 - x0) * (grid100.points - 1) + k
        )
        image = extended(SampledFunction(grid100, fv))
        assert float(np.min(image.values)) == pytest.approx(
            -a * k / (a + k), abs=1 / grid100.m
        )
