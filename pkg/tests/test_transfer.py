import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gapmap.function_space import (
    GridFunction,
    Indicator,
    grid,
    integral,
    lip_norm,
    random_lipschitz,
    sup_norm,
)
from gapmap.map_core import BranchKind, eval_branch, make_params, make_partition, power_tail
from gapmap.transfer import (
    PulledBack,
    TailBound,
    apply_L,
    apply_L_power,
    apply_Ln,
    apply_Ln_split,
    apply_M,
    lasota_yorke_constant,
    tail_bound,
)

M = 2**12


@pytest.fixture(scope="module")
def f_rand():
    return random_lipschitz(7, 1.0, 6, m=M)


class TestApplyLn:
    @pytest.mark.parametrize("n", [1, 3, 8])
    def test_constant(self, params, part, n):
        out = apply_Ln(params, part, n, GridFunction.constant(1.0, M))
        np.testing.assert_allclose(out.values, 4 * params.a(n), rtol=1e-14)

    @pytest.mark.parametrize("n", [1, 2, 5])
    def test_own_indicator_gives_derivative(self, params, part, n):
        b = part.branch(BranchKind.COS, n)
        chi = Indicator(b.image_left, b.image_right)
        x = grid(M)
        out = apply_Ln(params, part, n, chi, m=M)
        expected = params.a(n) * (2 + np.cos(4 * np.pi * n**4 * x))
        np.testing.assert_allclose(out.values, expected, atol=1e-15)

    def test_foreign_indicator_zero(self, params, part):
        b = part.branch(BranchKind.COS, 2)
        chi = Indicator(b.image_left, b.image_right)
        assert sup_norm(apply_Ln(params, part, 5, chi, m=M)) == 0.0

    def test_index_range(self, params, part, f_rand):
        with pytest.raises(ValueError):
            apply_Ln(params, part, 0, f_rand)
        with pytest.raises(ValueError):
            apply_Ln(params, part, params.n_max + 1, f_rand)

    def test_needs_grid_for_exact(self, params, part):
        with pytest.raises(ValueError):
            apply_Ln(params, part, 1, Indicator(0.1, 0.2))


class TestSplit:
    @pytest.mark.parametrize("n", [1, 4, 8])
    def test_consistency(self, params, part, f_rand, n):
        g1, g2 = apply_Ln_split(params, part, n, f_rand)
        Ln = apply_Ln(params, part, n, f_rand)
        a = params.a(n)
        assert np.max(np.abs(a * (g1.values + 2 * g2.values) - Ln.values)) <= 1e-12

    def test_constant_input(self, params, part):
        g1, g2 = apply_Ln_split(params, part, 3, GridFunction.constant(1.0, M))
        np.testing.assert_allclose(g1.values, 4.0)
        np.testing.assert_allclose(g2.values, 0.0, atol=1e-15)


class TestApplyM:
    def test_constant(self, params, part):
        out = apply_M(params, part, GridFunction.constant(1.0, M))
        np.testing.assert_allclose(out.values, params.j_len, rtol=1e-14)

    def test_bounds(self, params, part, f_rand):
        out = apply_M(params, part, f_rand)
        assert sup_norm(out) <= params.j_len * sup_norm(f_rand) * (1 + 1e-14)
        lip = lambda g: lip_norm(g) - sup_norm(g)  # noqa: E731
        assert lip(out) <= params.j_len**2 / params.N * lip(f_rand) * (1 + 1e-9)


class TestApplyL:
    def test_constant_up_to_tail(self, params, part):
        out, tb = apply_L(params, part, GridFunction.constant(1.0, M))
        assert np.max(np.abs(out.values - (1 - tb.sup_tail))) <= 1e-12

    def test_tail_scaled_by_norms(self, params, part, f_rand):
        _, tb = apply_L(params, part, f_rand)
        unit = tail_bound(params)
        assert tb.sup_tail == pytest.approx(unit.sup_tail * sup_norm(f_rand))
        assert tb.lip_tail == pytest.approx(unit.lip_tail * lip_norm(f_rand))

    def test_integral_preserved(self, params, part, f_rand):
        out, tb = apply_L(params, part, f_rand)
        assert abs(integral(out) - integral(f_rand)) <= tb.sup_tail + 1e-4

    def test_integral_preserved_fine(self, params, part):
        f = random_lipschitz(3, 1.0, 4, m=2**16)
        out, tb = apply_L(params, part, f)
        assert abs(integral(out) - integral(f)) <= tb.sup_tail + 1e-7

    def test_positivity_and_contraction(self, params, part):
        x = grid(M)
        f = GridFunction(1 + np.sin(6 * np.pi * x))
        out, _ = apply_L(params, part, f)
        assert np.all(out.values >= 0)
        assert sup_norm(out) <= sup_norm(f) * (1 + 1e-14)

    def test_duality_with_indicator(self, params, part, f_rand):
        # int L(chi_B) g over [0,1] equals int_B g o T for a branch image B
        b = part.branch(BranchKind.AFFINE, 1)
        chi = Indicator(b.image_left, b.image_right)
        out, _ = apply_L(params, part, chi, m=M)
        np.testing.assert_allclose(out.values, params.slope_J, rtol=1e-14)


@settings(max_examples=25, deadline=None)
@given(
    st.integers(0, 10**6),
    st.integers(0, 10**6),
    st.floats(-5, 5, allow_nan=False),
    st.floats(-5, 5, allow_nan=False),
)
def test_linearity(s1, s2, alpha, beta):
    p = make_params()
    part = make_partition(p)
    f = random_lipschitz(s1, 1.0, 4, m=512)
    g = random_lipschitz(s2, 1.0, 4, m=512)
    lhs, _ = apply_L(p, part, alpha * f + beta * g)
    rhs = alpha * apply_L(p, part, f)[0] + beta * apply_L(p, part, g)[0]
    scale = 1 + abs(alpha) + abs(beta)
    assert np.max(np.abs(lhs.values - rhs.values)) <= 1e-10 * scale


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(0, 100, allow_nan=False), min_size=3, max_size=40))
def test_positivity_property(vals):
    p = make_params()
    part = make_partition(p)
    out, _ = apply_L(p, part, GridFunction(vals))
    assert np.all(out.values >= 0)
    assert sup_norm(out) <= max(vals) * (1 + 1e-12)


class TestTailBound:
    def test_decreasing(self):
        vals = [tail_bound(make_params(n_max=n)) for n in (1, 2, 4, 8, 16, 32)]
        for a, b in zip(vals, vals[1:]):
            assert 0 <= b.sup_tail < a.sup_tail
            assert 0 <= b.lip_tail < a.lip_tail

    @pytest.mark.parametrize("n_max", [1, 2, 8, 50])
    def test_integral_bracket(self, n_max):
        p = make_params(n_max=n_max)
        assert tail_bound(p).sup_tail <= 4 * p.c / (2 * n_max**2) + 4 * p.c / n_max**3

    def test_matches_direct_sum(self):
        p = make_params(n_max=8)
        n = np.arange(9, 2 * 10**6, dtype=np.float64)
        # integral bracket midpoint for the n^-2 remainder past the cut
        rest = 1.0 / (n[-1] + 0.5)
        lip = math.fsum(p.c / n**3 * (32 * np.pi * n * p.c + 8)) + 32 * np.pi * p.c**2 * rest
        sup = 4 * p.c * math.fsum(n**-3.0)
        tb = tail_bound(p)
        assert tb.sup_tail == pytest.approx(sup, rel=1e-9)
        assert tb.lip_tail == pytest.approx(lip, rel=1e-6)

    def test_n_max_one(self):
        assert tail_bound(make_params(n_max=1)).sup_tail == pytest.approx(
            4 * 0.01 * power_tail(3, 1)
        )
        assert tail_bound(make_params(n_max=1)).sup_tail == pytest.approx(8.0823e-3, rel=1e-4)

    def test_scaled_and_dict(self):
        tb = TailBound(1.0, 2.0).scaled(3.0, 4.0)
        assert tb.to_dict() == {"sup_tail": 3.0, "lip_tail": 8.0}


def test_lasota_yorke_constant(params):
    assert lasota_yorke_constant(params) == pytest.approx(0.7265, abs=5e-4)
    assert lasota_yorke_constant(params) <= 0.75


class TestPower:
    def test_k_zero(self, params, part, f_rand):
        with pytest.raises(ValueError):
            apply_L_power(params, part, f_rand, 0)

    def test_one_step_matches_apply_L(self, params, part, f_rand):
        a, _ = apply_L_power(params, part, f_rand, 1)
        b, _ = apply_L(params, part, f_rand)
        np.testing.assert_array_equal(a.values, b.values)

    def test_constant_two_steps(self, params, part):
        out, tb = apply_L_power(params, part, GridFunction.constant(1.0, M), 2)
        assert np.max(np.abs(out.values - 1)) <= tb.sup_tail + 1e-12
        assert tb.sup_tail == pytest.approx(2 * tail_bound(params).sup_tail)

    def test_exact_path_two_steps(self, params, part):
        # L^2 of the indicator of v_J(I_n^(1)) is (|J|/N) v_n'
        n = 2
        v = part.branch(BranchKind.AFFINE, 0)
        b = part.branch(BranchKind.COS, n)
        lo = float(eval_branch(params, part, v, b.image_left))
        hi = float(eval_branch(params, part, v, b.image_right))
        out, tb = apply_L_power(params, part, Indicator(lo, hi), 2, m=M)
        x = grid(M)
        expected = params.slope_J * params.a(n) * (2 + np.cos(4 * np.pi * n**4 * x))
        np.testing.assert_allclose(out.values, expected, atol=1e-14)
        assert math.isinf(tb.lip_tail)

    def test_pulled_back_support(self, params, part):
        b = part.branch(BranchKind.SIN, 3)
        pb = PulledBack(params, part, Indicator(b.image_left, b.image_right))
        assert pb.support == pytest.approx((0.0, 1.0))
        assert len(pb.branches) == 1
