import math

import gmpy2
import pytest
from gmpy2 import mpc, mpfr
from hypothesis import given, settings, strategies as st

from abeluniv import (
    Poly,
    PrecisionContext,
    PrecisionExhaustedError,
    abel_identity_residual,
    cauchy_coefficient_bounds,
    dilate,
    eval_poly,
    partial_sums_at,
)
from abeluniv.numerics import real_from_hex, real_to_hex

from conftest import random_poly, unit


class TestEval:
    def test_sum_of_coefficients(self, ctx):
        p = Poly.from_values([1, 1, 1], ctx)
        assert eval_poly(p, 1) == 3

    def test_monomial_at_half(self, ctx):
        p = Poly.from_values([0, 0, 1], ctx)
        assert eval_poly(p, 0.5) == 0.25

    def test_matches_term_summation_at_quadrupled_precision(self, ctx, rng):
        p = random_poly(rng, 50, ctx)
        hi = PrecisionContext(4 * ctx.bits)
        for k in range(8):
            z = 0.9 * unit(rng.uniform(0, 2 * math.pi))
            got = eval_poly(p, z)
            with hi.activate():
                zz = mpc(z)
                acc = mpc(0)
                power = mpc(1)
                for j, c in enumerate(p.coeffs):
                    if j:
                        power *= zz
                    acc += mpc(c) * power
                err = abs(mpc(got) - acc)
            assert err <= mpfr(2) ** (-ctx.bits + 8)

    def test_nonfinite_coefficient_rejected(self, ctx):
        with pytest.raises(PrecisionExhaustedError):
            Poly.from_values([1, float("inf")], ctx)


class TestPartialSums:
    def test_running_sums(self, ctx):
        tr = partial_sums_at(Poly.from_values([1, 1, 1], ctx), 1)
        assert [complex(v) for v in tr.values] == [1, 2, 3]

    def test_telescoping_to_zero(self, ctx):
        tr = partial_sums_at(Poly.from_values([1, -1], ctx), 1)
        assert [complex(v) for v in tr.values] == [1, 0]

    def test_agrees_with_truncated_eval(self, ctx, rng):
        p = random_poly(rng, 40, ctx)
        z = 0.8 * unit(rng.uniform(0, 2 * math.pi))
        tr = partial_sums_at(p, z)
        for k in rng.sample(range(41), 5):
            direct = eval_poly(p.truncate(k), z)
            assert abs(complex(tr.values[k] - direct)) <= 1e-60

    def test_consecutive_difference_invariant(self, ctx, rng):
        p = random_poly(rng, 30, ctx)
        z = 0.9 * unit(1.234)
        tr = partial_sums_at(p, z)
        with ctx.activate():
            zz = mpc(z)
            power = mpc(1)
            ulp = mpfr(2) ** (-ctx.bits + 4)
            for k in range(1, 31):
                power *= zz
                term = p.coeffs[k] * power
                diff = tr.values[k] - tr.values[k - 1]
                scale = max(abs(tr.values[k]), abs(term), mpfr(1))
                assert abs(diff - term) <= ulp * scale


class TestAbelIdentity:
    def test_hand_checked_linear(self, ctx):
        p = Poly.from_values([1, 1], ctx)
        res = abel_identity_residual(p, 0.5, 1)
        assert res <= mpfr(2) ** (-ctx.bits + 16)

    def test_constant(self, ctx):
        p = Poly.from_values([3.5], ctx)
        for r, th in ((0.1, 0.3), (0.9, 2.0)):
            res = abel_identity_residual(p, r, ctx.unit_point(th))
            assert res <= mpfr(2) ** (-ctx.bits + 16)

    def test_random_high_degree(self, ctx, rng):
        p = random_poly(rng, 200, ctx)
        for _ in range(20):
            z = ctx.unit_point(rng.uniform(0, 2 * math.pi))
            res = abel_identity_residual(p, 0.97, z)
            assert res <= mpfr(2) ** (-ctx.bits + 16)

    def test_quadrupled_precision_oracle(self, ctx, rng):
        p = random_poly(rng, 60, ctx)
        hi = PrecisionContext(4 * ctx.bits)
        p_hi = Poly(p.coeffs, hi)
        res_hi = abel_identity_residual(p_hi, 0.9, hi.unit_point(0.77))
        assert res_hi <= mpfr(2) ** (-4 * ctx.bits + 16)

    def test_rejects_non_unimodular(self, ctx):
        p = Poly.from_values([1, 1], ctx)
        with pytest.raises(ValueError):
            abel_identity_residual(p, 0.5, 0.5)


class TestDilate:
    def test_monomial(self, ctx):
        q = dilate(Poly.from_values([0, 0, 1], ctx), 0.5)
        assert complex(q.coeffs[2]) == 0.25

    def test_identity_and_collapse(self, ctx, rng):
        p = random_poly(rng, 10, ctx)
        assert dilate(p, 1).coeffs == p.coeffs
        q = dilate(p, 0)
        assert q.degree() == 0 and q.coeffs[0] == p.coeffs[0]

    @given(
        r=st.floats(0.05, 0.99),
        s=st.floats(0.05, 0.99),
        seed=st.integers(0, 10 ** 6),
    )
    @settings(max_examples=120, deadline=None)
    def test_composition(self, r, s, seed):
        import random as _random
        ctx = PrecisionContext(256)
        p = random_poly(_random.Random(seed), 14, ctx)
        a = dilate(dilate(p, r), s)
        with ctx.activate():
            rs = mpfr(r) * mpfr(s)
        b = dilate(p, rs)
        with ctx.activate():
            tol = mpfr(2) ** (-ctx.bits + 8)
            for x, y in zip(a.coeffs, b.coeffs):
                scale = max(abs(x), abs(y), mpfr(1e-30))
                assert abs(x - y) <= tol * scale


class TestCauchyBounds:
    def test_monomial_equality_case(self, ctx):
        p = Poly.from_values([0, 0, 0, 1], ctx)
        b = cauchy_coefficient_bounds(p, 1.0)
        assert all(float(x) >= 1.0 for x in b)
        assert float(abs(p.coeffs[3])) <= float(b[3])

    def test_constant_small_radius(self, ctx):
        p = Poly.from_values([2], ctx)
        b = cauchy_coefficient_bounds(p, 0.5)
        assert float(b[0]) >= 2.0

    def test_random_bounds_dominate(self, ctx, rng):
        for _ in range(40):
            p = random_poly(rng, rng.randrange(1, 12), ctx)
            bounds = cauchy_coefficient_bounds(p, 0.8)
            for a, b in zip(p.coeffs, bounds):
                assert abs(a) <= b


class TestSerialization:
    def test_hex_roundtrip_values(self, ctx):
        for v in (0.0, 1.5, -3.25, 1.537e-12, 2.0 ** 300, -7.0 / 3):
            x = ctx.real(v)
            assert real_from_hex(real_to_hex(x), ctx) == x

    def test_poly_roundtrip_exact(self, ctx, rng):
        p = random_poly(rng, 25, ctx)
        q = Poly.from_json_dict(p.to_json_dict())
        assert q.coeffs == p.coeffs
        assert q.precision.bits == p.precision.bits

    def test_huge_coefficients_roundtrip(self, ctx):
        with ctx.activate():
            p = Poly((mpc(mpfr(2) ** 2000, -(mpfr(2) ** -2000)),), ctx)
        q = Poly.from_json_dict(p.to_json_dict())
        assert q.coeffs == p.coeffs

    def test_trailing_zeros_normalized(self, ctx):
        p = Poly.from_values([1, 2, 0, 0], ctx)
        assert p.degree() == 1
        assert Poly.from_values([0, 0], ctx).is_zero()
