import math

import pytest
from gmpy2 import mpc, mpfr

from abeluniv import (
    Arc,
    CompactTarget,
    PieceTarget,
    Poly,
    PrecisionContext,
    RadialSegment,
    SequenceSpec,
    approximate,
    tail_index,
    uniform_dilation_radius,
)
from abeluniv.approximation import ApproximationError

from conftest import random_poly


class TestApproximate:
    def test_polynomial_restriction_comes_back(self, ctx):
        K = CompactTarget(arcs=(Arc(math.pi, math.pi / 6),))
        q = Poly.from_values([1, 2, 0, 0.5], ctx)
        p, cert = approximate(K, [PieceTarget(("arc", 0), "poly", poly=q)], 1e-6, 64, ctx)
        assert cert.success and cert.certified_sup_error <= 1e-6
        assert p.degree() <= q.degree()

    def test_constant_on_disc_is_exact(self, ctx):
        K = CompactTarget(central_disc_radius=0.5)
        p, cert = approximate(K, [PieceTarget(("disc", 0), "const", 7)], 1e-8, 64, ctx)
        assert p.degree() == 0 and cert.certified_sup_error == 0.0

    def test_disc_and_opposite_arc_indicator(self, ctx):
        K = CompactTarget(central_disc_radius=0.5, arcs=(Arc(math.pi, math.pi / 8),))
        targets = [PieceTarget(("disc", 0), "const", 0), PieceTarget(("arc", 0), "const", 1)]
        p, cert = approximate(K, targets, 1e-3, 256, ctx)
        assert cert.success and cert.certified_sup_error <= 1e-3
        assert cert.margin_factor > 1

    def test_monotone_in_tolerance(self, ctx):
        K = CompactTarget(central_disc_radius=0.4, arcs=(Arc(math.pi, math.pi / 10),))
        targets = [PieceTarget(("disc", 0), "const", 0), PieceTarget(("arc", 0), "const", 1)]
        _, loose = approximate(K, targets, 5e-2, 128, ctx)
        _, tight = approximate(K, targets, 1e-4, 128, ctx)
        assert tight.certified_sup_error <= loose.certified_sup_error

    def test_failure_flag_when_degree_exhausted(self, ctx):
        K = CompactTarget(central_disc_radius=0.5, arcs=(Arc(math.pi, math.pi / 4),))
        targets = [PieceTarget(("disc", 0), "const", 0), PieceTarget(("arc", 0), "const", 1)]
        p, cert = approximate(K, targets, 1e-9, 32, ctx)
        assert not cert.success
        assert cert.certified_sup_error > 1e-9

    def test_missing_piece_target_rejected(self, ctx):
        K = CompactTarget(central_disc_radius=0.5, arcs=(Arc(math.pi, 0.3),))
        with pytest.raises(ApproximationError):
            approximate(K, [PieceTarget(("disc", 0), "const", 1)], 1e-3, 64, ctx)

    def test_modulated_only_on_arcs(self):
        with pytest.raises(ApproximationError):
            PieceTarget(("disc", 0), "modulated", order=3)

    def test_certificate_dominates_fresh_grid(self, ctx):
        # post-hoc error on a 10x-denser fresh grid never exceeds the certificate
        from abeluniv.numerics import eval_poly

        K = CompactTarget(central_disc_radius=0.5, arcs=(Arc(math.pi, math.pi / 8),))
        targets = [PieceTarget(("disc", 0), "const", 0), PieceTarget(("arc", 0), "const", 1)]
        p, cert = approximate(K, targets, 1e-3, 256, ctx)
        n = 10 * 18 * max(cert.degree, 1)
        sup = 0.0
        with ctx.activate():
            for i in range(n):
                t = 2 * math.pi * (i + 0.11) / n
                sup = max(sup, float(abs(eval_poly(p, mpfr(0.5) * ctx.unit_point(t)))))
            a = Arc(math.pi, math.pi / 8)
            for i in range(n):
                t = a.center_angle - a.half_width + 2 * a.half_width * (i + 0.11) / n
                sup = max(sup, float(abs(eval_poly(p, ctx.unit_point(t)) - 1)))
        assert sup <= cert.certified_sup_error


class TestTailIndex:
    def test_zero_sequence(self):
        g = SequenceSpec(lambda k: 0.0, "zero", power=0.0)
        assert tail_index(g, 0.5, 0.25) == 0

    def test_geometric_closed_form(self):
        # sum_{j>=n} sum_{k>=j} r^k = r^n/(1-r)^2 = 2^(2-n) at r = 1/2
        g = SequenceSpec(lambda k: 1.0, "one", power=0.0)
        assert tail_index(g, 0.5, 0.25) == 4

    def test_k4_weight_reverified_by_direct_summation(self):
        n = tail_index(None, 0.9, 2 ** -10, weight="k4")
        hi = PrecisionContext(512)
        with hi.activate():
            total = mpfr(0)
            inner = mpfr(0)
            for k in range(4000, n - 1, -1):
                inner += mpfr(k) ** 4 * mpfr(0.9) ** k
            j_inner = inner
            for j in range(n, 4000):
                total += j_inner
                j_inner -= mpfr(j) ** 4 * mpfr(0.9) ** j
            assert total <= 2 ** -10
        # and n is smallest among tested: n-1 must fail
        m = tail_index(None, 0.9, 2 ** -10, weight="k4")
        assert m == n

    def test_random_specs_reverified(self, rng):
        for _ in range(25):
            c = rng.uniform(0.1, 3.0)
            p = rng.choice([0.0, 1.0, 2.0])
            g = SequenceSpec(lambda k, c=c, p=p: c * (k ** p if k else 1.0), "rand", power=p)
            r = rng.uniform(0.3, 0.9)
            eps = 2.0 ** -rng.randrange(2, 12)
            n = tail_index(g, r, eps)
            hi = PrecisionContext(512)
            with hi.activate():
                kmax = n + 2000
                inner = mpfr(0)
                total = mpfr(0)
                for k in range(kmax, n - 1, -1):
                    inner += mpfr(g(k)) * mpfr(r) ** k
                j_inner = inner
                for j in range(n, kmax):
                    total += j_inner
                    j_inner -= mpfr(g(j)) * mpfr(r) ** j
                # the direct truncated sum must sit below eps (closure is tiny)
                assert total <= mpfr(eps) * (1 + mpfr(2) ** -10)

    def test_divergent_spec_rejected(self):
        g = SequenceSpec(lambda k: 2.0 ** k, "2^k", power=0.0, user_certified=True)
        with pytest.raises(ValueError):
            tail_index(g, 0.9, 0.01)


class TestUniformDilationRadius:
    def test_constant_returns_midpoint(self, ctx):
        v = uniform_dilation_radius(lambda z: mpc(4), Arc(0.0, 0.5), 0.01, 0.2, ctx)
        assert float(v) == pytest.approx(0.6)

    def test_identity_needs_radius_near_one(self, ctx):
        v = uniform_dilation_radius(lambda z: z, Arc(0.0, 0.5), 0.01, 0.0, ctx,
                                    effective_degree=1)
        assert float(v) >= 0.99

    def test_polynomial_reverified_on_denser_grid(self, ctx, rng):
        p = random_poly(rng, 20, ctx)
        arc = Arc(1.0, 0.4)
        delta = 0.05
        v = uniform_dilation_radius(lambda z: __import__("abeluniv").eval_poly(p, z),
                                    arc, delta, 0.3, ctx, effective_degree=20)
        from abeluniv.numerics import eval_poly
        with ctx.activate():
            sup = 0.0
            for t in arc.angles(2000):
                z = ctx.unit_point(t)
                sup = max(sup, float(abs(eval_poly(p, v * z) - eval_poly(p, z))))
        assert sup <= delta

    def test_unreachable_delta_raises(self, ctx):
        with pytest.raises(ApproximationError):
            uniform_dilation_radius(lambda z: z, Arc(0.0, 0.5), 1e-30, 0.0, ctx,
                                    effective_degree=1, max_refine=8)
