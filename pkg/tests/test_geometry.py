import math

import gmpy2
import pytest
from gmpy2 import mpc, mpfr
from hypothesis import given, settings, strategies as st

from abeluniv import (
    Arc,
    CompactTarget,
    PrecisionContext,
    RadialSegment,
    StolzAngle,
    arc_measure,
    harmonic_majorant,
    poisson_kernel,
    sample,
    stolz_contains,
)


class TestArcs:
    def test_measure_single(self):
        assert arc_measure([Arc(0.0, math.pi / 4)]) == pytest.approx(math.pi / 2)

    def test_measure_two_disjoint(self):
        arcs = [Arc(0.0, math.pi / 6), Arc(math.pi, math.pi / 3)]
        assert arc_measure(arcs) == pytest.approx(math.pi)

    def test_overlap_rejected(self):
        with pytest.raises(ValueError):
            arc_measure([Arc(0.0, 1.0), Arc(0.5, 1.0)])

    def test_half_width_bounds(self):
        with pytest.raises(ValueError):
            Arc(0.0, math.pi)
        with pytest.raises(ValueError):
            Arc(0.0, 0.0)

    def test_near_full_family_rejected(self):
        arcs = (Arc(0.0, math.pi / 2 - 1e-14), Arc(math.pi, math.pi / 2 - 1e-14))
        with pytest.raises(ValueError):
            CompactTarget(arcs=arcs)


class TestCompactTarget:
    def test_segment_inside_disc_rejected(self):
        with pytest.raises(ValueError):
            CompactTarget(central_disc_radius=0.5,
                          radial_segments=(RadialSegment(0.0, 0.2, 0.9),))

    def test_segment_meeting_arc_rejected(self):
        with pytest.raises(ValueError):
            CompactTarget(arcs=(Arc(0.0, 0.3),),
                          radial_segments=(RadialSegment(0.0, 0.5, 1.0),))

    def test_json_roundtrip(self):
        K = CompactTarget(central_disc_radius=0.4,
                          arcs=(Arc(math.pi, 0.5),),
                          radial_segments=(RadialSegment(0.0, 0.5, 0.9),))
        K2 = CompactTarget.from_json_dict(K.to_json_dict())
        assert K2 == K


class TestSample:
    def test_arc_density_and_unimodular(self, ctx):
        K = CompactTarget(arcs=(Arc(0.0, math.pi / 4),))
        g = sample(K, density=100 / math.pi, ctx=ctx)
        assert len(g.points) >= 50
        with ctx.activate():
            for z in g.points:
                assert abs(abs(z) - 1) < mpfr(2) ** -(ctx.bits // 2)

    def test_degenerate_disc(self, ctx):
        K = CompactTarget(central_disc_radius=0.0)
        g = sample(K, density=10.0, ctx=ctx)
        assert len(g.points) == 1 and g.points[0] == 0

    def test_tags_partition(self, ctx):
        K = CompactTarget(central_disc_radius=0.5, arcs=(Arc(math.pi, 0.4),))
        g = sample(K, density=20.0, ctx=ctx)
        assert len(g.points) == len(g.piece_tags)
        seen = set()
        with ctx.activate():
            for z, tag in zip(g.points, g.piece_tags):
                key = (complex(z).real, complex(z).imag)
                assert key not in seen
                seen.add(key)
                if tag[0] == "disc":
                    assert abs(z) <= 0.5 + 1e-30
                else:
                    assert abs(abs(z) - 1) < 1e-30

    def test_segment_samples_stay_inside(self, ctx):
        K = CompactTarget(radial_segments=(RadialSegment(0.3, 0.0, 1.0),))
        g = sample(K, density=50.0, ctx=ctx)
        assert all(abs(z) < 1 for z in g.points)

    def test_density_positive(self, ctx):
        K = CompactTarget(central_disc_radius=0.2)
        with pytest.raises(ValueError):
            sample(K, density=0.0, ctx=ctx)


class TestPoissonKernel:
    def test_center_is_one(self, ctx):
        for th in (0.0, 1.0, 4.5):
            assert poisson_kernel(0, ctx.unit_point(th), ctx) == 1

    def test_radial_closed_form(self, ctx):
        # at z = s*zeta the kernel equals (1+s)/(1-s)
        for s in (0.1, 0.5, 0.9):
            zeta = ctx.unit_point(0.7)
            v = poisson_kernel(mpfr(s) * zeta, zeta, ctx)
            assert abs(float(v) - (1 + s) / (1 - s)) < 1e-12

    def test_matches_formula_at_quadrupled_precision(self, ctx, rng):
        hi = PrecisionContext(4 * ctx.bits)
        for _ in range(10):
            z = rng.uniform(0, 0.95) * complex(math.cos(rng.uniform(0, 7)), math.sin(rng.uniform(0, 7)))
            th = rng.uniform(0, 2 * math.pi)
            got = poisson_kernel(z, ctx.unit_point(th), ctx)
            with hi.activate():
                zz, zt = mpc(z), hi.unit_point(th)
                want = (1 - gmpy2.norm(zz)) / gmpy2.norm(zt - zz)
                assert abs(mpfr(got) - want) <= mpfr(2) ** (-ctx.bits + 8) * want

    def test_domain_error(self, ctx):
        with pytest.raises(ValueError):
            poisson_kernel(1.0, 1.0, ctx)

    def test_normalization_quadrature(self, ctx, rng):
        # (1/2pi) integral of P(z, e^it) dt = 1, checked at 2^14 nodes
        n = 2 ** 14
        for _ in range(20):
            z = rng.uniform(0, 0.9) * complex(math.cos(rng.uniform(0, 7)), math.sin(rng.uniform(0, 7)))
            zx = complex(z)
            total = 0.0
            for j in range(n):
                t = 2 * math.pi * j / n
                zeta = complex(math.cos(t), math.sin(t))
                total += (1 - abs(zx) ** 2) / abs(zeta - zx) ** 2
            assert abs(total / n - 1.0) < 1e-6


class TestHarmonicMajorant:
    def test_at_center(self, ctx):
        z1, z2 = ctx.unit_point(0.0), ctx.unit_point(2.0)
        assert harmonic_majorant(0, z1, z2, 1.5, ctx) == 3.0

    def test_radial_lower_bound(self, ctx):
        z1, z2 = ctx.unit_point(0.3), ctx.unit_point(2.7)
        for s in (0.2, 0.7, 0.95):
            h = harmonic_majorant(mpfr(s) * z1, z1, z2, 1.0, ctx)
            assert float(h) >= 1.0 / (1 - s)

    def test_symmetry(self, ctx):
        z1, z2 = ctx.unit_point(0.3), ctx.unit_point(2.7)
        z = ctx.complex(0.1, 0.2)
        assert harmonic_majorant(z, z1, z2, 2.0, ctx) == harmonic_majorant(z, z2, z1, 2.0, ctx)

    def test_equal_points_rejected(self, ctx):
        z1 = ctx.unit_point(1.0)
        with pytest.raises(ValueError):
            harmonic_majorant(0, z1, z1, 1.0, ctx)


class TestStolz:
    def test_origin_inside(self):
        S = StolzAngle(1.0, 1.5)
        assert stolz_contains(S, 0)

    def test_radius_inside(self):
        S = StolzAngle(1.0, 1.01)
        assert stolz_contains(S, 0.999)

    def test_boundary_point_outside(self):
        S = StolzAngle(1.0, 2.0)
        assert not stolz_contains(S, 1.0)

    def test_opening_validated(self):
        with pytest.raises(ValueError):
            StolzAngle(1.0, 1.0)

    @given(theta=st.floats(0, 2 * math.pi), rot=st.floats(0, 2 * math.pi),
           rr=st.floats(0, 0.99), alpha=st.floats(1.01, 5.0))
    @settings(max_examples=200, deadline=None)
    def test_rotation_invariance(self, theta, rot, rr, alpha):
        ctx = PrecisionContext(256)
        vertex = ctx.unit_point(theta)
        z = ctx.complex(rr * math.cos(theta + 0.1), rr * math.sin(theta + 0.1))
        w = ctx.unit_point(rot)
        with ctx.activate():
            a = stolz_contains(StolzAngle(complex(vertex), alpha), z, ctx)
            b = stolz_contains(StolzAngle(complex(w * vertex), alpha), w * z, ctx)
        assert a == b
