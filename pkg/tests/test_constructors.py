import math

import pytest
from gmpy2 import mpc, mpfr

from abeluniv import (
    Arc,
    CoefficientFloor,
    CompactTarget,
    GrowthEnvelope,
    Poly,
    PrecisionContext,
    RadialSegment,
    RadiiSequence,
    SequenceSpec,
    StagePolicy,
    TargetEnrollment,
    choose_divergence_coefficient,
    construct_ae_divergent,
    construct_coefficient_floor,
    construct_pointwise_divergent,
    lem1_shift,
    partial_sums_at,
)
from abeluniv.constructors import tracking_enrollment_for_floor

TWO_PI = 2 * math.pi


def zero_enrollment(stages, hw=math.pi / 8):
    zero = Poly.zero(PrecisionContext(256))
    return TargetEnrollment((zero,), (Arc(math.pi, hw),), tuple((0, 0) for _ in range(stages)))


class TestStagePolicy:
    def test_default_eps_budget(self):
        p = StagePolicy.default(5)
        assert sum(p.eps) <= 0.5
        assert p.eps_n(1) == 2 ** -3

    def test_interlacing(self):
        p = StagePolicy.default(4)
        for n in range(1, 5):
            assert p.R(n) < p.r(n) < p.R(n + 1)

    def test_eps_sum_validated(self):
        with pytest.raises(ValueError):
            StagePolicy(stage_count=2, eps=(0.4, 0.4))

    def test_eps_monotone_validated(self):
        with pytest.raises(ValueError):
            StagePolicy(stage_count=2, eps=(0.1, 0.2))

    def test_rho_dyadic_default(self):
        r = RadiiSequence()
        assert r[0] == 0.5 and r[3] == 1 - 2 ** -4


class TestEnrollment:
    def test_schedule_indices_validated(self):
        zero = Poly.zero(PrecisionContext(256))
        with pytest.raises(ValueError):
            TargetEnrollment((zero,), (Arc(0, 0.3),), ((0, 1),))

    def test_declared_pair_must_be_scheduled(self):
        zero = Poly.zero(PrecisionContext(256))
        one = Poly.from_values([1], PrecisionContext(256))
        with pytest.raises(ValueError):
            TargetEnrollment((zero, one), (Arc(0, 0.3),), ((0, 0),), pairs=((1, 0),))

    def test_round_robin_covers(self):
        zero = Poly.zero(PrecisionContext(256))
        one = Poly.from_values([1], PrecisionContext(256))
        e = TargetEnrollment.round_robin([zero, one], [Arc(0, 0.3)], 4)
        assert set(e.schedule) == {(0, 0), (1, 0)}


class TestLem1Shift:
    def test_single_zero_point(self):
        b = lem1_shift([mpc(0)], [mpc(1)], 1)
        assert complex(b) == 2.0

    def test_worst_case_layered(self):
        R, l = 1.0, 6
        ws = [mpc(0)] + [mpc(2 * n * R) for n in range(1, l)]
        zs = [mpc(1)] * l
        b = lem1_shift(ws, zs, R)
        assert complex(b) == 2 * l * R

    def test_random_instances_against_exhaustive_scan(self, rng):
        for _ in range(200):
            l = rng.randrange(1, 21)
            R = rng.uniform(0.1, 10.0)
            ws = [mpc(rng.uniform(-4 * l * R, 4 * l * R), rng.uniform(-4 * l * R, 4 * l * R))
                  for _ in range(l)]
            zs = [mpc(math.cos(t), math.sin(t))
                  for t in (rng.uniform(0, TWO_PI) for _ in range(l))]
            b = lem1_shift(ws, zs, R)
            assert abs(complex(b)) <= 2 * l * R + 1e-12
            assert all(abs(complex(w) + complex(b) * complex(z)) >= R * (1 - 1e-12)
                       for w, z in zip(ws, zs))
            # first valid candidate of the scan must match
            mags = [abs(complex(w)) for w in ws]
            for k in range(l + 1):
                cand = 2 * k * R
                if all(abs(m - cand) >= R for m in mags):
                    assert complex(b) == pytest.approx(cand)
                    break


class TestChooseDivergenceCoefficient:
    def test_zero_partial_gives_zero_measure(self):
        n = 2 ** 12
        vals = [mpc(0)] * n
        out = choose_divergence_coefficient(vals, 2, n)
        assert out.est_measure == 0.0
        assert abs(out.value) > 2  # c = 0 keeps the whole circle below level 2

    def test_pigeonhole_bound_random_partial(self, rng):
        n = 2 ** 12
        l = 3
        ctx = PrecisionContext(128)
        with ctx.activate():
            vals = [mpc(rng.uniform(-2, 2), rng.uniform(-2, 2)) for _ in range(n)]
        out = choose_divergence_coefficient(vals, l, n)
        slack = TWO_PI / n * out.crossings
        assert out.est_measure <= TWO_PI / l ** 2 + slack + 1e-12
        assert abs(out.value) <= l ** 4

    def test_matches_bruteforce_minimum(self, rng):
        from abeluniv.constructors import _candidate_rings

        n = 512
        l = 4
        ctx = PrecisionContext(128)
        with ctx.activate():
            vals = [mpc(rng.uniform(-6, 6), rng.uniform(-6, 6)) for _ in range(n)]
        out = choose_divergence_coefficient(vals, l, n)
        import numpy as np
        h = np.array([complex(v) for v in vals]) * np.exp(
            -2j * math.pi * (np.arange(n) * l % n) / n
        )
        counts = []
        gen = _candidate_rings(l)
        for _ in range(out.candidate_count):
            c = next(gen)
            counts.append(int(np.count_nonzero(np.abs(h + c) <= l)))
        assert out.est_measure == min(counts) * TWO_PI / n

    def test_small_index_rejected(self):
        with pytest.raises(ValueError):
            choose_divergence_coefficient([mpc(0)] * 16, 1, 16)


class TestConstructions:
    def test_ae_blocks_disjoint_and_bounded(self):
        policy = StagePolicy.default(2, block_width=6, max_degree=64)
        f, rep, ledger = construct_ae_divergent(zero_enrollment(2), policy, circle_grid=2 ** 12)
        ranges = [r.block_range for r in rep.records]
        for (a1, b1), (a2, b2) in zip(ranges, ranges[1:]):
            assert a2 > b1
        for e in ledger.entries:
            assert abs(e.value) <= e.index ** 4
            assert e.est_measure <= TWO_PI / e.index ** 2 + e.measure_slack() + 1e-12

    def test_ae_partial_sum_block_constancy(self):
        policy = StagePolicy.default(2, block_width=4, max_degree=64)
        f, rep, _ = construct_ae_divergent(zero_enrollment(2), policy, circle_grid=2 ** 12)
        ctx = f.precision
        z = ctx.unit_point(1.234)
        trace = partial_sums_at(f, z)
        (a1, b1), (a2, b2) = [r.block_range for r in rep.records]
        for k in range(b1, a2):
            assert trace.values[k] == trace.values[b1]

    def test_pointwise_partial_sums_grow(self):
        policy = StagePolicy.default(2, block_width=6, max_degree=64)
        E = [1, 1j, -1]
        f, rep = construct_pointwise_divergent(E, zero_enrollment(2), policy)
        for zeta in E:
            tr = partial_sums_at(f, zeta)
            for rec in rep.records:
                lo, hi = rec.block_range
                for l in range(lo, hi + 1):
                    assert abs(tr.values[l]) >= l

    def test_pointwise_validates_points(self):
        policy = StagePolicy.default(1, block_width=4, max_degree=32)
        with pytest.raises(ValueError):
            construct_pointwise_divergent([], zero_enrollment(1), policy)
        with pytest.raises(ValueError):
            construct_pointwise_divergent([1, 1], zero_enrollment(1), policy)
        with pytest.raises(ValueError):
            construct_pointwise_divergent([0.5], zero_enrollment(1), policy)

    def test_floor_rule_case_split(self, ctx):
        # b = 2*gamma fires only when |Re a| <= gamma
        with ctx.activate():
            a, g = mpc(0.3), mpfr(0.5)
            b = mpfr(0) if abs(a.real) >= g else 2 * g
            assert float(abs((a + b).real)) >= 0.5 and float(b) == 1.0
            a2 = mpc(0.7)
            b2 = mpfr(0) if abs(a2.real) >= g else 2 * g
            assert float(b2) == 0.0 and abs((a2 + b2).real) >= 0.5

    def test_floor_construction_coefficients(self):
        policy = StagePolicy.default(2, block_width=8, max_degree=64)
        gamma = SequenceSpec(lambda k: 1.0 / (k + 1), "1/(k+1)", power=0.0)
        floor = CoefficientFloor(gamma)
        ctx = PrecisionContext(512)
        enroll = tracking_enrollment_for_floor(floor, policy, Arc(math.pi, math.pi / 8), ctx)
        f, rep = construct_coefficient_floor(floor, enroll, policy, ctx)
        lo, hi = rep.extras["covered_range"]
        with f.precision.activate():
            for k in range(lo, hi + 1):
                assert abs(f.coefficient(k)) >= mpfr(gamma(k))

    def test_floor_vacuous_gamma(self):
        policy = StagePolicy.default(1, block_width=4, max_degree=32)
        gamma = SequenceSpec(lambda k: 0.0, "0", power=0.0)
        floor = CoefficientFloor(gamma)
        f, rep = construct_coefficient_floor(floor, zero_enrollment(1), policy, PrecisionContext(256))
        # gamma = 0 never forces a correction; output is the pure fitted stage
        assert f.is_zero()

    def test_zero_stage_degenerate_run(self):
        policy = StagePolicy.default(0)
        f, rep, ledger = construct_ae_divergent(zero_enrollment(0), policy, circle_grid=2 ** 12)
        assert f.is_zero() and not ledger.entries


class TestGrowthEnvelopeValidation:
    def test_needs_single_contact_point(self):
        with pytest.raises(ValueError):
            GrowthEnvelope(
                w=lambda r: 1.0,
                A=CompactTarget(radial_segments=(
                    RadialSegment(0.0, 0.0, 1.0), RadialSegment(1.0, 0.0, 1.0),
                )),
            )

    def test_rejects_arcs(self):
        with pytest.raises(ValueError):
            GrowthEnvelope(w=lambda r: 1.0,
                           A=CompactTarget(arcs=(Arc(0, 0.3),),
                                           radial_segments=(RadialSegment(1.0, 0.0, 1.0),)))
