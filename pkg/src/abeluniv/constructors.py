"""Staged constructions of truncated universal candidates.

Each construction runs a finite number of stages; a stage picks a block
exponent u_n from explicit tail/exponent conditions, fits a correction
polynomial on a compact target with a certified tolerance, and (for the
divergence variants) fills block coefficients index by index.  All stated
conditions are verified numerically and recorded per stage; postconditions
are finite-stage bounds with explicit slack, never asymptotic claims.

Degrees in the underlying inductions are unbounded; at desk scale every
knob that the source arguments leave free (radius schedule, enrollment
schedule, tail tightening, exponent-grid depth, block widths) is exposed
on StagePolicy so that runs stay within a declared degree budget.  A stage
whose certified fit cannot meet its tolerance within the budget aborts
with the partial state and stage index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import gmpy2
import numpy as np
from gmpy2 import mpc, mpfr

from .approximation import (
    ApproxCertificate,
    PieceTarget,
    SequenceSpec,
    WEIGHT_SPECS,
    approximate,
    tail_index,
    uniform_dilation_radius,
)
from .geometry import Arc, CompactTarget, RadialSegment
from .numerics import (
    Poly,
    PrecisionContext,
    auto_bits,
    dilate,
    ensure_finite,
    eval_poly,
)

TWO_PI = 2 * math.pi

# radial segments with to_r = 1 are value-sampled up to this radius
SEGMENT_SAMPLE_CAP = 1 - 2 ** -11


class ConstructionAborted(RuntimeError):
    def __init__(self, stage: int, reason: str, state: "ConstructionState"):
        super().__init__(f"stage {stage}: {reason}")
        self.stage = stage
        self.state = state


# ---------------------------------------------------------------------------
# policy and enrollment
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RadiiSequence:
    """r_n = 1 - offset * ratio^n, increasing to 1.

    offset = ratio = 1/2 gives the default dyadic schedule 1 - 2^(-n-1);
    a slow-start schedule (offset near 1, ratio near 1) keeps early discs
    small, which is what makes staged fits affordable.
    """

    offset: float = 0.5
    ratio: float = 0.5

    def __post_init__(self):
        if not 0 < self.offset <= 1 or not 0 < self.ratio < 1:
            raise ValueError("need offset in (0,1], ratio in (0,1)")

    def __getitem__(self, n: int) -> float:
        if n < 0:
            raise IndexError(n)
        return 1.0 - self.offset * self.ratio ** n

    def describe(self) -> dict:
        return {"kind": "geometric", "offset": self.offset, "ratio": self.ratio}


@dataclass(frozen=True)
class StagePolicy:
    """Stage schedule: eps_n, rho = (r_n), interlaced aux radii R_n.

    eps must be positive, decreasing, with sum <= 1/2.  R_n is the midpoint
    (r_{n-1} + r_n)/2, which interlaces strictly: R_n < r_n < R_{n+1}.
    """

    stage_count: int
    eps: tuple
    rho: RadiiSequence = field(default_factory=RadiiSequence)
    block_width: int = 24
    tail_tighten: int = 8
    exponent_grid_depth: float = 0.5
    exponent_grid_n: int = 512
    max_degree: int = 512
    build_mult: int = 6

    def __post_init__(self):
        if self.stage_count < 0:
            raise ValueError("stage_count must be nonnegative")
        if len(self.eps) < self.stage_count:
            raise ValueError("need eps for every stage")
        eps = [float(e) for e in self.eps]
        if any(e <= 0 for e in eps):
            raise ValueError("eps must be positive")
        if any(b > a for a, b in zip(eps, eps[1:])):
            raise ValueError("eps must be nonincreasing")
        if sum(eps) > 0.5 + 1e-12:
            raise ValueError("sum of eps must be <= 1/2")
        for n in range(1, self.stage_count + 2):
            if not self.R(n) < self.r(n) < self.R(n + 1):
                raise ValueError(f"radius interlacing fails at stage {n}")

    @classmethod
    def default(cls, stages: int, **kw) -> "StagePolicy":
        eps = tuple(2.0 ** (-n - 2) for n in range(1, stages + 1))
        return cls(stage_count=stages, eps=eps, **kw)

    def eps_n(self, n: int) -> float:
        return float(self.eps[n - 1])

    def r(self, i: int) -> float:
        return self.rho[i]

    def R(self, i: int) -> float:
        if i < 1:
            raise IndexError(i)
        return 0.5 * (self.rho[i - 1] + self.rho[i])

    def describe(self) -> dict:
        return {
            "stage_count": self.stage_count,
            "eps": [float(e) for e in self.eps[: self.stage_count]],
            "rho": self.rho.describe(),
            "block_width": self.block_width,
            "tail_tighten": self.tail_tighten,
            "exponent_grid_depth": self.exponent_grid_depth,
            "max_degree": self.max_degree,
        }


@dataclass(frozen=True)
class TargetEnrollment:
    """Enrolled (target polynomial, arc) pairs and the stage schedule.

    schedule[n-1] = (alpha(n), beta(n)) names the target and arc indices
    driven at stage n; every declared pair must appear at least once.
    """

    phis: tuple
    arcs: tuple
    schedule: tuple
    pairs: tuple = ()

    def __post_init__(self):
        for a, b in self.schedule:
            if not (0 <= a < len(self.phis) and 0 <= b < len(self.arcs)):
                raise ValueError(f"schedule entry ({a},{b}) out of range")
        declared = self.pairs or tuple(sorted(set(self.schedule)))
        object.__setattr__(self, "pairs", tuple(declared))
        missing = [p for p in self.pairs if p not in set(self.schedule)]
        if missing:
            raise ValueError(f"enrolled pairs never scheduled: {missing}")

    @classmethod
    def round_robin(cls, phis, arcs, stages: int) -> "TargetEnrollment":
        combos = [(i, j) for i in range(len(phis)) for j in range(len(arcs))]
        if stages < len(combos):
            raise ValueError("not enough stages to cover every pair once")
        sched = tuple(combos[n % len(combos)] for n in range(stages))
        return cls(tuple(phis), tuple(arcs), sched)

    def stage_pair(self, n: int):
        a, b = self.schedule[n - 1]
        return self.phis[a], self.arcs[b], a, b

    def describe(self) -> dict:
        return {
            "phi_degrees": [p.degree() for p in self.phis],
            "arcs": [{"center": a.center_angle, "halfwidth": a.half_width} for a in self.arcs],
            "schedule": [list(s) for s in self.schedule],
        }


# ---------------------------------------------------------------------------
# run records
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LedgerEntry:
    index: int
    stage: int
    value: complex
    candidate_count: int
    est_measure: float
    grid_size: int
    crossings: int
    bound: float

    def measure_slack(self) -> float:
        if self.grid_size == 0:
            return 0.0
        return TWO_PI / self.grid_size * self.crossings


@dataclass
class DivergenceLedger:
    route: str                      # "measure" (|b| <= l^4) or "shift" (|b| <= 2 l^2)
    entries: list = field(default_factory=list)

    def check(self):
        for e in self.entries:
            if abs(e.value) > e.bound * (1 + 1e-12):
                raise AssertionError(f"ledger bound violated at l={e.index}")
            if e.grid_size:
                cap = TWO_PI / e.index ** 2 + e.measure_slack()
                if e.est_measure > cap + 1e-12:
                    raise AssertionError(f"ledger measure exceeds pigeonhole cap at l={e.index}")

    def to_json_list(self):
        return [
            {
                "l": e.index, "stage": e.stage,
                "b": [e.value.real, e.value.imag],
                "candidates": e.candidate_count,
                "measure": e.est_measure,
                "grid": e.grid_size,
                "crossings": e.crossings,
                "bound": e.bound,
            }
            for e in self.entries
        ]


@dataclass(frozen=True)
class StageRecord:
    stage: int
    u: int
    v: int | None
    v_radius: float | None
    block_range: tuple
    certificate: ApproxCertificate | None
    fit_degree: int
    dilate_error: float | None
    seconds: float

    def to_json_dict(self) -> dict:
        cert = None
        if self.certificate is not None:
            cert = {
                "degree": self.certificate.degree,
                "certified_sup_error": self.certificate.certified_sup_error,
                "margin_factor": self.certificate.margin_factor,
                "validation_density": self.certificate.validation_density,
                "success": self.certificate.success,
            }
        return {
            "stage": self.stage,
            "u": self.u,
            "v": self.v,
            "v_radius": self.v_radius,
            "block_range": list(self.block_range),
            "certificate": cert,
            "fit_degree": self.fit_degree,
            "dilate_error": self.dilate_error,
            "seconds": round(self.seconds, 3),
        }


@dataclass
class StageReport:
    kind: str
    policy: StagePolicy
    enrollment: TargetEnrollment | None
    records: list = field(default_factory=list)
    ledger: DivergenceLedger | None = None
    extras: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        doc = {
            "kind": self.kind,
            "policy": self.policy.describe(),
            "enrollment": self.enrollment.describe() if self.enrollment else None,
            "stages": [r.to_json_dict() for r in self.records],
            "extras": self.extras,
        }
        if self.ledger is not None:
            doc["ledger"] = {"route": self.ledger.route, "entries": self.ledger.to_json_list()}
        return doc


@dataclass
class ConstructionState:
    stage: int = 0
    accumulated: Poly = None
    u: list = field(default_factory=lambda: [0])
    v: list = field(default_factory=lambda: [0])
    block_ranges: list = field(default_factory=list)
    certificates: list = field(default_factory=list)
    ledger: DivergenceLedger | None = None

    def check_invariants(self):
        if any(b <= a for a, b in zip(self.u, self.u[1:])):
            raise AssertionError("u must be strictly increasing")
        if any(b <= a for a, b in zip(self.v, self.v[1:])):
            raise AssertionError("v must be strictly increasing")
        ends = [rng for rng in self.block_ranges if rng is not None]
        for (a1, b1), (a2, b2) in zip(ends, ends[1:]):
            if a2 <= b1:
                raise AssertionError("block ranges overlap")


@dataclass(frozen=True)
class GrowthEnvelope:
    """Envelope w on [0,1) and the radial set A it constrains.

    A consists of radial segments; those written with to_r = 1 describe a
    closure touching the circle, and all of them must share one direction
    so the contact set is a single point.
    """

    w: Callable[[float], float]
    A: CompactTarget
    description: str = ""

    def __post_init__(self):
        if self.A.central_disc_radius is not None or self.A.arcs:
            raise ValueError("A must consist of radial segments only")
        if not self.A.radial_segments:
            raise ValueError("A must be nonempty")
        contact = {s.angle for s in self.A.radial_segments if s.to_r >= 1}
        if len(contact) != 1:
            raise ValueError("the closure of A must meet the circle at exactly one point")


@dataclass(frozen=True)
class CoefficientFloor:
    gamma: SequenceSpec


def floor_exponent_schedule(floor: "CoefficientFloor", policy: StagePolicy):
    """Stage exponents and block ends of a floor run whose fits are zero.

    The tail conditions depend only on gamma and the policy, so when every
    stage target vanishes the block layout [prev_end+1 .. u_n+W-1] is known
    before running; used to precompute tracking enrollments.
    """
    gamma = floor.gamma
    r_big = policy.r(policy.stage_count + 1)
    us, ends = [], []
    prev_end = 0
    for n in range(1, policy.stage_count + 1):
        delta = policy.eps_n(n) / policy.tail_tighten
        u_n = prev_end + 1
        u_n = max(u_n, _single_tail_index(gamma, r_big, delta))
        u_n = max(u_n, tail_index(gamma, r_big, delta, "gamma"))
        x = policy.r(n) / policy.R(n + 1)
        u_n = max(u_n, int(math.ceil(math.log(policy.eps_n(n) * (1 - x)) / math.log(x))))
        end = u_n + policy.block_width - 1
        us.append(u_n)
        ends.append(end)
        prev_end = end
    return us, ends


def tracking_enrollment_for_floor(
    floor: "CoefficientFloor",
    policy: StagePolicy,
    arc: Arc,
    ctx: PrecisionContext,
) -> TargetEnrollment:
    """Enrollment whose stage-n target is the dilated fill built so far.

    With these targets every stage's fitted part is exactly zero, so the
    run reduces to the pure coefficient fill; the dilate approximation
    property then holds with the stage tolerance by construction.  Target
    polynomials are built by the same dilation path the constructor uses,
    so the stage targets cancel bitwise.
    """
    us, ends = floor_exponent_schedule(floor, policy)
    gamma = floor.gamma
    phis = []
    with ctx.activate():
        fill = [mpc(0)]
        prev_end = 0
        for n in range(1, policy.stage_count + 1):
            phis.append(dilate(Poly(tuple(fill), ctx), ctx.real(policy.r(n))))
            u_n, end = us[n - 1], ends[n - 1]
            fill = fill + [mpc(0)] * (end + 1 - len(fill))
            for i in range(prev_end + 1, u_n):
                fill[i] = mpc(mpfr(gamma(i)))
            for i in range(u_n, end + 1):
                g_i = mpfr(gamma(i))
                if abs(mpc(0).real) < g_i:
                    fill[i] = mpc(2 * g_i)
            prev_end = end
    sched = tuple((n, 0) for n in range(policy.stage_count))
    return TargetEnrollment(tuple(phis), (arc,), sched)


# ---------------------------------------------------------------------------
# shared stage helpers
# ---------------------------------------------------------------------------

def _single_tail_index(spec: SequenceSpec, r: float, eps: float, start: int = 0) -> int:
    """Smallest u >= start with sum_{k>=u} spec(k) r^k <= eps (certified)."""
    terms = []
    rpow = 1.0
    k = 0
    while True:
        t = float(spec(k)) * rpow
        terms.append(t)
        if k >= max(start, 4) and t <= eps * 2 ** -40:
            q = r * ((k + 1) / max(k, 1)) ** (spec.power or 0.0)
            if q < 1 and t * q / (1 - q) <= eps * 2 ** -20:
                break
        k += 1
        rpow *= r
        if k > 10 ** 7:
            raise ValueError("single tail does not close")
    suffix = 0.0
    u = len(terms)
    for j in range(len(terms) - 1, -1, -1):
        if suffix + terms[j] > eps:
            break
        suffix += terms[j]
        u = j
    return max(u, start)


def _fit_block(policy, ctx, accumulated, phi, arc, u_n, r_n, R_n, eps_n, state, n):
    """Fit the stage polynomial in the y = z/r_n variable.

    H*(y) is fitted on disc(R_n/r_n) (target 0) and the arc (modulated
    target y^(-u)(phi(y) - accumulated(r_n y))); then
    P_n(z) = z^u r_n^(-u) H*(z/r_n), which transports the certificate to
    the paper-style conditions sup_{|z|<=R_n}|P_n| <= eps and the dilated
    arc bound at radius r_n.
    """
    inner = R_n / r_n
    K = CompactTarget(central_disc_radius=inner, arcs=(arc,))
    prev_dilated = dilate(accumulated, ctx.real(r_n))
    targets = [
        PieceTarget(("disc", 0), "const", 0),
        PieceTarget(("arc", 0), "modulated", order=u_n, minuend=phi, subtrahend=prev_dilated),
    ]
    pstar, cert = approximate(
        K, targets, eps_n, policy.max_degree, ctx, build_mult=policy.build_mult
    )
    if not cert.success:
        raise ConstructionAborted(
            n, f"stage fit failed: certified {cert.certified_sup_error:.3e} > {eps_n}", state
        )
    if pstar.is_zero():
        return Poly.zero(ctx), cert
    with ctx.activate():
        rinv = 1 / mpfr(r_n)
        scaled = pstar.scale_argument(rinv)
        factor = rinv ** u_n
        coeffs = tuple(ensure_finite(c * factor, "block coefficient") for c in scaled.coeffs)
    return Poly(coeffs, ctx).shift(u_n), cert


def _circle_grid_points(ctx: PrecisionContext, n: int) -> list:
    return [ctx.unit_point(TWO_PI * j / n) for j in range(n)]


# ---------------------------------------------------------------------------
# growth-restricted construction
# ---------------------------------------------------------------------------

def construct_growth_restricted(
    env: GrowthEnvelope,
    enroll: TargetEnrollment,
    policy: StagePolicy,
    ctx: PrecisionContext | None = None,
):
    """Build f = sum_n z^(u_n) P*_n growing no faster than w on A.

    Per stage: u_n is the smallest exponent making |z^u d_n| <= eps_n w(|z|)
    on the sampled exponent grid of A and <= eps_n on the current disc;
    P*_n comes from the certified fit on disc + A skeleton + scheduled arc;
    the dilation index v_n is seeded by uniform_dilation_radius and then
    verified directly against the stage dilate bound 2 eps_n.
    """
    import time as _time

    N = policy.stage_count
    if ctx is None:
        max_abs_phi = max(
            (float(abs(eval_poly(p, 1))) for p in enroll.phis), default=1.0
        )
        d_cap = 2.0 * max_abs_phi + 1.0
        depth = policy.exponent_grid_depth
        u_cap = 64
        for n in range(1, N + 1):
            e = policy.eps_n(n)
            if d_cap > e:
                u_cap = max(u_cap, int(math.log(d_cap / e) / -math.log(depth)) + 2)
        budget = u_cap * N + policy.max_degree + 64
        ctx = PrecisionContext(auto_bits(budget, policy.r(0)))

    f = Poly.zero(ctx)
    state = ConstructionState(accumulated=f)
    report = StageReport("construct-growth", policy, enroll)

    for n in range(1, N + 1):
        t0 = _time.perf_counter()
        eps_n = policy.eps_n(n)
        phi, arcK, _, _ = enroll.stage_pair(n)
        r_disc = policy.r(state.v[-1])

        with ctx.activate():
            d_n = eval_poly(phi, 1) - eval_poly(f, 1)
            abs_d = float(abs(d_n))

        u_n = max(state.u[-1] + 1, (f.degree() + 1) if not f.is_zero() else 1)
        if abs_d > 0:
            # (exponent, disc): |d| r^u <= eps on the current disc
            if abs_d > eps_n:
                u_n = max(u_n, int(math.ceil(math.log(abs_d / eps_n) / -math.log(r_disc))))
            # (exponent, A): |d| s^u <= eps w(s) on the exponent grid of A
            for seg in env.A.radial_segments:
                hi = min(seg.to_r, policy.exponent_grid_depth, SEGMENT_SAMPLE_CAP)
                if hi <= seg.from_r:
                    continue
                for j in range(policy.exponent_grid_n):
                    s = seg.from_r + (hi - seg.from_r) * (j + 1) / policy.exponent_grid_n
                    cap = eps_n * float(env.w(s))
                    if abs_d > cap and 0 < s < 1:
                        u_n = max(u_n, int(math.ceil(math.log(abs_d / cap) / -math.log(s))))

        # fit on current disc + A skeleton + scheduled arc
        segs = []
        for seg in env.A.radial_segments:
            to = min(seg.to_r, SEGMENT_SAMPLE_CAP) if seg.to_r >= 1 else seg.to_r
            frm = max(seg.from_r, r_disc)
            if frm < to:
                segs.append(RadialSegment(seg.angle, frm, to))
        K_n = CompactTarget(
            central_disc_radius=r_disc, arcs=(arcK,), radial_segments=tuple(segs)
        )
        targets = [PieceTarget(("disc", 0), "const", complex(d_n))]
        targets += [
            PieceTarget(("segment", i), "const", complex(d_n)) for i in range(len(segs))
        ]
        targets.append(
            PieceTarget(("arc", 0), "modulated", order=u_n, minuend=phi, subtrahend=f)
        )
        pstar, cert = approximate(
            K_n, targets, eps_n, policy.max_degree, ctx, build_mult=policy.build_mult
        )
        if not cert.success:
            raise ConstructionAborted(
                n, f"stage fit failed: certified {cert.certified_sup_error:.3e} > {eps_n}", state
            )

        prev = f
        block = pstar.shift(u_n)
        f = f.add(block)

        # dilation index: seed with the uniform-continuity search, then
        # verify the stage dilate bound at the chosen rho index directly
        def stage_expr(z, _p=pstar, _phi=phi, _prev=prev, _u=u_n):
            return eval_poly(_p, z) - z ** (-_u) * (eval_poly(_phi, z) - eval_poly(_prev, z))

        eff_deg = u_n + max(pstar.degree(), phi.degree(), prev.degree())
        seed = uniform_dilation_radius(
            stage_expr, arcK, eps_n, policy.r(state.v[-1]),
            ctx, effective_degree=min(eff_deg, 4096),
        )
        arc_pts = [ctx.unit_point(t) for t in arcK.angles(max(512, 8 * min(eff_deg, 4096)))]

        def dilate_sup(idx: int) -> float:
            rv = ctx.real(policy.r(idx))
            with ctx.activate():
                sup = 0.0
                for z in arc_pts:
                    e = float(abs(eval_poly(f, rv * z) - eval_poly(phi, rv * z)))
                    sup = max(sup, e)
            return sup

        # the direct stage bound decides the index; the seeded radius only
        # tells us where to resume when the smallest index fails
        v_seed = state.v[-1] + 1
        while policy.r(v_seed) < float(seed):
            v_seed += 1
        v_n, dil_err = None, None
        candidates = [state.v[-1] + 1]
        candidates += [v_seed + k for k in range(200) if v_seed + k > state.v[-1] + 1]
        for idx in candidates:
            sup = dilate_sup(idx)
            if sup <= 2 * eps_n:
                v_n, dil_err = idx, sup
                break
        if v_n is None:
            raise ConstructionAborted(n, "no dilation index met the stage bound", state)

        state.stage = n
        state.accumulated = f
        state.u.append(u_n)
        state.v.append(v_n)
        state.block_ranges.append((u_n, u_n + pstar.degree()))
        state.certificates.append(cert)
        state.check_invariants()
        report.records.append(
            StageRecord(
                stage=n, u=u_n, v=v_n, v_radius=policy.r(v_n),
                block_range=(u_n, u_n + pstar.degree()),
                certificate=cert, fit_degree=pstar.degree(),
                dilate_error=dil_err, seconds=_time.perf_counter() - t0,
            )
        )

    report.extras["degree"] = f.degree()
    report.extras["precision_bits"] = ctx.bits
    return f, report


# ---------------------------------------------------------------------------
# coefficient-floor construction
# ---------------------------------------------------------------------------

def construct_coefficient_floor(
    floor: CoefficientFloor,
    enroll: TargetEnrollment,
    policy: StagePolicy,
    ctx: PrecisionContext | None = None,
):
    """Build f with |a_k| >= gamma_k on the covered index range.

    The correction block Q_n sets b_i = gamma_i on the gap below u_n and,
    on the fitted range, b_i = 2 gamma_i exactly when |Re(a_i)| <= gamma_i;
    since b_i is real and nonnegative this forces |Re(a_i + b_i)| >= gamma_i.
    Tail conditions are enforced at the largest run radius with threshold
    eps_n / tail_tighten, which is stronger than needed stage by stage and
    keeps every block eps-small at all later stage radii.
    """
    import time as _time

    N = policy.stage_count
    gamma = floor.gamma
    r_big = policy.r(N + 1)
    if ctx is None:
        u_cap = tail_index(gamma, r_big, policy.eps_n(N) / policy.tail_tighten, "gamma")
        budget = u_cap + N * (policy.block_width + policy.max_degree // 4) + policy.max_degree
        ctx = PrecisionContext(auto_bits(budget, policy.R(1)))

    f = Poly.zero(ctx)
    state = ConstructionState(accumulated=f)
    report = StageReport("construct-floor", policy, enroll)
    prev_end = 0

    for n in range(1, N + 1):
        t0 = _time.perf_counter()
        eps_n = policy.eps_n(n)
        delta = eps_n / policy.tail_tighten
        phi, arcK, _, _ = enroll.stage_pair(n)
        r_n, R_n, R_next = policy.r(n), policy.R(n), policy.R(n + 1)

        u_n = prev_end + 1
        u_n = max(u_n, _single_tail_index(gamma, r_big, delta))
        u_n = max(u_n, tail_index(gamma, r_big, delta, "gamma"))
        x = r_n / R_next
        u_n = max(u_n, int(math.ceil(math.log(eps_n * (1 - x)) / math.log(x))))

        block, cert = _fit_block(policy, ctx, f, phi, arcK, u_n, r_n, R_n, eps_n, state, n)
        block_end = max(block.degree(), u_n + policy.block_width - 1)

        with ctx.activate():
            q_coeffs = [mpc(0)] * (block_end + 1)
            for i in range(prev_end + 1, u_n):
                q_coeffs[i] = mpc(mpfr(gamma(i)))
            for i in range(u_n, block_end + 1):
                g_i = mpfr(gamma(i))
                a_i = block.coefficient(i)
                if abs(a_i.real) >= g_i:
                    continue
                q_coeffs[i] = mpc(2 * g_i)
        Q_n = Poly(tuple(q_coeffs), ctx)
        f = f.add(block).add(Q_n)

        state.stage = n
        state.accumulated = f
        state.u.append(u_n)
        state.block_ranges.append((prev_end + 1, block_end))
        state.certificates.append(cert)
        report.records.append(
            StageRecord(
                stage=n, u=u_n, v=None, v_radius=None,
                block_range=(prev_end + 1, block_end),
                certificate=cert, fit_degree=block.degree() if not block.is_zero() else 0,
                dilate_error=None, seconds=_time.perf_counter() - t0,
            )
        )
        prev_end = block_end

    report.extras["degree"] = f.degree()
    report.extras["covered_range"] = [1, prev_end]
    report.extras["precision_bits"] = ctx.bits
    return f, report


# ---------------------------------------------------------------------------
# divergence machinery
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChosenCoefficient:
    value: complex
    est_measure: float
    candidate_count: int
    crossings: int
    grid_size: int


def _candidate_rings(l: int):
    """Candidates in |c| <= l^4 with pairwise separation > 2l.

    Ring m sits at radius 4*m*l; consecutive rings are 4l > 2l apart and
    chords within a ring exceed 2l by the angle-count choice.  Yields in
    tie-break order: increasing |c|, then increasing argument.
    """
    yield 0.0 + 0.0j
    m = 1
    while True:
        rad = 4.0 * m * l
        if rad > l ** 4:
            return
        count = max(1, int(math.pi / math.asin(min(1.0, 1.0 / (4.0 * m)))))
        for k in range(count):
            yield rad * complex(math.cos(TWO_PI * k / count), math.sin(TWO_PI * k / count))
        m += 1


def choose_divergence_coefficient(partial_values: Sequence, l: int, grid_n: int) -> ChosenCoefficient:
    """Measure-minimizing block coefficient for index l on the circle grid.

    partial_values[j] holds S-so-far + a_l w^l at w = exp(2 pi i j / grid_n).
    Candidates are scanned in tie-break order; G_l(c) membership is
    |partial + c w^l| <= l, i.e. |h + c| <= l with h = partial * conj(w^l).
    At least l^2 pairwise-disjoint candidates exist, so the chosen count is
    at most grid_n / l^2 by pigeonhole; the scan stops early at the first
    zero-count candidate, which wins any tie.
    """
    if l < 2:
        raise ValueError("index must be >= 2")
    n = grid_n
    js = np.arange(n, dtype=np.int64)
    phases = np.exp(-2j * math.pi * ((js * l) % n) / n)
    vals = np.empty(n, dtype=complex)
    for j, v in enumerate(partial_values):
        try:
            vals[j] = complex(v)
        except (OverflowError, ValueError):
            vals[j] = complex(math.inf, 0.0)
    h = vals * phases
    finite = np.isfinite(h)
    reach = float(l ** 4 + l)
    active = finite & (np.abs(np.where(finite, h, 0.0)) <= reach)
    h_active = h[active]

    needed = l * l
    best_c, best_count = None, None
    examined = 0
    for c in _candidate_rings(l):
        examined += 1
        if h_active.size:
            count = int(np.count_nonzero(np.abs(h_active + c) <= l))
        else:
            count = 0
        if best_count is None or count < best_count:
            best_c, best_count = c, count
        if best_count == 0 or examined >= needed:
            break
    # crossings of the chosen sublevel set along the grid
    member = np.zeros(n, dtype=bool)
    if h_active.size or best_count:
        with np.errstate(invalid="ignore"):
            member[active] = np.abs(h_active + best_c) <= l
    crossings = int(np.count_nonzero(member != np.roll(member, 1)))
    return ChosenCoefficient(
        value=best_c,
        est_measure=best_count * TWO_PI / n,
        candidate_count=examined,
        crossings=crossings,
        grid_size=n,
    )


def lem1_shift(ws: Sequence, zs: Sequence, R) -> mpc:
    """Shift b with |w_m + b z_m| >= R for all m and |b| <= 2 l R.

    Tries b = 2kR for k = 0..l in order; the reverse-triangle certificate
    ||w_m| - 2kR| >= R admits at least one k because each |w_m| disqualifies
    at most one candidate among the l+1 available.  The winner is then
    re-verified directly.
    """
    if len(ws) != len(zs):
        raise ValueError("ws and zs must have equal length")
    l = len(ws)
    RR = mpfr(R)
    if not RR > 0:
        raise ValueError("R must be positive")
    mags = [abs(mpc(w)) for w in ws]
    for k in range(l + 1):
        b = 2 * k * RR
        if all(abs(m - b) >= RR for m in mags):
            bb = mpc(b)
            for w, z in zip(ws, zs):
                if not abs(mpc(w) + bb * mpc(z)) >= RR:
                    raise AssertionError("reverse-triangle certificate failed on re-verification")
            return bb
    raise AssertionError("pigeonhole failure in shift selection; cannot happen for |ws| = l")


def _divergent_stage_loop(kind, enroll, policy, ctx, grid_n, E, u_min):
    """Shared stage loop for the a.e. and pointwise divergent constructions."""
    import time as _time

    N = policy.stage_count
    weight = "k4" if kind == "ae" else "2k2"
    bound_fn = (lambda l: float(l) ** 4) if kind == "ae" else (lambda l: 2.0 * l * l)
    r_big = policy.r(N + 1)

    if ctx is None:
        probe = tail_index(None, r_big, policy.eps_n(N) / policy.tail_tighten, weight)
        budget = probe + N * (policy.block_width + policy.max_degree // 4) + policy.max_degree
        ctx = PrecisionContext(auto_bits(budget, policy.R(1)))

    f = Poly.zero(ctx)
    state = ConstructionState(accumulated=f)
    state.ledger = DivergenceLedger(route="measure" if kind == "ae" else "shift")
    report = StageReport(f"construct-{kind}", policy, enroll)
    report.ledger = state.ledger
    prev_end = 0

    if kind == "ae":
        unit = _circle_grid_points(ctx, grid_n)
        with ctx.activate():
            S = [mpc(0)] * grid_n
    else:
        with ctx.activate():
            pts = [mpc(z) for z in E]
            S_pts = [mpc(0) for _ in pts]
            pows = [mpc(1) for _ in pts]
        pow_index = 0

    for n in range(1, N + 1):
        t0 = _time.perf_counter()
        eps_n = policy.eps_n(n)
        delta = eps_n / policy.tail_tighten
        phi, arcK, _, _ = enroll.stage_pair(n)
        r_n, R_n, R_next = policy.r(n), policy.R(n), policy.R(n + 1)

        u_n = max(2, prev_end + 1, u_min or 2)
        u_n = max(u_n, tail_index(None, r_big, delta, weight))
        x = r_n / R_next
        u_n = max(u_n, int(math.ceil(math.log(1 - x) / math.log(x))))

        block, cert = _fit_block(policy, ctx, f, phi, arcK, u_n, r_n, R_n, eps_n, state, n)
        block_end = max(block.degree(), u_n + policy.block_width - 1)

        with ctx.activate():
            q_coeffs = [mpc(0)] * (block_end + 1)
            if kind == "ae":
                for l in range(u_n, block_end + 1):
                    a_l = block.coefficient(l)
                    if a_l == 0:
                        base = S
                    else:
                        base = [S[j] + a_l * unit[(j * l) % grid_n] for j in range(grid_n)]
                    choice = choose_divergence_coefficient(base, l, grid_n)
                    b_l = mpc(choice.value)
                    q_coeffs[l] = b_l
                    state.ledger.entries.append(
                        LedgerEntry(
                            index=l, stage=n, value=choice.value,
                            candidate_count=choice.candidate_count,
                            est_measure=choice.est_measure,
                            grid_size=choice.grid_size,
                            crossings=choice.crossings,
                            bound=bound_fn(l),
                        )
                    )
                    add = a_l + b_l
                    if add != 0:
                        for j in range(grid_n):
                            S[j] = S[j] + add * unit[(j * l) % grid_n]
            else:
                for l in range(u_n, block_end + 1):
                    while pow_index < l:
                        for m in range(len(pts)):
                            pows[m] = pows[m] * pts[m]
                        pow_index += 1
                    a_l = block.coefficient(l)
                    active = min(l, len(pts))
                    wlist = [S_pts[m] + a_l * pows[m] for m in range(active)]
                    zlist = [pows[m] for m in range(active)]
                    b_l = lem1_shift(wlist, zlist, l)
                    q_coeffs[l] = b_l
                    state.ledger.entries.append(
                        LedgerEntry(
                            index=l, stage=n, value=complex(b_l),
                            candidate_count=active + 1,
                            est_measure=0.0, grid_size=0, crossings=0,
                            bound=bound_fn(l),
                        )
                    )
                    add = a_l + b_l
                    for m in range(len(pts)):
                        S_pts[m] = S_pts[m] + add * pows[m]

        Q_n = Poly(tuple(q_coeffs), ctx)
        f = f.add(block).add(Q_n)

        state.stage = n
        state.accumulated = f
        state.u.append(u_n)
        state.block_ranges.append((u_n, block_end))
        state.certificates.append(cert)
        state.check_invariants()
        report.records.append(
            StageRecord(
                stage=n, u=u_n, v=None, v_radius=None,
                block_range=(u_n, block_end), certificate=cert,
                fit_degree=block.degree() if not block.is_zero() else 0,
                dilate_error=None, seconds=_time.perf_counter() - t0,
            )
        )
        prev_end = block_end

    state.ledger.check()
    report.extras["degree"] = f.degree()
    report.extras["precision_bits"] = ctx.bits
    report.extras["u_first"] = state.u[1] if len(state.u) > 1 else None
    return f, report, state.ledger


def construct_ae_divergent(
    enroll: TargetEnrollment,
    policy: StagePolicy,
    circle_grid: int = 2 ** 14,
    ctx: PrecisionContext | None = None,
    u_min: int = 2,
):
    """Divergent-partial-sum construction with measure-minimizing blocks.

    Every block coefficient satisfies |b_l| <= l^4 and the grid-estimated
    measure of its sublevel set never exceeds 2 pi / l^2 plus the recorded
    crossing slack.
    """
    if circle_grid < 2 ** 12:
        raise ValueError("circle grid must have at least 2^12 points")
    if u_min < 2:
        raise ValueError("u_1 must be at least 2")
    f, report, ledger = _divergent_stage_loop("ae", enroll, policy, ctx, circle_grid, None, u_min)
    return f, report, ledger


def construct_pointwise_divergent(
    E: Sequence,
    enroll: TargetEnrollment,
    policy: StagePolicy,
    ctx: PrecisionContext | None = None,
    u_min: int = 2,
):
    """Partial sums forced to grow at a finite set E of unimodular points."""
    pts = [complex(z) for z in E]
    if not pts:
        raise ValueError("E must be nonempty")
    if len(set(pts)) != len(pts):
        raise ValueError("points of E must be distinct")
    for z in pts:
        if abs(abs(z) - 1) > 1e-12:
            raise ValueError("points of E must be unimodular")
    f, report, _ = _divergent_stage_loop("pointwise", enroll, policy, ctx, 0, pts, u_min)
    return f, report
