"""Certified polynomial approximation on disc/arc/segment targets.

The classical existence step (approximate a piecewise target on a compact
set with connected complement) is replaced by something checkable: weighted
least squares over dense equispaced piece samples, solved in arbitrary
precision through the normal equations, then certified on an independent
3x-denser validation grid with a Bernstein-style sup margin.

The normal equations are the whole trick.  The Gram matrix of monomials
over equispaced circle/arc samples has closed-form geometric-sum entries
(diagonal for full circles, Toeplitz for arcs, Hankel-with-phase for radial
segments), so assembling the system costs O(d^2) scalar operations instead
of O(samples * d^2), and the Cholesky solve runs at a few thousand bits
without trouble.  Float64 least squares is useless here: the modulated arc
targets z^(-u) (q - p) that the staged constructions feed in require
coefficient cancellation far beyond 1e16 dynamic range.

Degrees escalate geometrically (16, 32, ...) until the certificate meets
the tolerance or the degree cap is hit, in which case the best attempt is
returned with an explicit failure flag.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import gmpy2
from gmpy2 import mpc, mpfr

from .geometry import Arc, CompactTarget
from .numerics import (
    CertificationError,
    Poly,
    PrecisionContext,
    ensure_finite,
    eval_poly,
)


class ApproximationError(ValueError):
    pass


# ---------------------------------------------------------------------------
# piece targets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PieceTarget:
    """Target function on one piece of a CompactTarget.

    kind "const": the constant `const`.
    kind "poly": restriction of `poly`.
    kind "modulated": z^(-order) * (minuend(z) - subtrahend(z)); only legal
    on arc pieces, where z never vanishes.
    """

    piece: tuple
    kind: str
    const: complex = 0
    poly: Poly | None = None
    order: int = 0
    minuend: Poly | None = None
    subtrahend: Poly | None = None

    def __post_init__(self):
        if self.kind not in ("const", "poly", "modulated"):
            raise ApproximationError(f"unknown target kind {self.kind!r}")
        if self.kind == "modulated" and self.piece[0] != "arc":
            raise ApproximationError("modulated targets are only allowed on arcs")

    def values(self, points: Sequence, ctx: PrecisionContext) -> list:
        with ctx.activate():
            if self.kind == "const":
                c = mpc(self.const)
                return [c for _ in points]
            if self.kind == "poly":
                return [eval_poly(self.poly, z) for z in points]
            out = []
            for z in points:
                zz = mpc(z)
                v = eval_poly(self.minuend, zz) - eval_poly(self.subtrahend, zz)
                out.append(ensure_finite(v * zz ** (-self.order), "modulated target"))
            return out

    def is_zero(self) -> bool:
        if self.kind == "const":
            return complex(self.const) == 0
        if self.kind == "poly":
            return self.poly.is_zero()
        return self.minuend.is_zero() and self.subtrahend.is_zero()


@dataclass(frozen=True)
class ApproxCertificate:
    degree: int
    certified_sup_error: float
    validation_density: float
    margin_factor: float
    raw_grid_sup: float = 0.0
    success: bool = True
    build_bits: int = 0
    per_piece: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.margin_factor <= 1.0:
            raise CertificationError("margin factor must exceed 1")


# ---------------------------------------------------------------------------
# build grids with closed-form moment sums
# ---------------------------------------------------------------------------

_ARC_PAD = 0.05   # fit on a slightly wider arc; certify on the true arc


def _expsum(p: int, th0, dth, n: int) -> mpc:
    """sum_{i<n} exp(i*p*(th0 + (i+1/2)*dth)), exact geometric series."""
    if p == 0:
        return mpc(n)
    half = th0 + dth / 2
    w = mpc(gmpy2.cos(p * dth), gmpy2.sin(p * dth))
    z0 = mpc(gmpy2.cos(p * half), gmpy2.sin(p * half))
    if w == 1:
        return z0 * n
    return z0 * (w ** n - 1) / (w - 1)


class _PieceGrid:
    """Build/validation geometry and moment machinery for one piece."""

    def __init__(self, kind, index, K: CompactTarget, deg: int, mult: int):
        self.kind, self.index = kind, index
        self.n = mult * deg
        self.K = K
        if kind == "disc":
            self.length = max(2 * math.pi * (K.central_disc_radius or 0.0), 1e-9)
        elif kind == "arc":
            self.length = K.arcs[index].length
        else:
            self.length = K.radial_segments[index].length

    # -- build points -------------------------------------------------------
    def build_points(self, ctx: PrecisionContext) -> list:
        K, n = self.K, self.n
        with ctx.activate():
            if self.kind == "disc":
                R = mpfr(K.central_disc_radius)
                if R == 0:
                    return [mpc(0)]
                return [R * ctx.unit_point(2 * math.pi * i / n) for i in range(n)]
            if self.kind == "arc":
                a = K.arcs[self.index]
                hw = a.half_width * (1 + _ARC_PAD)
                th0 = mpfr(a.center_angle) - mpfr(hw)
                dth = 2 * mpfr(hw) / n
                return [ctx.unit_point(th0 + dth * (2 * i + 1) / 2) for i in range(n)]
            s = K.radial_segments[self.index]
            d = ctx.unit_point(s.angle)
            return [
                d * (mpfr(s.from_r) + mpfr(s.length) * (2 * i + 1) / (2 * n))
                for i in range(n)
            ]

    # -- validation points (independent, offset, 3x denser) -----------------
    def validation_points(self, ctx: PrecisionContext) -> list:
        K = self.K
        n = 3 * self.n
        with ctx.activate():
            if self.kind == "disc":
                R = mpfr(K.central_disc_radius)
                if R == 0:
                    return [mpc(0)]
                return [R * ctx.unit_point(2 * math.pi * (i + 0.37) / n) for i in range(n)]
            if self.kind == "arc":
                a = K.arcs[self.index]
                th0 = mpfr(a.center_angle) - mpfr(a.half_width)
                dth = 2 * mpfr(a.half_width) / n
                return [ctx.unit_point(th0 + dth * (i + 0.37)) for i in range(n)]
            s = K.radial_segments[self.index]
            d = ctx.unit_point(s.angle)
            return [
                d * (mpfr(s.from_r) + mpfr(s.length) * (i + 0.37) / n) for i in range(n)
            ]

    # -- Gram contribution: weight * sum conj(z^j) z^k ----------------------
    def add_gram(self, G, deg: int, weight: mpfr):
        n = self.n
        if self.kind == "disc":
            R = mpfr(self.K.central_disc_radius)
            if R == 0:
                G[0][0] += weight
                return
            rp = mpfr(1)
            for j in range(deg + 1):
                G[j][j] += weight * n * rp
                rp *= R * R
            return
        if self.kind == "arc":
            a = self.K.arcs[self.index]
            hw = a.half_width * (1 + _ARC_PAD)
            th0 = mpfr(a.center_angle) - mpfr(hw)
            dth = 2 * mpfr(hw) / n
            T = [_expsum(p, th0, dth, n) for p in range(deg + 1)]
            for j in range(deg + 1):
                for k in range(j, deg + 1):
                    t = weight * T[k - j]
                    G[j][k] += t
                    if k != j:
                        G[k][j] += t.conjugate()
            return
        s = self.K.radial_segments[self.index]
        xs = [
            mpfr(s.from_r) + mpfr(s.length) * (2 * i + 1) / (2 * n) for i in range(n)
        ]
        S = [mpfr(0)] * (2 * deg + 1)
        for x in xs:
            px = mpfr(1)
            for p in range(2 * deg + 1):
                S[p] += px
                px *= x
        phase = [mpc(1)]
        w1 = mpc(gmpy2.cos(mpfr(s.angle)), gmpy2.sin(mpfr(s.angle)))
        for _ in range(deg):
            phase.append(phase[-1] * w1)
        for j in range(deg + 1):
            for k in range(j, deg + 1):
                t = weight * S[j + k] * (phase[k - j])
                G[j][k] += t
                if k != j:
                    G[k][j] += t.conjugate()


def _rhs_from_values(rhs, points, values, deg: int, weight: mpfr):
    """rhs_j += weight * sum_i conj(z_i^j) * v_i, by incremental powers."""
    for z, v in zip(points, values):
        wv = weight * v
        cp = mpc(1)
        zc = mpc(z).conjugate()
        for j in range(deg + 1):
            rhs[j] += cp * wv
            cp *= zc


def _cholesky_solve(G, rhs, d1: int):
    L = [[mpc(0)] * d1 for _ in range(d1)]
    for i in range(d1):
        Li, Gi = L[i], G[i]
        for j in range(i + 1):
            s = Gi[j]
            Lj = L[j]
            for k in range(j):
                s -= Li[k] * Lj[k].conjugate()
            if i == j:
                if not s.real > 0:
                    raise CertificationError(f"normal equations lost positivity at row {i}")
                Li[j] = mpc(gmpy2.sqrt(s.real))
            else:
                Li[j] = s / Lj[j]
    y = [mpc(0)] * d1
    for i in range(d1):
        s = rhs[i]
        Li = L[i]
        for k in range(i):
            s -= Li[k] * y[k]
        y[i] = s / Li[i]
    c = [mpc(0)] * d1
    for i in reversed(range(d1)):
        s = y[i]
        for k in range(i + 1, d1):
            s -= L[k][i].conjugate() * c[k]
        c[i] = s / L[i][i]
    return c


def _escalation_degrees(start: int, max_degree: int):
    d = min(start, max_degree)
    out = []
    while d < max_degree:
        out.append(d)
        d *= 2
    out.append(max_degree)
    return out


def approximate(
    K: CompactTarget,
    targets: Sequence[PieceTarget],
    tol: float,
    max_degree: int,
    ctx: PrecisionContext | None = None,
    build_mult: int = 6,
    escalation_start: int = 16,
) -> tuple:
    """Certified sup-norm approximation of piecewise targets on K.

    Returns (Poly, ApproxCertificate); certificate.success is False when
    max_degree was exhausted, in which case the best attempt is returned.
    Disc pieces are fitted and certified on their boundary circle: the
    error against a const/poly target is holomorphic inside, so its sup
    over the disc is attained there.
    """
    ctx = ctx or PrecisionContext()
    if tol <= 0:
        raise ApproximationError("tolerance must be positive")
    pieces = K.pieces()
    by_piece = {t.piece: t for t in targets}
    if set(by_piece) != set(pieces) or len(targets) != len(pieces):
        raise ApproximationError("need exactly one PieceTarget per piece of K")

    # identically-zero targets: the zero polynomial is exact
    if all(t.is_zero() for t in targets):
        cand = Poly.zero(ctx)
        return cand, _certify(K, targets, cand, 0, build_mult, ctx)

    # constant target shared by all pieces: exact answer, degree 0
    consts = {complex(t.const) for t in targets if t.kind == "const"}
    if len(consts) == 1 and all(t.kind == "const" for t in targets):
        cand = Poly.from_values([consts.pop()], ctx)
        cert = _certify(K, targets, cand, 0, build_mult, ctx)
        return cand, cert

    best = None
    for deg in _escalation_degrees(escalation_start, max_degree):
        cand, bits = _solve_round(K, by_piece, pieces, deg, build_mult, ctx)
        cert = _certify(K, targets, cand, deg, build_mult, ctx, build_bits=bits)
        if best is None or cert.certified_sup_error < best[1].certified_sup_error:
            best = (cand, cert)
        if cert.certified_sup_error <= tol:
            return _trim(K, targets, cand, cert, tol, build_mult, ctx)
    cand, cert = best
    failed = ApproxCertificate(
        degree=cert.degree,
        certified_sup_error=cert.certified_sup_error,
        validation_density=cert.validation_density,
        margin_factor=cert.margin_factor,
        raw_grid_sup=cert.raw_grid_sup,
        success=False,
        build_bits=cert.build_bits,
        per_piece=cert.per_piece,
    )
    return cand, failed


def _trim(K, targets, cand, cert, tol, build_mult, ctx):
    """Drop negligible trailing coefficients if the certificate survives.

    Coefficients below tol * 2^-20 contribute at most (deg+1) * tol * 2^-20
    anywhere on the closed disc, so a passing fit of a low-degree target
    comes back at (close to) the target's own degree.
    """
    with ctx.activate():
        thresh = mpfr(tol) * mpfr(2) ** -20
        d = cand.degree()
        while d > 0 and abs(cand.coeffs[d]) <= thresh:
            d -= 1
    if d == cand.degree():
        return cand, cert
    trimmed = cand.truncate(d)
    tcert = _certify(K, targets, trimmed, d, build_mult, ctx, build_bits=cert.build_bits)
    if tcert.certified_sup_error <= tol:
        return trimmed, tcert
    return cand, cert


def _solve_round(K, by_piece, pieces, deg, build_mult, ctx):
    bits = max(ctx.bits, 3 * deg + 512)
    for attempt in range(3):
        build = PrecisionContext(bits)
        try:
            with build.activate():
                d1 = deg + 1
                grids = [_PieceGrid(kind, idx, K, deg, build_mult) for kind, idx in pieces]
                G = [[mpc(0)] * d1 for _ in range(d1)]
                rhs = [mpc(0)] * d1
                npieces = len(grids)
                for g in grids:
                    n_pts = 1 if (g.kind == "disc" and not K.central_disc_radius) else g.n
                    weight = mpfr(1) / (npieces * n_pts)
                    g.add_gram(G, deg, weight)
                    t = by_piece[(g.kind, g.index)]
                    if t.kind == "const" and complex(t.const) == 0:
                        continue
                    pts = g.build_points(build)
                    vals = t.values(pts, build)
                    _rhs_from_values(rhs, pts, vals, deg, weight)
                coeffs = _cholesky_solve(G, rhs, d1)
            with ctx.activate():
                cand = Poly(tuple(mpc(c) for c in coeffs), ctx)
            return cand, bits
        except CertificationError:
            bits = int(bits * 1.5)
    raise ApproximationError(
        f"normal equations stayed indefinite at degree {deg} up to {bits} bits"
    )


def _certify(K, targets, cand, deg, build_mult, ctx, build_bits=0):
    n_val = 3 * build_mult * max(deg, 1)
    margin = 1.0 / (1.0 - math.pi * deg / n_val) if deg else 1.0 + 1e-9
    raw = 0.0
    per_piece = {}
    min_density = math.inf
    for kind, idx in K.pieces():
        g = _PieceGrid(kind, idx, K, max(deg, 1), build_mult)
        pts = g.validation_points(ctx)
        t = next(t for t in targets if t.piece == (kind, idx))
        tv = t.values(pts, ctx)
        with ctx.activate():
            sup = 0.0
            for z, v in zip(pts, tv):
                e = float(abs(eval_poly(cand, z) - v))
                if e > sup:
                    sup = e
        per_piece[f"{kind}:{idx}"] = sup
        raw = max(raw, sup)
        min_density = min(min_density, len(pts) / g.length)
    return ApproxCertificate(
        degree=deg,
        certified_sup_error=raw * margin,
        validation_density=min_density,
        margin_factor=margin,
        raw_grid_sup=raw,
        success=True,
        build_bits=build_bits,
        per_piece=per_piece,
    )


# ---------------------------------------------------------------------------
# tail indices for the staged constructions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SequenceSpec:
    """Nonnegative sequence with limsup s_k^(1/k) <= 1.

    Either polynomially bounded (s_k <= scale * k^power, used for the
    geometric closure of tails) or explicitly user-certified.
    """

    fn: Callable[[int], float]
    description: str = ""
    power: float = 0.0
    scale: float = 1.0
    user_certified: bool = False

    def __call__(self, k: int):
        return self.fn(k)


WEIGHT_SPECS = {
    "k4": SequenceSpec(lambda k: k ** 4, "k^4", power=4.0),
    "2k2": SequenceSpec(lambda k: 2 * k * k, "2k^2", power=2.0),
}


def tail_index(gamma: SequenceSpec, r, eps, weight: str = "gamma",
               ctx: PrecisionContext | None = None) -> int:
    """Smallest tested n with sum_{j>=n} sum_{k>=j} s_k r^k <= eps.

    The summand s_k is gamma for weight "gamma", else the built-in k^4 or
    2k^2 weight.  Summation stops once terms fall below eps * 2^-20 and the
    ratio test certifies a geometric closure bound for both tails.
    """
    ctx = ctx or PrecisionContext()
    if weight == "gamma":
        spec = gamma
    elif weight in WEIGHT_SPECS:
        spec = WEIGHT_SPECS[weight]
    else:
        raise ValueError(f"unknown weight {weight!r}")
    if not spec.user_certified and spec.power is None:
        raise ValueError("sequence spec must be polynomially bounded or user-certified")
    with ctx.activate():
        rr = mpfr(r)
        if not 0 < rr < 1:
            raise ValueError("r must lie in (0,1)")
        eps = mpfr(eps)
        cutoff = eps * mpfr(2) ** -32
        terms = []
        k = 0
        rpow = mpfr(1)
        stall = 0
        all_zero = True
        while True:
            try:
                sk = mpfr(spec(k))
            except OverflowError:
                raise ValueError("sequence spec overflowed; tail diverges") from None
            t = sk * rpow
            if not gmpy2.is_finite(t):
                raise ValueError("sequence spec overflowed; tail diverges")
            if t < 0:
                raise ValueError("sequence spec produced a negative value")
            terms.append(t)
            all_zero = all_zero and t == 0
            if k >= 8 and t != 0 and terms[k - 1] != 0:
                if t >= terms[k - 1]:
                    stall += 1
                    if stall > 512:
                        raise ValueError("ratio test fails persistently; tail may diverge")
                else:
                    stall = 0
            if k >= 4 and t <= cutoff:
                if all_zero:
                    break
                q = rr * mpfr((k + 1) / max(k, 1)) ** mpfr(spec.power or 0.0)
                if q < 1 and terms[-1] * q / (1 - q) ** 2 * (k + 2) <= eps * mpfr(2) ** -12:
                    break
            k += 1
            rpow *= rr
            if k > 10 ** 7:
                raise ValueError("tail did not close below the cutoff")
        K_stop = len(terms) - 1
        # inner tails I(j) = sum_{k>=j} t_k, truncated at K_stop; the
        # geometric closure beyond K_stop is below eps*2^-12 by the stopping
        # rule and is excluded from the comparison, so exact-equality cases
        # resolve the way the closed forms say they should.
        inner = [mpfr(0)] * (K_stop + 2)
        for j in range(K_stop, -1, -1):
            inner[j] = inner[j + 1] + terms[j]
        total = mpfr(0)
        for j in range(K_stop, -1, -1):
            total = total + inner[j]
        n = 0
        while total > eps:
            if n > K_stop:
                raise ValueError("tail does not reach the requested eps")
            total = total - inner[n]
            n += 1
        return n


def uniform_dilation_radius(
    expr: Callable,
    K: Arc,
    delta,
    r_floor,
    ctx: PrecisionContext | None = None,
    effective_degree: int = 64,
    max_refine: int = 60,
):
    """Radius v in (r_floor, 1) with sup_K |expr(v z) - expr(z)| <= delta.

    Bisection from above: candidate midpoints march toward 1 until the
    inflated grid sup passes.  Raises with the best achieved bound if
    max_refine halvings are exhausted.
    """
    ctx = ctx or PrecisionContext()
    n = max(512, 8 * effective_degree + 64)
    margin = 1.0 / (1.0 - math.pi * min(effective_degree, n / 4) / n)
    with ctx.activate():
        delta = mpfr(delta)
        if not delta > 0:
            raise ValueError("delta must be positive")
        lo = mpfr(r_floor)
        if not 0 <= lo < 1:
            raise ValueError("r_floor must lie in [0,1)")
        zs = [ctx.unit_point(t) for t in K.angles(n)]
        base = [mpc(expr(z)) for z in zs]
        achieved = None
        for _ in range(max_refine):
            v = (lo + 1) / 2
            sup = mpfr(0)
            for z, b in zip(zs, base):
                d = abs(mpc(expr(v * z)) - b)
                if d > sup:
                    sup = d
            sup = sup * mpfr(margin)
            if achieved is None or sup < achieved:
                achieved = sup
            if sup <= delta:
                return v
            lo = v
        raise ApproximationError(
            f"no dilation radius above {float(r_floor)} reached delta={float(delta)}; "
            f"best inflated sup {float(achieved)}"
        )
