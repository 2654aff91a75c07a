"""Boundary and Taylor-expansion measurements on a polynomial.

Every estimate here is finite evidence with an explicit grid record: sup
estimates carry their grid size and margin factor, divergence checks are
per-index at stated checkpoints, and nothing asymptotic (normality as a
verdict, maximal cluster sets, integral divergence) is ever claimed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import gmpy2
import numpy as np
from gmpy2 import mpc, mpfr

from .geometry import Arc, CompactTarget, harmonic_majorant
from .numerics import (
    Poly,
    PrecisionContext,
    eval_grid_fast,
    eval_many,
    eval_poly,
)

TWO_PI = 2 * math.pi


def _values(poly: Poly, pts, abs_budget: float):
    """float64 values when the rounding bound stays below abs_budget."""
    vals, bound = eval_grid_fast(poly, [complex(z) for z in pts])
    if vals is not None and bound <= abs_budget:
        return [complex(v) for v in vals]
    return [complex(v) for v in eval_many(poly, pts)]


# ---------------------------------------------------------------------------
# dilate density
# ---------------------------------------------------------------------------

def dilate_density_check(f: Poly, radii: Sequence[float], K: Arc, phi: Poly,
                         grid: int = 512, return_series: bool = False):
    """Best dilation radius for approximating phi on the arc.

    Evaluates sup over the sampled arc of |f(r z) - phi(z)| for each r and
    returns (best_r, best_sup); the full series comes back on request.
    """
    ctx = f.precision
    angles = K.angles(grid)
    with ctx.activate():
        zs = [ctx.unit_point(t) for t in angles]
        phi_vals = [eval_poly(phi, z) for z in zs]
        series = []
        for r in radii:
            rr = mpfr(r)
            if not 0 <= rr < 1:
                raise ValueError("radii must lie in [0,1)")
            sup = 0.0
            for z, pv in zip(zs, phi_vals):
                e = float(abs(eval_poly(f, rr * z) - pv))
                if e > sup:
                    sup = e
            series.append((float(r), sup))
    best_r, best = min(series, key=lambda t: t[1])
    if return_series:
        return best_r, best, series
    return best_r, best


# ---------------------------------------------------------------------------
# growth metrics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GrowthReport:
    r_grid: tuple
    M: tuple                     # certified circle sup per radius
    circle_grid: int
    margin_factor: float
    M_A: tuple | None            # sup over A on each circle, None entries off A
    hornblower_partial: float    # trapezoid of log+ log+ M over the grid

    def check_monotone(self, slack: float = 0.0):
        margin_slack = self.margin_factor - 1.0
        for a, b in zip(self.M, self.M[1:]):
            if b < a * (1 - margin_slack) - slack:
                raise AssertionError("M(r) decreased beyond grid slack")


def _log_plus(x: float) -> float:
    return math.log(x) if x > 1 else 0.0


def growth_metrics(f: Poly, r_grid: Sequence[float], A: CompactTarget | None = None) -> GrowthReport:
    """Maximum modulus on circles, its restriction to A, and the partial
    double-log growth integral by trapezoid quadrature on the grid."""
    ctx = f.precision
    deg = f.degree()
    n = 8 * deg + 64
    margin = 1.0 / (1.0 - math.pi * deg / n)
    thetas = [TWO_PI * j / n for j in range(n)]
    M_vals = []
    for r in r_grid:
        if not 0 <= r < 1:
            raise ValueError("r grid must lie in [0,1)")
        pts = [r * complex(math.cos(t), math.sin(t)) for t in thetas]
        vals, bound = eval_grid_fast(f, pts)
        if vals is not None and bound <= 1e-9:
            raw = float(np.max(np.abs(vals)))
        else:
            with ctx.activate():
                raw = max(float(abs(v)) for v in eval_many(f, [mpc(p) for p in pts]))
        M_vals.append(raw * margin)
    M_A_vals = None
    if A is not None:
        M_A_vals = []
        for r in r_grid:
            best = None
            for seg in A.radial_segments:
                hi = min(seg.to_r, 1 - 2 ** -11) if seg.to_r >= 1 else seg.to_r
                if seg.from_r <= r <= hi:
                    z = ctx.real(r) * ctx.unit_point(seg.angle)
                    v = float(abs(eval_poly(f, z)))
                    best = v if best is None else max(best, v)
            M_A_vals.append(best)
    horn = 0.0
    for (r1, m1), (r2, m2) in zip(zip(r_grid, M_vals), list(zip(r_grid, M_vals))[1:]):
        horn += 0.5 * (_log_plus(_log_plus(m1)) + _log_plus(_log_plus(m2))) * (r2 - r1)
    return GrowthReport(
        r_grid=tuple(float(r) for r in r_grid),
        M=tuple(M_vals),
        circle_grid=n,
        margin_factor=margin,
        M_A=tuple(M_A_vals) if M_A_vals is not None else None,
        hornblower_partial=horn,
    )


# ---------------------------------------------------------------------------
# gap witnesses
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GapWitness:
    kind: str                 # "hadamard" | "hadamard-ostrowski" | "ostrowski"
    support: tuple = ()       # hadamard: the nonzero indices
    intervals: tuple = ()     # HO/ostrowski: (p, q) index pairs, interval (p, q]
    ratio: float = 0.0        # achieved min (hadamard) or interval ratio
    root_bound: float = 0.0   # max |a_k|^(1/k) over the reported index set


def gap_witnesses(coeffs, theta: float = 0.9, sigma: float = 1.1, k_min: int = 1) -> list:
    """Finite gap witnesses: never an asymptotic verdict.

    Hadamard: support indices >= k_min with min successive ratio >= sigma.
    Hadamard-Ostrowski: maximal runs of |a_k|^(1/k) <= theta reported as
    intervals (p, q] with q/p >= sigma.  Ostrowski: the HO interval of
    largest ratio, as the finite proxy for q/p tending to infinity.
    """
    if not 0 < theta < 1:
        raise ValueError("theta must lie in (0,1)")
    if not sigma > 1:
        raise ValueError("sigma must exceed 1")
    if isinstance(coeffs, Poly):
        mags = [float(abs(c)) for c in coeffs.coeffs]
    else:
        mags = [float(abs(complex(c))) for c in coeffs]
    k_min = max(1, k_min)
    out = []

    support = [k for k in range(k_min, len(mags)) if mags[k] != 0]
    if len(support) >= 2:
        ratios = [b / a for a, b in zip(support, support[1:])]
        if min(ratios) >= sigma:
            out.append(GapWitness(
                kind="hadamard", support=tuple(support), ratio=min(ratios),
                root_bound=max(mags[k] ** (1.0 / k) for k in support),
            ))

    runs = []
    start = None
    for k in range(k_min, len(mags)):
        small = mags[k] ** (1.0 / k) <= theta
        if small and start is None:
            start = k
        elif not small and start is not None:
            runs.append((start, k - 1))
            start = None
    if start is not None:
        runs.append((start, len(mags) - 1))
    ho = []
    for s, e in runs:
        p = max(s - 1, 1)
        if p < e and e / p >= sigma:
            roots = [mags[k] ** (1.0 / k) for k in range(p + 1, e + 1)]
            ho.append(GapWitness(
                kind="hadamard-ostrowski", intervals=((p, e),),
                ratio=e / p, root_bound=max(roots),
            ))
    out.extend(ho)
    if ho:
        top = max(ho, key=lambda w: w.ratio)
        out.append(GapWitness(
            kind="ostrowski", intervals=top.intervals,
            ratio=top.ratio, root_bound=top.root_bound,
        ))
    return out


# ---------------------------------------------------------------------------
# normality / Bloch
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NormalityScan:
    value: float
    n_radial: int
    n_angular: int
    region: tuple   # (zeta, r) or None for the whole disc


def normality_scan(f: Poly, region: tuple | None = None,
                   grid: tuple = (48, 256), r_cap: float = 0.995) -> NormalityScan:
    """Grid sup of (1 - |z|^2) |f'(z)| / (1 + |f(z)|^2)."""
    n_r, n_t = grid
    fp = f.derivative()
    pts = []
    for i in range(1, n_r + 1):
        rho = r_cap * i / n_r
        for j in range(n_t):
            z = rho * complex(math.cos(TWO_PI * j / n_t), math.sin(TWO_PI * j / n_t))
            if region is not None:
                zeta, rad = region
                if abs(z - complex(zeta)) >= rad:
                    continue
            pts.append(z)
    pts.append(0j if region is None else pts[0] if pts else 0j)
    fv = _values(f, pts, 1e-9)
    fpv = _values(fp, pts, 1e-9)
    best = 0.0
    for z, a, b in zip(pts, fv, fpv):
        s = (1 - abs(z) ** 2) * abs(b) / (1 + abs(a) ** 2)
        if s > best:
            best = s
    return NormalityScan(best, n_r, n_t, region)


def bloch_norm_estimate(f: Poly, grid: tuple = (48, 256)) -> float:
    """Grid sup of (1 - |z|^2) |f'(z)| over concentric circles.

    Circles march toward the boundary until the certified coefficient-sum
    bound on |f'| shows the weighted sup can no longer beat the running
    maximum, which happens at a degree-dependent radius.
    """
    n_r, n_t = grid
    fp = f.derivative()
    ell1 = float(sum(abs(c) for c in fp.coeffs))  # sup bound for |f'| on the closed disc
    thetas = [TWO_PI * j / n_t for j in range(n_t)]
    best = abs(complex(eval_poly(fp, 0)))
    r = 0.0
    step = 1.0 / n_r
    while True:
        r = r + step
        if r >= 1:
            break
        weight = 1 - r * r
        if ell1 * weight < best:
            break  # no radius beyond here can exceed the running max
        pts = [r * complex(math.cos(t), math.sin(t)) for t in thetas]
        vals = _values(fp, pts, 1e-9)
        m = max(abs(v) for v in vals)
        best = max(best, weight * m)
    return best


# ---------------------------------------------------------------------------
# Picard coverage / cluster values
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CoverageReport:
    region: tuple            # (zeta, r)
    window: tuple            # (center, halfwidth)
    value_grid: int
    covered_fraction: float
    covered_cells: int
    total_cells: int
    missed_cells: tuple      # truncated list of (i, j) cell indices
    domain_points: int

    def __post_init__(self):
        if not 0 <= self.covered_fraction <= 1:
            raise AssertionError("covered fraction out of range")


def picard_coverage(f: Poly, zeta, r: float, window: tuple,
                    domain_grid: tuple = (96, 512), value_grid: int = 64,
                    missed_cap: int = 4096) -> CoverageReport:
    """Mark value-window cells hit by f on D(zeta, r) intersected with D.

    The domain grid is a fixed master polar grid filtered by |z - zeta| < r,
    so coverage is exactly monotone in r.
    """
    if r <= 0:
        raise ValueError("r must be positive")
    n_r, n_t = domain_grid
    zt = complex(zeta)
    pts = []
    for i in range(1, n_r + 1):
        rho = (1 - 2 ** -12) * i / n_r
        for j in range(n_t):
            z = rho * complex(math.cos(TWO_PI * j / n_t), math.sin(TWO_PI * j / n_t))
            if abs(z - zt) < r:
                pts.append(z)
    center, hw = complex(window[0]), float(window[1])
    hit = np.zeros((value_grid, value_grid), dtype=bool)
    if pts:
        vals = _values(f, pts, 1e-9)
        for v in vals:
            x = (v.real - (center.real - hw)) / (2 * hw) * value_grid
            y = (v.imag - (center.imag - hw)) / (2 * hw) * value_grid
            i, j = int(x), int(y)
            if 0 <= i < value_grid and 0 <= j < value_grid:
                hit[i, j] = True
    covered = int(hit.sum())
    total = value_grid * value_grid
    missed = tuple(zip(*np.nonzero(~hit)))[:missed_cap]
    return CoverageReport(
        region=(zt, r), window=(center, hw), value_grid=value_grid,
        covered_fraction=covered / total, covered_cells=covered,
        total_cells=total, missed_cells=tuple((int(a), int(b)) for a, b in missed),
        domain_points=len(pts),
    )


@dataclass(frozen=True)
class RadialClusterReport:
    values: tuple
    box: tuple
    delta: float
    approached_fraction: float
    covering_radius: float


def radial_cluster_sample(f: Poly, zeta, r_grid: Sequence[float],
                          box: tuple = (0j, 2.0), box_n: int = 16,
                          delta: float = 0.25) -> RadialClusterReport:
    """Values along the radius and how much of a reference box they approach."""
    zt = complex(zeta)
    pts = [r * zt for r in r_grid]
    vals = _values(f, pts, 1e-9)
    center, hw = complex(box[0]), float(box[1])
    approached = 0
    worst = 0.0
    for i in range(box_n):
        for j in range(box_n):
            node = center + complex(
                -hw + (2 * i + 1) * hw / box_n, -hw + (2 * j + 1) * hw / box_n
            )
            d = min(abs(v - node) for v in vals)
            worst = max(worst, d)
            if d <= delta:
                approached += 1
    return RadialClusterReport(
        values=tuple(vals), box=(center, hw), delta=delta,
        approached_fraction=approached / (box_n * box_n), covering_radius=worst,
    )


def two_radii_bound_check(f: Poly, zeta1, zeta2, c: float,
                          r_grid: Sequence[float]) -> float:
    """max over both radii of |f(r zeta_i)| exp(-h(r zeta_i)).

    A value above 1 witnesses escape from the harmonic majorant e^h with
    h = c (P(., zeta1) + P(., zeta2)).
    """
    ctx = f.precision
    if complex(zeta1) == complex(zeta2):
        raise ValueError("the two boundary points must differ")
    best = 0.0
    with ctx.activate():
        z1, z2 = mpc(zeta1), mpc(zeta2)
        for zt in (z1, z2):
            for r in r_grid:
                if not 0 <= r < 1:
                    raise ValueError("r grid must lie in [0,1)")
                z = mpfr(r) * zt
                av = float(abs(eval_poly(f, z)))
                h = float(harmonic_majorant(z, z1, z2, c, ctx))
                if av == 0.0:
                    continue
                logv = math.log(av) - h
                val = math.exp(logv) if logv < 700 else math.inf
                best = max(best, val)
    return best


# ---------------------------------------------------------------------------
# partial-sum divergence profile
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DivergenceProfile:
    checkpoints: tuple
    fraction_diverging: float   # fraction of points with min |S_k|/k >= 1
    min_ratios: tuple           # per-point min over checkpoints of |S_k|/k
    grid_size: int


def partial_sum_divergence_profile(f: Poly, points, checkpoints: Sequence[int]) -> DivergenceProfile:
    """Per-point min over checkpoints of |S_k(f)| / k.

    points may be an integer (that many circle-grid roots of unity) or an
    explicit list.  Checkpoints must not exceed deg(f); partial sums are
    accumulated exactly at working precision.
    """
    ctx = f.precision
    cps = sorted(set(int(k) for k in checkpoints))
    if not cps:
        raise ValueError("need at least one checkpoint")
    if cps[0] < 1 or cps[-1] > f.degree():
        raise ValueError("checkpoints must lie in [1, deg(f)]")
    if isinstance(points, int):
        pts = [ctx.unit_point(TWO_PI * j / points) for j in range(points)]
    else:
        with ctx.activate():
            pts = [mpc(z) for z in points]
    mins = []
    with ctx.activate():
        cs = f.coeffs
        top = cps[-1]
        for z in pts:
            acc = mpc(0)
            power = mpc(1)
            it = iter(cps)
            nxt = next(it)
            worst = math.inf
            for k in range(top + 1):
                if k > 0:
                    power *= z
                acc = acc + cs[k] * power
                if k == nxt:
                    ratio = float(abs(acc)) / k
                    if ratio < worst:
                        worst = ratio
                    nxt = next(it, None)
                    if nxt is None:
                        break
            mins.append(worst)
    frac = sum(1 for m in mins if m >= 1.0) / len(mins)
    return DivergenceProfile(
        checkpoints=tuple(cps), fraction_diverging=frac,
        min_ratios=tuple(mins), grid_size=len(pts),
    )
