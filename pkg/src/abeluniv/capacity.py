"""Logarithmic capacity estimates and partial-sum sublevel capacity curves.

Capacity is estimated by the transfinite diameter of a greedily selected
extremal configuration (Leja-style): starting from the point of largest
modulus, each step adds the cloud point maximizing the product of distances
to the selected set.  The raw m-point diameter is biased high by the
universal factor m^(1/(m-1)) (exact for extremal configurations on a
circle), which is divided out; the factor is recorded on the estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from gmpy2 import mpc

from .numerics import Poly, PrecisionContext

TWO_PI = 2 * math.pi


@dataclass(frozen=True)
class PointCloud:
    points: tuple
    provenance: str = ""

    def __post_init__(self):
        pts = tuple(complex(z) for z in self.points)
        if not pts:
            raise ValueError("point cloud must be nonempty")
        if len(set(pts)) != len(pts):
            raise ValueError("duplicate points rejected")
        object.__setattr__(self, "points", pts)


@dataclass(frozen=True)
class CapacityEstimate:
    value: float
    extremal_point_count: int
    method: str = "greedy-extremal"
    debias_factor: float = 1.0

    def __post_init__(self):
        if self.value < 0:
            raise AssertionError("capacity estimate must be nonnegative")


def capacity_estimate(cloud: PointCloud, m: int = 48) -> CapacityEstimate:
    """Transfinite-diameter estimate from m greedy extremal points.

    Deterministic: the first point is the cloud point of largest modulus
    (ties by argument), later ties by cloud order.  Clouds smaller than m
    use all their points; a single point has capacity estimate 0.
    """
    pts = np.array(cloud.points, dtype=complex)
    if len(pts) < 2:
        return CapacityEstimate(0.0, len(pts))
    if m < 2:
        raise ValueError("m must be at least 2 for clouds with >= 2 points")
    m = min(m, len(pts))
    mods = np.abs(pts)
    top = mods.max()
    first_candidates = np.nonzero(mods >= top * (1 - 1e-15))[0]
    i0 = first_candidates[np.argmin(np.angle(pts[first_candidates]) % TWO_PI)]
    selected = [i0]
    logsum = np.log(np.abs(pts - pts[i0]) + 1e-300)
    available = np.ones(len(pts), dtype=bool)
    available[i0] = False
    total_log = 0.0
    for _ in range(m - 1):
        cand = np.nonzero(available)[0]
        j = cand[np.argmax(logsum[cand])]
        total_log += logsum[j]
        selected.append(j)
        available[j] = False
        logsum += np.log(np.abs(pts - pts[j]) + 1e-300)
    raw = math.exp(2.0 * total_log / (m * (m - 1)))
    debias = m ** (1.0 / (m - 1))
    return CapacityEstimate(raw / debias, m, debias_factor=debias)


def disc_cloud(radius: float, density: float, center: complex = 0j) -> PointCloud:
    """Concentric-circle filling of a closed disc at the given linear density."""
    pts = [center]
    n_r = max(1, math.ceil(radius * density))
    for i in range(1, n_r + 1):
        rho = radius * i / n_r
        n_t = max(1, math.ceil(TWO_PI * rho * density))
        pts.extend(center + rho * complex(math.cos(TWO_PI * j / n_t), math.sin(TWO_PI * j / n_t))
                   for j in range(n_t))
    return PointCloud(tuple(pts), provenance=f"disc r={radius}")


def segment_cloud(length: float, density: float, center: complex = 0j,
                  angle: float = 0.0) -> PointCloud:
    n = max(2, math.ceil(length * density) + 1)
    d = complex(math.cos(angle), math.sin(angle))
    pts = [center + d * (-length / 2 + length * j / (n - 1)) for j in range(n)]
    return PointCloud(tuple(pts), provenance=f"segment L={length}")


@dataclass(frozen=True)
class AnnulusSpec:
    """Compact annular region r_in <= |z| <= r_out outside the closed disc."""

    r_in: float
    r_out: float
    n_radial: int = 12
    n_angular: int = 192

    def __post_init__(self):
        if not 1 < self.r_in < self.r_out:
            raise ValueError("annulus must satisfy 1 < r_in < r_out")

    def points(self) -> list:
        out = []
        for i in range(self.n_radial):
            rho = self.r_in + (self.r_out - self.r_in) * i / max(self.n_radial - 1, 1)
            for j in range(self.n_angular):
                t = TWO_PI * (j + 0.5 * (i % 2)) / self.n_angular
                out.append(rho * complex(math.cos(t), math.sin(t)))
        return out


@dataclass(frozen=True)
class SublevelCurvePoint:
    checkpoint: int
    estimate: CapacityEstimate
    cloud_size: int


def sublevel_capacity_curve(f: Poly, K: AnnulusSpec, M: float,
                            checkpoints: Sequence[int], m: int = 48) -> list:
    """Capacity of {z in K : |S_n(f)(z)| <= M} at each checkpoint n.

    Partial sums are accumulated exactly at the polynomial's precision
    (coefficient growth meets |z| > 1 here, so cancellation is severe).
    An empty sublevel cloud records estimate 0.
    """
    cps = sorted(set(int(n) for n in checkpoints))
    if not cps or cps[0] < 0 or cps[-1] > f.degree():
        raise ValueError("checkpoints must lie in [0, deg(f)]")
    ctx = f.precision
    grid = K.points()
    out = []
    with ctx.activate():
        zs = [mpc(z) for z in grid]
        acc = [mpc(0) for _ in zs]
        powers = [mpc(1) for _ in zs]
        cs = f.coeffs
        k = -1
        for n_cp in cps:
            while k < n_cp:
                k += 1
                if k > 0:
                    for i, z in enumerate(zs):
                        powers[i] = powers[i] * z
                c = cs[k]
                if c != 0:
                    for i in range(len(zs)):
                        acc[i] = acc[i] + c * powers[i]
            sub = [grid[i] for i in range(len(zs)) if abs(acc[i]) <= M]
            if len(sub) == 0:
                est = CapacityEstimate(0.0, 0)
            else:
                est = capacity_estimate(
                    PointCloud(tuple(sub), provenance=f"sublevel n={n_cp}"), m
                )
            out.append(SublevelCurvePoint(n_cp, est, len(sub)))
    return out
