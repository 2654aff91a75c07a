"""Compact target sets on the closed unit disc and harmonic-kernel helpers.

The shape family is deliberately narrow: a central closed disc, closed arcs
of the unit circle, and radial segments.  Complement-connectedness is
verified by shape-specific checks (arcs must not jointly cover the circle,
pieces must be pairwise disjoint); radial pieces cannot disconnect the
complement for this family.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import gmpy2
from gmpy2 import mpc, mpfr

from .numerics import PrecisionContext

TWO_PI = 2 * math.pi


def _norm_angle(t: float) -> float:
    t = math.fmod(t, TWO_PI)
    return t + TWO_PI if t < 0 else t


@dataclass(frozen=True)
class Arc:
    """Closed arc of the unit circle: angles within half_width of center_angle.

    half_width < pi keeps the arc a proper subset of the circle.
    """

    center_angle: float
    half_width: float

    def __post_init__(self):
        if not 0 < self.half_width < math.pi:
            raise ValueError("half_width must lie in (0, pi)")
        object.__setattr__(self, "center_angle", _norm_angle(self.center_angle))

    @property
    def length(self) -> float:
        return 2.0 * self.half_width

    def angles(self, n: int) -> list:
        """n equispaced angles across the closed arc, endpoints included."""
        if n < 2:
            return [self.center_angle]
        a0 = self.center_angle - self.half_width
        return [a0 + self.length * j / (n - 1) for j in range(n)]

    def contains_angle(self, t: float) -> bool:
        d = abs(_norm_angle(t) - self.center_angle)
        d = min(d, TWO_PI - d)
        return d <= self.half_width + 1e-15


@dataclass(frozen=True)
class RadialSegment:
    """Segment {s*direction : from_r <= s <= to_r} with to_r <= 1.

    Value samples always stay strictly inside the open disc even when
    to_r = 1 describes a closure touching the circle.
    """

    angle: float
    from_r: float
    to_r: float

    def __post_init__(self):
        if not (0 <= self.from_r < self.to_r <= 1):
            raise ValueError("need 0 <= from_r < to_r <= 1")
        object.__setattr__(self, "angle", _norm_angle(self.angle))

    @property
    def length(self) -> float:
        return self.to_r - self.from_r


def _arcs_disjoint(arcs: Sequence[Arc]) -> bool:
    spans = sorted(
        (_norm_angle(a.center_angle - a.half_width), a.length) for a in arcs
    )
    events = []
    for start, length in spans:
        end = start + length
        if end <= TWO_PI:
            events.append((start, end))
        else:
            events.append((start, TWO_PI))
            events.append((0.0, end - TWO_PI))
    events.sort()
    for (s1, e1), (s2, e2) in zip(events, events[1:]):
        if s2 < e1:
            return False
    return True


@dataclass(frozen=True)
class CompactTarget:
    """Central disc, circle arcs, and radial segments, pairwise disjoint.

    The complement stays connected for this family as long as the arcs do
    not jointly cover the circle: radial segments never enclose a region,
    and the central disc is simply connected.
    """

    central_disc_radius: float | None = None
    arcs: tuple = ()
    radial_segments: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "arcs", tuple(self.arcs))
        object.__setattr__(self, "radial_segments", tuple(self.radial_segments))
        self.verify()

    def verify(self):
        r = self.central_disc_radius
        if r is not None and not 0 <= r < 1:
            raise ValueError("central disc radius must lie in [0,1)")
        if not self.arcs and not self.radial_segments and r is None:
            raise ValueError("empty target set")
        if not _arcs_disjoint(self.arcs):
            raise ValueError("arcs overlap")
        if sum(a.length for a in self.arcs) >= TWO_PI - 1e-12:
            raise ValueError("arcs jointly cover the circle; complement disconnected")
        for seg in self.radial_segments:
            if r is not None and seg.from_r < r:
                raise ValueError("radial segment overlaps the central disc")
            if seg.to_r >= 1 and any(a.contains_angle(seg.angle) for a in self.arcs):
                raise ValueError("radial segment meets an arc at the circle")
        angles = [s.angle for s in self.radial_segments]
        if len(set(angles)) != len(angles):
            raise ValueError("radial segments share a direction")

    def pieces(self) -> list:
        out = []
        if self.central_disc_radius is not None:
            out.append(("disc", 0))
        out.extend(("arc", i) for i in range(len(self.arcs)))
        out.extend(("segment", i) for i in range(len(self.radial_segments)))
        return out

    def to_json_dict(self) -> dict:
        return {
            "disc_r": self.central_disc_radius,
            "arcs": [{"center": a.center_angle, "halfwidth": a.half_width} for a in self.arcs],
            "segments": [
                {"angle": s.angle, "from": s.from_r, "to": s.to_r}
                for s in self.radial_segments
            ],
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "CompactTarget":
        return cls(
            central_disc_radius=doc.get("disc_r"),
            arcs=tuple(Arc(a["center"], a["halfwidth"]) for a in doc.get("arcs", [])),
            radial_segments=tuple(
                RadialSegment(s["angle"], s["from"], s["to"])
                for s in doc.get("segments", [])
            ),
        )


@dataclass(frozen=True)
class SampleGrid:
    points: tuple          # CNum values
    piece_tags: tuple      # ("disc"|"arc"|"segment", index) per point
    density: float


def sample(K: CompactTarget, density: float, ctx: PrecisionContext | None = None) -> SampleGrid:
    """Sample every piece at >= density points per unit length.

    Arcs are sampled with endpoints included (they are closed sets whose
    endpoints matter for sup certification); segments at interval midpoints
    so the circle endpoint of a to_r = 1 segment is never evaluated; the
    central disc on concentric circles including its boundary circle.
    """
    if density <= 0:
        raise ValueError("density must be positive")
    ctx = ctx or PrecisionContext()
    pts, tags = [], []
    with ctx.activate():
        if K.central_disc_radius is not None:
            R = K.central_disc_radius
            pts.append(mpc(0))
            tags.append(("disc", 0))
            if R > 0:
                n_r = max(1, math.ceil(R * density))
                for i in range(1, n_r + 1):
                    rho = R * i / n_r
                    n_t = max(1, math.ceil(TWO_PI * rho * density))
                    for j in range(n_t):
                        pts.append(rho * ctx.unit_point(TWO_PI * j / n_t))
                        tags.append(("disc", 0))
        for ai, arc in enumerate(K.arcs):
            n = max(2, math.ceil(arc.length * density) + 1)
            for t in arc.angles(n):
                pts.append(ctx.unit_point(t))
                tags.append(("arc", ai))
        for si, seg in enumerate(K.radial_segments):
            n = max(1, math.ceil(seg.length * density))
            direction = ctx.unit_point(seg.angle)
            for j in range(n):
                s = seg.from_r + seg.length * (2 * j + 1) / (2 * n)
                pts.append(mpfr(s) * direction)
                tags.append(("segment", si))
    return SampleGrid(tuple(pts), tuple(tags), density)


def arc_measure(arcs: Sequence[Arc]) -> float:
    """Total arclength of pairwise disjoint arcs."""
    if not _arcs_disjoint(arcs):
        raise ValueError("arcs overlap")
    return sum(a.length for a in arcs)


def poisson_kernel(z, zeta, ctx: PrecisionContext | None = None) -> mpfr:
    """P(z, zeta) = (1 - |z|^2) / |zeta - z|^2 for z in the open disc."""
    ctx = ctx or PrecisionContext()
    with ctx.activate():
        zz, zt = mpc(z), mpc(zeta)
        az2 = gmpy2.norm(zz)
        if not az2 < 1:
            raise ValueError("poisson_kernel requires |z| < 1")
        return (1 - az2) / gmpy2.norm(zt - zz)


def harmonic_majorant(z, zeta1, zeta2, c, ctx: PrecisionContext | None = None) -> mpfr:
    """h(z) = c * (P(z, zeta1) + P(z, zeta2)), the two-radii majorant.

    Along either radius [0, zeta_i) it dominates c/(1-s).
    """
    ctx = ctx or PrecisionContext()
    with ctx.activate():
        if mpc(zeta1) == mpc(zeta2):
            raise ValueError("the two boundary points must differ")
        cc = mpfr(c)
        if not cc > 0:
            raise ValueError("c must be positive")
        return cc * (poisson_kernel(z, zeta1, ctx) + poisson_kernel(z, zeta2, ctx))


@dataclass(frozen=True)
class StolzAngle:
    """Nontangential approach region |z - vertex| < opening*(1-|z|)."""

    vertex: complex
    opening: float

    def __post_init__(self):
        if not self.opening > 1:
            raise ValueError("opening must exceed 1")


def stolz_contains(S: StolzAngle, z, ctx: PrecisionContext | None = None) -> bool:
    ctx = ctx or PrecisionContext()
    with ctx.activate():
        zz = mpc(z)
        az = abs(zz)
        if not az < 1:
            return False
        return abs(zz - mpc(S.vertex)) < mpfr(S.opening) * (1 - az)
