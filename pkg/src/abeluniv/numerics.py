"""Arbitrary-precision complex scalars and dense polynomials.

Everything downstream (constructions, diagnostics, capacity curves) runs on
the two types defined here: a precision context wrapping MPFR/MPC binary
precision, and an immutable dense polynomial over that context.  Coefficient
magnitudes in the staged constructions reach eps*R^(-k), far beyond float64
range, and partial sums on the unit circle cancel from ~1e30 down to O(l),
so evaluation has to be exact to working precision rather than best-effort.

A float64 fast path (`eval_grid_fast`) is provided for diagnostics on tame
polynomials; it returns a rigorous rounding bound so callers can fall back
to exact evaluation when the bound is not negligible.
"""

from __future__ import annotations

import math
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import gmpy2
from gmpy2 import mpc, mpfr

CNum = mpc  # scalar values z, w, c; re/im are arbitrary-precision reals

DEFAULT_BITS = 256


class PrecisionExhaustedError(ArithmeticError):
    """An operation produced a non-finite value at working precision."""


class CertificationError(ArithmeticError):
    """A grid-margin certificate failed to dominate the exact quantity."""


@dataclass(frozen=True)
class PrecisionContext:
    """Binary mantissa precision for all scalars created under it.

    Rounding is MPFR's default round-to-nearest-even.  bits >= 64 enforced.
    """

    bits: int = DEFAULT_BITS

    def __post_init__(self):
        if self.bits < 64:
            raise ValueError(f"precision must be >= 64 bits, got {self.bits}")

    @contextmanager
    def activate(self):
        old = gmpy2.get_context()
        new = gmpy2.context(precision=self.bits)
        gmpy2.set_context(new)
        try:
            yield self
        finally:
            gmpy2.set_context(old)

    def real(self, x) -> mpfr:
        with self.activate():
            return mpfr(x)

    def complex(self, re, im=0) -> mpc:
        with self.activate():
            return mpc(mpfr(re), mpfr(im))

    def unit_point(self, theta) -> mpc:
        """e^(i*theta) at working precision; theta any real-like."""
        with self.activate():
            t = mpfr(theta)
            return mpc(gmpy2.cos(t), gmpy2.sin(t))


def auto_bits(degree: int, r_min: float) -> int:
    """Working precision for a construction reaching the given degree.

    Cauchy bounds force block coefficients up to eps*r_min^(-degree); the
    1.3 factor and the 64-bit guard keep evaluation error below every
    stage's eps budget.
    """
    if not 0 < r_min < 1:
        raise ValueError("r_min must lie in (0,1)")
    return max(DEFAULT_BITS, int(math.ceil(1.3 * degree * math.log2(1.0 / r_min))) + 64)


def ensure_finite(value: mpc, what: str = "value") -> mpc:
    if not gmpy2.is_finite(value):
        raise PrecisionExhaustedError(
            f"{what} is non-finite at working precision; the computation needs "
            f"an exponent range beyond the current context"
        )
    return value


# ---------------------------------------------------------------------------
# hex-float serialization (bit-exact round trip)
# ---------------------------------------------------------------------------

def real_to_hex(x: mpfr) -> str:
    if gmpy2.is_nan(x) or gmpy2.is_infinite(x):
        raise PrecisionExhaustedError("cannot serialize non-finite real")
    if x == 0:
        return "0x0p+0"
    m, e = x.as_mantissa_exp()
    sign = "-" if m < 0 else ""
    return f"{sign}0x{abs(m):x}p{int(e):+d}"


def real_from_hex(s: str, ctx: PrecisionContext) -> mpfr:
    s = s.strip()
    neg = s.startswith("-")
    if neg:
        s = s[1:]
    if not s.startswith("0x"):
        raise ValueError(f"bad hex-float literal: {s!r}")
    mant_hex, _, exp_str = s[2:].partition("p")
    mant = int(mant_hex, 16)
    exp = int(exp_str)
    if mant == 0:
        return ctx.real(0)
    # reconstruct exactly, then round into the context
    exact_bits = max(mant.bit_length(), 2)
    with gmpy2.context(precision=exact_bits):
        v = mpfr(mant)
    if exp >= 0:
        with gmpy2.context(precision=exact_bits + abs(exp) + 2):
            v = gmpy2.mul_2exp(v, exp)
    else:
        with gmpy2.context(precision=exact_bits + 2):
            v = gmpy2.div_2exp(v, -exp)
    with ctx.activate():
        v = mpfr(v)
    return -v if neg else v


# ---------------------------------------------------------------------------
# Poly
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Poly:
    """Dense complex polynomial sum a_k z^k, k = 0..N, immutable.

    The trailing coefficient is nonzero unless the polynomial is the zero
    polynomial (stored as the single coefficient 0).
    """

    coeffs: tuple
    precision: PrecisionContext = field(default_factory=PrecisionContext)

    def __post_init__(self):
        cs = list(self.coeffs)
        if not cs:
            cs = [self.precision.complex(0)]
        with self.precision.activate():
            cs = [ensure_finite(mpc(c), "coefficient") for c in cs]
        while len(cs) > 1 and cs[-1] == 0:
            cs.pop()
        object.__setattr__(self, "coeffs", tuple(cs))

    @classmethod
    def from_values(cls, values: Iterable, ctx: PrecisionContext | None = None) -> "Poly":
        ctx = ctx or PrecisionContext()
        with ctx.activate():
            return cls(tuple(mpc(v) for v in values), ctx)

    @classmethod
    def zero(cls, ctx: PrecisionContext | None = None) -> "Poly":
        ctx = ctx or PrecisionContext()
        return cls((ctx.complex(0),), ctx)

    def degree(self) -> int:
        return len(self.coeffs) - 1

    def is_zero(self) -> bool:
        return len(self.coeffs) == 1 and self.coeffs[0] == 0

    def coefficient(self, k: int) -> mpc:
        if 0 <= k < len(self.coeffs):
            return self.coeffs[k]
        return self.precision.complex(0)

    def add(self, other: "Poly") -> "Poly":
        ctx = self.precision
        with ctx.activate():
            n = max(len(self.coeffs), len(other.coeffs))
            out = []
            for k in range(n):
                a = self.coeffs[k] if k < len(self.coeffs) else mpc(0)
                b = other.coeffs[k] if k < len(other.coeffs) else mpc(0)
                out.append(a + b)
        return Poly(tuple(out), ctx)

    def shift(self, u: int) -> "Poly":
        """z^u * p."""
        if u < 0:
            raise ValueError("shift exponent must be nonnegative")
        if self.is_zero():
            return self
        zero = self.precision.complex(0)
        return Poly((zero,) * u + self.coeffs, self.precision)

    def scale_argument(self, s) -> "Poly":
        """p(s*z): coefficient k becomes a_k s^k.  Any s > 0 or complex."""
        ctx = self.precision
        with ctx.activate():
            s = mpc(s)
            out, p = [], mpc(1)
            for a in self.coeffs:
                out.append(ensure_finite(a * p, "scaled coefficient"))
                p *= s
        return Poly(tuple(out), ctx)

    def derivative(self) -> "Poly":
        ctx = self.precision
        if self.degree() == 0:
            return Poly.zero(ctx)
        with ctx.activate():
            out = tuple(self.coeffs[k] * k for k in range(1, len(self.coeffs)))
        return Poly(out, ctx)

    def truncate(self, n: int) -> "Poly":
        """Partial sum S_n: coefficients 0..n."""
        return Poly(self.coeffs[: n + 1], self.precision)

    def to_json_dict(self) -> dict:
        return {
            "precision_bits": self.precision.bits,
            "coeffs": [[real_to_hex(c.real), real_to_hex(c.imag)] for c in self.coeffs],
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "Poly":
        ctx = PrecisionContext(int(doc["precision_bits"]))
        with ctx.activate():
            cs = tuple(
                mpc(real_from_hex(re, ctx), real_from_hex(im, ctx))
                for re, im in doc["coeffs"]
            )
        return cls(cs, ctx)


@dataclass(frozen=True)
class PartialSumTrace:
    """values[k] = S_k(f)(point) for k = 0..deg(f), by prefix accumulation."""

    point: mpc
    values: tuple


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def eval_poly(p: Poly, z) -> mpc:
    """Horner evaluation at working precision."""
    ctx = p.precision
    with ctx.activate():
        zz = mpc(z)
        acc = mpc(0)
        for c in reversed(p.coeffs):
            acc = acc * zz + c
        return ensure_finite(acc, "polynomial value")


def eval_many(p: Poly, points: Sequence) -> list:
    ctx = p.precision
    out = []
    with ctx.activate():
        cs = p.coeffs
        for z in points:
            zz = mpc(z)
            acc = mpc(0)
            for c in reversed(cs):
                acc = acc * zz + c
            out.append(ensure_finite(acc, "polynomial value"))
    return out


def eval_grid_fast(p: Poly, points) -> tuple:
    """float64 Horner over a numpy point array, with a rigorous error bound.

    Returns (values, bound) where bound dominates the absolute rounding
    error at every point, or (None, inf) if float64 cannot represent the
    data.  Callers must fall back to eval_many when bound is too large.
    """
    import numpy as np

    try:
        cs = np.array([complex(c) for c in p.coeffs], dtype=complex)
    except (OverflowError, ValueError):
        return None, math.inf
    if not np.all(np.isfinite(cs)):
        return None, math.inf
    zs = np.asarray(points, dtype=complex)
    acc = np.zeros_like(zs)
    mag = np.zeros(zs.shape, dtype=float)
    azs = np.abs(zs)
    for c in cs[::-1]:
        acc = acc * zs + c
        mag = mag * azs + abs(c)
    if not (np.all(np.isfinite(acc)) and np.all(np.isfinite(mag))):
        return None, math.inf
    eps = np.finfo(float).eps
    bound = float(np.max(mag)) * 2.0 * (len(cs) + 1) * eps
    return acc, bound


def partial_sums_at(p: Poly, z) -> PartialSumTrace:
    ctx = p.precision
    with ctx.activate():
        zz = mpc(z)
        acc = mpc(0)
        power = mpc(1)
        vals = []
        for k, c in enumerate(p.coeffs):
            if k > 0:
                power *= zz
            acc = acc + c * power
            vals.append(ensure_finite(acc, f"partial sum S_{k}"))
        return PartialSumTrace(zz, tuple(vals))


def abel_identity_residual(p: Poly, r, zeta) -> mpfr:
    """Finite-degree Abel summation defect at r*zeta.

    Compares p(r*zeta) against sum_k r^k (1-r) S_k(zeta) + r^(N+1) S_N(zeta);
    the tail correction closes the telescoping sum, so the residual is pure
    rounding.
    """
    ctx = p.precision
    with ctx.activate():
        rr = mpfr(r)
        if not 0 <= rr < 1:
            raise ValueError("r must lie in [0,1)")
        zz = mpc(zeta)
        if abs(abs(zz) - 1) > mpfr(2) ** (-(ctx.bits // 2)):
            raise ValueError("zeta must be unimodular to within 2^(-bits/2)")
        trace = partial_sums_at(p, zz)
        lhs = eval_poly(p, rr * zz)
        one_minus_r = 1 - rr
        acc = mpc(0)
        rpow = mpfr(1)
        for sk in trace.values:
            acc += rpow * one_minus_r * sk
            rpow *= rr
        acc += rpow * trace.values[-1]  # rpow is now r^(N+1)
        return abs(lhs - acc)


def dilate(p: Poly, r) -> Poly:
    """f_r(z) = f(rz) for 0 <= r <= 1."""
    ctx = p.precision
    with ctx.activate():
        rr = mpfr(r)
        if not 0 <= rr <= 1:
            raise ValueError("dilation radius must lie in [0,1]")
    return p.scale_argument(rr)


# ---------------------------------------------------------------------------
# circle suprema and Cauchy bounds
# ---------------------------------------------------------------------------

def circle_sup(p: Poly, radius, grid: int | None = None) -> tuple:
    """Certified sup of |p| on |z| = radius.

    The sup is estimated on `grid` equispaced points (default 8*deg + 64)
    and inflated by the Bernstein-style factor 1/(1 - pi*deg/grid).
    Returns (certified_sup, raw_grid_sup, grid, margin).
    """
    ctx = p.precision
    deg = p.degree()
    n = grid if grid is not None else 8 * deg + 64
    if n <= math.pi * deg:
        raise ValueError("grid too coarse for the Bernstein margin at this degree")
    margin = 1.0 / (1.0 - math.pi * deg / n)
    with ctx.activate():
        rr = mpfr(radius)
        best = mpfr(0)
        two_pi = 2 * gmpy2.const_pi()
        for j in range(n):
            t = two_pi * j / n
            z = rr * mpc(gmpy2.cos(t), gmpy2.sin(t))
            v = abs(eval_poly(p, z))
            if v > best:
                best = v
        cert = best * mpfr(margin)
    return cert, best, n, margin


def cauchy_coefficient_bounds(p: Poly, R) -> list:
    """Coefficient bounds b_k = sup_{|z|=R} |p| / R^k, grid-certified.

    Raises CertificationError if any stored |a_k| exceeds its bound, which
    would mean the grid margin failed.
    """
    ctx = p.precision
    with ctx.activate():
        RR = mpfr(R)
        if not RR > 0:
            raise ValueError("R must be positive")
        sup_cert, _, _, _ = circle_sup(p, RR)
        bounds = []
        rpow = mpfr(1)
        for k, a in enumerate(p.coeffs):
            b = sup_cert / rpow
            if abs(a) > b:
                raise CertificationError(
                    f"grid-margin certification failed at k={k}: |a_k|={abs(a)} > bound={b}"
                )
            bounds.append(b)
            rpow *= RR
    return bounds
