"""Disk automorphisms, circle arcs, Cayley transforms, and arc pullback."""

from __future__ import annotations

from .numerics import (
    BigComplex,
    BigReal,
    CirclePoint,
    DomainError,
    asin,
    atan2,
    cos,
    hypot,
    pow2,
    sin,
    two_pi,
)


class FormulaOutOfRange(ArithmeticError):
    """The sine-identity right-hand side left arcsin's domain by more than
    roundoff could explain; the inputs are numerically inconsistent."""


class DiskAutomorphism:
    """z -> (u*z + c)/(1 + conj(c)*u*z) with |c| < 1 and |u| = 1."""

    __slots__ = ("c", "u", "prec")

    def __init__(self, c: BigComplex, u: CirclePoint | None = None):
        if not isinstance(c, BigComplex):
            raise TypeError("c must be a BigComplex")
        if u is None:
            u = CirclePoint(BigReal(0, c.prec))
        if not abs(c) < 1:
            raise DomainError("automorphism requires |c| < 1")
        self.c = c
        self.u = u
        self.prec = max(c.prec, u.prec)

    def __repr__(self):
        return f"DiskAutomorphism(c={self.c!r}, u={self.u!r})"


def identity(prec: int) -> DiskAutomorphism:
    return DiskAutomorphism(BigComplex(BigReal(0, prec), BigReal(0, prec)))


def normalizer(w: BigComplex) -> DiskAutomorphism:
    """The automorphism sending 0 to w with no pre-rotation."""
    if not abs(w) < 1:
        raise DomainError("normalizer requires |w| < 1")
    return DiskAutomorphism(w)


def apply(M: DiskAutomorphism, z: BigComplex) -> BigComplex:
    prec = max(M.prec, z.prec)
    if abs(z) > 1 + pow2(-(prec // 2), prec):
        raise DomainError("apply requires |z| <= 1")
    uz = M.u.embed().with_prec(prec) * z
    return (uz + M.c) / (1 + M.c.conj() * uz)


def apply_boundary(M: DiskAutomorphism, zeta: CirclePoint) -> CirclePoint:
    image = apply(M, zeta.embed())
    return CirclePoint(image.arg())


def invert(M: DiskAutomorphism) -> DiskAutomorphism:
    """Inverse in the same canonical form: u' = conj(u), c' = -conj(u)*c."""
    ubar = M.u.conj()
    return DiskAutomorphism(-(ubar.embed() * M.c), ubar)


def compose(M2: DiskAutomorphism, M1: DiskAutomorphism) -> DiskAutomorphism:
    """The automorphism acting as M2 after M1."""
    u1, u2 = M1.u.embed(), M2.u.embed()
    c1, c2 = M1.c, M2.c
    den = c2.conj() * u2 * c1 + 1  # |den| >= 1 - |c1||c2| > 0
    u_num = (u2 + c2 * c1.conj()) * u1
    c = (u2 * c1 + c2) / den
    return DiskAutomorphism(c, CirclePoint((u_num / den).arg()))


class Arc:
    """Counterclockwise arc [start, end) of the unit circle, half-open so a
    partition of the circle into arcs is an exact disjoint union."""

    __slots__ = ("start", "end", "prec")

    def __init__(self, start: CirclePoint, end: CirclePoint):
        if start.angle == end.angle:
            raise ValueError("degenerate arc: start == end")
        self.start = start
        self.end = end
        self.prec = max(start.prec, end.prec)

    def length(self) -> BigReal:
        d = self.end.angle.with_prec(self.prec) - self.start.angle.with_prec(self.prec)
        if d.sign() <= 0:
            d = d + two_pi(self.prec)
        return d

    def contains(self, point: CirclePoint) -> bool:
        prec = max(self.prec, point.prec)
        off = point.angle.with_prec(prec) - self.start.angle.with_prec(prec)
        if off.sign() < 0:
            off = off + two_pi(prec)
        return off < self.length().with_prec(prec)

    def midpoint(self) -> CirclePoint:
        return self.start.rotate(self.length().shift(-1))

    def complement(self) -> "Arc":
        return Arc(self.end, self.start)

    def __repr__(self):
        return f"Arc({self.start!r}, {self.end!r})"


def arc_about(center: CirclePoint, length: BigReal) -> Arc:
    """Arc of the given length symmetric about a center point."""
    half = length.shift(-1)
    return Arc(center.rotate(-half), center.rotate(half))


def pullback_arc(M: DiskAutomorphism, J: Arc) -> Arc:
    """Preimage arc M^{-1}(J).

    Endpoint preimages determine two candidate arcs; the image of J's
    midpoint under M^{-1} selects the correct one, since a circle
    homeomorphism maps arcs to arcs.
    """
    Minv = invert(M)
    s = apply_boundary(Minv, J.start)
    e = apply_boundary(Minv, J.end)
    m = apply_boundary(Minv, J.midpoint())
    candidate = Arc(s, e)
    if candidate.contains(m):
        return candidate
    return Arc(e, s)


def _asin_or_raise(r: BigReal, prec: int) -> BigReal:
    """arcsin for a half-chord ratio; tolerates roundoff above 1, no more."""
    if r > 1:
        if r > 1 + pow2(-(prec // 2), prec):
            raise FormulaOutOfRange(f"sine identity RHS/2 = {float(r)} exceeds 1")
        r = BigReal(1, prec)
    return asin(r)


def pullback_length_closed_form(w: BigComplex, J: Arc) -> BigReal:
    """Length of M^{-1}(J) for the normalizer M sending 0 to w, by the
    identity 2 sin(|I|/2) = (1-|w|^2) |chord(J)| / (|w-J.start||w-J.end|).

    The identity pins |I| only up to the arcsin branch, so J is first split
    at the boundary fixed points +-w/|w| of M (each arc between them maps
    to itself, so every piece pulls back to a piece no longer than a half
    circle, where the branch is unambiguous); piece lengths then add.
    """
    prec = max(w.prec, J.prec)
    if not abs(w) < 1:
        raise DomainError("pullback_length_closed_form requires |w| < 1")
    if w.re.is_zero() and w.im.is_zero():
        psi = BigReal(0, prec)
    else:
        psi = w.arg()

    total_len = J.length().with_prec(prec)
    tp = two_pi(prec)

    # offsets of the two fixed points from J.start, kept only when strictly
    # interior to J
    cuts = []
    for fixed_angle in (psi, psi + tp.shift(-1)):
        off = CirclePoint(fixed_angle).angle - J.start.angle.with_prec(prec)
        if off.sign() < 0:
            off = off + tp
        if off.sign() > 0 and off < total_len:
            cuts.append(off)
    cuts.sort()

    boundary = [J.start] + [J.start.rotate(c) for c in cuts] + [J.end]
    one_minus_w2 = 1 - w.abs2()
    total = BigReal(0, prec)
    for lo, hi in zip(boundary, boundary[1:]):
        a = lo.embed().with_prec(prec)
        b = hi.embed().with_prec(prec)
        rhs_half = (one_minus_w2 * abs(a - b)).shift(-1) / (abs(w - a) * abs(w - b))
        total = total + _asin_or_raise(rhs_half, prec).shift(1)
    return total


class CayleyPair:
    """The fixed biholomorphism C(w) = (w - i)/(w + i) between the upper
    half-plane and the disk, with inverse C^{-1}(z) = i(1 + z)/(1 - z).

    C(i) = 0 and C(w) -> 1 as |w| -> infinity; the real line maps onto the
    circle minus the point 1. One fixed conformal choice keeps half-plane
    examples' disk coordinates reproducible.
    """

    @staticmethod
    def to_disk(w: BigComplex) -> BigComplex:
        i = BigComplex(BigReal(0, w.prec), BigReal(1, w.prec))
        return (w - i) / (w + i)

    @staticmethod
    def to_halfplane(z: BigComplex) -> BigComplex:
        prec = z.prec
        if abs(z - BigComplex(BigReal(1, prec), BigReal(0, prec))) < pow2(-(prec // 2), prec):
            raise DomainError("Cayley inverse is singular at z = 1")
        i = BigComplex(BigReal(0, prec), BigReal(1, prec))
        return i * (1 + z) / (1 - z)

    @staticmethod
    def real_to_circle(x: BigReal) -> CirclePoint:
        # angle of (x - i)/(x + i) without forming the quotient:
        # (x - i)^2 / (x^2 + 1) has argument atan2(-2x, x^2 - 1)
        return CirclePoint(atan2(-x.shift(1), x * x - 1))

    @staticmethod
    def circle_to_real(zeta: CirclePoint) -> BigReal:
        # C^{-1}(e^{i theta}) = -cot(theta/2)
        theta = zeta.angle
        if theta.is_zero():
            raise DomainError("Cayley inverse is singular at z = 1")
        half = theta.shift(-1)
        return -(cos(half) / sin(half))

    @staticmethod
    def gap_to_one(w: BigComplex) -> BigReal:
        """|C(w) - 1| computed as 2/|w + i|.

        Forming C(w) first and subtracting 1 cancels catastrophically for
        large |w|; this route keeps full relative accuracy all the way out.
        """
        i = BigComplex(BigReal(0, w.prec), BigReal(1, w.prec))
        return BigReal(2, w.prec) / abs(w + i)

    @staticmethod
    def real_gap_to_one(x: BigReal) -> BigReal:
        """|C(x) - 1| for real boundary x, i.e. 2/sqrt(x^2 + 1)."""
        return BigReal(2, x.prec) / hypot(x, BigReal(1, x.prec))


def cayley_to_disk(w: BigComplex) -> BigComplex:
    if w.im.sign() <= 0:
        raise DomainError("cayley_to_disk requires Im w > 0")
    return CayleyPair.to_disk(w)


def cayley_to_halfplane(z: BigComplex) -> BigComplex:
    if not abs(z) < 1:
        raise DomainError("cayley_to_halfplane requires |z| < 1")
    return CayleyPair.to_halfplane(z)
