"""The zoo of unit-disk self-maps studied by the rest of the package.

Each variant is inner: holomorphic on the disk with unimodular boundary
values off a finite singular set. The set of variants is closed on purpose.
Exact interior and boundary formulas, the list of singular boundary points,
and safe rejection tolerances are all per-variant knowledge; an open plugin
interface could not promise any of it.

Numeric parameters are captured as exact binary values at construction
time. Evaluating the same function object at two working precisions
therefore evaluates the same map twice, which is what makes precision
escalation meaningful.
"""

from __future__ import annotations

from .moebius import (
    CayleyPair,
    DiskAutomorphism,
    apply,
    apply_boundary,
    cayley_to_disk,
    cayley_to_halfplane,
    invert,
)
from .numerics import (
    BigComplex,
    BigReal,
    CirclePoint,
    DomainError,
    PrecisionExhausted,
    PrecisionPolicy,
    atan2,
    cos,
    escalate,
    exp,
    fmod,
    pi,
    pow2,
    sin,
    tan,
)


class SingularPoint(ArithmeticError):
    """A boundary sample fell on (or within rejection tolerance of) a
    singular point. The sample must be discarded and counted, never nudged:
    perturbation would bias every Monte Carlo estimate downstream."""

    def __init__(self, message, location: CirclePoint | None = None):
        super().__init__(message)
        self.location = location


class NotBoundaryConverging(RuntimeError):
    """The interior orbit refused to approach the circle, so there is no
    boundary attracting point to report. Either the map's attracting fixed
    point is interior or the iteration budget was too small."""


class NotConverging(RuntimeError):
    """Successive derivative estimates failed to stabilize within budget."""


class InnerFunction:
    """Common base for the closed set of variants below."""

    __slots__ = ()


class Automorphism(InnerFunction):
    """phi_a(z) = (z + a)/(1 + a z) for real a in (0, 1).

    Hyperbolic with attracting fixed point 1 and repelling fixed point -1.
    The orbit of 0 is tanh(n artanh a), which makes this the variant with
    the most closed forms available for cross-checking.
    """

    __slots__ = ("a",)

    def __init__(self, a: BigReal):
        if not isinstance(a, BigReal):
            raise TypeError("a must be a BigReal")
        if not (BigReal(0, a.prec) < a < BigReal(1, a.prec)):
            raise DomainError("Automorphism requires a in (0, 1)")
        self.a = a

    def _map(self, prec: int) -> DiskAutomorphism:
        a = self.a.with_prec(prec)
        return DiskAutomorphism(BigComplex(a, BigReal(0, prec)))

    def _interior(self, z: BigComplex, prec: int) -> BigComplex:
        return apply(self._map(prec), z)

    def _boundary(self, zeta: CirclePoint, prec: int) -> CirclePoint:
        return apply_boundary(self._map(prec), zeta)

    def _singular(self, prec: int) -> list[CirclePoint]:
        return []


class BlaschkeProduct(InnerFunction):
    """Finite product u * prod_k (|a_k|/a_k) (a_k - z)/(1 - conj(a_k) z),
    with the plain factor z standing in wherever a_k = 0."""

    __slots__ = ("zeros", "front_rotation")

    def __init__(self, zeros: list[BigComplex], front_rotation: CirclePoint):
        for a in zeros:
            if not abs(a) < 1:
                raise DomainError("Blaschke zeros must lie inside the disk")
        self.zeros = list(zeros)
        self.front_rotation = front_rotation

    def _value(self, z: BigComplex, prec: int) -> BigComplex:
        acc = self.front_rotation.with_prec(prec).embed()
        one = BigComplex(BigReal(1, prec), BigReal(0, prec))
        for zero in self.zeros:
            a = zero.with_prec(prec)
            if a.re.is_zero() and a.im.is_zero():
                acc = acc * z
            else:
                unit = a.conj() / BigComplex(abs(a), BigReal(0, prec))
                acc = acc * unit * (a - z) / (one - a.conj() * z)
        return acc

    def _interior(self, z: BigComplex, prec: int) -> BigComplex:
        return self._value(z, prec)

    def _boundary(self, zeta: CirclePoint, prec: int) -> CirclePoint:
        return CirclePoint(self._value(zeta.with_prec(prec).embed(), prec).arg())

    def _singular(self, prec: int) -> list[CirclePoint]:
        return []


class AtomicSingular(InnerFunction):
    """S(z) = exp(-t (sigma + z)/(sigma - z)): the singular inner function
    whose measure is a single atom of mass t at the boundary point sigma.

    On the circle minus sigma the exponent is purely imaginary and the
    boundary map is pure angle arithmetic: theta maps to t cot((s-theta)/2).
    """

    __slots__ = ("mass", "singularity")

    def __init__(self, mass: BigReal, singularity: CirclePoint):
        if not mass.sign() > 0:
            raise DomainError("AtomicSingular requires mass t > 0")
        self.mass = mass
        self.singularity = singularity

    def _interior(self, z: BigComplex, prec: int) -> BigComplex:
        sigma = self.singularity.with_prec(prec).embed()
        t = self.mass.with_prec(prec)
        w = (sigma + z) / (sigma - z)
        return _cexp(BigComplex(-t * w.re, -t * w.im))

    def _boundary(self, zeta: CirclePoint, prec: int) -> CirclePoint:
        tol = pow2(-(prec // 2), prec)
        if zeta.gap_to(self.singularity) < tol:
            raise SingularPoint("boundary point too close to the atom", zeta)
        s = self.singularity.angle.with_prec(prec)
        theta = zeta.angle.with_prec(prec)
        u = (s - theta).shift(-1)
        # |u| is in (0, pi) here, so sin u only vanishes at the rejected atom
        return CirclePoint(self.mass.with_prec(prec) * cos(u) / sin(u))

    def _singular(self, prec: int) -> list[CirclePoint]:
        return [self.singularity.with_prec(prec)]


class Rational2(InnerFunction):
    """Disk conjugate of F(w) = lam w - 1/w on the upper half-plane.

    F is a degree-2 self-map fixing infinity with multiplier lam, so the
    disk function is inner with attracting point 1 and derivative 1/lam
    there. The boundary pole w = 0 becomes a singular point at z = -1.
    """

    __slots__ = ("lam",)

    def __init__(self, lam: BigReal):
        _check_multiplier(lam)
        self.lam = lam

    def step_complex(self, w: BigComplex) -> BigComplex:
        lam = self.lam.with_prec(w.prec)
        return BigComplex(lam * w.re, lam * w.im) - 1 / w

    def step_real(self, x: BigReal) -> BigReal:
        prec = x.prec
        if abs(x) < pow2(-(prec // 2), prec):
            raise SingularPoint("half-plane coordinate too close to the pole at 0")
        return self.lam.with_prec(prec) * x - 1 / x

    def pole_gap(self, x: BigReal) -> BigReal:
        return abs(x)

    def _interior(self, z: BigComplex, prec: int) -> BigComplex:
        return cayley_to_disk(self.step_complex(cayley_to_halfplane(z)))

    def _boundary(self, zeta: CirclePoint, prec: int) -> CirclePoint:
        x = _boundary_coordinate(zeta, prec)
        return CayleyPair.real_to_circle(self.step_real(x))

    def _singular(self, prec: int) -> list[CirclePoint]:
        zero = BigReal(0, prec)
        return [CirclePoint(zero), CirclePoint(pi(prec))]


class LinearPlusTan(InnerFunction):
    """Disk conjugate of F(w) = lam w + tan(w) on the upper half-plane.

    tan maps the upper half-plane into itself and tends to i far from the
    real axis, so F is again hyperbolic-at-infinity with multiplier lam.
    Its boundary map x -> lam x + tan x has a pole at every (k + 1/2) pi;
    their disk images accumulate at the attracting point 1.
    """

    __slots__ = ("lam",)

    def __init__(self, lam: BigReal):
        _check_multiplier(lam)
        self.lam = lam

    def step_complex(self, w: BigComplex) -> BigComplex:
        lam = self.lam.with_prec(w.prec)
        return BigComplex(lam * w.re, lam * w.im) + _tan_upper(w)

    def step_real(self, x: BigReal) -> BigReal:
        prec = x.prec
        if self.pole_gap(x) < pow2(-(prec // 2), prec):
            raise SingularPoint("half-plane coordinate too close to a tan pole")
        return self.lam.with_prec(prec) * x + tan(x)

    def pole_gap(self, x: BigReal) -> BigReal:
        """Distance from x to the nearest (k + 1/2) pi.

        The reduction must see pi at a precision matching x's magnitude,
        otherwise the remainder is dominated by the modulus' own rounding.
        """
        work = x.prec + max(0, x.exponent()) + 64
        p = pi(work)
        m = fmod(x.with_prec(work), p)
        return abs(abs(m) - p.shift(-1)).with_prec(x.prec)

    def _interior(self, z: BigComplex, prec: int) -> BigComplex:
        return cayley_to_disk(self.step_complex(cayley_to_halfplane(z)))

    def _boundary(self, zeta: CirclePoint, prec: int) -> CirclePoint:
        x = _boundary_coordinate(zeta, prec)
        return CayleyPair.real_to_circle(self.step_real(x))

    def _singular(self, prec: int, pole_pairs: int = 32) -> list[CirclePoint]:
        # The full singular set {1} + {C((k + 1/2) pi)} is infinite and
        # accumulates at angle 0; evaluation guards against every pole by
        # direct distance, so this list only enumerates the innermost ones.
        points = [CirclePoint(BigReal(0, prec))]
        half_pi = pi(prec).shift(-1)
        for k in range(-pole_pairs, pole_pairs):
            x = half_pi + pi(prec) * BigReal(k, prec)
            points.append(CayleyPair.real_to_circle(x))
        return points


class HalfPlaneConjugated(InnerFunction):
    """Wrapper marking a map as computed in half-plane coordinates.

    Keeps the half-plane spec (Rational2 or LinearPlusTan) explicit so that
    orbit code can iterate x -> F(x) on the real line and only convert to
    circle geometry for distance readings. Near the attracting point the
    disk coordinate loses all its relative accuracy to cancellation; the
    half-plane coordinate just grows.
    """

    __slots__ = ("hp",)

    def __init__(self, hp: Rational2 | LinearPlusTan):
        if not isinstance(hp, (Rational2, LinearPlusTan)):
            raise TypeError("hp must be Rational2 or LinearPlusTan")
        self.hp = hp

    def _interior(self, z: BigComplex, prec: int) -> BigComplex:
        return self.hp._interior(z, prec)

    def _boundary(self, zeta: CirclePoint, prec: int) -> CirclePoint:
        return self.hp._boundary(zeta, prec)

    def _singular(self, prec: int) -> list[CirclePoint]:
        return self.hp._singular(prec)


class Composition(InnerFunction):
    """outer after inner; inner functions compose to inner functions."""

    __slots__ = ("outer", "inner")

    def __init__(self, outer: InnerFunction, inner: InnerFunction):
        self.outer = outer
        self.inner = inner

    def _interior(self, z: BigComplex, prec: int) -> BigComplex:
        return eval_interior(self.outer, eval_interior(self.inner, z))

    def _boundary(self, zeta: CirclePoint, prec: int) -> CirclePoint:
        return eval_boundary(self.outer, eval_boundary(self.inner, zeta))

    def _singular(self, prec: int) -> list[CirclePoint]:
        points = list(singular_points(self.inner, prec))
        for q in singular_points(self.outer, prec):
            points.append(_preimage_on_circle(self.inner, q, prec))
        return points


def _check_multiplier(lam: BigReal):
    if not isinstance(lam, BigReal):
        raise TypeError("lam must be a BigReal")
    if not lam > 1:
        raise DomainError("half-plane multiplier requires lam > 1")


def _cexp(w: BigComplex) -> BigComplex:
    m = exp(w.re)
    return BigComplex(m * cos(w.im), m * sin(w.im))


def _tan_upper(w: BigComplex) -> BigComplex:
    # tan w = -i (q - 1)/(q + 1) with q = e^{2iw}; for Im w > 0 the
    # exponential is a contraction, so no catastrophic growth anywhere
    q = _cexp(BigComplex((-w.im).shift(1), w.re.shift(1)))
    r = (q - 1) / (q + 1)
    return BigComplex(r.im, -r.re)


def _boundary_coordinate(zeta: CirclePoint, prec: int) -> BigReal:
    zeta = zeta.with_prec(prec)
    if zeta.angle.is_zero():
        raise SingularPoint("the half-plane coordinate is undefined at angle 0", zeta)
    return CayleyPair.circle_to_real(zeta)


def _preimage_on_circle(f: InnerFunction, q: CirclePoint, prec: int) -> CirclePoint:
    """Solve f(zeta) = q on the circle for the degree-one variants."""
    if isinstance(f, Automorphism):
        return apply_boundary(invert(f._map(prec)), q)
    if isinstance(f, BlaschkeProduct) and len(f.zeros) == 1:
        a = f.zeros[0].with_prec(prec)
        u = f.front_rotation.with_prec(prec).embed()
        if a.re.is_zero() and a.im.is_zero():
            return CirclePoint((q.embed() / u).arg())
        unit = u * a.conj() / BigComplex(abs(a), BigReal(0, prec))
        v = q.embed() / unit
        z = (a - v) / (1 - a.conj() * v)
        return CirclePoint(z.arg())
    raise DomainError(
        "singular-point preimages are only available through a degree-one inner factor"
    )


def halfplane_lane(f: InnerFunction) -> Rational2 | LinearPlusTan | None:
    """The half-plane spec when f should be iterated in that coordinate."""
    return f.hp if isinstance(f, HalfPlaneConjugated) else None


# -- evaluation -----------------------------------------------------------


def eval_interior(f: InnerFunction, z: BigComplex) -> BigComplex:
    """f(z) for |z| < 1, computed at z's precision."""
    if not abs(z) < 1:
        raise DomainError("eval_interior requires |z| < 1")
    return f._interior(z, z.prec)


def eval_boundary(f: InnerFunction, zeta: CirclePoint) -> CirclePoint:
    """The radial-limit boundary map applied to zeta, at zeta's precision.

    Raises SingularPoint when zeta is in, or within the variant's rejection
    tolerance of, the singular set.
    """
    return f._boundary(zeta, zeta.prec)


def singular_points(f: InnerFunction, prec: int) -> list[CirclePoint]:
    """Boundary points where the radial limit is undefined or uncomputable."""
    return f._singular(prec)


# -- attracting point and derivative estimators ---------------------------


def denjoy_wolff(
    f: InnerFunction,
    policy: PrecisionPolicy,
    tol: BigReal,
    max_steps: int = 512,
) -> CirclePoint:
    """Attracting boundary point, located by the interior orbit of 0.

    Accepts once the orbit's angular part is Cauchy within tol for five
    consecutive steps and the modulus has climbed within tol of 1. Angular
    stability alone is not enough: an orbit falling into an interior fixed
    point on a ray has a perfectly stable angle.
    """
    lane = halfplane_lane(f)

    def attempt(prec: int) -> CirclePoint:
        t = tol.with_prec(prec)
        # The modulus of a working-precision orbit saturates one ulp below 1,
        # so an absolute closeness test would starve at low precision. All we
        # need from the modulus is to rule out an interior attractor, whose
        # plateau is O(1) regardless of precision; 2^(-prec/2) separates the
        # two regimes at every precision the escalation ladder visits.
        approach = pow2(-(prec // 2), prec)
        if t > approach:
            approach = t
        streak = 0
        prev = None
        if lane is None:
            z = BigComplex(BigReal(0, prec), BigReal(0, prec))
            for _ in range(max_steps):
                z = eval_interior(f, z)
                m = abs(z)
                if m.is_zero():
                    continue
                cur = CirclePoint(z.arg())
                streak = streak + 1 if prev is not None and cur.gap_to(prev) < t else 0
                prev = cur
                if streak >= 5 and (1 - m) < approach:
                    return cur
        else:
            w = BigComplex(BigReal(0, prec), BigReal(1, prec))
            for _ in range(max_steps):
                w = lane.step_complex(w)
                cur = CirclePoint(atan2(-w.re.shift(1), w.abs2() - 1))
                streak = streak + 1 if prev is not None and cur.gap_to(prev) < t else 0
                prev = cur
                if streak >= 5 and CayleyPair.gap_to_one(w) < approach:
                    return cur
        raise NotBoundaryConverging(
            f"orbit did not settle on the boundary within {max_steps} steps"
        )

    point, _ = escalate(attempt, policy)
    return point


def angular_derivative(
    f: InnerFunction,
    p: CirclePoint,
    method: str,
    policy: PrecisionPolicy,
    burn_in: int = 25,
    steps: int = 60,
) -> BigReal:
    """Derivative of f at its attracting boundary point p, in (0, 1].

    radial: difference quotient (f(rp) - p)/(rp - p) along the radius at
    r = 1 - 2^(-k), with k tied to the working precision so that truncation
    and cancellation shrink together under escalation.

    orbit-ratio: mean of successive distance ratios |f^(n+1)(0) - p| /
    |f^n(0) - p| over n in [burn_in, steps). The early terms carry the
    orbit's transient, hence the long burn-in.
    """
    lane = halfplane_lane(f)

    if method == "radial":

        def attempt(prec: int) -> BigReal:
            k = max(16, prec // 2 - 8)
            pe = p.with_prec(prec).embed()
            z = pe * BigComplex(1 - pow2(-k, prec), BigReal(0, prec))
            return abs((eval_interior(f, z) - pe) / (z - pe))

    elif method == "orbit-ratio":

        def attempt(prec: int) -> BigReal:
            if lane is None:
                pe = p.with_prec(prec).embed()
                floor = pow2(-(prec - 8), prec)
                z = BigComplex(BigReal(0, prec), BigReal(0, prec))
                gaps = []
                for _ in range(steps + 1):
                    gaps.append(abs(z - pe))
                    z = eval_interior(f, z)
                    if (1 - abs(z)) < floor:
                        break
                else:
                    gaps.append(abs(z - pe))
            else:
                w = BigComplex(BigReal(0, prec), BigReal(1, prec))
                gaps = []
                for _ in range(steps + 1):
                    gaps.append(CayleyPair.gap_to_one(w))
                    w = lane.step_complex(w)
                gaps.append(CayleyPair.gap_to_one(w))
            usable = [
                gaps[n + 1] / gaps[n]
                for n in range(burn_in, len(gaps) - 1)
                if not gaps[n].is_zero()
            ]
            if len(usable) < 5:
                raise NotConverging(
                    "orbit collapsed before enough distance ratios accumulated"
                )
            total = usable[0]
            for ratio in usable[1:]:
                total = total + ratio
            return total / BigReal(len(usable), prec)

    else:
        raise ValueError(f"unknown method {method!r}")

    try:
        value, _ = escalate(attempt, policy)
    except PrecisionExhausted as e:
        raise NotConverging(str(e)) from e
    if not (value.sign() > 0 and value <= 1 + pow2(-(value.prec // 2), value.prec)):
        raise NotConverging(f"estimate {value!r} is outside (0, 1]")
    return value


# -- approach-region predicates -------------------------------------------


class StolzAngle:
    """Non-tangential approach region at a boundary vertex: the set of
    |z| < 1 with |arg(1 - conj(a) z)| < aperture and |z - a| < rho."""

    __slots__ = ("vertex", "aperture", "rho")

    def __init__(self, vertex: CirclePoint, aperture: BigReal, rho: BigReal):
        prec = aperture.prec
        half_pi = pi(prec).shift(-1)
        if not (aperture.sign() > 0 and aperture < half_pi):
            raise DomainError("aperture must be in (0, pi/2)")
        if not (rho.sign() > 0 and rho < cos(aperture.shift(1))):
            raise DomainError("rho must be in (0, cos(2 aperture))")
        self.vertex = vertex
        self.aperture = aperture
        self.rho = rho


def in_stolz(z: BigComplex, delta: StolzAngle) -> bool:
    if not abs(z) < 1:
        raise DomainError("in_stolz requires |z| < 1")
    prec = max(z.prec, delta.vertex.prec)
    a = delta.vertex.with_prec(prec).embed()
    zz = z.with_prec(prec)
    turn = (1 - a.conj() * zz).arg()
    return abs(turn) < delta.aperture and abs(zz - a) < delta.rho


class WolffRegion:
    """Horodisk at p: all z with |p - z|^2 < eta (1 - |z|^2).

    Equivalently the open disk of radius eta/(1 + eta) centered at
    p/(1 + eta), internally tangent to the circle at p. The normalized
    boundary gap |p - z|^2 / (1 - |z|^2) is the quantity the angular
    derivative contracts, which is what makes these regions useful.
    """

    __slots__ = ("p", "eta")

    def __init__(self, p: CirclePoint, eta: BigReal):
        if not eta.sign() > 0:
            raise DomainError("WolffRegion requires eta > 0")
        self.p = p
        self.eta = eta

    def center(self) -> BigComplex:
        prec = max(self.p.prec, self.eta.prec)
        scale = 1 / (1 + self.eta.with_prec(prec))
        e = self.p.with_prec(prec).embed()
        return BigComplex(e.re * scale, e.im * scale)

    def radius(self) -> BigReal:
        eta = self.eta
        return eta / (1 + eta)


def in_wolff(z: BigComplex, region: WolffRegion) -> bool:
    if not abs(z) < 1:
        raise DomainError("in_wolff requires |z| < 1")
    prec = max(z.prec, region.p.prec, region.eta.prec)
    zz = z.with_prec(prec)
    gap = (region.p.with_prec(prec).embed() - zz).abs2()
    return gap < region.eta.with_prec(prec) * (1 - zz.abs2())
