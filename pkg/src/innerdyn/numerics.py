"""Arbitrary-precision real/complex arithmetic and circle geometry.

Values carry their working precision in bits. All arithmetic is MPFR
round-to-nearest-even; mixing two precisions yields the larger one.
Nothing here mutates, so every object is safe to share across workers.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import gmpy2

MIN_PREC = 64


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of the operation."""


class PrecisionExhausted(RuntimeError):
    """Escalation hit max_bits without two consecutive runs agreeing."""


_CTX_CACHE: dict[int, gmpy2.context] = {}


def _ctx(prec: int) -> gmpy2.context:
    ctx = _CTX_CACHE.get(prec)
    if ctx is None:
        # trap on 1/0 and 0/0 instead of producing inf/nan silently
        ctx = gmpy2.context(precision=prec, trap_divzero=True, trap_invalid=True)
        _CTX_CACHE[prec] = ctx
    return ctx


def _check_prec(prec: int) -> int:
    if not isinstance(prec, int) or prec < MIN_PREC:
        raise ValueError(f"precision must be an int >= {MIN_PREC}, got {prec!r}")
    return prec


class BigReal:
    """A real number at an explicit binary precision.

    Construct from int, decimal string, another BigReal, or a raw mpfr.
    Floats are rejected: a 53-bit double silently poisons high-precision
    work, so decimal strings are the only literal form accepted.
    """

    __slots__ = ("_x", "prec")

    def __init__(self, value, prec: int | None = None):
        if isinstance(value, BigReal):
            prec = value.prec if prec is None else _check_prec(prec)
            self._x = gmpy2.mpfr(value._x, prec) if prec != value.prec else value._x
        elif isinstance(value, float):
            raise TypeError("BigReal does not accept float; pass a decimal string")
        elif isinstance(value, (int, str, type(gmpy2.mpfr(0)))):
            if prec is None:
                if isinstance(value, type(gmpy2.mpfr(0))):
                    prec = max(value.precision, MIN_PREC)
                else:
                    raise ValueError("prec is required for int/str construction")
            _check_prec(prec)
            self._x = gmpy2.mpfr(value, prec)
        else:
            raise TypeError(f"cannot build BigReal from {type(value).__name__}")
        self.prec = self._x.precision

    # -- arithmetic ----------------------------------------------------

    def _coerce(self, other) -> "BigReal":
        if isinstance(other, BigReal):
            return other
        if isinstance(other, int):
            return BigReal(other, self.prec)
        raise TypeError(f"cannot mix BigReal with {type(other).__name__}")

    def _bin(self, other, op) -> "BigReal":
        other = self._coerce(other)
        prec = max(self.prec, other.prec)
        return BigReal(getattr(_ctx(prec), op)(self._x, other._x))

    def __add__(self, other):
        return self._bin(other, "add")

    def __radd__(self, other):
        return self._coerce(other)._bin(self, "add")

    def __sub__(self, other):
        return self._bin(other, "sub")

    def __rsub__(self, other):
        return self._coerce(other)._bin(self, "sub")

    def __mul__(self, other):
        return self._bin(other, "mul")

    def __rmul__(self, other):
        return self._coerce(other)._bin(self, "mul")

    def __truediv__(self, other):
        return self._bin(other, "div")

    def __rtruediv__(self, other):
        return self._coerce(other)._bin(self, "div")

    def __neg__(self):
        return BigReal(_ctx(self.prec).minus(self._x))

    def __abs__(self):
        return BigReal(_ctx(self.prec).abs(self._x))

    def __pow__(self, other):
        return self._bin(other, "pow")

    def sqrt(self) -> "BigReal":
        if self._x < 0:
            raise DomainError("sqrt of negative value")
        return BigReal(_ctx(self.prec).sqrt(self._x))

    def shift(self, k: int) -> "BigReal":
        """Multiply by 2**k. Exact at any precision."""
        ctx = _ctx(self.prec)
        return BigReal(ctx.mul_2exp(self._x, k) if k >= 0 else ctx.div_2exp(self._x, -k), self.prec)

    def with_prec(self, prec: int) -> "BigReal":
        """Re-round to a different working precision."""
        _check_prec(prec)
        return BigReal(gmpy2.mpfr(self._x, prec))

    # -- comparisons (numeric, precision-blind) ------------------------

    def __eq__(self, other):
        if isinstance(other, (BigReal, int)):
            return self._x == (other._x if isinstance(other, BigReal) else other)
        return NotImplemented

    def __lt__(self, other):
        return self._x < (other._x if isinstance(other, BigReal) else other)

    def __le__(self, other):
        return self._x <= (other._x if isinstance(other, BigReal) else other)

    def __gt__(self, other):
        return self._x > (other._x if isinstance(other, BigReal) else other)

    def __ge__(self, other):
        return self._x >= (other._x if isinstance(other, BigReal) else other)

    def __hash__(self):
        return hash(self._x)

    def is_zero(self) -> bool:
        return self._x == 0

    def sign(self) -> int:
        return gmpy2.sign(self._x)

    def exponent(self) -> int:
        """Binary magnitude: e with 2**(e-1) <= |x| < 2**e, and 0 for x = 0."""
        if self._x == 0:
            return 0
        return gmpy2.get_exp(self._x)

    # -- conversions ----------------------------------------------------

    def raw(self):
        """The underlying mpfr. For interop inside the package only."""
        return self._x

    def __float__(self):
        return float(self._x)

    def __repr__(self):
        return f"BigReal({str(self._x)!r}, prec={self.prec})"


def _lift(value, prec: int) -> BigReal:
    if isinstance(value, BigReal):
        return value
    return BigReal(value, prec)


# -- transcendental helpers (result at operand precision) ----------------


def pi(prec: int) -> BigReal:
    return BigReal(_ctx(_check_prec(prec)).const_pi())


def two_pi(prec: int) -> BigReal:
    _check_prec(prec)
    ctx = _ctx(prec)
    return BigReal(ctx.mul_2exp(ctx.const_pi(), 1), prec)


def _unary(name):
    def op(x: BigReal) -> BigReal:
        return BigReal(getattr(_ctx(x.prec), name)(x._x))

    op.__name__ = name
    return op


sin = _unary("sin")
cos = _unary("cos")
tan = _unary("tan")
exp = _unary("exp")
log = _unary("log")
tanh = _unary("tanh")
atanh = _unary("atanh")
atan = _unary("atan")


def asin(x: BigReal) -> BigReal:
    if abs(x) > 1:
        raise DomainError("asin argument outside [-1, 1]")
    return BigReal(_ctx(x.prec).asin(x._x))


def atan2(y: BigReal, x: BigReal) -> BigReal:
    prec = max(y.prec, x.prec)
    return BigReal(_ctx(prec).atan2(y._x, x._x))


def hypot(x: BigReal, y: BigReal) -> BigReal:
    prec = max(x.prec, y.prec)
    return BigReal(_ctx(prec).hypot(x._x, y._x))


def power(x: BigReal, y: BigReal) -> BigReal:
    """x ** y for positive x (and for x == 0 with y > 0)."""
    if x.sign() < 0:
        raise DomainError("power with negative base")
    if x.is_zero() and y.sign() <= 0:
        raise DomainError("power of zero with nonpositive exponent")
    prec = max(x.prec, y.prec)
    return BigReal(_ctx(prec).pow(x._x, y._x))


def fmod(x: BigReal, modulus: BigReal) -> BigReal:
    """Remainder of x by modulus, sign following x, |result| < modulus.

    The reduction is exact with respect to the given modulus value, so a
    huge x costs one operation instead of |x|/modulus subtractions.
    """
    if modulus.is_zero():
        raise DomainError("fmod by zero")
    prec = max(x.prec, modulus.prec)
    return BigReal(_ctx(prec).fmod(x._x, modulus._x))


def pow2(k: int, prec: int) -> BigReal:
    """2**k as a BigReal, exact."""
    return BigReal(1, prec).shift(k)


class BigComplex:
    """Complex number built from two BigReals at a shared precision."""

    __slots__ = ("re", "im", "prec")

    def __init__(self, re, im=0, prec: int | None = None):
        if prec is None:
            prec = max(
                re.prec if isinstance(re, BigReal) else 0,
                im.prec if isinstance(im, BigReal) else 0,
            )
            if prec == 0:
                raise ValueError("prec is required when neither part is a BigReal")
        re = _lift(re, prec)
        im = _lift(im, prec)
        prec = max(re.prec, im.prec)
        self.re = re.with_prec(prec) if re.prec != prec else re
        self.im = im.with_prec(prec) if im.prec != prec else im
        self.prec = prec

    def _coerce(self, other) -> "BigComplex":
        if isinstance(other, BigComplex):
            return other
        if isinstance(other, (BigReal, int)):
            return BigComplex(_lift(other, self.prec), BigReal(0, self.prec))
        raise TypeError(f"cannot mix BigComplex with {type(other).__name__}")

    def __add__(self, other):
        other = self._coerce(other)
        return BigComplex(self.re + other.re, self.im + other.im)

    def __radd__(self, other):
        return self._coerce(other) + self

    def __sub__(self, other):
        other = self._coerce(other)
        return BigComplex(self.re - other.re, self.im - other.im)

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        other = self._coerce(other)
        return BigComplex(
            self.re * other.re - self.im * other.im,
            self.re * other.im + self.im * other.re,
        )

    def __rmul__(self, other):
        return self._coerce(other) * self

    def __truediv__(self, other):
        other = self._coerce(other)
        d = other.re * other.re + other.im * other.im
        if d.is_zero():
            raise ZeroDivisionError("complex division by zero")
        return BigComplex(
            (self.re * other.re + self.im * other.im) / d,
            (self.im * other.re - self.re * other.im) / d,
        )

    def __rtruediv__(self, other):
        return self._coerce(other) / self

    def __neg__(self):
        return BigComplex(-self.re, -self.im)

    def conj(self) -> "BigComplex":
        return BigComplex(self.re, -self.im)

    def __abs__(self) -> BigReal:
        return hypot(self.re, self.im)

    def abs2(self) -> BigReal:
        return self.re * self.re + self.im * self.im

    def arg(self) -> BigReal:
        return atan2(self.im, self.re)

    def __eq__(self, other):
        if isinstance(other, (BigComplex, BigReal, int)):
            other = self._coerce(other)
            return self.re == other.re and self.im == other.im
        return NotImplemented

    def __hash__(self):
        return hash((self.re, self.im))

    def with_prec(self, prec: int) -> "BigComplex":
        return BigComplex(self.re.with_prec(prec), self.im.with_prec(prec))

    def __repr__(self):
        return f"BigComplex({self.re!r}, {self.im!r})"


class CirclePoint:
    """Point of the unit circle stored by angle in [0, 2*pi).

    The angle, not a unit complex number, is canonical: arc membership and
    arc length are then exact set operations, and iteration cannot drift
    off the circle. Normalization reduces mod 2*pi at the angle's own
    precision and is idempotent.
    """

    __slots__ = ("angle",)

    def __init__(self, angle: BigReal):
        if not isinstance(angle, BigReal):
            raise TypeError("CirclePoint takes a BigReal angle")
        p2 = two_pi(angle.prec)
        if angle.sign() < 0 or angle >= p2:
            angle = fmod(angle, p2)
            if angle.sign() < 0:
                angle = angle + p2
            # adding 2*pi to a tiny negative remainder can round up to
            # 2*pi itself; fold that back to 0 to keep the range half-open
            if angle >= p2:
                angle = BigReal(0, angle.prec)
        self.angle = angle

    @property
    def prec(self) -> int:
        return self.angle.prec

    @classmethod
    def from_degrees_of_turn(cls, unit: BigReal) -> "CirclePoint":
        """Point at angle unit*2*pi; unit is a fraction of a full turn."""
        return cls(unit * two_pi(unit.prec))

    def embed(self) -> BigComplex:
        return BigComplex(cos(self.angle), sin(self.angle))

    def rotate(self, by: BigReal) -> "CirclePoint":
        return CirclePoint(self.angle + by)

    def antipode(self) -> "CirclePoint":
        return CirclePoint(self.angle + pi(self.prec))

    def conj(self) -> "CirclePoint":
        return CirclePoint(-self.angle)

    def with_prec(self, prec: int) -> "CirclePoint":
        return CirclePoint(self.angle.with_prec(prec))

    def gap_to(self, other: "CirclePoint") -> BigReal:
        """Shorter angular distance to another circle point, in [0, pi]."""
        prec = max(self.prec, other.prec)
        d = abs(self.angle.with_prec(prec) - other.angle.with_prec(prec))
        p = pi(prec)
        if d > p:
            d = two_pi(prec) - d
        return d

    def __eq__(self, other):
        if isinstance(other, CirclePoint):
            return self.angle == other.angle
        return NotImplemented

    def __hash__(self):
        return hash(self.angle)

    def __repr__(self):
        return f"CirclePoint({self.angle!r})"


def chordal_distance(a, b) -> BigReal:
    """Euclidean distance |a - b| between points on or near the circle.

    For two CirclePoints the half-angle identity 2*|sin((u-v)/2)| is used,
    which stays fully accurate when the points nearly coincide; otherwise
    the points are embedded and the difference measured directly.
    """
    if isinstance(a, CirclePoint) and isinstance(b, CirclePoint):
        prec = max(a.prec, b.prec)
        half = (a.angle.with_prec(prec) - b.angle.with_prec(prec)).shift(-1)
        return abs(sin(half)).shift(1)
    if isinstance(a, CirclePoint):
        a = a.embed()
    if isinstance(b, CirclePoint):
        b = b.embed()
    return abs(a - b)


@dataclass(frozen=True)
class PrecisionPolicy:
    """Escalation schedule: double from base_bits up to max_bits until two
    consecutive runs agree within 2**(-agreement_tol_bits)."""

    base_bits: int
    max_bits: int
    agreement_tol_bits: int

    def __post_init__(self):
        _check_prec(self.base_bits)
        if self.max_bits < self.base_bits:
            raise ValueError("max_bits must be >= base_bits")
        if self.agreement_tol_bits < 1:
            raise ValueError("agreement_tol_bits must be positive")


def agreement_within(tol_bits: int):
    """Default agreement predicate: absolute difference below 2**(-tol_bits).

    BigReals compare by |a-b|; CirclePoints by the shorter angular gap;
    tuples and lists compare elementwise and must agree in every slot.
    """

    def agree(a, b) -> bool:
        if isinstance(a, (tuple, list)):
            return len(a) == len(b) and all(agree(x, y) for x, y in zip(a, b))
        if isinstance(a, CirclePoint):
            gap = a.gap_to(b)
            return gap < pow2(-tol_bits, gap.prec)
        if isinstance(a, BigComplex):
            d = abs(a - b)
            return d < pow2(-tol_bits, d.prec)
        d = abs(a - b)
        return d < pow2(-tol_bits, d.prec)

    return agree


def escalate(computation, policy: PrecisionPolicy, agree=None):
    """Run a pure computation at doubling precision until stable.

    computation(prec_bits) must be deterministic given the precision.
    Returns (result, bits_used) where result is the higher-precision member
    of the first agreeing pair and bits_used is the lower precision of that
    pair, i.e. the first precision already sufficient for the tolerance.

    Raises PrecisionExhausted when max_bits is reached without agreement;
    callers must treat that sample as indeterminate, never as a hit or miss.
    """
    if agree is None:
        agree = agreement_within(policy.agreement_tol_bits)
    bits = policy.base_bits
    prev = None
    prev_bits = None
    while True:
        cur = computation(bits)
        if prev is not None and agree(prev, cur):
            return cur, prev_bits
        if bits >= policy.max_bits:
            raise PrecisionExhausted(
                f"no agreement within {policy.max_bits} bits "
                f"(tol 2^-{policy.agreement_tol_bits})"
            )
        prev, prev_bits = cur, bits
        bits = min(2 * bits, policy.max_bits)


# -- seeded sampling ------------------------------------------------------

_STREAM_TAG = b"innerdyn.ctr.v1"


def _check_seed(seed: int) -> int:
    if not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise ValueError("seed must be an integer in [0, 2^64)")
    return seed


def unit_uniform(seed: int, index: int, prec: int) -> BigReal:
    """Deterministic uniform draw in [0, 1) with a full prec-bit mantissa.

    Counter-based: sample (seed, index) is SHA-256 of the tagged counter,
    extended block-by-block until prec bits are available, so any worker
    can reproduce any single draw without generator state.
    """
    _check_seed(seed)
    if index < 0:
        raise ValueError("index must be >= 0")
    _check_prec(prec)
    nblocks = -(-prec // 256)
    acc = 0
    for j in range(nblocks):
        h = hashlib.sha256(
            _STREAM_TAG
            + seed.to_bytes(8, "big")
            + index.to_bytes(8, "big", signed=False)
            + j.to_bytes(4, "big")
        ).digest()
        acc = (acc << 256) | int.from_bytes(h, "big")
    acc >>= 256 * nblocks - prec
    # acc has at most prec significant bits, so the quotient is exact
    return BigReal(acc, prec).shift(-prec)


def boundary_angle(seed: int, index: int, prec: int) -> CirclePoint:
    """Single uniformly distributed circle point, derivable from (seed, index) alone."""
    return CirclePoint.from_degrees_of_turn(unit_uniform(seed, index, prec))


def uniform_boundary_sample(seed: int, count: int, prec: int) -> list[CirclePoint]:
    """count independent uniform circle points; element i is boundary_angle(seed, i)."""
    if count < 1:
        raise ValueError("count must be >= 1")
    return [boundary_angle(seed, i, prec) for i in range(count)]
