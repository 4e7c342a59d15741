"""Shrinking targets on the circle, hit statistics, and pullback bounds.

A target sequence assigns an arc J_n to each step. Hits of a boundary
orbit against it are counted with the same replay discipline as the
annulus experiment: a sample's hit set must be identical at two
consecutive precisions before it is believed.

Pullback checks work on the normalized frame: with M_n the automorphism
sending 0 to f^n(0), the maps G_n = M_n^{-1} of^n fix the origin and the
target J_n turns into I_n = M_n^{-1}(J_n) or the pullback of its
complement. Lengths of complements are always 2 pi minus the sine-formula
value of the arc itself; there is no second formula to drift out of sync.
"""

import multiprocessing

from .dynamics import WindowTooShort, interior_orbit
from .inner import (
    InnerFunction,
    SingularPoint,
    angular_derivative,
    denjoy_wolff,
    eval_boundary,
    halfplane_lane,
    singular_points,
)
from .moebius import (
    Arc,
    CayleyPair,
    apply_boundary,
    arc_about,
    invert,
    normalizer,
    pullback_length_closed_form,
)
from .numerics import (
    BigComplex,
    BigReal,
    CirclePoint,
    DomainError,
    PrecisionExhausted,
    PrecisionPolicy,
    asin,
    chordal_distance,
    escalate,
    pi,
    pow2,
    power,
    two_pi,
    unit_uniform,
)


class DenominatorNonpositive(ArithmeticError):
    """Every step of the requested window fell where the bound's
    denominator is not positive, so no inequality could be checked."""


class _WholeCircle:
    __slots__ = ()

    def __repr__(self):
        return "FULL_CIRCLE"


class _EmptyTarget:
    __slots__ = ()

    def __repr__(self):
        return "EMPTY_TARGET"


# Arcs are half-open and never degenerate, so the two extremes of a radius
# rule need stand-ins: a chord of 2 spans the whole circle, a radius of 0
# nothing at all.
FULL_CIRCLE = _WholeCircle()
EMPTY_TARGET = _EmptyTarget()


def _target_contains(arc, point: CirclePoint) -> bool:
    if arc is FULL_CIRCLE:
        return True
    if arc is EMPTY_TARGET:
        return False
    return arc.contains(point)


# -- radius rules -----------------------------------------------------------
# Rules are callables (n, prec) -> BigReal. The named ones below are plain
# picklable objects so DiskRadius targets survive the trip to worker
# processes; a lambda works too as long as the run stays in-process.


class PowerRule:
    """r_n = base ** (coeff * n)."""

    __slots__ = ("base", "coeff")

    def __init__(self, base: BigReal, coeff: BigReal):
        if not base.sign() > 0:
            raise DomainError("PowerRule base must be positive")
        self.base = base
        self.coeff = coeff

    def __call__(self, n: int, prec: int) -> BigReal:
        b = self.base.with_prec(prec)
        return power(b, self.coeff.with_prec(prec) * BigReal(n, prec))


class GeometricRule:
    """r_n = scale * ratio ** n."""

    __slots__ = ("scale", "ratio")

    def __init__(self, scale: BigReal, ratio: BigReal):
        if not (scale.sign() > 0 and ratio.sign() > 0):
            raise DomainError("GeometricRule needs positive scale and ratio")
        self.scale = scale
        self.ratio = ratio

    def __call__(self, n: int, prec: int) -> BigReal:
        r = self.ratio.with_prec(prec)
        return self.scale.with_prec(prec) * power(r, BigReal(n, prec))


class ConstantRule:
    __slots__ = ("value",)

    def __init__(self, value: BigReal):
        self.value = value

    def __call__(self, n: int, prec: int) -> BigReal:
        return self.value.with_prec(prec)


# -- target sequences -------------------------------------------------------


class TargetSequence:
    __slots__ = ()

    def arc(self, n: int, prec: int):
        raise NotImplementedError

    def length(self, n: int, prec: int) -> BigReal:
        a = self.arc(n, prec)
        if a is FULL_CIRCLE:
            return two_pi(prec)
        if a is EMPTY_TARGET:
            return BigReal(0, prec)
        return a.length().with_prec(prec)


class DiskRadius(TargetSequence):
    """J_n = D(p, r_n) on the circle: the arc of chordal radius r_n about
    p, of length 4 arcsin(r_n / 2)."""

    __slots__ = ("p", "rule")

    def __init__(self, p: CirclePoint, rule):
        self.p = p
        self.rule = rule

    def arc(self, n: int, prec: int):
        r = self.rule(n, prec).with_prec(prec)
        if r.sign() < 0:
            raise DomainError("radius rule produced a negative value")
        if r.is_zero():
            return EMPTY_TARGET
        if not r < 2:
            return FULL_CIRCLE
        half_arc = asin(r.shift(-1)).shift(1)
        return arc_about(self.p.with_prec(prec), half_arc.shift(1))


class Explicit(TargetSequence):
    """Targets listed outright; target n is the n-th arc, 1-indexed."""

    __slots__ = ("arcs",)

    def __init__(self, arcs):
        if not arcs:
            raise ValueError("Explicit needs at least one arc")
        self.arcs = list(arcs)

    def arc(self, n: int, prec: int):
        if not 1 <= n <= len(self.arcs):
            raise ValueError(f"target index {n} outside 1..{len(self.arcs)}")
        return self.arcs[n - 1]


class Complement(TargetSequence):
    __slots__ = ("base",)

    def __init__(self, base: TargetSequence):
        self.base = base

    def arc(self, n: int, prec: int):
        a = self.base.arc(n, prec)
        if a is FULL_CIRCLE:
            return EMPTY_TARGET
        if a is EMPTY_TARGET:
            return FULL_CIRCLE
        return a.complement()

    def length(self, n: int, prec: int) -> BigReal:
        return two_pi(prec) - self.base.length(n, prec)


def target_lengths(T: TargetSequence, n_max: int, prec: int = 192):
    """|J_n| for n = 1..n_max."""
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    return [T.length(n, prec) for n in range(1, n_max + 1)]


# The ratio certificate refuses maxima above 15/16: on a finite window a
# slowly-divergent sequence like 1/n also shows ratios below 1, so a bare
# r < 1 test would certify it. The ceiling trades away sequences that decay
# geometrically but barely, which the dominating-sequence path can still
# certify explicitly.
RATIO_CERTIFICATE_CEILING_BITS = (15, 4)  # 15 * 2^-4


def summable(lengths, dominating=None):
    """(certificate, ratio_bound) for sum of lengths < infinity.

    With dominating=(scale, ratio) the lengths are compared elementwise
    against scale * ratio^i along the list; otherwise the largest
    consecutive ratio over the last half of the window must stay under
    15/16. A false certificate means "not established here", never
    "divergent".
    """
    if len(lengths) < 21:
        raise WindowTooShort("summability window needs at least 21 lengths")
    if dominating is not None:
        scale, ratio = dominating
        if not (ratio.sign() >= 0 and ratio < 1):
            raise DomainError("dominating ratio must be in [0, 1)")
        level = scale
        for L in lengths:
            if L > level:
                return False, ratio
            level = level * ratio
        return True, ratio

    tail = lengths[len(lengths) // 2 :]
    worst = None
    for a, b in zip(tail, tail[1:]):
        if a.is_zero():
            if b.is_zero():
                continue
            return False, None
        r = b / a
        if worst is None or r > worst:
            worst = r
    if worst is None:
        # the whole tail was zeros; the sum is finite outright
        return True, BigReal(0, 64)
    num, k = RATIO_CERTIFICATE_CEILING_BITS
    ceiling = BigReal(num, worst.prec).shift(-k)
    return worst < ceiling, worst


# -- hit statistics ----------------------------------------------------------


class HitReport:
    """Hit times of sampled boundary orbits against a target sequence.

    hit_times[i] is the tuple of steps n <= horizon with f^n(zeta_i) in
    J_n for an included sample, or None for an excluded one; last_hits[i]
    is its maximum (0 when the sample never hits). fractions[N0] is the
    share of included samples still hitting after cutoff N0, for
    N0 = 0..horizon; it is non-increasing by construction.
    """

    __slots__ = (
        "samples",
        "seed",
        "horizon",
        "included",
        "rejected",
        "indeterminate",
        "outcomes",
        "hit_times",
        "last_hits",
        "fractions",
    )

    def __init__(self, **kw):
        for name in self.__slots__:
            setattr(self, name, kw.pop(name))
        if kw:
            raise TypeError(f"unexpected fields {sorted(kw)}")


_FRACTION_BITS = 160


def _hit_sample(args):
    f, T, seed, index, horizon, policy, reject_exp = args
    lane = halfplane_lane(f)
    reject = pow2(-reject_exp, 64)
    u = unit_uniform(seed, index, policy.base_bits)

    def attempt(prec):
        hits_here = []
        angle = u.with_prec(prec) * two_pi(prec)
        try:
            if lane is not None:
                x = CayleyPair.circle_to_real(CirclePoint(angle))
                for n in range(1, horizon + 1):
                    if lane.pole_gap(x) < reject:
                        return ("rejected", n - 1)
                    x = lane.step_real(x)
                    cur = CayleyPair.real_to_circle(x)
                    if _target_contains(T.arc(n, prec), cur):
                        hits_here.append(n)
                final = cur
            else:
                sing = singular_points(f, prec)
                cur = CirclePoint(angle)
                for n in range(1, horizon + 1):
                    if any(cur.gap_to(q) < reject for q in sing):
                        return ("rejected", n - 1)
                    cur = eval_boundary(f, cur)
                    if _target_contains(T.arc(n, prec), cur):
                        hits_here.append(n)
                final = cur
        except (SingularPoint, DomainError):
            return ("rejected", len(hits_here))
        return ("run", tuple(hits_here), final)

    def agree(a, b):
        if a[0] != b[0]:
            return False
        if a[0] == "rejected":
            return a[1] == b[1]
        if a[1] != b[1]:
            return False
        gap = a[2].gap_to(b[2])
        return gap < pow2(-policy.agreement_tol_bits, gap.prec)

    try:
        result, _bits = escalate(attempt, policy, agree)
    except PrecisionExhausted:
        return ("indeterminate",)
    if result[0] == "rejected":
        return ("rejected", result[1])
    return ("ok", result[1])


def hits(
    f: InnerFunction,
    T: TargetSequence,
    samples: int,
    seed: int,
    horizon: int,
    policy: PrecisionPolicy,
    workers: int = 1,
) -> HitReport:
    """Sample boundary orbits and record every step that lands in J_n.

    Excluded samples (singular-set rejections, precision exhaustion) are
    counted and left out of the fractions; unlike the annulus experiment
    there is no health threshold here, since hit curves remain readable
    under exclusions and the caller can see the counts.
    """
    if samples < 1:
        raise ValueError("samples must be positive")
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    if workers < 1:
        raise ValueError("workers must be positive")
    args = [
        (f, T, seed, i, horizon, policy, policy.base_bits // 2)
        for i in range(samples)
    ]
    if workers == 1:
        results = [_hit_sample(a) for a in args]
    else:
        chunk = max(1, samples // (workers * 8))
        with multiprocessing.Pool(workers) as pool:
            results = pool.map(_hit_sample, args, chunksize=chunk)

    hit_times = []
    last_hits = []
    outcomes = []
    rejected = indeterminate = included = 0
    for res in results:
        outcomes.append(res[0])
        if res[0] == "ok":
            included += 1
            hit_times.append(res[1])
            last_hits.append(max(res[1]) if res[1] else 0)
        elif res[0] == "rejected":
            rejected += 1
            hit_times.append(None)
            last_hits.append(None)
        else:
            indeterminate += 1
            hit_times.append(None)
            last_hits.append(None)

    fractions = []
    for cutoff in range(horizon + 1):
        still = sum(1 for h in last_hits if h is not None and h > cutoff)
        if included:
            frac = BigReal(still, _FRACTION_BITS) / BigReal(included, _FRACTION_BITS)
        else:
            frac = BigReal(0, _FRACTION_BITS)
        fractions.append(frac)

    return HitReport(
        samples=samples,
        seed=seed,
        horizon=horizon,
        included=included,
        rejected=rejected,
        indeterminate=indeterminate,
        outcomes=outcomes,
        hit_times=hit_times,
        last_hits=last_hits,
        fractions=fractions,
    )


# -- pullback shrinkage and the bound chains ---------------------------------


class ShrinkageReport:
    __slots__ = (
        "mode",
        "n_burn",
        "hypothesis_ratios",
        "pullback_lengths",
        "endpoint_gaps",
        "hypothesis_ok",
        "lengths_ok",
        "endpoints_ok",
        "flag",
    )

    def __init__(self, **kw):
        for name in self.__slots__:
            setattr(self, name, kw.pop(name))
        if kw:
            raise TypeError(f"unexpected fields {sorted(kw)}")


def _tail_vanishes(series, n_burn, threshold):
    """True when the values are non-increasing past n_burn and finish
    below the threshold."""
    tail = [(n, v) for n, v in series if n >= n_burn]
    if len(tail) < 2:
        return False
    for (_, a), (_, b) in zip(tail, tail[1:]):
        if b > a:
            return False
    return tail[-1][1] < threshold


def pullback_shrinkage_check(
    f: InnerFunction,
    T: DiskRadius,
    mode: str,
    n_max: int,
    n_burn: int = 10,
    threshold: BigReal | None = None,
    endpoint_threshold: BigReal | None = None,
    policy: PrecisionPolicy | None = None,
) -> ShrinkageReport:
    """Check that normalized pullbacks of the targets shrink.

    mode "complement" pulls back the complement of J_n = D(p, r_n) and
    requires |p - f^n(0)| / r_n -> 0; the pulled-back arcs' endpoints must
    approach -p. mode "direct" pulls back J_n itself, requires
    r_n / |p - f^n(0)| -> 0, and the endpoints must track the moving point
    gamma_n / (p conj(gamma_n)) with gamma_n = f^n(0) - p.

    A violated hypothesis flags the report instead of raising: the data
    showing the failure is the useful output.
    """
    if mode not in ("complement", "direct"):
        raise ValueError(f"unknown mode {mode!r}")
    if not isinstance(T, DiskRadius):
        raise TypeError("shrinkage checks need a DiskRadius target")
    if n_max < n_burn + 2:
        raise WindowTooShort("n_max leaves no tail beyond the burn-in")
    threshold = threshold if threshold is not None else BigReal("1e-6", 64)
    endpoint_threshold = (
        endpoint_threshold if endpoint_threshold is not None else BigReal("1e-4", 64)
    )
    policy = policy if policy is not None else PrecisionPolicy(128, 4096, 64)

    record = interior_orbit(f, n_max, policy, p=T.p)
    ratios = []
    lengths = []
    gaps = []
    for n in range(1, len(record.points)):
        pt = record.points[n]
        w = pt.value
        prec = w.prec
        r = T.rule(n, prec).with_prec(prec)
        if not r.sign() > 0:
            raise DomainError("shrinkage checks need strictly positive radii")
        dist = pt.distance.with_prec(prec)
        ratios.append((n, dist / r if mode == "complement" else r / dist))

        J = T.arc(n, prec)
        if J is FULL_CIRCLE or J is EMPTY_TARGET:
            covered = J is FULL_CIRCLE
            wants_inside = mode == "direct"
            full_len = two_pi(prec) if covered == wants_inside else BigReal(0, prec)
            lengths.append((n, full_len))
            gaps.append((n, None))
            continue
        base_len = pullback_length_closed_form(w, J)
        own_len = base_len if mode == "direct" else two_pi(prec) - base_len
        lengths.append((n, own_len))

        back = invert(normalizer(w))
        ends = (apply_boundary(back, J.start), apply_boundary(back, J.end))
        pp = T.p.with_prec(prec)
        if mode == "complement":
            anchor = pp.antipode()
        else:
            gamma = w - pp.embed()
            anchor = CirclePoint((gamma / (pp.embed() * gamma.conj())).arg())
        gap = max(chordal_distance(ends[0], anchor), chordal_distance(ends[1], anchor))
        gaps.append((n, gap))

    hypothesis_ok = _tail_vanishes(ratios, n_burn, threshold)
    lengths_ok = _tail_vanishes(lengths, n_burn, threshold)
    usable_gaps = [(n, g) for n, g in gaps if g is not None]
    endpoints_ok = bool(usable_gaps) and usable_gaps[-1][1] < endpoint_threshold

    return ShrinkageReport(
        mode=mode,
        n_burn=n_burn,
        hypothesis_ratios=ratios,
        pullback_lengths=lengths,
        endpoint_gaps=gaps,
        hypothesis_ok=hypothesis_ok,
        lengths_ok=lengths_ok,
        endpoints_ok=endpoints_ok,
        flag=None if hypothesis_ok else "hypothesis-fails",
    )


class Section4Report:
    __slots__ = (
        "variant",
        "window",
        "entries",
        "excluded",
        "all_hold",
        "bound_summable",
        "bound_ratio",
        "alpha",
        "C",
        "eps",
    )

    def __init__(self, **kw):
        for name in self.__slots__:
            setattr(self, name, kw.pop(name))
        if kw:
            raise TypeError(f"unexpected fields {sorted(kw)}")


def section4_bound_check(
    f: InnerFunction,
    eps: BigReal,
    C: BigReal,
    variant: str,
    window,
    policy: PrecisionPolicy | None = None,
    p: CirclePoint | None = None,
    alpha: BigReal | None = None,
) -> Section4Report:
    """Compare exact pullback lengths against the closed-form bound chain.

    variant "upper": complement pullbacks of J_n = D(p, alpha^((1-eps)n))
    against 2 C pi / (alpha^(-n eps) - 2C + C^2 alpha^(n eps)).
    variant "lower": direct pullbacks of J_n = D(p, alpha^((1+eps)n))
    against 2 C pi / (alpha^(n eps) - 2C alpha^(n eps/3) + C^2 alpha^(-n eps/3)).

    Steps where a denominator fails to stay positive are excluded and
    listed; if that empties the window the check raises
    DenominatorNonpositive, since there is nothing left to compare.
    """
    if variant not in ("upper", "lower"):
        raise ValueError(f"unknown variant {variant!r}")
    n_lo, n_hi = window
    if not 1 <= n_lo <= n_hi:
        raise ValueError("window must satisfy 1 <= n_lo <= n_hi")
    if not C.sign() > 0:
        raise DomainError("C must be positive")
    policy = policy if policy is not None else PrecisionPolicy(128, 4096, 64)
    if p is None:
        p = denjoy_wolff(f, policy, pow2(-policy.agreement_tol_bits, 64))
    if alpha is None:
        alpha = angular_derivative(f, p, "radial", policy)
    if not (alpha.sign() > 0 and alpha < 1):
        raise DomainError("alpha must be in (0, 1)")

    record = interior_orbit(f, n_hi, policy, p=p)
    if len(record.points) <= n_hi:
        raise WindowTooShort(
            f"orbit certified only to step {len(record.points) - 1}, window ends at {n_hi}"
        )
    T = DiskRadius(
        p,
        PowerRule(alpha, 1 - eps if variant == "upper" else 1 + eps),
    )
    entries = []
    excluded = []
    for n in range(n_lo, n_hi + 1):
        pt = record.points[n]
        w = pt.value
        prec = w.prec
        a = alpha.with_prec(prec)
        e = eps.with_prec(prec)
        c = C.with_prec(prec)
        ne = e * BigReal(n, prec)
        if variant == "upper":
            den = power(a, -ne) - 2 * c + c * c * power(a, ne)
        else:
            third = ne / 3
            den = power(a, ne) - 2 * c * power(a, third) + c * c * power(a, -third)
        if den.sign() <= 0:
            excluded.append(n)
            continue
        bound = 2 * c * pi(prec) / den

        J = T.arc(n, prec)
        if J is FULL_CIRCLE or J is EMPTY_TARGET:
            excluded.append(n)
            continue
        base_len = pullback_length_closed_form(w, J)
        length = base_len if variant == "lower" else two_pi(prec) - base_len
        entries.append((n, length, bound, length <= bound))

    if not entries:
        raise DenominatorNonpositive(
            f"no positive denominators in window [{n_lo}, {n_hi}]"
        )
    bounds = [b for _, _, b, _ in entries]
    if len(bounds) >= 21:
        cert, ratio = summable(bounds)
    else:
        cert, ratio = False, None
    return Section4Report(
        variant=variant,
        window=(n_lo, n_hi),
        entries=entries,
        excluded=excluded,
        all_hold=all(ok for _, _, _, ok in entries),
        bound_summable=cert,
        bound_ratio=ratio,
        alpha=alpha,
        C=C,
        eps=eps,
    )
