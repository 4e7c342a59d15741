"""Orbit records, rate certificates, and the annulus-entry experiment.

Everything here turns raw iteration into auditable data. An orbit is
computed as a whole-orbit replay: the same trajectory is recomputed at
doubling precision until two consecutive runs agree, and the precision
that was already sufficient is stored with the record. Downstream checks
(rate sandwiches, summability, annulus verdicts) work from stored values
only, never from a fresh iteration at unknown accuracy.

Two rules keep verdicts replay-stable. Distances to the attracting point
are computed in a coordinate where they cost one operation: 2/|w + i| in
the half-plane lane, 2|sin(gap/2)| on the circle. Forming z - p first and
taking the modulus instead would burn about n*log2(1/alpha) bits at step
n. And proximity to a singular point is tested against a tolerance fixed
by the policy's base precision, not the replay precision, so a replay at
higher precision truncates at exactly the same step; "rejected" labels
the sample, not the run.
"""

import multiprocessing

from .inner import (
    InnerFunction,
    SingularPoint,
    angular_derivative,
    denjoy_wolff,
    eval_boundary,
    eval_interior,
    halfplane_lane,
    singular_points,
)
from .moebius import CayleyPair, cayley_to_disk
from .numerics import (
    BigComplex,
    BigReal,
    CirclePoint,
    DomainError,
    PrecisionExhausted,
    PrecisionPolicy,
    chordal_distance,
    escalate,
    log,
    pow2,
    power,
    two_pi,
    unit_uniform,
)


class WindowTooShort(ValueError):
    """The requested window leaves fewer points than the check can certify."""


class UnhealthyRun(RuntimeError):
    """Too many samples were excluded for the reported fractions to mean much."""


class OrbitPoint:
    """One certified orbit entry: the point, its distance to the attracting
    point, and the precision that was already sufficient to pin both down."""

    __slots__ = ("value", "distance", "bits")

    def __init__(self, value, distance: BigReal, bits: int):
        self.value = value
        self.distance = distance
        self.bits = bits

    def __repr__(self):
        return f"OrbitPoint(distance={float(self.distance)!r}, bits={self.bits})"


class OrbitRecord:
    """A certified orbit. points[n] is the n-th iterate; points[0] is the
    starting point itself. truncated_at, when set, is (n, reason) and the
    record keeps exactly the points 0..n that survived certification."""

    __slots__ = ("kind", "start", "p", "points", "truncated_at")

    def __init__(self, kind, start, p, points, truncated_at=None):
        if kind not in ("interior", "boundary"):
            raise ValueError(f"unknown orbit kind {kind!r}")
        self.kind = kind
        self.start = start
        self.p = p
        self.points = points
        self.truncated_at = truncated_at

    def __len__(self):
        return len(self.points)

    def distances(self):
        return [pt.distance for pt in self.points]


class RateReport:
    __slots__ = (
        "alpha",
        "delta",
        "window",
        "ratios",
        "C_upper",
        "C_lower",
        "upper_holds",
        "lower_holds",
        "upper_stable",
        "lower_stable",
    )

    def __init__(self, **kw):
        for name in self.__slots__:
            setattr(self, name, kw.pop(name))
        if kw:
            raise TypeError(f"unexpected fields {sorted(kw)}")

    @property
    def stable(self) -> bool:
        return self.upper_stable and self.lower_stable


class SummabilityReport:
    __slots__ = ("terms", "partial_sums", "tail_ratio", "summable", "horizon")

    def __init__(self, terms, partial_sums, tail_ratio, summable, horizon):
        self.terms = terms
        self.partial_sums = partial_sums
        self.tail_ratio = tail_ratio
        self.summable = summable
        self.horizon = horizon


class AnnulusSpec:
    """The shrinking annulus family around p: at step n its radii are
    alpha^((1+eps) n) and alpha^((1-eps) n) in chordal distance."""

    __slots__ = ("p", "alpha", "eps")

    def __init__(self, p: CirclePoint, alpha: BigReal, eps: BigReal):
        if not (alpha.sign() > 0 and alpha < 1):
            raise DomainError("alpha must be in (0, 1)")
        if not (eps.sign() > 0 and eps < 1):
            raise DomainError("eps must be in (0, 1)")
        self.p = p
        self.alpha = alpha
        self.eps = eps

    def radii(self, n: int, prec: int):
        """(inner, outer) radii at step n, computed at prec bits."""
        if n < 0:
            raise ValueError("step index must be nonnegative")
        a = self.alpha.with_prec(prec)
        e = self.eps.with_prec(prec)
        t = BigReal(n, prec)
        return power(a, (1 + e) * t), power(a, (1 - e) * t)


def in_annulus(spec: AnnulusSpec, n: int, zeta: CirclePoint) -> bool:
    """Strict membership of zeta in the step-n annulus around spec.p."""
    prec = max(zeta.prec, spec.alpha.prec, 64)
    lo, hi = spec.radii(n, prec)
    d = chordal_distance(zeta.with_prec(prec), spec.p.with_prec(prec))
    return lo < d and d < hi


# -- whole-orbit replay ----------------------------------------------------


def _resolve_p(f, policy, p):
    if p is not None:
        return p
    return denjoy_wolff(f, policy, pow2(-policy.agreement_tol_bits, 64))


def _rel_agree(a: BigReal, b: BigReal, tol_bits: int) -> bool:
    if a.is_zero() or b.is_zero():
        return a.is_zero() and b.is_zero()
    d = abs(a - b)
    return d < pow2(-tol_bits, d.prec) * abs(b)


def _interior_point_agree(tol_bits):
    def ok(a, b):
        if not _rel_agree(a[1], b[1], tol_bits):
            return False
        d = abs(a[0] - b[0])
        return d < pow2(-tol_bits, d.prec)

    return ok


def _boundary_point_agree(tol_bits):
    def ok(a, b):
        if not _rel_agree(a[1], b[1], tol_bits):
            return False
        gap = a[0].gap_to(b[0])
        return gap < pow2(-tol_bits, gap.prec)

    return ok


def _replay(attempt, policy: PrecisionPolicy, point_agree):
    """Escalate a whole-orbit attempt until consecutive runs agree.

    attempt(prec) returns (points, trunc) where points is a list of
    (value, distance) pairs and trunc is None or (n, reason). Agreement
    means identical truncation, identical length, and point_agree on
    every pair. Returns (points, bits, trunc) with points taken from the
    higher-precision member of the agreeing pair and bits the precision
    that already sufficed.

    When max_bits is reached without agreement the longest agreeing
    prefix of the last two runs is certified instead and the record is
    truncated there; the starting point alone is always certified since
    it is the caller's exact input.
    """

    def runs_agree(a, b):
        if a[1] != b[1] or len(a[0]) != len(b[0]):
            return False
        return all(point_agree(x, y) for x, y in zip(a[0], b[0]))

    bits = policy.base_bits
    prev = None
    prev_bits = None
    while True:
        cur = attempt(bits)
        if prev is not None and runs_agree(prev, cur):
            return cur[0], prev_bits, cur[1]
        if bits >= policy.max_bits:
            reason = f"no agreement within {policy.max_bits} bits"
            if prev is None:
                return cur[0][:1], bits, (0, reason)
            k = 0
            for x, y in zip(prev[0], cur[0]):
                if not point_agree(x, y):
                    break
                k += 1
            # k points agree, so the last certified index is k - 1
            k = max(1, k)
            return cur[0][:k], prev_bits, (k - 1, reason)
        prev, prev_bits = cur, bits
        bits = min(2 * bits, policy.max_bits)


def interior_orbit(
    f: InnerFunction,
    n_max: int,
    policy: PrecisionPolicy,
    p: CirclePoint | None = None,
) -> OrbitRecord:
    """The orbit of 0 under f, with certified distances to p.

    p defaults to the attracting boundary point located by denjoy_wolff.
    Maps carrying a half-plane lane are iterated there and converted back
    per point, so the stored distances keep their relative accuracy all
    the way into the cusp at p.
    """
    if n_max < 0:
        raise ValueError("n_max must be nonnegative")
    p = _resolve_p(f, policy, p)
    lane = halfplane_lane(f)
    use_lane = lane is not None and p.angle.is_zero()

    def attempt(prec):
        out = []
        if use_lane:
            w = BigComplex(BigReal(0, prec), BigReal(1, prec))
            out.append((cayley_to_disk(w), CayleyPair.gap_to_one(w)))
            for _ in range(n_max):
                w = lane.step_complex(w)
                out.append((cayley_to_disk(w), CayleyPair.gap_to_one(w)))
        else:
            pe = p.with_prec(prec).embed()
            z = BigComplex(BigReal(0, prec), BigReal(0, prec))
            out.append((z, abs(z - pe)))
            for _ in range(n_max):
                z = eval_interior(f, z)
                out.append((z, abs(z - pe)))
        return out, None

    pts, bits, trunc = _replay(
        attempt, policy, _interior_point_agree(policy.agreement_tol_bits)
    )
    points = [OrbitPoint(v, d, bits) for v, d in pts]
    return OrbitRecord("interior", points[0].value, p, points, trunc)


def boundary_orbit(
    f: InnerFunction,
    zeta: CirclePoint,
    n_max: int,
    policy: PrecisionPolicy,
    p: CirclePoint | None = None,
) -> OrbitRecord:
    """The boundary orbit of zeta under the radial-limit map of f.

    Proximity to the singular set is tested before every step against the
    fixed tolerance 2^(-base_bits/2); a hit truncates the record in-band
    with reason "singular" rather than raising, and the same step is
    rejected at every replay precision. Compositions whose singular set
    cannot be enumerated fall back to the evaluation-time guards, whose
    tolerance shrinks with precision; a truncation they cause may then
    fail to replay and is reported as a precision truncation instead.
    """
    if n_max < 0:
        raise ValueError("n_max must be nonnegative")
    p = _resolve_p(f, policy, p)
    lane = halfplane_lane(f)
    use_lane = lane is not None and p.angle.is_zero()
    reject = pow2(-(policy.base_bits // 2), 64)
    reason = f"singular set within 2^-{policy.base_bits // 2}"

    if zeta.gap_to(p).is_zero():
        # the attracting point is fixed by the boundary map; no iteration
        # can be more accurate than saying so
        bits = policy.base_bits
        pt = OrbitPoint(p.with_prec(bits), BigReal(0, bits), bits)
        return OrbitRecord("boundary", zeta, p, [pt] * (n_max + 1), None)

    def attempt(prec):
        out = []
        if use_lane:
            x = CayleyPair.circle_to_real(zeta.with_prec(prec))
            out.append((zeta.with_prec(prec), CayleyPair.real_gap_to_one(x)))
            for n in range(n_max):
                if lane.pole_gap(x) < reject:
                    return out, (n, reason)
                x = lane.step_real(x)
                out.append(
                    (CayleyPair.real_to_circle(x), CayleyPair.real_gap_to_one(x))
                )
        else:
            try:
                sing = singular_points(f, prec)
            except DomainError:
                sing = None
            cur = zeta.with_prec(prec)
            pp = p.with_prec(prec)
            out.append((cur, chordal_distance(cur, pp)))
            for n in range(n_max):
                if sing is not None and any(cur.gap_to(q) < reject for q in sing):
                    return out, (n, reason)
                try:
                    cur = eval_boundary(f, cur)
                except SingularPoint:
                    return out, (n, reason)
                out.append((cur, chordal_distance(cur, pp)))
        return out, None

    pts, bits, trunc = _replay(
        attempt, policy, _boundary_point_agree(policy.agreement_tol_bits)
    )
    points = [OrbitPoint(v, d, bits) for v, d in pts]
    return OrbitRecord("boundary", zeta, p, points, trunc)


# -- rate and summability certificates -------------------------------------

# A running maximum is called settled when, over the last third of the
# window, no step raises it by more than this fraction of its final value.
STABILITY_RTOL_BITS = 30


def verify_rate_bounds(
    record: OrbitRecord, alpha: BigReal, delta: BigReal, n_min: int
) -> RateReport:
    """Sandwich the recorded distances between C alpha^n rates.

    C_upper is the smallest constant with d_n <= C_upper alpha^n on the
    window, C_lower the smallest with d_n >= (alpha - delta)^n / C_lower;
    both are clamped below at 1. Stability of each constant means its
    running maximum stops moving over the last third of the window.
    """
    if not (alpha.sign() > 0 and alpha < 1):
        raise DomainError("alpha must be in (0, 1)")
    if delta.sign() < 0 or not delta < alpha:
        raise DomainError("delta must be in [0, alpha)")
    n_top = len(record.points) - 1
    if n_min < 0:
        raise ValueError("n_min must be nonnegative")
    if n_top - n_min + 1 < 10:
        raise WindowTooShort(
            f"window [{n_min}, {n_top}] has fewer than 10 usable points"
        )
    prec = max(alpha.prec, record.points[-1].distance.prec, 64)
    a = alpha.with_prec(prec)
    base = a - delta.with_prec(prec)
    one = BigReal(1, prec)

    ratios = []
    an = power(a, BigReal(n_min, prec))
    bn = power(base, BigReal(n_min, prec))
    for n in range(n_min, n_top + 1):
        d = record.points[n].distance.with_prec(prec)
        if d.is_zero():
            raise DomainError("rate bounds need an orbit that is not pinned at p")
        ratios.append((n, d / an, bn / d))
        an = an * a
        bn = bn * base

    def running_max(values):
        out = []
        cur = values[0]
        for v in values:
            if v > cur:
                cur = v
            out.append(cur)
        return out

    def settled(maxima):
        tail_from = (2 * (len(maxima) - 1)) // 3
        tol = pow2(-STABILITY_RTOL_BITS, prec) * maxima[-1]
        return all(
            maxima[i] - maxima[i - 1] <= tol
            for i in range(max(1, tail_from), len(maxima))
        )

    upper_run = running_max([u for _, u, _ in ratios])
    lower_run = running_max([l for _, _, l in ratios])
    c_upper = upper_run[-1] if upper_run[-1] > one else one
    c_lower = lower_run[-1] if lower_run[-1] > one else one

    upper_holds = all(u <= c_upper for _, u, _ in ratios)
    lower_holds = all(l <= c_lower for _, _, l in ratios)

    return RateReport(
        alpha=alpha,
        delta=delta,
        window=(n_min, n_top),
        ratios=ratios,
        C_upper=c_upper,
        C_lower=c_lower,
        upper_holds=upper_holds,
        lower_holds=lower_holds,
        upper_stable=settled(upper_run),
        lower_stable=settled(lower_run),
    )


def summability_check(record: OrbitRecord, horizon: int) -> SummabilityReport:
    """Partial sums of 1 - |f^n(0)| with a geometric-tail certificate.

    The certificate is true when every term ratio over the last half of
    the horizon stays strictly below 1; tail_ratio reports the largest
    of them. Orbits whose terms hit zero or fail to decay get a false
    certificate, never an exception.
    """
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    n_top = min(horizon, len(record.points) - 1)
    terms = []
    for pt in record.points[: n_top + 1]:
        v = pt.value
        m = abs(v) if isinstance(v, BigComplex) else BigReal(1, pt.distance.prec)
        terms.append(1 - m)
    sums = []
    acc = BigReal(0, terms[0].prec)
    for t in terms:
        acc = acc + t
        sums.append(acc)

    tail_ratio = None
    summable = True
    for n in range(n_top // 2, n_top):
        if not terms[n].sign() > 0 or not terms[n + 1].sign() > 0:
            summable = False
            tail_ratio = None
            break
        r = terms[n + 1] / terms[n]
        if tail_ratio is None or r > tail_ratio:
            tail_ratio = r
    if tail_ratio is None or not tail_ratio < 1:
        summable = False
    return SummabilityReport(terms, sums, tail_ratio, summable, n_top)


# -- the annulus-entry experiment ------------------------------------------


class ExperimentReport:
    """Deterministic result of theorem_a_experiment.

    per_n[k] is (n, hits, fraction) for n = k+1 over the included samples;
    eventually_fraction counts samples inside the annulus at every step of
    [n_enter, n_max]. outcomes[i] is ("ok", bits), ("rejected", step) or
    ("indeterminate", None) for sample i, in sample order regardless of
    how many workers ran.
    """

    __slots__ = (
        "p",
        "alpha",
        "eps",
        "n_enter",
        "n_max",
        "samples",
        "seed",
        "start_bits",
        "per_n",
        "eventually_count",
        "eventually_fraction",
        "included",
        "rejected",
        "indeterminate",
        "outcomes",
        "max_bits_used",
    )

    def __init__(self, **kw):
        for name in self.__slots__:
            setattr(self, name, kw.pop(name))
        if kw:
            raise TypeError(f"unexpected fields {sorted(kw)}")


_FRACTION_BITS = 160

_RADII_CACHE: dict = {}


def _radii_ladder(alpha: BigReal, eps: BigReal, n_max: int, prec: int):
    key = (alpha.raw(), eps.raw(), n_max, prec)
    got = _RADII_CACHE.get(key)
    if got is None:
        a = alpha.with_prec(prec)
        e = eps.with_prec(prec)
        got = []
        for n in range(1, n_max + 1):
            t = BigReal(n, prec)
            got.append((power(a, (1 + e) * t), power(a, (1 - e) * t)))
        _RADII_CACHE[key] = got
    return got


def _annulus_sample(args):
    """Classify one sample; runs in a worker process.

    Returns ("ok", bits, verdicts) | ("rejected", step) | ("indeterminate",).
    The verdict vector and the final angle must both replay before the
    sample counts: matching booleans alone could mask two inaccurate runs
    that happen to miss every thin annulus the same way.
    """
    f, p, alpha, eps, seed, index, n_max, policy, reject_exp = args
    lane = halfplane_lane(f)
    use_lane = lane is not None and p.angle.is_zero()
    reject = pow2(-reject_exp, 64)
    u = unit_uniform(seed, index, policy.base_bits)

    def attempt(prec):
        radii = _radii_ladder(alpha, eps, n_max, prec)
        angle = u.with_prec(prec) * two_pi(prec)
        verdicts = []
        try:
            if use_lane:
                x = CayleyPair.circle_to_real(CirclePoint(angle))
                for n in range(1, n_max + 1):
                    if lane.pole_gap(x) < reject:
                        return ("rejected", n - 1)
                    x = lane.step_real(x)
                    d = CayleyPair.real_gap_to_one(x)
                    lo, hi = radii[n - 1]
                    verdicts.append(lo < d and d < hi)
                final = CayleyPair.real_to_circle(x)
            else:
                sing = singular_points(f, prec)
                cur = CirclePoint(angle)
                pp = p.with_prec(prec)
                for n in range(1, n_max + 1):
                    if any(cur.gap_to(q) < reject for q in sing):
                        return ("rejected", n - 1)
                    cur = eval_boundary(f, cur)
                    d = chordal_distance(cur, pp)
                    lo, hi = radii[n - 1]
                    verdicts.append(lo < d and d < hi)
                final = cur
        except (SingularPoint, DomainError):
            return ("rejected", len(verdicts))
        return ("run", tuple(verdicts), final)

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
        result, bits = escalate(attempt, policy, agree)
    except PrecisionExhausted:
        return ("indeterminate",)
    if result[0] == "rejected":
        return ("rejected", result[1])
    return ("ok", bits, result[1])


def theorem_a_experiment(
    f: InnerFunction,
    eps: BigReal,
    samples: int,
    seed: int,
    n_enter: int,
    n_max: int,
    policy: PrecisionPolicy,
    p: CirclePoint | None = None,
    alpha: BigReal | None = None,
    max_excluded_fraction: float = 0.01,
    workers: int = 1,
) -> ExperimentReport:
    """Estimate how often random boundary orbits enter and stay in the
    shrinking annuli alpha^((1+eps)n) < |zeta_n - p| < alpha^((1-eps)n).

    Each sample angle is drawn once as an exact dyadic and replayed at
    escalating precision until its verdict vector and final angle agree,
    so the report is a pure function of (f, eps, samples, seed, window,
    policy) and in particular identical for every worker count. The
    starting precision is budgeted up front from (1+eps) n_max log2(1/alpha)
    plus a 64-bit margin, which normally makes the first two runs agree.

    Samples whose orbit walks into the fixed singular-proximity tolerance
    are rejected; samples that exhaust max_bits are indeterminate. Both
    are excluded from the fractions and counted; when their share exceeds
    max_excluded_fraction the run refuses to report and raises
    UnhealthyRun instead.
    """
    if not (eps.sign() > 0 and eps < 1):
        raise DomainError("eps must be in (0, 1)")
    if samples < 1:
        raise ValueError("samples must be positive")
    if not 1 <= n_enter <= n_max:
        raise ValueError("need 1 <= n_enter <= n_max")
    if workers < 1:
        raise ValueError("workers must be positive")
    p = _resolve_p(f, policy, p)
    if alpha is None:
        alpha = angular_derivative(f, p, "radial", policy)
    if not (alpha.sign() > 0 and alpha < 1):
        raise DomainError("alpha must be in (0, 1)")

    # budget the precision the deepest annulus needs, so the base run is
    # usually already the certified one
    a64 = alpha.with_prec(64)
    e64 = eps.with_prec(64)
    need = float((1 + e64) * BigReal(n_max, 64) * (-log(a64) / log(BigReal(2, 64))))
    start_bits = max(policy.base_bits, int(need) + 65)
    start_bits = min(start_bits, policy.max_bits)
    eff = PrecisionPolicy(start_bits, policy.max_bits, policy.agreement_tol_bits)

    args = [
        (f, p, alpha, eps, seed, i, n_max, eff, eff.base_bits // 2)
        for i in range(samples)
    ]
    if workers == 1:
        results = [_annulus_sample(a) for a in args]
    else:
        chunk = max(1, samples // (workers * 8))
        with multiprocessing.Pool(workers) as pool:
            results = pool.map(_annulus_sample, args, chunksize=chunk)

    outcomes = []
    per_n_hits = [0] * n_max
    eventually = 0
    included = rejected = indeterminate = 0
    max_bits = 0
    for res in results:
        if res[0] == "ok":
            _, bits, verdicts = res
            outcomes.append(("ok", bits))
            included += 1
            max_bits = max(max_bits, bits)
            for k, v in enumerate(verdicts):
                if v:
                    per_n_hits[k] += 1
            if all(verdicts[n_enter - 1 :]):
                eventually += 1
        elif res[0] == "rejected":
            outcomes.append(("rejected", res[1]))
            rejected += 1
        else:
            outcomes.append(("indeterminate", None))
            indeterminate += 1

    excluded = rejected + indeterminate
    if included == 0 or excluded > samples * max_excluded_fraction:
        raise UnhealthyRun(
            f"{excluded} of {samples} samples excluded "
            f"({rejected} rejected, {indeterminate} indeterminate), "
            f"over the {max_excluded_fraction:g} budget"
        )

    def frac(k):
        return BigReal(k, _FRACTION_BITS) / BigReal(included, _FRACTION_BITS)

    per_n = [(k + 1, per_n_hits[k], frac(per_n_hits[k])) for k in range(n_max)]
    return ExperimentReport(
        p=p,
        alpha=alpha,
        eps=eps,
        n_enter=n_enter,
        n_max=n_max,
        samples=samples,
        seed=seed,
        start_bits=start_bits,
        per_n=per_n,
        eventually_count=eventually,
        eventually_fraction=frac(eventually),
        included=included,
        rejected=rejected,
        indeterminate=indeterminate,
        outcomes=outcomes,
        max_bits_used=max_bits,
    )
