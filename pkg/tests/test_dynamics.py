from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from innerdyn import numerics as nm
from innerdyn.dynamics import (
    AnnulusSpec,
    OrbitRecord,
    UnhealthyRun,
    WindowTooShort,
    boundary_orbit,
    in_annulus,
    interior_orbit,
    summability_check,
    theorem_a_experiment,
    verify_rate_bounds,
)
from innerdyn.inner import (
    Automorphism,
    BlaschkeProduct,
    HalfPlaneConjugated,
    LinearPlusTan,
    Rational2,
)
from innerdyn.moebius import CayleyPair
from innerdyn.numerics import (
    BigReal,
    CirclePoint,
    DomainError,
    PrecisionPolicy,
    atan,
    chordal_distance,
    hypot,
    pi,
    pow2,
    power,
    tanh,
    atanh,
)


def br(s, prec=256):
    return BigReal(s, prec)


def auto_half():
    return Automorphism(br("0.5", 64))


def rat2():
    return HalfPlaneConjugated(Rational2(br("2", 64)))


def lptan():
    return HalfPlaneConjugated(LinearPlusTan(br("2", 64)))


def pinned_zero():
    zeros = [nm.BigComplex(BigReal(0, 64), BigReal(0, 64))] * 2
    return BlaschkeProduct(zeros, CirclePoint(BigReal(0, 64)))


P0 = CirclePoint(BigReal(0, 64))
POLICY = PrecisionPolicy(128, 4096, 64)


# -- interior records -------------------------------------------------------


def test_interior_distances_match_tanh_closed_form():
    rec = interior_orbit(auto_half(), 40, POLICY)
    assert rec.kind == "interior"
    assert rec.truncated_at is None
    assert len(rec) == 41
    s = atanh(br("0.5", 400))
    for n, pt in enumerate(rec.points):
        oracle = 1 - tanh(BigReal(n, 400) * s)
        assert abs(pt.distance - oracle) < pow2(-150, 400), n


def test_interior_lane_matches_rational_recurrence():
    rec = interior_orbit(rat2(), 25, POLICY)
    assert rec.p.angle.is_zero()
    y = BigReal(1, 600)
    assert rec.points[0].distance == 1
    for n in range(1, 26):
        y = 2 * y + 1 / y
        oracle = 2 / (y + 1)
        err = abs(rec.points[n].distance - oracle) / oracle
        assert err < pow2(-100, 600), n


def test_interior_lane_lptan_matches_real_recurrence():
    rec = interior_orbit(lptan(), 25, POLICY)
    y = BigReal(1, 600)
    for n in range(1, 26):
        y = 2 * y + tanh(y)
        oracle = 2 / (y + 1)
        err = abs(rec.points[n].distance - oracle) / oracle
        assert err < pow2(-100, 600), n


def test_interior_orbit_with_pinned_interior_fixed_point():
    # orbit of 0 is constant, so p has to be supplied by the caller
    rec = interior_orbit(pinned_zero(), 15, POLICY, p=P0)
    assert all(pt.distance == 1 for pt in rec.points)


def test_interior_orbit_rejects_negative_length():
    with pytest.raises(ValueError):
        interior_orbit(auto_half(), -1, POLICY)


# -- boundary records -------------------------------------------------------


def test_boundary_orbit_matches_cot_conjugacy():
    # the automorphism is conjugate to t -> 3t on cot(theta/2), so the
    # orbit angle has the closed form 2*atan(3^-n tan(theta0/2))
    zeta = CirclePoint(pi(256).shift(-1))
    rec = boundary_orbit(auto_half(), zeta, 40, POLICY)
    assert rec.kind == "boundary"
    assert rec.truncated_at is None
    t = nm.tan(zeta.angle.with_prec(500).shift(-1))
    for n, pt in enumerate(rec.points):
        theta = atan(t).shift(1)
        assert pt.value.gap_to(CirclePoint(theta)) < pow2(-150, 500), n
        oracle = nm.sin(theta.shift(-1)).shift(1)
        assert abs(pt.distance - oracle) < pow2(-150, 500), n
        t = t / 3


def test_boundary_orbit_lane_matches_exact_fraction_orbit():
    x = Fraction(2)
    zeta = CayleyPair.real_to_circle(BigReal(2, 256))
    rec = boundary_orbit(rat2(), zeta, 12, POLICY)
    for n in range(1, 13):
        x = 2 * x - 1 / x
        xb = BigReal(x.numerator, 4400) / BigReal(x.denominator, 4400)
        oracle = 2 / hypot(xb, BigReal(1, 4400))
        err = abs(rec.points[n].distance - oracle) / oracle
        assert err < pow2(-100, 4400), n
        assert rec.points[n].value.gap_to(CayleyPair.real_to_circle(xb)) < pow2(
            -100, 4400
        ), n


def test_boundary_orbit_constant_at_other_fixed_point():
    rec = boundary_orbit(auto_half(), CirclePoint(pi(256)), 20, POLICY)
    assert rec.truncated_at is None
    for pt in rec.points:
        assert abs(pt.distance - 2) < pow2(-60, 256)


def test_boundary_orbit_at_attracting_point_is_constant():
    rec = boundary_orbit(auto_half(), P0, 10, POLICY)
    assert len(rec) == 11
    assert all(pt.distance.is_zero() for pt in rec.points)


def test_boundary_orbit_truncates_at_lane_pole():
    pol = PrecisionPolicy(64, 1024, 32)
    zeta = CayleyPair.real_to_circle(pow2(-40, 64))
    rec = boundary_orbit(rat2(), zeta, 10, pol)
    assert rec.truncated_at is not None
    n, reason = rec.truncated_at
    assert n == 0 and "singular" in reason
    assert len(rec) == 1


def test_boundary_orbit_truncation_is_replay_stable():
    # x0 = sqrt(2)/2 rounded maps within an ulp of the pole at 0; the
    # proximity test uses a tolerance fixed by base_bits, so replays at
    # higher precision must cut the record at the same step
    pol = PrecisionPolicy(64, 2048, 32)
    x0 = BigReal(2, 64).sqrt().shift(-1)
    rec = boundary_orbit(rat2(), CayleyPair.real_to_circle(x0), 10, pol)
    assert rec.truncated_at is not None
    assert rec.truncated_at[0] == 1
    assert len(rec) == 2


def test_boundary_orbit_truncates_at_tan_pole():
    pol = PrecisionPolicy(64, 1024, 32)
    zeta = CayleyPair.real_to_circle(pi(64).shift(-1))
    rec = boundary_orbit(lptan(), zeta, 10, pol)
    assert rec.truncated_at is not None
    assert rec.truncated_at[0] == 0


# -- rate sandwiches --------------------------------------------------------


def third():
    return BigReal(1, 256) / 3


def test_rate_report_automorphism_interior():
    rec = interior_orbit(auto_half(), 60, PrecisionPolicy(256, 4096, 64))
    rep = verify_rate_bounds(rec, third(), BigReal(0, 64), 10)
    assert rep.window == (10, 60)
    assert rep.upper_holds and rep.lower_holds
    assert rep.upper_stable and rep.lower_stable
    assert rep.C_lower == 1
    assert abs(rep.C_upper - 2) < br("1e-8")
    assert len(rep.ratios) == 51


def test_rate_report_boundary_automorphism():
    zeta = CirclePoint(pi(256).shift(-1))
    rec = boundary_orbit(auto_half(), zeta, 50, POLICY)
    rep = verify_rate_bounds(rec, third(), BigReal(0, 64), 10)
    assert rep.upper_holds and rep.lower_holds and rep.stable
    assert abs(rep.C_upper - 2) < br("1e-6")


def test_rate_report_with_positive_delta():
    rec = interior_orbit(auto_half(), 60, POLICY)
    rep = verify_rate_bounds(rec, third(), br("0.1", 64), 10)
    assert rep.lower_holds and rep.lower_stable
    assert rep.C_lower == 1


def test_rate_bounds_window_too_short():
    rec = interior_orbit(auto_half(), 60, POLICY)
    with pytest.raises(WindowTooShort):
        verify_rate_bounds(rec, third(), BigReal(0, 64), 52)


def test_rate_bounds_parameter_validation():
    rec = interior_orbit(auto_half(), 20, POLICY)
    with pytest.raises(DomainError):
        verify_rate_bounds(rec, br("1"), BigReal(0, 64), 0)
    with pytest.raises(DomainError):
        verify_rate_bounds(rec, third(), third(), 0)
    with pytest.raises(DomainError):
        verify_rate_bounds(rec, third(), br("-0.1"), 0)


def test_rate_bounds_refuse_orbit_pinned_at_p():
    rec = boundary_orbit(auto_half(), P0, 20, POLICY)
    with pytest.raises(DomainError):
        verify_rate_bounds(rec, third(), BigReal(0, 64), 0)


def test_rate_unstable_for_orbit_that_never_approaches():
    rec = interior_orbit(pinned_zero(), 60, POLICY, p=P0)
    rep = verify_rate_bounds(rec, third(), BigReal(0, 64), 10)
    # d_n / alpha^n = 3^n keeps raising its own maximum all the way out
    assert rep.upper_holds
    assert not rep.upper_stable


# -- summability ------------------------------------------------------------


@pytest.mark.parametrize(
    "make,limit",
    [(auto_half, "1/3"), (rat2, "1/2"), (lptan, "1/2")],
    ids=["automorphism", "rational2", "linear-plus-tan"],
)
def test_summability_certificates_match_multipliers(make, limit):
    rec = interior_orbit(make(), 60, POLICY)
    rep = summability_check(rec, 60)
    assert rep.summable
    num, den = limit.split("/")
    target = BigReal(int(num), 256) / BigReal(int(den), 256)
    assert abs(rep.tail_ratio - target) < br("1e-6")
    for a, b in zip(rep.partial_sums, rep.partial_sums[1:]):
        assert b > a


def test_summability_false_for_pinned_orbit():
    rec = interior_orbit(pinned_zero(), 40, POLICY, p=P0)
    rep = summability_check(rec, 40)
    assert not rep.summable


def test_summability_false_for_boundary_record():
    rec = boundary_orbit(auto_half(), CirclePoint(pi(256)), 30, POLICY)
    rep = summability_check(rec, 30)
    assert not rep.summable
    assert all(t.is_zero() for t in rep.terms)


def test_summability_horizon_clamps_to_record():
    rec = interior_orbit(auto_half(), 20, POLICY)
    rep = summability_check(rec, 500)
    assert rep.horizon == 20
    with pytest.raises(ValueError):
        summability_check(rec, 0)


# -- annuli -----------------------------------------------------------------


def test_annulus_radii_example():
    spec = AnnulusSpec(P0, third(), br("0.5"))
    lo, hi = spec.radii(4, 256)
    assert abs(lo - BigReal(1, 256) / 729) < pow2(-200, 256)
    assert abs(hi - BigReal(1, 256) / 9) < pow2(-200, 256)


def test_in_annulus_example_point():
    spec = AnnulusSpec(P0, third(), br("0.5"))
    gap = nm.asin(BigReal(1, 256) / 54).shift(1)
    assert in_annulus(spec, 4, CirclePoint(gap))
    assert not in_annulus(spec, 4, P0)
    assert not in_annulus(spec, 4, P0.antipode())
    assert not in_annulus(spec, 0, CirclePoint(gap))


def test_annulus_spec_validation():
    with pytest.raises(DomainError):
        AnnulusSpec(P0, br("1"), br("0.5"))
    with pytest.raises(DomainError):
        AnnulusSpec(P0, third(), br("0"))
    spec = AnnulusSpec(P0, third(), br("0.5"))
    with pytest.raises(ValueError):
        spec.radii(-1, 128)


dyadic_unit = st.integers(min_value=1, max_value=2**20 - 1).map(
    lambda k: BigReal(k, 128).shift(-20)
)


@settings(max_examples=60, deadline=None)
@given(e1=dyadic_unit, e2=dyadic_unit, a=dyadic_unit, n=st.integers(0, 80))
def test_annulus_nesting_in_eps(e1, e2, a, n):
    if e1 == e2 or a == e1 or a == e2:
        return
    e1, e2 = (e1, e2) if e1 < e2 else (e2, e1)
    narrow = AnnulusSpec(P0, a, e1).radii(n, 192)
    wide = AnnulusSpec(P0, a, e2).radii(n, 192)
    assert narrow[0] >= wide[0]
    assert narrow[1] <= wide[1]


# -- the annulus-entry experiment -------------------------------------------


def run_smoke(**kw):
    base = dict(
        f=rat2(),
        eps=br("0.5", 64),
        samples=40,
        seed=1,
        n_enter=20,
        n_max=40,
        policy=PrecisionPolicy(64, 2048, 32),
        alpha=br("0.5", 64),
    )
    base.update(kw)
    return theorem_a_experiment(**base)


def test_theorem_a_smoke_rational2():
    rep = run_smoke()
    assert rep.samples == 40
    assert rep.included == 40
    assert rep.rejected == 0 and rep.indeterminate == 0
    assert rep.start_bits >= 125
    assert rep.max_bits_used >= rep.start_bits
    assert len(rep.per_n) == 40
    assert len(rep.outcomes) == 40
    assert float(rep.eventually_fraction) >= 0.6
    n, hits, frac = rep.per_n[34]
    assert n == 35 and hits >= 32
    assert float(frac) == hits / 40


def test_theorem_a_deterministic_across_workers():
    kw = dict(samples=24, n_enter=12, n_max=25)
    one = run_smoke(**kw)
    three = run_smoke(workers=3, **kw)
    assert one.outcomes == three.outcomes
    assert one.eventually_count == three.eventually_count
    assert one.eventually_fraction == three.eventually_fraction
    assert [(n, h) for n, h, _ in one.per_n] == [(n, h) for n, h, _ in three.per_n]


def test_theorem_a_aggregates_survive_tighter_agreement():
    loose = run_smoke(samples=30, n_max=20, n_enter=10)
    tight = run_smoke(
        samples=30, n_max=20, n_enter=10, policy=PrecisionPolicy(64, 2048, 64)
    )
    assert loose.included == tight.included
    assert loose.eventually_count == tight.eventually_count
    assert [h for _, h, _ in loose.per_n] == [h for _, h, _ in tight.per_n]


def test_theorem_a_unhealthy_without_escalation_room():
    # with base == max no sample can ever certify, so every one of them
    # comes back indeterminate and the run must refuse to report
    with pytest.raises(UnhealthyRun):
        run_smoke(
            samples=5,
            n_max=10,
            n_enter=5,
            p=P0,
            policy=PrecisionPolicy(64, 64, 32),
        )


def test_theorem_a_estimated_alpha_agrees_with_pinned():
    pinned = run_smoke(samples=20, n_max=20, n_enter=10)
    estimated = run_smoke(samples=20, n_max=20, n_enter=10, alpha=None)
    assert abs(estimated.alpha - br("0.5")) < br("1e-15")
    assert pinned.eventually_count == estimated.eventually_count
    assert [h for _, h, _ in pinned.per_n] == [h for _, h, _ in estimated.per_n]


def test_theorem_a_parameter_validation():
    with pytest.raises(DomainError):
        run_smoke(eps=br("0", 64))
    with pytest.raises(ValueError):
        run_smoke(samples=0)
    with pytest.raises(ValueError):
        run_smoke(n_enter=0)
    with pytest.raises(ValueError):
        run_smoke(n_enter=50)
    with pytest.raises(ValueError):
        run_smoke(workers=0)


def test_orbit_record_rejects_unknown_kind():
    with pytest.raises(ValueError):
        OrbitRecord("radial", None, P0, [])
