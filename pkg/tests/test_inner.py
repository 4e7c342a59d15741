import pytest
from hypothesis import given, settings, strategies as st

from innerdyn import numerics as nm
from innerdyn.inner import (
    AtomicSingular,
    Automorphism,
    BlaschkeProduct,
    Composition,
    HalfPlaneConjugated,
    LinearPlusTan,
    NotBoundaryConverging,
    NotConverging,
    Rational2,
    SingularPoint,
    StolzAngle,
    WolffRegion,
    angular_derivative,
    denjoy_wolff,
    eval_boundary,
    eval_interior,
    in_stolz,
    in_wolff,
    singular_points,
)
from innerdyn.moebius import CayleyPair
from innerdyn.numerics import (
    BigComplex,
    BigReal,
    CirclePoint,
    DomainError,
    PrecisionPolicy,
    atanh,
    cos,
    exp,
    pow2,
    sin,
    tanh,
    two_pi,
    unit_uniform,
)

PREC = 192
POLICY = PrecisionPolicy(64, 4096, 32)
DW_TOL = BigReal("1e-20", 64)


def br(s, prec=PREC):
    return BigReal(s, prec)


def bc(re, im="0", prec=PREC):
    return BigComplex(BigReal(re, prec), BigReal(im, prec))


def cp(angle, prec=PREC):
    return CirclePoint(BigReal(angle, prec))


def origin(prec=PREC):
    return BigComplex(BigReal(0, prec), BigReal(0, prec))


def auto_half(prec=PREC):
    return Automorphism(BigReal("0.5", prec))


def rat2(prec=PREC):
    return HalfPlaneConjugated(Rational2(BigReal(2, prec)))


def lptan(prec=PREC):
    return HalfPlaneConjugated(LinearPlusTan(BigReal(2, prec)))


def atom(prec=PREC):
    return AtomicSingular(BigReal(1, prec), CirclePoint(BigReal(0, prec)))


def blaschke2(prec=PREC):
    zero = BigComplex(BigReal("-0.5", prec), BigReal(0, prec))
    return BlaschkeProduct([zero, zero], CirclePoint(BigReal(0, prec)))


ZOO = [auto_half, blaschke2, atom, rat2, lptan]

interior_points = st.tuples(
    st.integers(min_value=-3800, max_value=3800),
    st.integers(min_value=-3800, max_value=3800),
).filter(lambda t: t[0] ** 2 + t[1] ** 2 < 3900**2).map(
    lambda t: BigComplex(BigReal(t[0], PREC) / 4096, BigReal(t[1], PREC) / 4096)
)


# -- interior evaluation ---------------------------------------------------


def test_interior_examples():
    assert eval_interior(auto_half(), origin()) == bc("0.5")
    # C^{-1}(0) = i, F(i) = 2i - 1/i = 3i, C(3i) = 1/2
    v = eval_interior(rat2(), origin())
    assert float(abs(v - bc("0.5"))) < 1e-50
    w = eval_interior(atom(), origin())
    assert abs(w.re - exp(br("-1"))) < pow2(-184, PREC)
    assert float(abs(w.im)) < 1e-50


def test_interior_rejects_boundary_input():
    with pytest.raises(DomainError):
        eval_interior(auto_half(), bc("1"))


def test_automorphism_orbit_matches_tanh_closed_form():
    f = auto_half()
    lam = atanh(br("0.5"))
    z = origin()
    for n in range(1, 25):
        z = eval_interior(f, z)
        assert abs(z.re - tanh(lam * n)) < pow2(-168, PREC)
        assert float(abs(z.im)) == 0.0


@pytest.mark.parametrize("make", ZOO, ids=lambda m: m.__name__)
@given(z=interior_points)
@settings(max_examples=25, deadline=None)
def test_interior_maps_into_disk(make, z):
    assert abs(eval_interior(make(), z)) < 1


def test_composition_is_nested_evaluation():
    f, g = auto_half(), blaschke2()
    comp = Composition(f, g)
    for z in (origin(), bc("0.3", "-0.4"), bc("-0.7", "0.1")):
        direct = eval_interior(f, eval_interior(g, z))
        assert eval_interior(comp, z) == direct


# -- boundary evaluation ---------------------------------------------------


def test_boundary_fixed_points_of_automorphism():
    f = auto_half()
    assert eval_boundary(f, cp("0")).gap_to(cp("0")) < pow2(-180, PREC)
    p = nm.pi(PREC)
    assert eval_boundary(f, CirclePoint(p)).gap_to(CirclePoint(p)) < pow2(-180, PREC)


def test_boundary_fixed_point_of_rational2():
    # x = 1 solves 2x - 1/x = x, and C(1) = -i sits at angle 3pi/2
    zeta = CayleyPair.real_to_circle(br("1"))
    image = eval_boundary(rat2(), zeta)
    assert image.gap_to(zeta) < pow2(-180, PREC)


def _radial_angle(f, zeta, k):
    r = 1 - pow2(-k, PREC)
    z = zeta.embed() * BigComplex(r, BigReal(0, PREC))
    return eval_interior(f, z).arg()


@pytest.mark.parametrize(
    "make", [auto_half, blaschke2, atom, rat2, lptan], ids=lambda m: m.__name__
)
def test_boundary_agrees_with_radial_limit(make):
    f = make()
    for angle in ("0.8", "2.0", "4.4"):
        zeta = cp(angle)
        limit = eval_boundary(f, zeta)
        inside = CirclePoint(_radial_angle(f, zeta, 60))
        assert limit.gap_to(inside) < pow2(-50, PREC)


def test_atomic_boundary_angle_formula():
    # sigma at angle 0, t = 1: the image angle is cot(-theta/2)
    f = atom()
    theta = br("2.5")
    got = eval_boundary(f, CirclePoint(theta))
    expect = CirclePoint(cos(-theta.shift(-1)) / sin(-theta.shift(-1)))
    assert got.gap_to(expect) < pow2(-180, PREC)


# -- singular set and rejection -------------------------------------------


def test_atomic_rejects_at_and_near_the_atom():
    f = atom()
    with pytest.raises(SingularPoint):
        eval_boundary(f, cp("0"))
    with pytest.raises(SingularPoint):
        eval_boundary(f, CirclePoint(pow2(-100, PREC)))
    # outside the tolerance band evaluation must proceed
    eval_boundary(f, CirclePoint(pow2(-20, PREC)))


def test_lptan_rejects_near_tan_pole():
    f = lptan()
    half_pi = nm.pi(PREC).shift(-1)
    zeta = CayleyPair.real_to_circle(half_pi)  # rounded pi/2: within one ulp
    with pytest.raises(SingularPoint):
        eval_boundary(f, zeta)
    away = CayleyPair.real_to_circle(half_pi + br("0.25"))
    eval_boundary(f, away)


def test_rational2_rejects_pole_and_cayley_base():
    f = rat2()
    with pytest.raises(SingularPoint):
        eval_boundary(f, CirclePoint(nm.pi(PREC)))  # x = 0
    with pytest.raises(SingularPoint):
        eval_boundary(f, cp("0"))  # undefined half-plane coordinate


def test_singular_point_lists():
    assert singular_points(auto_half(), PREC) == []
    assert singular_points(blaschke2(), PREC) == []
    [s] = singular_points(atom(), PREC)
    assert s.angle.is_zero()
    pts = singular_points(rat2(), PREC)
    assert len(pts) == 2
    assert any(q.angle.is_zero() for q in pts)
    assert any(q.gap_to(CirclePoint(nm.pi(PREC))) < pow2(-180, PREC) for q in pts)
    pts = singular_points(lptan(), PREC)
    first_pole = CayleyPair.real_to_circle(nm.pi(PREC).shift(-1))
    assert any(q.gap_to(first_pole) < pow2(-180, PREC) for q in pts)


def test_composition_singular_set_pulls_back_through_inner():
    # atom at i composed after phi_{1/2}: the singularity lifts to
    # phi^{-1}(i) = (i - 1/2)/(1 - i/2) = -4/5 + 3i/5
    half_pi = nm.pi(PREC).shift(-1)
    f = Composition(AtomicSingular(br("1"), CirclePoint(half_pi)), auto_half())
    [q] = singular_points(f, PREC)
    expect = CirclePoint(bc("-0.8", "0.6").arg())
    assert q.gap_to(expect) < pow2(-180, PREC)


def test_composition_preimages_need_invertible_inner():
    f = Composition(atom(), blaschke2())
    with pytest.raises(DomainError):
        singular_points(f, PREC)


# -- attracting point ------------------------------------------------------


@pytest.mark.parametrize(
    "make", [auto_half, blaschke2, rat2, lptan], ids=lambda m: m.__name__
)
def test_denjoy_wolff_finds_one(make):
    p = denjoy_wolff(make(), POLICY, DW_TOL)
    assert p.gap_to(CirclePoint(BigReal(0, p.prec))) < BigReal("1e-18", 64)


def test_denjoy_wolff_refuses_interior_attractor():
    with pytest.raises(NotBoundaryConverging):
        denjoy_wolff(atom(), POLICY, DW_TOL, max_steps=200)


# -- angular derivative ----------------------------------------------------


def test_radial_derivative_closed_forms():
    p = CirclePoint(BigReal(0, 64))
    third = BigReal(1, 256) / 3
    a = angular_derivative(auto_half(), p, "radial", POLICY)
    assert abs(a.with_prec(256) - third) < pow2(-30, 256)
    b = angular_derivative(blaschke2(), p, "radial", POLICY)
    assert abs(b.with_prec(256) - third.shift(1)) < pow2(-30, 256)
    for make in (rat2, lptan):
        c = angular_derivative(make(), p, "radial", POLICY)
        assert abs(c.with_prec(256) - br("0.5", 256)) < pow2(-30, 256)


def test_method_consistency():
    p = CirclePoint(BigReal(0, 64))
    for make in (auto_half, rat2):
        r = angular_derivative(make(), p, "radial", POLICY)
        o = angular_derivative(make(), p, "orbit-ratio", POLICY)
        assert abs(r.with_prec(256) - o.with_prec(256)) < br("1e-6", 256)


def test_orbit_ratio_for_lptan():
    p = CirclePoint(BigReal(0, 64))
    o = angular_derivative(lptan(), p, "orbit-ratio", POLICY)
    assert abs(o.with_prec(256) - br("0.5", 256)) < br("1e-4", 256)


def test_derivative_in_unit_interval():
    p = CirclePoint(BigReal(0, 64))
    for make in (auto_half, blaschke2, rat2, lptan):
        a = angular_derivative(make(), p, "radial", POLICY)
        assert a.sign() > 0 and a < 1


def test_derivative_rejects_repelling_point():
    # at the repelling fixed point -1 the quotient tends to 1/alpha = 3
    with pytest.raises(NotConverging):
        angular_derivative(auto_half(), CirclePoint(nm.pi(64)), "radial", POLICY)


def test_composed_derivative_multiplies():
    p = CirclePoint(BigReal(0, 64))
    comp = Composition(auto_half(), auto_half())
    a = angular_derivative(comp, p, "radial", POLICY)
    ninth = BigReal(1, 256) / 9
    assert abs(a.with_prec(256) - ninth) < pow2(-30, 256)


# -- Stolz angles ----------------------------------------------------------


def stolz_pi8(prec=PREC):
    return StolzAngle(
        CirclePoint(BigReal(0, prec)), nm.pi(prec) / 8, BigReal("0.7", prec)
    )


def test_stolz_constructor_constraint():
    with pytest.raises(DomainError):
        StolzAngle(cp("0"), nm.pi(PREC) / 4, br("0.1"))
    with pytest.raises(DomainError):
        StolzAngle(cp("0"), nm.pi(PREC) / 8, br("0.9"))  # rho >= cos(pi/4)


def test_stolz_membership():
    sa = stolz_pi8()
    assert not in_stolz(origin(), sa)  # the radius bound excludes 0
    assert in_stolz(bc("0.9"), sa)
    tang = BigComplex(br("0.99") * cos(br("0.1")), br("0.99") * sin(br("0.1")))
    assert not in_stolz(tang, sa)


@pytest.mark.parametrize("make", [auto_half, rat2, lptan], ids=lambda m: m.__name__)
def test_orbit_of_zero_enters_stolz_angle_quickly(make):
    f = make()
    sa = stolz_pi8()
    z = origin()
    inside_from = None
    for n in range(1, 41):
        z = eval_interior(f, z)
        if in_stolz(z, sa):
            if inside_from is None:
                inside_from = n
        else:
            inside_from = None
    assert inside_from is not None and inside_from <= 10


# -- Wolff regions ---------------------------------------------------------


def test_wolff_membership_cases():
    p = cp("0")
    assert in_wolff(origin(), WolffRegion(p, br("2")))
    assert not in_wolff(origin(), WolffRegion(p, br("0.5")))
    # eta = 1: |p - 0|^2 = 1 = eta * (1 - 0), equality is excluded
    assert not in_wolff(origin(), WolffRegion(p, br("1")))
    # z = 0.9p: gap^2 = 0.01 against 1 - 0.81 = 0.19
    assert in_wolff(bc("0.9"), WolffRegion(p, br("1")))


def test_wolff_nested_in_eta():
    p = cp("1.3")
    small, large = WolffRegion(p, br("0.7")), WolffRegion(p, br("1.4"))
    for i in range(200):
        z = _disk_sample(31, i)
        if in_wolff(z, small):
            assert in_wolff(z, large)


def test_wolff_region_is_the_stated_disk():
    region = WolffRegion(cp("2.1"), br("1.7"))
    c, r = region.center(), region.radius()
    for i in range(200):
        z = _disk_sample(37, i)
        assert in_wolff(z, region) == (abs(z - c) < r)


def _disk_sample(seed, i, prec=PREC):
    u = unit_uniform(seed, 2 * i, prec)
    v = unit_uniform(seed, 2 * i + 1, prec)
    ang = v * two_pi(prec)
    return BigComplex(u.sqrt() * cos(ang) * br("0.999"), u.sqrt() * sin(ang) * br("0.999"))


def _horodisk_sample(region, seed, i, prec=PREC):
    u = unit_uniform(seed, 2 * i, prec)
    v = unit_uniform(seed, 2 * i + 1, prec)
    c, r = region.center(), region.radius()
    ang = v * two_pi(prec)
    rad = r * u.sqrt()
    return BigComplex(c.re + rad * cos(ang), c.im + rad * sin(ang))


def test_wolff_invariance_under_the_maps():
    # the image region's parameter contracts by exactly alpha; the slack
    # factor covers roundoff only
    slack = 1 + pow2(-40, PREC)
    p = cp("0")
    cases = [
        (auto_half(), BigReal(1, PREC) / 3),
        (rat2(), br("0.5")),
        (blaschke2(), BigReal(2, PREC) / 3),
    ]
    for fi, (f, alpha) in enumerate(cases):
        for ei, eta_s in enumerate(("1.5", "2", "5")):
            eta = br(eta_s)
            region = WolffRegion(p, eta)
            image_region = WolffRegion(p, alpha * eta * slack)
            for i in range(100):
                z = _horodisk_sample(region, 1000 + 10 * fi + ei, i)
                assert in_wolff(z, region)
                assert in_wolff(eval_interior(f, z), image_region), (fi, eta_s, i)


# -- Schwarz-Pick ----------------------------------------------------------


def _pseudo_distance(z, w):
    return abs(z - w) / abs(1 - w.conj() * z)


@pytest.mark.parametrize("make", ZOO, ids=lambda m: m.__name__)
def test_schwarz_pick_contraction(make):
    f = make()
    slack = 1 + pow2(-40, PREC)
    for i in range(40):
        z = _disk_sample(53, 2 * i)
        w = _disk_sample(53, 2 * i + 1)
        if abs(z - w).is_zero():
            continue
        lhs = _pseudo_distance(eval_interior(f, z), eval_interior(f, w))
        assert lhs <= _pseudo_distance(z, w) * slack
