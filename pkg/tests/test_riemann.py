import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import brentq

from helpers import QuadraticPair, compare_with_oracle
from oracles import brute_convex_envelope
from wavefront import riemann
from wavefront.envelope import CHORD, CONTACT
from wavefront.example_lab import CoupledFlux, interface_jump_u_plus
from wavefront.flux_model import FluxModel, SplineFlux, burgers, two_inflection
from wavefront.riemann import (DISCONTINUITY, MIXED, NONPHYSICAL, RAREFACTION, ContractionError,
                               CurvePath, RiemannError, StrengthError, accurate_solver,
                               apply_T_operator, classify_front, contraction_distance, crude_solver,
                               discretize_rarefaction, dump_curve, elementary_endpoint,
                               fixed_point_curve, hugoniot_speed, liu_admissible,
                               scalar_flux_profile, simplified_solver, solve_riemann)

# fitted from 100 random crossings of the quadratic pair, worst ratio 0.0175
CRUDE_C = 0.02


@pytest.fixture(scope="module")
def pair():
    return QuadraticPair()


@pytest.fixture(scope="module")
def coupled():
    return CoupledFlux(a_values=(0.5,))


class Diagonal(FluxModel):
    """Linear uncoupled flux, constant speeds."""

    n = 2

    def __init__(self):
        super().__init__([-1, -1], [1, 1])

    def flux(self, u):
        u = self.check(u)
        return np.array([-0.5 * u[0], 2.0 * u[1]])

    def jacobian(self, u):
        self.check(u)
        return np.diag([-0.5, 2.0])


def _path(u_minus, tau, r):
    u = u_minus[None, :] + tau[:, None] * r[None, :]
    return CurvePath(tau, u, np.zeros_like(tau), np.zeros_like(tau))


# -- flux profile -----------------------------------------------------------

def test_profile_of_constant_speed_is_linear():
    model = Diagonal()
    tau = np.linspace(0.0, 0.4, 17)
    path = _path(np.zeros(2), tau, np.array([0.0, 1.0]))
    ft = scalar_flux_profile(model, path, 1, np.array([0.0, 1.0]))
    # exact up to the rounding of the running sum
    assert np.max(np.abs(ft - 2.0 * tau)) <= 4 * np.finfo(float).eps


def test_burgers_profile_matches_antiderivative():
    model = burgers()
    u0 = 0.3
    tau = np.sort(np.concatenate([[0.0, 0.7], np.random.default_rng(3).uniform(0, 0.7, 200)]))
    path = _path(np.array([u0]), tau, np.ones(1))
    ft = scalar_flux_profile(model, path, 0, np.ones(1))
    assert np.max(np.abs(ft - (u0 * tau + tau ** 2 / 2))) <= 1e-8


def test_profile_quadrature_converges_for_quartic_flux():
    model = two_inflection(0.1)
    u0, s = -0.3, 0.55
    errs = []
    for m in (100, 200, 400):
        tau = np.linspace(0.0, s, m + 1)
        ft = scalar_flux_profile(model, _path(np.array([u0]), tau, np.ones(1)), 0, np.ones(1))
        errs.append(np.max(np.abs(ft - (model.f(u0 + tau) - model.f(u0)))))
    assert errs[-1] <= 1e-8
    assert errs[0] / errs[1] > 3.5 and errs[1] / errs[2] > 3.5


def test_profile_of_reversed_path():
    model = two_inflection(0.1)
    u0, s = -0.2, 0.4
    tau = np.linspace(0.0, s, 2001)
    fwd = scalar_flux_profile(model, _path(np.array([u0]), tau, np.ones(1)), 0, np.ones(1))
    back = scalar_flux_profile(model, _path(np.array([u0 + s]), tau, -np.ones(1)), 0, np.ones(1))
    # reversing the path: int_0^tau lambda(u(s - xi)) dxi = f~(s) - f~(s - tau)
    assert np.max(np.abs(back - (fwd[-1] - fwd[::-1]))) <= 1e-10


# -- curve operator ---------------------------------------------------------

def test_operator_is_rarefaction_in_convex_region():
    model = burgers()
    u_minus = np.array([0.2])
    tau = np.linspace(0.0, 0.5, 129)
    out = apply_T_operator(model, _path(u_minus, tau, np.ones(1)), 0, u_minus, np.ones(1))
    assert np.max(np.abs(out.v)) <= 1e-15
    # cell slopes of f~ = 0.2 tau + tau**2 / 2
    assert np.allclose(out.sigma[:-1], 0.2 + 0.5 * (tau[1:] + tau[:-1]), atol=1e-12)


def test_operator_jump_part_matches_direct_envelope():
    model = two_inflection(0.1)
    u_minus = np.array([-0.05])
    tau = np.linspace(0.0, 0.3, 241)
    out = apply_T_operator(model, _path(u_minus, tau, np.ones(1)), 0, u_minus, np.ones(1))
    ft = model.f(u_minus[0] + tau) - model.f(u_minus[0])
    v_ref = ft - brute_convex_envelope(tau, ft)
    assert np.max(np.abs(out.v - v_ref)) <= 1e-12
    assert np.all(out.v >= -1e-15)
    inside = out.v > 1e-12
    assert inside.any() and not inside.all()
    # the positive set is one interval: the chord of the envelope
    idx = np.nonzero(inside)[0]
    assert np.all(np.diff(idx) == 1)


@given(st.floats(-0.4, 0.4), st.floats(-0.3, 0.3).filter(lambda s: abs(s) > 1e-3))
def test_operator_speed_is_monotone(u0, s):
    model = two_inflection(0.1)
    s = float(np.clip(s, -0.45 - u0, 0.45 - u0))
    if abs(s) < 1e-3:
        return
    u_minus = np.array([u0])
    tau = np.linspace(0.0, s, 97)
    out = apply_T_operator(model, _path(u_minus, tau, np.ones(1)), 0, u_minus, np.ones(1))
    # conv on [0, s] or conc on [s, 0]: speeds increase along the path either way
    assert np.all(np.diff(out.sigma) >= -1e-12)


def test_operator_on_system_keeps_parametrization(pair):
    u_minus = np.array([0.1, -0.1])
    l0 = pair.eigen(u_minus).l(1)
    r0 = pair.eigen(u_minus).r(1)
    tau = np.linspace(0.0, 0.2, 129)
    out = apply_T_operator(pair, _path(u_minus, tau, r0 / np.dot(l0, r0)), 1, u_minus, l0)
    assert np.allclose((out.u - u_minus) @ l0, tau, atol=1e-12)


# -- elementary curves ------------------------------------------------------

def test_scalar_curves_match_oracle(rng):
    for _ in range(40):
        knots = np.linspace(-1.0, 1.0, 7)
        model = SplineFlux(knots, rng.normal(0.0, 0.3, 7))
        uL, uR = rng.uniform(-0.95, 0.95, 2)
        same, worst = compare_with_oracle(model, uL, uR)
        assert same and worst <= 1e-9
        assert np.allclose(fixed_point_curve(model, [uL], uR - uL, 0).endpoint, [uR], atol=1e-14)


def test_zero_strength_curve():
    c = fixed_point_curve(burgers(), [0.4], 0.0, 0)
    assert c.s == 0.0 and np.allclose(c.endpoint, [0.4])
    assert c.kind == RAREFACTION


def test_strength_out_of_range():
    with pytest.raises(StrengthError, match="strength out of range"):
        fixed_point_curve(burgers(bound=1.0), [0.5], 5.0, 0)
    with pytest.raises(StrengthError, match="strength out of range"):
        fixed_point_curve(QuadraticPair(), [0.4, 0.0], 0.5, 0)


def test_contraction_failure_reported(pair, monkeypatch):
    monkeypatch.setattr(riemann, "FIXED_POINT_MAXIT", 1)
    with pytest.raises(ContractionError, match="contraction failure"):
        fixed_point_curve(pair, [0.1, 0.1], 0.2, 0)


def test_coupled_family_reduces_to_scalar(coupled):
    for v in (0.5, -0.5, 0.4):
        u0, s = -0.3, 0.5
        curve = fixed_point_curve(coupled, [u0, v], s, 1)
        f = lambda u: coupled.partials(np.asarray(u, dtype=float), v)[0]
        df = lambda u: coupled.partials(np.asarray(u, dtype=float), v)[1]
        t = np.linspace(0.0, s, 401)
        hull = brute_convex_envelope(t, f(u0 + t) - f(u0))
        assert np.max(np.abs(curve.envelope(t) - hull)) <= 1e-9
        assert np.allclose(curve.state(t)[:, 1], v)
        assert curve.speed(0.0) == pytest.approx(float(df(u0)), abs=1e-12) or curve.pieces[0].kind == CHORD


def test_curve_invariants_on_system(pair, coupled):
    cases = [(pair, [0.1, -0.1], 0.15, 0), (pair, [0.0, 0.2], -0.2, 1),
             (coupled, [0.1, 0.4], 0.3, 0), (coupled, [0.1, 0.3], 0.2, 1)]
    for model, u, s, i in cases:
        u = np.asarray(u, dtype=float)
        curve = fixed_point_curve(model, u, s, i)
        l0 = model.eigen(u).l(i)
        assert np.dot(l0, curve.endpoint - u) == pytest.approx(s, abs=1e-8)
        sig = curve.speed(np.linspace(0.0, s, 400))
        assert np.all(np.diff(sig) >= -1e-12)
        # derivative at the start is the right eigenvector
        small = fixed_point_curve(model, u, 1e-4, i)
        assert np.allclose((small.endpoint - u) / 1e-4, model.eigen(u).r(i), atol=1e-2)
        assert small.speed(0.0) == pytest.approx(model.eigen(u).lambdas[i], abs=1e-8)


def test_start_speed_on_contact_and_on_chord():
    model = burgers()
    # rarefaction: sigma(0) = lambda(u-)
    assert fixed_point_curve(model, [0.2], 0.3, 0).speed(0.0) == pytest.approx(0.2, abs=1e-14)
    # shock: sigma(0) is the chord slope, which tends to lambda(u-) with |s|
    for s in (-0.1, -0.01, -0.001):
        assert fixed_point_curve(model, [0.2], s, 0).speed(0.0) == pytest.approx(0.2 + s / 2, abs=1e-14)


def test_fixed_point_residual(pair):
    u = np.array([0.05, 0.1])
    for s, i in [(0.2, 0), (-0.2, 1)]:
        curve = fixed_point_curve(pair, u, s, i)
        l0 = pair.eigen(u).l(i)
        again = apply_T_operator(pair, curve.path, i, u, l0)
        delta1 = 0.1 * np.linalg.norm(pair.upper - pair.lower)
        assert contraction_distance(again, curve.path, delta1) < 1e-10 * (1 + abs(s))


@given(st.integers(0, 2 ** 32 - 1))
def test_speed_monotone_on_random_fluxes(seed):
    rng = np.random.default_rng(seed)
    model = SplineFlux(np.linspace(-1, 1, 7), rng.normal(0.0, 0.3, 7))
    uL, uR = rng.uniform(-0.95, 0.95, 2)
    curve = fixed_point_curve(model, [uL], uR - uL, 0)
    sig = curve.speed(np.linspace(0.0, uR - uL, 500))
    assert np.all(np.diff(sig) >= -1e-12)


def test_dump_curve_columns(tmp_path):
    curve = fixed_point_curve(two_inflection(0.1), [-0.2], 0.4, 0)
    out = tmp_path / "curve.txt"
    dump_curve(curve, out, samples=11)
    data = np.loadtxt(out)
    assert data.shape == (11, 3)
    assert data[0, 0] == 0.0 and data[-1, 0] == pytest.approx(0.4)


# -- Rankine-Hugoniot and Liu -------------------------------------------------

def test_hugoniot_examples(coupled):
    assert hugoniot_speed(burgers(), [1.0], [0.0]) == (0.5, 0.0)
    assert hugoniot_speed(burgers(), [-1.0], [1.0])[0] == 0.0
    a = 0.5
    for u_minus in (-0.3, 0.0, 0.2):
        u_plus = interface_jump_u_plus(a, u_minus, coupled.table)
        sigma, res = hugoniot_speed(coupled, [u_minus, -a], [u_plus, a])
        assert sigma == pytest.approx(-1.0, abs=1e-12)
        assert res <= 1e-8 * np.hypot(u_plus - u_minus, 2 * a)


def test_liu_on_burgers():
    ok, margin = liu_admissible(burgers(), [1.0], [0.0], 0)
    assert ok and margin > 0
    ok, margin = liu_admissible(burgers(), [0.0], [1.0], 0)
    assert not ok and margin < 0


def test_liu_margin_vanishes_at_tangency():
    model = two_inflection(0.1)
    uL = -0.2
    # chord from uL tangent to the flux at an interior point, then on to the far crossing
    tang = brentq(lambda u: model.df(u) * (u - uL) - (model.f(u) - model.f(uL)), -0.09, -0.01)
    slope = float(model.df(tang))
    line = lambda u: model.f(uL) + slope * (u - uL) - model.f(u)
    uR = brentq(line, tang + 1e-3, 0.45)
    ok, margin = liu_admissible(model, [uL], [uR], 0, samples=2000)
    assert ok
    assert 0.0 <= margin <= 1e-5
    # a shorter chord stops before the tangency and keeps a positive margin
    ok_short, short = liu_admissible(model, [uL], [tang - 0.02], 0)
    assert ok_short and short > 10 * margin


# -- Riemann problems ---------------------------------------------------------

def test_trivial_riemann(pair):
    fan = solve_riemann(pair, [0.1, 0.2], [0.1, 0.2])
    assert np.all(fan.strengths == 0) and all(c is None for c in fan.curves)
    assert accurate_solver(pair, [0.1, 0.2], [0.1, 0.2], 0.01) == []


def test_burgers_rarefaction_fan():
    fan = solve_riemann(burgers(), [0.0], [1.0])
    assert fan.strengths[0] == 1.0
    c = fan.curves[0]
    assert c.kind == RAREFACTION
    assert c.speed(0.0) == 0.0 and c.speed(1.0) == 1.0


def test_merge_configuration_is_one_chord():
    model = two_inflection(0.1)
    w = np.sqrt(6) * 0.1
    fan = solve_riemann(model, [-w], [w])
    assert fan.curves[0].kind == DISCONTINUITY
    fronts = accurate_solver(model, [-w], [w], 0.01)
    assert len(fronts) == 1 and fronts[0].kind == DISCONTINUITY
    assert fronts[0].speed == pytest.approx(0.0, abs=1e-12)


def test_system_fan_telescopes(pair, coupled):
    for model, uL, uR in [(pair, [0.1, 0.1], [0.0, -0.1]), (coupled, [0.2, 0.4], [-0.1, 0.3])]:
        fan = solve_riemann(model, uL, uR)
        assert fan.residual <= 1e-10
        for k, curve in enumerate(fan.curves):
            end = elementary_endpoint(model, fan.states[k], fan.strengths[k], k)
            assert np.allclose(end, fan.states[k + 1], atol=1e-9)
    fan = solve_riemann(coupled, [0.2, 0.4], [-0.1, 0.3])
    s0 = fan.curves[0].speed(np.linspace(0, fan.strengths[0], 20))
    s1 = fan.curves[1].speed(np.linspace(0, fan.strengths[1], 20))
    assert np.all(s0 == -1.0) and np.all(s1 > -1.0)


def test_riemann_errors(pair, monkeypatch):
    with pytest.raises(RiemannError, match="out of local well-posedness range"):
        solve_riemann(pair, [0.1, 0.1], [0.9, 0.1])
    monkeypatch.setattr(riemann, "NEWTON_MAXIT", 0)
    with pytest.raises(RiemannError, match="Riemann inversion failed"):
        solve_riemann(pair, [0.1, 0.1], [0.0, -0.1])


def test_discretize_rarefaction_levels():
    curve = fixed_point_curve(burgers(), [0.0], 1.0, 0)
    segs = discretize_rarefaction(curve, 0.25)
    # p = floor(span / eps) + 1 = 5 levels
    assert [lvl for _, _, lvl in segs] == pytest.approx([0.0, 0.2, 0.4, 0.6, 0.8])
    segs = discretize_rarefaction(curve, 0.3)
    assert [lvl for _, _, lvl in segs] == pytest.approx([0.0, 0.25, 0.5, 0.75])
    for eps in (0.25, 0.3, 0.07):
        segs = discretize_rarefaction(curve, eps)
        assert sum(b - a for a, b, _ in segs) == pytest.approx(1.0, abs=1e-10)
        for a, b, _ in segs:
            assert curve.speed(b) - curve.speed(a) <= eps
    assert len(discretize_rarefaction(curve, 2.0)) == 1


def test_discretize_negative_rarefaction():
    model = two_inflection(0.1)
    curve = fixed_point_curve(model, [0.3], -0.15, 0)
    segs = discretize_rarefaction(curve, 0.01)
    assert all(b < a for a, b, _ in segs)
    assert sum(b - a for a, b, _ in segs) == pytest.approx(-0.15, abs=1e-10)


def test_accurate_solver_scalar_cases():
    fronts = accurate_solver(burgers(), [1.0], [-0.4], 0.05)
    assert len(fronts) == 1 and fronts[0].speed == pytest.approx(0.3)
    assert fronts[0].kind == DISCONTINUITY
    model = two_inflection(0.1)
    u1 = -np.sqrt(6) * 0.1
    fronts = accurate_solver(model, [u1], [-0.08], 0.01)
    assert len(fronts) == 1 and fronts[0].kind == DISCONTINUITY
    chord = (model.f(-0.08) - model.f(u1)) / (-0.08 - u1)
    assert fronts[0].speed == pytest.approx(chord, abs=1e-12)
    assert fronts[0].speed > model.df(-0.08)


def test_accurate_fronts_chain_and_order(pair):
    uL, uR = np.array([0.1, 0.1]), np.array([0.3, 0.25])
    fronts = accurate_solver(pair, uL, uR, 0.02)
    assert np.array_equal(fronts[0].uL, uL) and np.array_equal(fronts[-1].uR, uR)
    for a, b in zip(fronts[:-1], fronts[1:]):
        assert np.array_equal(a.uR, b.uL)
        assert (a.family, a.speed) <= (b.family, b.speed)


def test_front_speed_error_bound(rng):
    for _ in range(30):
        model = SplineFlux(np.linspace(-1, 1, 7), rng.normal(0.0, 0.3, 7))
        uL, uR = rng.uniform(-0.95, 0.95, 2)
        eps = 10 ** rng.uniform(-2.5, -1)
        for fr in accurate_solver(model, [uL], [uR], eps):
            sig = fr.curve.speed(np.linspace(0.0, fr.s, 50))
            assert np.max(np.abs(fr.speed - sig)) <= 2 * eps


def test_simplified_solver_transposes(pair):
    uL = np.array([0.05, -0.05])
    s1, s2 = 0.01, -0.008
    uM = elementary_endpoint(pair, uL, s1, 1)
    uR = elementary_endpoint(pair, uM, s2, 0)
    out = simplified_solver(pair, uL, uR, (1, s1), (0, s2))
    assert [f.family for f in out] == [0, 1, 2]
    assert out[0].s == s2 and out[1].s == s1
    assert out[-1].speed == pair.lambda_hat
    for a, b in zip(out[:-1], out[1:]):
        assert np.array_equal(a.uR, b.uL)
    assert np.array_equal(out[0].uL, uL) and np.array_equal(out[-1].uR, uR)
    acc = solve_riemann(pair, uL, uR, build_curves=False)
    assert np.linalg.norm(out[-1].uR - out[-1].uL) <= 5 * abs(s1 * s2)
    assert np.linalg.norm(out[0].uR - acc.states[1]) <= 5 * abs(s1 * s2)


def test_simplified_solver_cancellation(pair):
    uL = np.array([0.05, -0.05])
    uM = elementary_endpoint(pair, uL, 0.01, 0)
    out = simplified_solver(pair, uL, uL + np.array([1e-6, 0.0]), (0, 0.01), (0, -0.01))
    assert len(out) == 1 and out[0].kind == NONPHYSICAL
    assert out[0].speed == pair.lambda_hat
    assert np.allclose(uM, elementary_endpoint(pair, uL, 0.01, 0))


def test_simplified_matches_accurate_to_first_order(pair):
    uL = np.array([0.05, -0.05])
    amounts, diffs = [], []
    for k in range(50):
        s = 0.2 * 0.9 ** k
        uM = elementary_endpoint(pair, uL, s, 1)
        uR = elementary_endpoint(pair, uM, -0.8 * s, 0)
        acc = solve_riemann(pair, uL, uR, build_curves=False)
        simp = simplified_solver(pair, uL, uR, (1, s), (0, -0.8 * s))
        d = max(np.linalg.norm(simp[0].uR - acc.states[1]),
                np.linalg.norm(simp[-1].uR - simp[-1].uL))
        amounts.append(0.8 * s * s)
        diffs.append(d)
    slope = np.polyfit(np.log(amounts), np.log(diffs), 1)[0]
    assert slope >= 0.95


def test_crude_solver_examples(pair):
    uL = np.array([0.1, 0.0])
    uR = np.array([0.12, 0.01])
    out = crude_solver(pair, uL, uR, (0, 0.0))
    assert len(out) == 1 and out[0].kind == NONPHYSICAL
    assert np.array_equal(out[0].uL, uL) and np.array_equal(out[0].uR, uR)


def test_crude_solver_keeps_strength_and_jump(pair):
    rng = np.random.default_rng(1)
    for _ in range(100):
        uL = rng.uniform(-0.3, 0.3, 2)
        uM = uL + rng.normal(0.0, 0.02, 2)
        i = int(rng.integers(2))
        s = rng.uniform(-0.1, 0.1)
        uR = elementary_endpoint(pair, uM, s, i)
        out = crude_solver(pair, uL, uR, (i, s))
        l0 = pair.eigen(uL).l(i)
        assert np.dot(l0, out[0].uR - uL) == pytest.approx(s, abs=1e-10)
        assert out[-1].kind == NONPHYSICAL and out[-1].speed == pair.lambda_hat
        old = np.linalg.norm(uM - uL)
        new = np.linalg.norm(out[-1].uR - out[-1].uL)
        assert abs(new - old) <= CRUDE_C * abs(s) * old


def test_classification():
    fr = accurate_solver(burgers(), [0.0], [1.0], 0.1)
    assert all(classify_front(f) == RAREFACTION for f in fr)
    fr = accurate_solver(burgers(), [1.0], [0.0], 0.1)
    assert classify_front(fr[0]) == DISCONTINUITY
    model = two_inflection(0.1)
    curve = fixed_point_curve(model, [-np.sqrt(6) * 0.1], 0.35, 0)
    assert curve.kind == MIXED
    kinds = {p.kind for p in curve.pieces}
    assert kinds == {CHORD, CONTACT}
    nonphys = crude_solver(QuadraticPair(), [0.0, 0.0], [0.01, 0.0], (0, 0.0))[0]
    assert classify_front(nonphys) == NONPHYSICAL
