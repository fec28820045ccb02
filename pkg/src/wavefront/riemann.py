"""Elementary curves, Riemann solvers and wave-fan discretisation.

An elementary curve ``T_i[u-](s)`` is the fixed point of the operator

    u(tau)     = u- + int_0^tau r~(u)
    v(tau)     = f~(tau) - conv f~(tau)
    sigma(tau) = d/dtau conv f~(tau)

where ``f~(tau) = int_0^tau lambda~`` and ``conv`` is the lower convex
envelope on ``[0, s]`` (upper concave envelope on ``[s, 0]`` when
``s < 0``).  The generalised eigenvector is ``r~ = r_i / <l_i(u-), r_i>``,
so that ``lambda~ = lambda_i`` along the curve and the parameter measures
``<l_i(u-), u - u->``.  Because ``r~`` does not depend on ``(v, sigma)``
the iteration settles after two sweeps; the loop is kept general.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq, fsolve

from .envelope import CHORD, CONTACT, Piece, contact_decomposition, lower_convex_envelope, upper_concave_envelope
from .flux_model import CurveError, DomainError, HyperbolicityError

RAREFACTION = "Rarefaction"
DISCONTINUITY = "Discontinuity"
MIXED = "Mixed"
NONPHYSICAL = "Nonphysical"

GRID_NODES = 256
FIXED_POINT_TOL = 1e-11
FIXED_POINT_MAXIT = 200
GRID_AGREEMENT = 1e-9
MAX_NODES = 2 ** 15
NEWTON_TOL = 1e-10
NEWTON_HALVINGS = 8
NEWTON_MAXIT = 60
BISECT_TOL = 1e-12
ZERO_WAVE = 1e-13
INFLECTION_LEVELS = 30


class RiemannError(ValueError):
    pass


class ContractionError(RiemannError):
    pass


class StrengthError(RiemannError):
    pass


# ---------------------------------------------------------------------------
# continuous profiles along a curve

class ScalarProfile:
    """Exact profile for a scalar flux: ``u = u0 + tau``."""

    exact = True

    def __init__(self, model, u0):
        self.model = model
        self.u0 = float(u0)
        self.f0 = float(model.f(self.u0))

    def f(self, t):
        return np.asarray(self.model.f(self.u0 + np.asarray(t, dtype=float)), dtype=float) - self.f0

    def df(self, t):
        return np.asarray(self.model.df(self.u0 + np.asarray(t, dtype=float)), dtype=float)

    def d2f(self, t):
        return np.asarray(self.model.d2f(self.u0 + np.asarray(t, dtype=float)), dtype=float)

    def state(self, t):
        t = np.asarray(t, dtype=float)
        return (self.u0 + t)[..., None]


class HermiteProfile:
    """Cubic Hermite interpolation of a converged grid path."""

    exact = False

    def __init__(self, tau, u, rt, ft, lam):
        order = np.argsort(tau)
        tau = tau[order]
        self._f = CubicHermiteSpline(tau, ft[order], lam[order])
        self._df = self._f.derivative()
        self._d2f = self._df.derivative()
        self._u = CubicHermiteSpline(tau, u[order], rt[order], axis=0)

    def f(self, t):
        return np.asarray(self._f(t), dtype=float)

    def df(self, t):
        return np.asarray(self._df(t), dtype=float)

    def d2f(self, t):
        return np.asarray(self._d2f(t), dtype=float)

    def state(self, t):
        return np.asarray(self._u(t), dtype=float)


# ---------------------------------------------------------------------------
# grid operator

@dataclass
class CurvePath:
    """Triple ``(u, v, sigma)`` sampled on a parameter grid from 0 to s."""

    tau: np.ndarray
    u: np.ndarray
    v: np.ndarray
    sigma: np.ndarray


def _cumtrapz(y, x):
    dx = np.diff(x)
    if y.ndim == 1:
        inc = 0.5 * dx * (y[1:] + y[:-1])
        return np.concatenate([[0.0], np.cumsum(inc)])
    inc = 0.5 * dx[:, None] * (y[1:] + y[:-1])
    return np.vstack([np.zeros((1, y.shape[1])), np.cumsum(inc, axis=0)])


def _envelope_on_path(tau, ft):
    """Envelope values, node speeds and ascending envelope object."""
    if tau[-1] >= tau[0]:
        env = lower_convex_envelope(tau, ft)
        slopes = env.slopes
        values = env.values
    else:
        env = upper_concave_envelope(tau[::-1], ft[::-1])
        slopes = env.slopes[::-1]
        values = env.values[::-1]
    sigma = np.concatenate([slopes, slopes[-1:]]) if slopes.size else np.zeros(1)
    return values, sigma, env


def scalar_flux_profile(model, path, i, l0, u_minus=None):
    """``f~`` on the grid of ``path``.

    Uses the model's closed form when available and otherwise the
    trapezoid rule with an end correction built from a second-order
    estimate of ``d lambda~ / d tau``.
    """
    exact = None
    if u_minus is not None and model.exact_curves:
        exact = model.ftilde_exact(u_minus, i, path.tau)
    if exact is not None:
        return exact
    lam, _ = model.family_fields(path.u, i)
    tau = path.tau
    if tau.size < 3:
        return _cumtrapz(lam, tau)
    dlam = np.gradient(lam, tau, edge_order=2)
    h = np.diff(tau)
    inc = 0.5 * h * (lam[1:] + lam[:-1]) + h * h / 12.0 * (dlam[:-1] - dlam[1:])
    return np.concatenate([[0.0], np.cumsum(inc)])


def apply_T_operator(model, path, i, u_minus, l0):
    """One application of the curve operator to a grid path."""
    lam, r = model.family_fields(path.u, i)
    rt = r / (r @ l0)[:, None]
    u_new = u_minus[None, :] + _cumtrapz(rt, path.tau)
    trial = CurvePath(path.tau, u_new, path.v, path.sigma)
    ft = scalar_flux_profile(model, trial, i, l0, u_minus)
    values, sigma, _ = _envelope_on_path(path.tau, ft)
    return CurvePath(path.tau, u_new, ft - values, sigma)


def contraction_distance(p, q, delta1):
    """``delta1 |u-u'|_inf + |v-v'|_1 + |v sigma - v' sigma'|_1``."""
    du = float(np.max(np.abs(p.u - q.u))) if p.u.size else 0.0
    t = p.tau
    dv = np.abs(p.v - q.v)
    dvs = np.abs(p.v * p.sigma - q.v * q.sigma)
    l1 = abs(float(np.sum(0.5 * np.diff(t) * (dv[1:] + dv[:-1]))))
    l1s = abs(float(np.sum(0.5 * np.diff(t) * (dvs[1:] + dvs[:-1]))))
    return delta1 * du + l1 + l1s


# ---------------------------------------------------------------------------
# elementary curve

class ElementaryCurve:
    """Converged elementary curve of family ``i`` with continuous profile.

    Parameters are local: the curve runs from ``tau = 0`` (state
    ``u_minus``) to ``tau = s``.  ``pieces`` lists the CONTACT and CHORD
    intervals in ascending order of ``tau``.
    """

    def __init__(self, model, family, u_minus, s, profile, pieces, offset=0.0,
                 path=None, iterations=0, distance=0.0, nodes=0):
        self.model = model
        self.family = family
        self.u_minus = np.asarray(u_minus, dtype=float)
        self.s = float(s)
        self.profile = profile
        self.pieces = pieces
        self.offset = float(offset)
        self.path = path
        self.iterations = iterations
        self.distance = distance
        self.nodes = nodes
        self._f0 = float(profile.f(self.offset))

    # evaluation in local parameters
    def state(self, t):
        return self.profile.state(self.offset + np.asarray(t, dtype=float))

    def ftilde(self, t):
        return self.profile.f(self.offset + np.asarray(t, dtype=float)) - self._f0

    def lam(self, t):
        return self.profile.df(self.offset + np.asarray(t, dtype=float))

    @property
    def endpoint(self):
        return self.state(self.s)

    def _locate(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        starts = np.array([p.a for p in self.pieces])
        j = np.clip(np.searchsorted(starts, t, side="right") - 1, 0, len(self.pieces) - 1)
        return t, j

    def envelope(self, t):
        """``conv f~`` (``conc`` for negative strength) at local parameters."""
        scalar = np.ndim(t) == 0
        t, j = self._locate(t)
        out = self.ftilde(t)
        for k, p in enumerate(self.pieces):
            if p.kind != CHORD:
                continue
            m = j == k
            if np.any(m):
                fa = float(self.ftilde(p.a))
                out[m] = fa + p.slope * (t[m] - p.a)
        return float(out[0]) if scalar else out

    def speed(self, t):
        """``sigma(tau)``: chord slope on chords and ``lambda_i`` on contact."""
        scalar = np.ndim(t) == 0
        t, j = self._locate(t)
        out = self.lam(t)
        for k, p in enumerate(self.pieces):
            if p.kind == CHORD:
                out[j == k] = p.slope
        return float(out[0]) if scalar else out

    def mean_speed(self, a=0.0, b=None):
        b = self.s if b is None else b
        if b == a:
            return self.speed(a)
        return float((self.envelope(b) - self.envelope(a)) / (b - a))

    def path_pieces(self):
        return self.pieces if self.s >= 0 else self.pieces[::-1]

    def restrict(self, a, b):
        """Sub-curve between local parameters ``a`` and ``b``.

        Valid when ``a`` and ``b`` are contact points, which holds for
        the breakpoints produced by :func:`discretize_rarefaction`.
        """
        lo, hi = min(a, b), max(a, b)
        pieces = []
        for p in self.pieces:
            pa, pb = max(p.a, lo), min(p.b, hi)
            if pb > pa or (pb == pa and lo == hi):
                pieces.append(Piece(pa - a, pb - a, p.kind, p.slope))
        if not pieces:
            pieces = [Piece(min(0.0, b - a), max(0.0, b - a), CONTACT, np.nan)]
        return ElementaryCurve(self.model, self.family, self.state(a), b - a, self.profile,
                               pieces, offset=self.offset + a)

    def speed_samples(self, k=8):
        """``sigma`` at ``k`` midpoints, uniform in ``|tau|``."""
        t = (np.arange(k) + 0.5) / k * self.s
        return self.speed(t)

    @property
    def kind(self):
        return classify_curve(self)


def _tangent_right(prof, a, guess, lo, hi, h):
    # chord from a fixed left point a, tangent at its right end
    fa = float(prof.f(a))

    def g(t):
        return float(prof.f(t) - fa - prof.df(t) * (t - a))

    return _bracketed_root(g, guess, lo, hi, h)


def _tangent_left(prof, b, guess, lo, hi, h):
    fb = float(prof.f(b))

    def g(t):
        return float(fb - prof.f(t) - prof.df(t) * (b - t))

    return _bracketed_root(g, guess, lo, hi, h)


def _bracketed_root(g, guess, lo, hi, h):
    for width in (2.0, 6.0, 20.0):
        x0 = max(lo, guess - width * h)
        x1 = min(hi, guess + width * h)
        if x1 <= x0:
            continue
        g0, g1 = g(x0), g(x1)
        if g0 == 0.0:
            return x0
        if g1 == 0.0:
            return x1
        if g0 * g1 < 0:
            return brentq(g, x0, x1, xtol=BISECT_TOL, rtol=1e-15)
    return guess


def _bitangent_residual(prof, x, y):
    m = (prof.f(y) - prof.f(x)) / (y - x)
    return np.array([float(prof.df(x) - m), float(prof.df(y) - m)])


def _bitangent(prof, a, b, h, lo, hi):
    """Chord tangent at both ends, started from the grid guess ``(a, b)``."""
    x, y = float(a), float(b)
    for _ in range(NEWTON_MAXIT):
        r = _bitangent_residual(prof, x, y)
        if np.max(np.abs(r)) < 1e-14:
            break
        m = (float(prof.f(y)) - float(prof.f(x))) / (y - x)
        dmx = (m - float(prof.df(x))) / (y - x)
        dmy = (float(prof.df(y)) - m) / (y - x)
        J = np.array([[float(prof.d2f(x)) - dmx, -dmy],
                      [-dmx, float(prof.d2f(y)) - dmy]])
        try:
            step = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError:
            break
        x, y = x + step[0], y + step[1]
        if not (lo <= x < y <= hi):
            break
    if lo <= x < y <= hi and np.max(np.abs(_bitangent_residual(prof, x, y))) < 1e-11 \
            and abs(x - a) <= 6 * h and abs(y - b) <= 6 * h:
        return x, y
    # nested bracketing: the right tangency point as a function of the left end
    def phi(t):
        yt = _tangent_right(prof, t, b, t + 0.5 * min(h, b - t), hi, h)
        return float(prof.df(t) - (prof.f(yt) - prof.f(t)) / (yt - t))

    x = _bracketed_root(phi, a, lo, min(hi, b - h), h)
    y = _tangent_right(prof, x, b, x + 0.5 * min(h, b - x), hi, h)
    return float(x), float(y)


def _inflections(prof, lo, hi, nodes):
    t = np.linspace(lo, hi, nodes + 1)
    g = prof.d2f(t)
    roots = []
    for k in np.nonzero(g[:-1] * g[1:] < 0)[0]:
        roots.append(brentq(lambda x: float(prof.d2f(x)), t[k], t[k + 1], xtol=BISECT_TOL))
    return roots


def _augmented_grid(prof, lo, hi, nodes):
    """Uniform grid plus points clustering geometrically at inflections.

    A concave sliver between an inflection and an end of the interval can
    be much narrower than the grid spacing; the clusters resolve it.
    """
    t = np.linspace(lo, hi, nodes + 1)
    h = (hi - lo) / nodes
    extra = [t]
    steps = h * 2.0 ** -np.arange(0, INFLECTION_LEVELS)
    for z in _inflections(prof, lo, hi, nodes):
        extra.append(np.clip(np.concatenate([[z], z - steps, z + steps]), lo, hi))
    return np.unique(np.concatenate(extra))


def refine_pieces(pieces, prof, lo, hi, h, concave=False):
    """Move interior chord endpoints to the exact tangency points.

    A chord anchored at an end of the interval is only valid when the
    function leaves the end on the correct side of it; otherwise the end
    is released, which uncovers a contact sliver thinner than the grid.
    """
    sgn = -1.0 if concave else 1.0
    chords = []
    for p in pieces:
        if p.kind != CHORD:
            continue
        a, b = p.a, p.b
        m = float((prof.f(b) - prof.f(a)) / (b - a))
        a_free = a > lo or sgn * (float(prof.df(a)) - m) < 0
        b_free = b < hi or sgn * (m - float(prof.df(b))) < 0
        if a_free and b_free:
            a, b = _bitangent(prof, a, b, h, lo, hi)
        elif b_free:
            b = _tangent_right(prof, a, b, a + 0.5 * min(h, b - a), hi, h)
        elif a_free:
            a = _tangent_left(prof, b, a, lo, b - 0.5 * min(h, b - a), h)
        chords.append([a, b])
    # keep the chords ordered and disjoint
    for k in range(1, len(chords)):
        if chords[k][0] < chords[k - 1][1]:
            chords[k][0] = chords[k - 1][1]
    out = []
    cursor = lo
    for a, b in chords:
        if a > cursor:
            out.append(Piece(cursor, a, CONTACT, np.nan))
        slope = float((prof.f(b) - prof.f(a)) / (b - a))
        out.append(Piece(a, b, CHORD, slope))
        cursor = b
    if cursor < hi or not out:
        out.append(Piece(cursor, hi, CONTACT, np.nan))
    return out


def _seed_path(model, u_minus, s, i, nodes, l0):
    tau = np.linspace(0.0, s, nodes + 1)
    r0 = model.eigen(u_minus).r(i)
    r0 = r0 / np.dot(l0, r0)
    u = u_minus[None, :] + tau[:, None] * r0[None, :]
    return CurvePath(tau, u, np.zeros_like(tau), np.zeros_like(tau))


def _iterate(model, u_minus, s, i, nodes, l0, delta1):
    path = _seed_path(model, u_minus, s, i, nodes, l0)
    tol = FIXED_POINT_TOL * (1.0 + abs(s))
    for it in range(1, FIXED_POINT_MAXIT + 1):
        new = apply_T_operator(model, path, i, u_minus, l0)
        for row in (new.u[0], new.u[-1]):
            if not model.contains(row):
                raise StrengthError("strength out of range")
        d = contraction_distance(new, path, delta1)
        path = new
        if d < tol:
            return path, it, d
    raise ContractionError(f"contraction failure after {FIXED_POINT_MAXIT} iterations (D={d:.3e})")


def fixed_point_curve(model, u_minus, s, i, nodes=None, delta1=None):
    """Elementary curve ``T_i[u_minus]`` up to parameter ``s``.

    The grid starts with ``nodes`` cells and is doubled until two
    successive endpoints agree to ``1e-9``; models with closed-form
    curves skip the doubling.
    """
    try:
        u_minus = model.check(u_minus)
    except DomainError as exc:
        raise StrengthError(str(exc)) from exc
    s = float(s)
    nodes = GRID_NODES if nodes is None else nodes
    if abs(s) > model.max_strength:
        raise StrengthError("strength out of range")
    eig = model.eigen(u_minus)
    l0 = eig.l(i)
    if delta1 is None:
        delta1 = 0.1 * float(np.linalg.norm(model.upper - model.lower))
    prof = model.curve_profile(u_minus, i)
    if s == 0.0:
        if prof is None:
            prof = HermiteProfile(np.array([0.0, 1.0]), np.vstack([u_minus, u_minus]),
                                  np.zeros((2, model.n)), np.zeros(2), np.zeros(2))
        return ElementaryCurve(model, i, u_minus, 0.0, prof, [Piece(0.0, 0.0, CONTACT, np.nan)])
    try:
        path, it, d = _iterate(model, u_minus, s, i, nodes, l0, delta1)
        if not model.exact_curves:
            while nodes < MAX_NODES:
                nodes *= 2
                finer, it, d = _iterate(model, u_minus, s, i, nodes, l0, delta1)
                agree = float(np.max(np.abs(finer.u[-1] - path.u[-1])))
                path = finer
                if agree < GRID_AGREEMENT:
                    break
    except (CurveError, DomainError, HyperbolicityError) as exc:
        raise StrengthError(f"strength out of range ({exc})") from exc
    tau = path.tau
    ft = scalar_flux_profile(model, path, i, l0, u_minus)
    if prof is None:
        lam, r = model.family_fields(path.u, i)
        rt = r / (r @ l0)[:, None]
        prof = HermiteProfile(tau, path.u, rt, ft, lam)
    lo, hi = min(0.0, s), max(0.0, s)
    h = abs(s) / nodes
    grid = _augmented_grid(prof, lo, hi, nodes)
    fg = prof.f(grid) - prof.f(0.0)
    env = lower_convex_envelope(grid, fg) if s > 0 else upper_concave_envelope(grid, fg)
    pieces = refine_pieces(contact_decomposition(env), prof, lo, hi, h, concave=s < 0)
    return ElementaryCurve(model, i, u_minus, s, prof, pieces, path=path,
                           iterations=it, distance=d, nodes=nodes)


def elementary_endpoint(model, u_minus, s, i):
    """``T_i[u_minus](s)`` without building the envelope.

    With the generalised eigenvector used here the state component of
    the fixed point is the integral curve of ``r~``.
    """
    prof = model.curve_profile(u_minus, i)
    try:
        if prof is not None:
            out = prof.state(float(s))
            model.check(out)
            return np.asarray(out, dtype=float)
        return model.integral_curve(u_minus, i, np.array([0.0, float(s)]))[-1]
    except (CurveError, DomainError, HyperbolicityError) as exc:
        raise RiemannError(f"out of local well-posedness range ({exc})") from exc


def classify_curve(curve):
    if curve.s == 0.0:
        return RAREFACTION
    tol = 1e-12 * abs(curve.s)
    chord = sum(p.b - p.a for p in curve.pieces if p.kind == CHORD)
    contact = sum(p.b - p.a for p in curve.pieces if p.kind != CHORD)
    if chord <= tol:
        return RAREFACTION
    if contact <= tol:
        return DISCONTINUITY
    return MIXED


def dump_curve(curve, path, samples=201):
    """Write ``tau, envelope, sigma`` columns for inspection."""
    t = np.linspace(0.0, curve.s, samples)
    np.savetxt(path, np.column_stack([t, curve.envelope(t), curve.speed(t)]),
               header="tau envelope sigma")


# ---------------------------------------------------------------------------
# Rankine-Hugoniot and Liu

def hugoniot_speed(model, uL, uR):
    """Least-squares shock speed and the residual ``|[f] - sigma [u]|``."""
    uL, uR = np.atleast_1d(uL).astype(float), np.atleast_1d(uR).astype(float)
    du = uR - uL
    df = model.flux(uR) - model.flux(uL)
    nn = float(np.dot(du, du))
    if nn == 0.0:
        return float(model.speeds(uL)[0]), 0.0
    sigma = float(np.dot(df, du) / nn)
    return sigma, float(np.linalg.norm(df - sigma * du))


def liu_admissible(model, uL, uR, i, samples=200, tol=1e-10):
    """Liu condition along the family-``i`` curve from ``uL`` to ``uR``.

    Returns ``(ok, margin)`` where ``margin`` is the minimum over
    intermediate states ``u`` of ``sigma(uL, u) - sigma(uL, uR)``.
    """
    uL = model.check(uL)
    s = float(np.dot(model.eigen(uL).l(i), np.atleast_1d(uR) - uL))
    curve = fixed_point_curve(model, uL, s, i)
    full, _ = hugoniot_speed(model, uL, uR)
    t = np.linspace(0.0, s, samples + 2)[1:-1]
    states = curve.state(t)
    gaps = [hugoniot_speed(model, uL, w)[0] - full for w in states]
    margin = float(np.min(gaps)) if gaps else 0.0
    return margin >= -tol, margin


# ---------------------------------------------------------------------------
# Riemann problems

@dataclass
class WaveFan:
    states: list
    strengths: np.ndarray
    curves: list
    residual: float = 0.0
    iterations: int = 0


@dataclass
class FrontSpec:
    """Outgoing front produced by a solver, before it receives an id."""

    family: int
    uL: np.ndarray
    uR: np.ndarray
    s: float
    speed: float
    kind: str
    curve: ElementaryCurve | None = None
    level: float | None = None
    extra: dict = field(default_factory=dict)


def solve_riemann(model, uL, uR, build_curves=True):
    """Strengths ``s`` with ``T_n o ... o T_1 [uL](s) = uR``.

    Damped Newton iteration whose Jacobian columns are the generalised
    eigenvectors at the intermediate states.
    """
    try:
        uL, uR = model.check(uL), model.check(uR)
    except DomainError as exc:
        raise RiemannError(f"out of local well-posedness range ({exc})") from exc
    n = model.n
    if n == 1:
        s = np.array([float(uR[0] - uL[0])])
        states = [uL.copy(), uR.copy()]
        it, res = 0, 0.0
    else:
        s = model.eigen(uL).left @ (uR - uL)

        def compose(svec):
            pts = [uL]
            for k in range(n):
                pts.append(elementary_endpoint(model, pts[-1], svec[k], k))
            return pts

        pts = compose(s)
        res = float(np.linalg.norm(pts[-1] - uR))
        it = 0
        while res > NEWTON_TOL:
            it += 1
            if it > NEWTON_MAXIT:
                raise RiemannError("Riemann inversion failed")
            cols = []
            for k in range(n):
                lk = model.eigen(pts[k]).l(k)
                rk = model.eigen(pts[k + 1]).r(k)
                cols.append(rk / np.dot(lk, rk))
            step = np.linalg.solve(np.column_stack(cols), uR - pts[-1])
            lam = 1.0
            for _ in range(NEWTON_HALVINGS + 1):
                try:
                    trial = compose(s + lam * step)
                    tres = float(np.linalg.norm(trial[-1] - uR))
                except RiemannError:
                    tres = np.inf
                if tres < res:
                    break
                lam *= 0.5
            else:
                raise RiemannError("Riemann inversion failed")
            s = s + lam * step
            pts, res = trial, tres
        states = [p.copy() for p in pts]
        states[-1] = uR.copy()
    curves = []
    if build_curves:
        for k in range(n):
            small = abs(s[k]) <= ZERO_WAVE
            curves.append(None if small else fixed_point_curve(model, states[k], s[k], k))
    return WaveFan(states, np.asarray(s, dtype=float), curves, res, it)


def _level_parameter(curve, theta):
    # first tau along the path with sigma(tau) >= theta
    for p in curve.path_pieces():
        ta, tb = (p.a, p.b) if curve.s >= 0 else (p.b, p.a)
        if p.kind == CHORD:
            sa = sb = p.slope
        else:
            sa, sb = float(curve.lam(ta)), float(curve.lam(tb))
        if sb < theta - 1e-14 * (1 + abs(theta)):
            continue
        if p.kind == CHORD or sa >= theta:
            return ta
        try:
            return brentq(lambda t: float(curve.lam(t)) - theta, ta, tb, xtol=BISECT_TOL)
        except ValueError:
            return tb
    return curve.s


def discretize_rarefaction(curve, eps):
    """Split a curve into segments whose speed ranges stay below ``eps``.

    Levels ``theta_l = sigma(0) + l/p * span`` with
    ``p = floor(span / eps) + 1``; segment ``l`` runs between the first
    parameters reaching ``theta_l`` and ``theta_{l+1}``.

    Returns a list of ``(a, b, theta_l)``.
    """
    if curve.s == 0.0:
        return []
    lo = float(curve.speed(0.0))
    hi = float(curve.speed(curve.s))
    span = max(0.0, hi - lo)
    p = int(np.floor(span / eps)) + 1
    cuts = [0.0]
    for l in range(1, p):
        cuts.append(_level_parameter(curve, lo + l / p * span))
    cuts.append(curve.s)
    segs = []
    for l in range(p):
        a, b = cuts[l], cuts[l + 1]
        if abs(b - a) > 1e-14 * (1.0 + abs(curve.s)):
            segs.append((a, b, lo + l / p * span))
    return segs


def _fronts_from_curve(curve, uL, uR, eps):
    out = []
    segs = discretize_rarefaction(curve, eps)
    for k, (a, b, level) in enumerate(segs):
        sub = curve.restrict(a, b)
        left = uL if k == 0 else out[-1].uR
        right = uR if k == len(segs) - 1 else np.asarray(curve.state(b), dtype=float)
        out.append(FrontSpec(curve.family, left, right, b - a, curve.mean_speed(a, b),
                             classify_curve(sub), sub, level))
    return out


def accurate_solver(model, uL, uR, eps):
    """Full wave fan of ``(uL, uR)`` with every wave discretised at ``eps``."""
    fan = solve_riemann(model, uL, uR)
    out = []
    for k, curve in enumerate(fan.curves):
        if curve is None:
            continue
        left = out[-1].uR if out else fan.states[0]
        out.extend(_fronts_from_curve(curve, left, fan.states[k + 1], eps))
    if out:
        out[-1].uR = np.asarray(uR, dtype=float).copy()
    return out


def _single_front(model, u, s, i):
    curve = fixed_point_curve(model, u, s, i)
    end = np.asarray(curve.endpoint, dtype=float)
    return FrontSpec(i, u, end, s, curve.mean_speed(), classify_curve(curve), curve)


def _close(model, out, u, uR):
    # absorb round-off jumps into the last front instead of a spurious wave
    uR = np.asarray(uR, dtype=float)
    if np.linalg.norm(uR - u) <= ZERO_WAVE:
        if out:
            out[-1].uR = uR.copy()
        return out
    out.append(_nonphysical(model, u, uR))
    return out


def _nonphysical(model, a, b):
    return FrontSpec(model.n, a, b, float(np.linalg.norm(b - a)), model.lambda_hat, NONPHYSICAL)


def simplified_solver(model, uL, uR, left, right):
    """Incoming strengths kept, closing jump carried by a nonphysical front.

    ``left`` and ``right`` are ``(family, strength)`` of the incoming
    fronts.
    """
    (i1, s1), (i2, s2) = left, right
    waves = [(i1, s1 + s2)] if i1 == i2 else sorted([(i2, s2), (i1, s1)])
    out = []
    u = np.asarray(uL, dtype=float)
    for i, s in waves:
        if abs(s) <= ZERO_WAVE:
            continue
        front = _single_front(model, u, s, i)
        out.append(front)
        u = front.uR
    return _close(model, out, u, uR)


def crude_solver(model, uL, uR, right):
    """Nonphysical front from the left crossing a physical front.

    The physical front keeps its family and strength and is re-based at
    ``uL``; the nonphysical front closes the jump to ``uR``.
    """
    i, s = right
    out = []
    u = np.asarray(uL, dtype=float)
    if abs(s) > ZERO_WAVE:
        front = _single_front(model, u, s, i)
        out.append(front)
        u = front.uR
    return _close(model, out, u, uR)


def classify_front(front, model=None):
    if front.kind == NONPHYSICAL or (model is not None and front.family == model.n):
        return NONPHYSICAL
    if front.curve is None:
        return front.kind
    return classify_curve(front.curve)
