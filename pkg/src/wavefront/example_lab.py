"""The coupled counterexample system and the constructed scenarios.

The system is

    u_t + f(u, v)_x = 0,    v_t - v_x = 0,

with ``f = exp(-1/v) u**2 / 2`` for ``v > 0``, ``f = 0`` at ``v = 0`` and
``f(u, v) = F(u, -v)`` for ``v < 0``, where ``F(., a)`` solves

    F' = (1 - G) / (2 G - 1),   F(0) = 0,   G = sqrt(1 + 2 exp(-1/a) (F + u)).

``F`` is built so that the characteristics of a centred rarefaction in
the strip where ``v = -a`` refocus at a single point after crossing
into the strip where ``v = a``.  The first family is linear with speed
``-1`` and ``w = u + f(u, v)`` is invariant across its waves.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .flux_model import CurveError, DomainError, EigenStructure, FluxModel, HyperbolicityError, total_variation

TABLE_RTOL = 1e-12
TABLE_ATOL = 1e-14
MIN_NODES = 512
A_MIN = 0.05


class ConstructionError(ValueError):
    pass


def _rhs(a):
    e = np.exp(-1.0 / a)

    def rhs(u, y):
        F, Fa = y
        g2 = 1.0 + 2.0 * e * (F + u)
        if g2 <= 0:
            return [np.nan, np.nan]
        g = np.sqrt(g2)
        d = 2.0 * g - 1.0
        dF = (1.0 - g) / d
        dFa = -(e * Fa / g + (F + u) * e / (a * a * g)) / (d * d)
        return [dF, dFa]

    return rhs, e


def validity_bound(a, cap=1.0):
    """Largest ``b <= cap`` such that ``2G - 1 >= 0.5`` on ``[-b, b]``."""
    rhs, e = _rhs(a)
    bounds = []
    for end in (cap, -cap):
        def exit_(u, y):
            return 2.0 * np.sqrt(max(1.0 + 2.0 * e * (y[0] + u), 0.0)) - 1.0 - 0.5

        exit_.terminal = True
        sol = solve_ivp(rhs, (0.0, end), [0.0, 0.0], method="RK45", rtol=1e-8, atol=1e-10,
                        events=exit_)
        bounds.append(abs(sol.t_events[0][0]) if sol.t_events[0].size else cap)
    return min(bounds)


@dataclass
class FluxSlice:
    """``F(., a)`` on a grid with spline derivatives.

    ``F_u`` and ``F_uu`` come from differentiating the cubic spline of the
    integrated values; ``F_a`` from the sensitivity equation.
    """

    a: float
    u: np.ndarray
    F: np.ndarray
    Fa: np.ndarray
    rtol: float

    def __post_init__(self):
        self.spline = CubicSpline(self.u, self.F)
        self.d1 = self.spline.derivative(1)
        self.d2 = self.spline.derivative(2)
        self.sa = CubicSpline(self.u, self.Fa)
        self.e = np.exp(-1.0 / self.a)

    @property
    def b(self):
        return float(self.u[-1])

    def residual(self):
        """Largest ``|F_u - (1-G)/(2G-1)|`` on the grid nodes."""
        g = np.sqrt(1.0 + 2.0 * self.e * (self.F + self.u))
        return float(np.max(np.abs(self.d1(self.u) - (1.0 - g) / (2.0 * g - 1.0))))


def solve_F_ode(a, b=None, nodes=2049, rtol=TABLE_RTOL, atol=TABLE_ATOL, cap=1.0):
    """Integrate the flux ODE for parameter ``a`` on ``[-b, b]``.

    Uses the adaptive Dormand-Prince 4(5) pair outward from ``u = 0`` in
    both directions.
    """
    if a <= 0:
        raise ConstructionError("a must be positive")
    if nodes < MIN_NODES:
        raise ConstructionError(f"grid resolution must be at least {MIN_NODES}")
    bmax = validity_bound(a, cap)
    if b is None:
        b = bmax
    elif b > bmax + 1e-12:
        raise ConstructionError("left validity neighborhood")
    u = np.linspace(-b, b, nodes)
    rhs, _ = _rhs(a)
    F = np.zeros(nodes)
    Fa = np.zeros(nodes)
    mid = nodes // 2
    u[mid] = 0.0
    for part in (u[mid:], u[mid::-1]):
        sol = solve_ivp(rhs, (0.0, part[-1]), [0.0, 0.0], method="RK45", t_eval=part,
                        rtol=rtol, atol=atol)
        if sol.status != 0 or not np.all(np.isfinite(sol.y)):
            raise ConstructionError("left validity neighborhood")
        if part[1] > 0:
            F[mid:], Fa[mid:] = sol.y
        else:
            F[mid::-1], Fa[mid::-1] = sol.y
    return FluxSlice(float(a), u, F, Fa, rtol)


class OdeFluxTable:
    """Collection of flux slices over a grid of ``a`` values."""

    def __init__(self, a_values, nodes=2049, rtol=TABLE_RTOL, atol=TABLE_ATOL, cap=1.0):
        a_values = np.unique(np.asarray(a_values, dtype=float))
        self.rtol, self.atol, self.cap = rtol, atol, cap
        self.b = min(validity_bound(a, cap) for a in a_values)
        self.slices = {float(a): solve_F_ode(a, self.b, nodes, rtol, atol, cap) for a in a_values}
        self._grid = None

    @property
    def a_values(self):
        return np.array(sorted(self.slices))

    def slice(self, a):
        return self.slices[float(a)]

    def residual(self):
        return max(s.residual() for s in self.slices.values())

    def _interp(self, which, u, a):
        # cubic interpolation across the slices in a, spline in u
        av = self.a_values
        vals = np.array([getattr(self.slices[k], which)(u) for k in av])
        if av.size < 4:
            return np.array([np.interp(a, av, vals[:, j]) for j in range(vals.shape[1])])
        return CubicSpline(av, vals, axis=0)(a)

    def evaluate(self, u, a):
        """``(F, F_u, F_uu, F_a)`` at ``u`` for arbitrary ``a``."""
        u = np.atleast_1d(np.asarray(u, dtype=float))
        a = float(a)
        if a in self.slices:
            s = self.slices[a]
            return s.spline(u), s.d1(u), s.d2(u), s.sa(u)
        if a < A_MIN or a < self.a_values[0]:
            e = np.exp(-1.0 / a)
            ea = e / (a * a) if e > 0 else 0.0
            return -e * u * u / 2, -e * u, -e * np.ones_like(u), -ea * u * u / 2
        out = []
        for which in ("spline", "d1", "d2", "sa"):
            out.append(self._interp(which, u, a).reshape(u.shape))
        return tuple(out)

    def save(self, path):
        rows = [np.column_stack([np.full(s.u.size, a), s.u, s.F]) for a, s in sorted(self.slices.items())]
        header = f"a u F | rtol={self.rtol!r} atol={self.atol!r} cap={self.cap!r} b={self.b!r}"
        np.savetxt(path, np.vstack(rows), header=header, fmt="%.17g")

    @classmethod
    def load(cls, path):
        """Rebuild a table from its text form; ``F_a`` is recomputed."""
        with open(path) as fh:
            header = fh.readline()
        meta = dict(kv.split("=") for kv in header.split("|")[1].split())
        data = np.loadtxt(path)
        obj = cls.__new__(cls)
        obj.rtol, obj.atol = float(meta["rtol"]), float(meta["atol"])
        obj.cap, obj.b = float(meta["cap"]), float(meta["b"])
        obj.slices = {}
        for a in np.unique(data[:, 0]):
            rows = data[data[:, 0] == a]
            ref = solve_F_ode(a, obj.b, rows.shape[0], obj.rtol, obj.atol, obj.cap)
            obj.slices[float(a)] = FluxSlice(float(a), rows[:, 1], rows[:, 2], ref.Fa, obj.rtol)
        obj._grid = None
        return obj


# ---------------------------------------------------------------------------
# the coupled model

class CoupledProfile:
    """Exact profiles of the two families through ``(u0, v0)``."""

    exact = True

    def __init__(self, model, u0, family):
        self.model = model
        self.u0 = np.asarray(u0, dtype=float)
        self.family = family
        if family == 0:
            self.w = self.u0[0] + float(model.partials(self.u0[0], self.u0[1])[0])
            self.c = float(model.eigen(self.u0).l(0)[1])
        else:
            self.f0 = float(model.partials(self.u0[0], self.u0[1])[0])

    def f(self, t):
        t = np.asarray(t, dtype=float)
        if self.family == 0:
            return -t
        return self.model.partials(self.u0[0] + t, self.u0[1])[0] - self.f0

    def df(self, t):
        t = np.asarray(t, dtype=float)
        if self.family == 0:
            return -np.ones_like(t)
        return self.model.partials(self.u0[0] + t, self.u0[1])[1]

    def d2f(self, t):
        t = np.asarray(t, dtype=float)
        if self.family == 0:
            return np.zeros_like(t)
        return self.model.partials(self.u0[0] + t, self.u0[1])[3]

    def state(self, t):
        t = np.asarray(t, dtype=float)
        if self.family == 1:
            u = self.u0[0] + t
            v = np.full_like(u, self.u0[1])
        else:
            v = self.u0[1] + t / self.c
            u = np.array([self.model.invert_w(self.w, vv) for vv in np.atleast_1d(v)]).reshape(v.shape)
        return np.stack([u, v], axis=-1)


class CoupledFlux(FluxModel):
    """Flux ``(f(u, v), -v)`` of the coupled counterexample.

    Parameters
    ----------
    a_values : sequence of float
        Values ``a`` for which ``v = -a`` is evaluated from exact slices.
    ubound, vbound : float
        Half-widths of the state box.
    """

    n = 2
    name = "coupled66"
    exact_curves = True

    def __init__(self, a_values=(0.5,), ubound=0.6, vbound=None, nodes=2049, table=None):
        a_values = tuple(float(a) for a in a_values)
        vbound = vbound if vbound is not None else 1.2 * max(a_values)
        super().__init__([-ubound, -vbound], [ubound, vbound])
        self.table = table if table is not None else OdeFluxTable(a_values, nodes=nodes)
        if ubound > self.table.b:
            raise ConstructionError("state box exceeds the validity range of F")
        self.lambda_hat = 2.0

    def partials(self, u, v):
        """``(f, f_u, f_v, f_uu)`` for arrays of ``u`` and a scalar or array ``v``."""
        u = np.asarray(u, dtype=float)
        v = np.broadcast_to(np.asarray(v, dtype=float), u.shape)
        f = np.zeros(u.shape)
        fu = np.zeros(u.shape)
        fv = np.zeros(u.shape)
        fuu = np.zeros(u.shape)
        pos = v > 0
        if np.any(pos):
            e = np.exp(-1.0 / v[pos])
            up = u[pos]
            f[pos] = e * up * up / 2
            fu[pos] = e * up
            # e underflows long before v**2 does, so guard the ratio
            fv[pos] = np.where(e > 0, e * up * up / (2 * np.maximum(v[pos], 1e-150) ** 2), 0.0)
            fuu[pos] = e
        neg = v < 0
        for a in np.unique(-v[neg]):
            m = neg & (v == -a)
            F, Fu, Fuu, Fa = self.table.evaluate(u[m], a)
            f[m], fu[m], fv[m], fuu[m] = F, Fu, -Fa, Fuu
        return f, fu, fv, fuu

    def flux(self, U):
        U = self.check(U)
        return np.array([float(self.partials(U[0], U[1])[0]), -U[1]])

    def jacobian(self, U):
        U = self.check(U)
        _, fu, fv, _ = (float(x) for x in self.partials(U[0], U[1]))
        return np.array([[fu, fv], [0.0, -1.0]])

    def eigen(self, U):
        U = self.check(U)
        _, fu, fv, _ = (float(x) for x in self.partials(U[0], U[1]))
        if fu + 1.0 <= self.gap:
            raise HyperbolicityError(f"hyperbolicity margin violated: f_u <= -1 at {U}")
        norm = np.hypot(fv, fu + 1.0)
        right = np.array([[fv / norm, 1.0], [-(fu + 1.0) / norm, 0.0]])
        left = np.array([[0.0, -norm / (fu + 1.0)], [1.0, fv / (fu + 1.0)]])
        return EigenStructure(np.array([-1.0, fu]), right, left)

    def family_fields(self, states, i):
        states = np.atleast_2d(states)
        _, fu, fv, _ = self.partials(states[:, 0], states[:, 1])
        if i == 1:
            return fu, np.column_stack([np.ones_like(fu), np.zeros_like(fu)])
        norm = np.hypot(fv, fu + 1.0)
        return -np.ones_like(fu), np.column_stack([fv / norm, -(fu + 1.0) / norm])

    def gnl(self, U, i):
        U = self.check(U)
        if i == 0:
            return 0.0
        return float(self.partials(U[0], U[1])[3])

    def region(self, U, i):
        U = self.check(U)
        if i == 0:
            return 0, True
        g = self.gnl(U, 1)
        return (1 if U[1] > 0 else 0), abs(g) <= self.manifold_tol

    def invert_w(self, w, v):
        """State ``u`` with ``u + f(u, v) = w``."""
        lo, hi = self.lower[0], self.upper[0]

        def g(u):
            return u + float(self.partials(u, v)[0]) - w

        if g(lo) > 0 or g(hi) < 0:
            raise CurveError("family-1 curve left domain")
        if v == 0:
            return float(w)
        return brentq(g, lo, hi, xtol=1e-15, rtol=1e-15)

    def curve_profile(self, u0, i):
        return CoupledProfile(self, self.check(u0), i)

    def ftilde_exact(self, u0, i, taus):
        return CoupledProfile(self, self.check(u0), i).f(taus)

    def integral_curve(self, u0, i, taus):
        prof = self.curve_profile(u0, i)
        out = prof.state(np.asarray(taus, dtype=float))
        if np.any(out < self.lower - 1e-12) or np.any(out > self.upper + 1e-12):
            raise CurveError("curve left domain")
        return out

    def interface_map(self, u, v_from, v_to):
        """State after crossing a family-1 front from ``v_from`` to ``v_to``."""
        w = u + float(self.partials(u, v_from)[0])
        return self.invert_w(w, v_to)


# ---------------------------------------------------------------------------
# interface formulas and the focusing identity

def interface_jump_u_plus(a, u_minus, table):
    """State on the ``v = a`` side of the line where ``v`` jumps from ``-a`` to ``a``."""
    sl = table.slice(a) if float(a) in table.slices else None
    if abs(u_minus) > table.b:
        raise ConstructionError("outside construction neighborhood")
    F = float(sl.spline(u_minus)) if sl is not None else float(table.evaluate(u_minus, a)[0][0])
    e = np.exp(-1.0 / a)
    rad = 1.0 + 2.0 * e * (F + u_minus)
    if rad < 0:
        raise ConstructionError("outside construction neighborhood")
    return (-1.0 + np.sqrt(rad)) / e


def focusing_check(a, u_minus, h, table):
    """Distance from ``(0, 2h)`` of the fan ray through ``(0, 0)`` with state ``u_minus``.

    The ray leaves the origin with speed ``F_u(u_minus, a)``, meets the
    line ``x + t = h``, continues with speed ``exp(-1/a) u+`` and is
    evaluated at ``t = 2h``.
    """
    sl = table.slice(a)
    c = float(sl.d1(u_minus))
    t0 = h / (1.0 + c)
    x0 = c * t0
    up = interface_jump_u_plus(a, u_minus, table)
    x = x0 + np.exp(-1.0 / a) * up * (2 * h - t0)
    return abs(x)


# ---------------------------------------------------------------------------
# Cantor data

@dataclass
class CantorSpec:
    """Generation ``m``, scale ``h`` and amplitudes ``a_n = a0 * decay**n``."""

    m: int
    h: float = 1.0
    a0: float = 0.5
    decay: float = 0.25
    tv_bound: float = 0.5

    def amplitude(self, n):
        return self.a0 * self.decay ** n

    def raw_interval(self, level, n):
        """``(B-, B+)`` of generation ``level`` and index ``n`` before nesting is removed."""
        scale = 6.0 * self.h / 3 ** level
        lo, mid, hi = (3 * n + 1) * scale, (3 * n + 1.5) * scale, (3 * n + 2) * scale
        return (lo, mid), (mid, hi)

    def intervals(self):
        """List of ``(level, n, B_minus, B_plus)`` sorted by position.

        Generations ``1..m`` are accumulated; an interval of a later
        generation lying inside an earlier one is skipped, so the kept
        intervals are the middle thirds removed up to generation ``m``.
        """
        out = []
        for level in range(1, self.m + 1):
            for n in range(3 ** (level - 1)):
                (lo, mid), (_, hi) = self.raw_interval(level, n)
                if any(o[2][0] <= lo and hi <= o[3][1] for o in out):
                    continue
                out.append((level, n, (lo, mid), (mid, hi)))
        return sorted(out, key=lambda o: o[2][0])

    def absence(self):
        """Open time intervals on which no shock sits on ``x = 0``."""
        return [(bm[0], bp[1]) for _, _, bm, bp in self.intervals()]


@dataclass
class CantorData:
    spec: CantorSpec
    breakpoints: list
    tv: float
    amplitudes: list = field(default_factory=list)


def build_cantor_data(spec, u_l, u_r, model=None):
    """Initial steps for the Cantor construction.

    ``v`` equals ``-a_n`` on ``B-`` and ``a_n`` on ``B+`` so that each
    pair opens a rarefaction at ``x = 0`` and refocuses it.  On every
    interval ``u`` is corrected so that ``u + f(u, v) = u_r``; the
    family-1 interfaces then carry no family-2 wave.
    """
    if model is None:
        amps = sorted({spec.amplitude(n) for _, n, _, _ in spec.intervals()})
        model = CoupledFlux(a_values=amps or (spec.a0,))
    pts = [(-1.0, np.array([u_l, 0.0])), (0.0, np.array([u_r, 0.0]))]
    tv_v = 0.0
    amps = []
    for _, n, bm, bp in spec.intervals():
        a = spec.amplitude(n)
        amps.append(a)
        tv_v += 4 * a
        for (lo, _), v in ((bm, -a), (bp, a)):
            pts.append((lo, np.array([model.invert_w(u_r, v), v])))
        pts.append((bp[1], np.array([u_r, 0.0])))
    states = [p[1] for p in pts]
    tv = total_variation(states)
    if tv > spec.tv_bound:
        worst = max(amps) if amps else 0.0
        raise ConstructionError(f"total variation {tv:.3g} exceeds bound {spec.tv_bound}; a_n = {worst:g}")
    return CantorData(spec, pts, tv, amps), model


def shock_presence(log, times, threshold, window, family=1):
    """True where a shock of ``family`` with total strength ``>= threshold`` sits near ``x = 0``.

    Fronts at the same position are summed, so a discontinuity carried by
    several coincident fronts counts once.
    """
    out = []
    for t in times:
        groups = {}
        for f in log.live_at(t):
            x = f.position(t)
            if f.family == family and abs(x) <= window:
                key = round(x / 1e-9)
                groups[key] = groups.get(key, 0.0) + abs(f.s)
        out.append(bool(groups) and max(groups.values()) >= threshold)
    return np.array(out)


def presence_intervals(times, present):
    """Maximal open intervals of absence from a boolean sample."""
    gaps = []
    start = None
    for t, p in zip(times, present):
        if not p and start is None:
            start = t
        elif p and start is not None:
            gaps.append((start, t))
            start = None
    if start is not None:
        gaps.append((start, times[-1]))
    return gaps


def cantor_shock_scenario(m, eps_sequence, u_l=0.2, u_r=-0.2, a0=0.5, decay=1.0, h=1.0,
                          tv_bound=8.0, samples=2401, t_end=None):
    """Run the Cantor construction and compare the shock pattern on ``x = 0``.

    Returns a dict with, for each ``eps``, the sampled presence pattern,
    the extracted absence intervals and the largest boundary mismatch
    against the expected pattern.
    """
    from .tracker import FrontTracker

    if m > 3:
        raise ConstructionError("m > 3 is outside desk scale")
    spec = CantorSpec(m, h, a0, decay, tv_bound)
    data, model = build_cantor_data(spec, u_l, u_r)
    t_end = 6.0 * h + 0.5 * h if t_end is None else t_end
    times = np.linspace(0.0, 6.0 * h, samples)
    expected = spec.absence()
    report = {"m": m, "expected": expected, "runs": {}}
    jump = abs(u_l - u_r)
    for eps in eps_sequence:
        tr = FrontTracker(model, eps, tv_bound=tv_bound)
        tr.init_approximation(data.breakpoints)
        log = tr.run(t_end)
        present = shock_presence(log, times, 0.5 * jump, 10 * eps)
        gaps = presence_intervals(times, present)
        report["runs"][eps] = {
            "log": log,
            "present": present,
            "absence": gaps,
            "mismatch": pattern_mismatch(gaps, expected),
            "spurious": sum(1 for f in log.fronts.values()
                            if f.t_birth == 0.0 and f.family == 1 and abs(f.x_birth) > 0),
        }
    report["times"] = times
    return report


def pattern_mismatch(found, expected):
    """Largest endpoint distance between matched interval lists (inf if counts differ)."""
    if len(found) != len(expected):
        return np.inf
    if not found:
        return 0.0
    return float(max(max(abs(a - c), abs(b - d)) for (a, b), (c, d) in zip(found, expected)))


# ---------------------------------------------------------------------------
# two-inflection merge scenario

def fig2_data(width=0.1, inner=0.08, gap=0.05, centre=0.0):
    """Two shocks flanking a centred rarefaction.

    States ``u1 < u2 < u3 < u4`` with ``u1, u4 = -+sqrt(6) width`` so that
    the chord from ``u1`` to ``u4`` is tangent to the flux at 0; the
    rarefaction ``u2 -> u3`` sits in the convex middle region.
    """
    outer = np.sqrt(6.0) * width
    return [(centre - 2 * gap, [-outer]), (centre - gap, [-inner]), (centre, [inner]),
            (centre + gap, [outer])]


# ---------------------------------------------------------------------------
# scenario registry

def _burgers_shock(uL=1.0, uR=0.0, x0=0.0):
    from .flux_model import burgers
    return burgers(), [(x0 - 1.0, [uL]), (x0, [uR])]


def _burgers_random(n=12, amplitude=0.1, width=2.0, seed=0):
    from .flux_model import burgers
    rng = np.random.default_rng(seed)
    xs = np.sort(rng.uniform(-width / 2, width / 2, n))
    us = rng.uniform(-amplitude, amplitude, n + 1)
    return burgers(), [(xs[0] - 1.0, [us[0]])] + [(x, [u]) for x, u in zip(xs, us[1:])]


def _fig2(width=0.1, inner=0.08, gap=0.05, drift=0.0):
    from .flux_model import two_inflection
    return two_inflection(width, drift), fig2_data(width, inner, gap)


def _fig1(width=0.1, drift=0.0):
    """Riemann data ``u1 -> u4`` whose chord touches the flux at the middle inflection pair."""
    from .flux_model import two_inflection
    outer = np.sqrt(6.0) * width
    return two_inflection(width, drift), [(-1.0, [-outer]), (0.0, [outer])]


def _coupled_crossing(u0=0.3, du=-0.4, v0=0.5, v1=0.3, x1=0.5):
    """A family-1 jump in ``v`` meeting a family-2 shock in the convex part ``v > 0``."""
    model = CoupledFlux(a_values=(0.5,))
    w = u0 + du + float(model.partials(u0 + du, v0)[0])
    return model, [(-1.0, [u0, v0]), (0.0, [u0 + du, v0]), (x1, [model.invert_w(w, v1), v1])]


def _cantor(m=1, h=1.0, a0=0.5, decay=1.0, u_l=0.2, u_r=-0.2, tv_bound=8.0):
    data, model = build_cantor_data(CantorSpec(m, h, a0, decay, tv_bound), u_l, u_r)
    return model, data.breakpoints


SCENARIOS = {
    "burgers_shock": _burgers_shock,
    "burgers_random": _burgers_random,
    "fig1": _fig1,
    "fig2": _fig2,
    "coupled_crossing": _coupled_crossing,
    "cantor": _cantor,
}


def scenario(name, **params):
    """``(model, breakpoints)`` of a named scenario."""
    if name not in SCENARIOS:
        raise KeyError(f"unknown scenario {name!r}")
    return SCENARIOS[name](**params)
