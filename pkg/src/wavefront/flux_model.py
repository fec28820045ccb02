"""Flux functions, eigenstructure and the genuinely nonlinear partition.

A model describes a strictly hyperbolic system ``u_t + f(u)_x = 0`` on a
box ``Omega`` of state space.  Families are indexed from 0 in code; the
index ``n`` is reserved for nonphysical fronts.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

MANIFOLD_TOL = 1e-9
FD_STEP = 1e-6
SPEED_MARGIN = 1.0
TV_WARNING = 0.5


class DomainError(ValueError):
    """State outside the admissible box."""


class HyperbolicityError(ValueError):
    """Eigenvalues are complex or closer than the hyperbolicity gap."""


class CurveError(ValueError):
    """An integral curve left the domain before reaching its parameter."""


@dataclass(frozen=True)
class EigenStructure:
    """Eigenvalues with right (columns) and left (rows) eigenvectors.

    The right eigenvectors have unit length and ``left @ right = I``.
    """

    lambdas: np.ndarray
    right: np.ndarray
    left: np.ndarray

    def r(self, i):
        return self.right[:, i]

    def l(self, i):
        return self.left[i]


class FluxModel:
    """Base class for flux models.

    Subclasses implement :meth:`flux` and may override :meth:`jacobian`,
    :meth:`eigen`, :meth:`gnl` and :meth:`integral_curve` with closed
    forms.  The defaults use central differences and adaptive
    integration.

    Parameters
    ----------
    lower, upper : array_like
        Corners of the state box ``Omega``.
    gap : float
        Minimal admissible separation of consecutive eigenvalues.
    """

    n = 1
    name = "custom"
    config = None
    exact_curves = False
    max_strength = np.inf

    def __init__(self, lower, upper, gap=1e-8, manifold_tol=MANIFOLD_TOL):
        self.lower = np.atleast_1d(np.asarray(lower, dtype=float))
        self.upper = np.atleast_1d(np.asarray(upper, dtype=float))
        if self.lower.shape != (self.n,) or np.any(self.lower >= self.upper):
            raise ValueError("invalid state box")
        self.gap = gap
        self.manifold_tol = manifold_tol
        self._lambda_hat = None
        self._reference = None

    # -- basic evaluation -------------------------------------------------
    def check(self, u):
        u = np.atleast_1d(np.asarray(u, dtype=float))
        if u.shape != (self.n,):
            raise ValueError(f"expected a state of size {self.n}")
        slack = 1e-12 * (1.0 + np.abs(self.upper - self.lower))
        if not np.all(np.isfinite(u)) or np.any(u < self.lower - slack) or np.any(u > self.upper + slack):
            raise DomainError(f"state outside Omega: {u}")
        return u

    def contains(self, u):
        try:
            self.check(u)
        except DomainError:
            return False
        return True

    def flux(self, u):
        raise NotImplementedError

    def jacobian(self, u):
        u = self.check(u)
        h = FD_STEP * max(1.0, float(np.max(np.abs(u))))
        cols = []
        for j in range(self.n):
            e = np.zeros(self.n)
            e[j] = h
            cols.append((self._raw_flux(u + e) - self._raw_flux(u - e)) / (2 * h))
        return np.column_stack(cols)

    def _raw_flux(self, u):
        # flux without the domain check, used by finite differences
        return self.flux(u)

    def eigen(self, u):
        a = self.jacobian(u)
        w, v = np.linalg.eig(a)
        if np.max(np.abs(np.imag(w))) > self.gap:
            raise HyperbolicityError(f"hyperbolicity margin violated: complex eigenvalues at {u}")
        w = np.real(w)
        v = np.real(v)
        order = np.argsort(w)
        w, v = w[order], v[:, order]
        if self.n > 1 and np.min(np.diff(w)) < self.gap:
            raise HyperbolicityError(f"hyperbolicity margin violated: eigenvalues closer than {self.gap} at {u}")
        v = v / np.linalg.norm(v, axis=0)
        v = v * self._orientation(v)
        return EigenStructure(w, v, np.linalg.inv(v))

    def _orientation(self, v):
        # keep r_i on the same side as at the centre of the box
        if self._reference is None:
            self._reference = np.eye(self.n)
            centre = 0.5 * (self.lower + self.upper)
            ref = self.eigen(centre).right
            self._reference = ref
        signs = np.sign(np.sum(v * self._reference, axis=0))
        signs[signs == 0] = 1.0
        return signs

    def speeds(self, u):
        return self.eigen(u).lambdas

    def family_fields(self, states, i):
        """``lambda_i`` and ``r_i`` at each row of ``states``."""
        states = np.atleast_2d(states)
        lam = np.empty(states.shape[0])
        r = np.empty_like(states)
        for j, u in enumerate(states):
            e = self.eigen(u)
            lam[j] = e.lambdas[i]
            r[j] = e.r(i)
        return lam, r

    def curve_profile(self, u0, i):
        """Closed-form profile of the curve through ``u0``, or None."""
        return None

    def gnl(self, u, i):
        """Directional derivative of ``lambda_i`` along ``r_i``."""
        u = self.check(u)
        r = self.eigen(u).r(i)
        h = FD_STEP * max(1.0, float(np.max(np.abs(u))))
        lp = self.eigen(u + h * r).lambdas[i]
        lm = self.eigen(u - h * r).lambdas[i]
        return (lp - lm) / (2 * h)

    # -- curves -----------------------------------------------------------
    def integral_curve(self, u0, i, taus):
        """States along the integral curve of ``r_i / <l_i(u0), r_i>``.

        The parameter equals ``<l_i(u0), u - u0>`` to first order and
        exactly whenever ``l_i(u0)`` annihilates the curvature of the
        curve.  ``taus`` must be monotone and start at 0.
        """
        u0 = self.check(u0)
        taus = np.asarray(taus, dtype=float)
        l0 = self.eigen(u0).l(i)

        def rhs(_, y):
            r = self.eigen(y).r(i)
            return r / np.dot(l0, r)

        return self._integrate(u0, rhs, taus)

    def _integrate(self, u0, rhs, taus):
        end = float(taus[-1]) if taus.size else 0.0
        if end == 0.0:
            return np.repeat(u0[None, :], taus.size, axis=0)

        def leave(_, y):
            inside = np.minimum(y - self.lower, self.upper - y)
            return float(np.min(inside)) + 1e-12

        leave.terminal = True
        try:
            sol = solve_ivp(rhs, (0.0, end), u0, method="DOP853", t_eval=taus,
                            rtol=1e-11, atol=1e-13, events=leave)
        except DomainError:
            # a trial stage stepped outside the box
            raise CurveError("curve left domain") from None
        if sol.status != 0 or sol.y.shape[1] != taus.size:
            raise CurveError("curve left domain")
        return sol.y.T.copy()

    def ftilde_exact(self, u0, i, taus):
        """Closed form of ``int_0^tau lambda_i`` along the curve, if known."""
        return None

    def rarefaction_curve(self, u0, i, omega):
        """Point ``R_i[u0](omega)`` of the unit-speed rarefaction curve."""
        u0 = self.check(u0)

        def rhs(_, y):
            return self.eigen(y).r(i)

        return self._integrate(u0, rhs, np.array([0.0, float(omega)]))[-1]

    # -- partition --------------------------------------------------------
    def region(self, u, i):
        """GNL region index and on-manifold flag for family ``i``.

        The index counts the sign changes of ``grad lambda_i . r_i`` met
        when following ``-r_i`` out of the box, offset so that even
        indices carry a negative sign.
        """
        u = self.check(u)
        g = self.gnl(u, i)
        if abs(g) <= self.manifold_tol:
            on = True
        else:
            on = False
        span = float(np.max(self.upper - self.lower))
        taus = -np.linspace(0.0, span, 401)
        states = [u]
        for t0, t1 in zip(taus[:-1], taus[1:]):
            try:
                nxt = self._integrate(states[-1], lambda _, y: self.eigen(y).r(i),
                                      np.array([0.0, t1 - t0]))[-1]
            except CurveError:
                break
            states.append(nxt)
        signs = [np.sign(self.gnl(s, i)) for s in states]
        signs = [s for s in signs if s != 0] or [1.0]
        changes = int(np.sum(np.diff(signs) != 0))
        base = 0 if signs[-1] < 0 else 1
        return base + changes, on

    # -- bounds -----------------------------------------------------------
    @property
    def lambda_hat(self):
        """Speed of nonphysical fronts: sampled maximal speed plus a margin."""
        if self._lambda_hat is None:
            rng = np.random.default_rng(0)
            pts = self.lower + (self.upper - self.lower) * rng.random((256, self.n))
            corners = np.array(np.meshgrid(*zip(self.lower, self.upper))).reshape(self.n, -1).T
            vmax = 0.0
            for p in np.vstack([pts, corners]):
                try:
                    vmax = max(vmax, float(np.max(np.abs(self.speeds(p)))))
                except (HyperbolicityError, DomainError):
                    continue
            self._lambda_hat = vmax + SPEED_MARGIN
        return self._lambda_hat

    @lambda_hat.setter
    def lambda_hat(self, value):
        self._lambda_hat = float(value)

    def separators(self):
        """Bounds ``lambda_check_0 < ... < lambda_check_n`` of family speeds, if known."""
        return None


class ScalarFlux(FluxModel):
    """Scalar flux from callables ``f, f', f''``.

    Inflection points are the sign changes of ``f''`` on the box; they
    are located on a sampling grid and refined by bisection.
    """

    n = 1
    name = "scalar"
    exact_curves = True

    def __init__(self, f, df, d2f, lower, upper, name=None, **kw):
        super().__init__([lower], [upper], **kw)
        self.f, self.df, self.d2f = f, df, d2f
        if name:
            self.name = name
        self.inflections = self._find_inflections()

    def _find_inflections(self, samples=4097):
        xs = np.linspace(self.lower[0], self.upper[0], samples)
        g = np.asarray(self.d2f(xs), dtype=float)
        roots = []
        for k in range(samples - 1):
            if g[k] == 0.0 and (not roots or xs[k] > roots[-1]):
                if k > 0 and np.sign(g[k - 1]) != np.sign(g[k + 1]):
                    roots.append(float(xs[k]))
            elif g[k] * g[k + 1] < 0:
                roots.append(brentq(lambda x: float(self.d2f(x)), xs[k], xs[k + 1], xtol=1e-14))
        return np.array(roots)

    def flux(self, u):
        u = self.check(u)
        return np.array([float(self.f(u[0]))])

    def jacobian(self, u):
        u = self.check(u)
        return np.array([[float(self.df(u[0]))]])

    def eigen(self, u):
        return EigenStructure(self.jacobian(u)[0], np.ones((1, 1)), np.ones((1, 1)))

    def gnl(self, u, i=0):
        u = self.check(u)
        return float(self.d2f(u[0]))

    def family_fields(self, states, i=0):
        states = np.atleast_2d(states)
        return np.asarray(self.df(states[:, 0]), dtype=float), np.ones_like(states)

    def curve_profile(self, u0, i=0):
        from .riemann import ScalarProfile
        return ScalarProfile(self, float(np.atleast_1d(u0)[0]))

    def integral_curve(self, u0, i, taus):
        u0 = self.check(u0)
        taus = np.asarray(taus, dtype=float)
        out = u0[0] + taus
        if np.any(out < self.lower[0] - 1e-12) or np.any(out > self.upper[0] + 1e-12):
            raise CurveError("curve left domain")
        return out[:, None]

    def ftilde_exact(self, u0, i, taus):
        u0 = float(np.atleast_1d(u0)[0])
        taus = np.asarray(taus, dtype=float)
        return np.asarray(self.f(u0 + taus), dtype=float) - float(self.f(u0))

    def rarefaction_curve(self, u0, i, omega):
        return self.integral_curve(u0, i, np.array([0.0, float(omega)]))[-1]

    def region(self, u, i=0):
        u = self.check(u)
        g = float(self.d2f(u[0]))
        below = int(np.sum(self.inflections < u[0]))
        first = self._first_sign()
        base = 0 if first < 0 else 1
        return base + below, abs(g) <= self.manifold_tol

    def _first_sign(self):
        x0 = self.lower[0]
        x1 = self.inflections[0] if self.inflections.size else self.upper[0]
        return np.sign(float(self.d2f(0.5 * (x0 + x1)))) or 1.0

    @property
    def lambda_hat(self):
        if self._lambda_hat is None:
            xs = np.linspace(self.lower[0], self.upper[0], 2049)
            self._lambda_hat = float(np.max(np.abs(self.df(xs)))) + SPEED_MARGIN
        return self._lambda_hat

    @lambda_hat.setter
    def lambda_hat(self, value):
        self._lambda_hat = float(value)


def burgers(bound=10.0):
    """Inviscid Burgers flux ``u**2 / 2``."""
    return ScalarFlux(lambda u: 0.5 * np.square(u), lambda u: np.asarray(u, dtype=float),
                      lambda u: np.ones_like(np.asarray(u, dtype=float)),
                      -bound, bound, name="burgers")


def two_inflection(width=0.1, drift=0.0, bound=0.5):
    """Concave-convex-concave flux with inflection points at ``+-width``.

    ``f(u) = drift*u + u**2/2 - u**4/(12 width**2)``, so that
    ``f'' = 1 - (u/width)**2``.  The line ``drift*u`` is tangent to the
    graph at 0 and meets it again at ``+-sqrt(6)*width``.
    """
    w2 = width * width

    def f(u):
        u = np.asarray(u, dtype=float)
        return drift * u + 0.5 * u * u - u ** 4 / (12 * w2)

    def df(u):
        u = np.asarray(u, dtype=float)
        return drift + u - u ** 3 / (3 * w2)

    def d2f(u):
        u = np.asarray(u, dtype=float)
        return 1.0 - u * u / w2

    model = ScalarFlux(f, df, d2f, -bound, bound, name="two_inflection")
    model.width = width
    model.drift = drift
    return model


class SplineFlux(ScalarFlux):
    """Scalar flux given by a C2 cubic spline through tabulated points."""

    def __init__(self, knots, values, name="spline", **kw):
        knots = np.asarray(knots, dtype=float)
        values = np.asarray(values, dtype=float)
        spline = CubicSpline(knots, values)
        d1, d2 = spline.derivative(1), spline.derivative(2)
        self.spline = spline
        super().__init__(lambda u: spline(u), lambda u: d1(u), lambda u: d2(u),
                         knots[0], knots[-1], name=name, **kw)


def load_tabulated_flux(path):
    """Read a two-column ``u f`` text table into a :class:`SplineFlux`."""
    data = np.loadtxt(path, comments="#", ndmin=2)
    if data.shape[1] < 2 or data.shape[0] < 4:
        raise ValueError("tabulated flux needs at least 4 rows of (u, f)")
    order = np.argsort(data[:, 0])
    return SplineFlux(data[order, 0], data[order, 1], name="custom")


def total_variation(states):
    """Sum of Euclidean jumps of a sequence of states."""
    states = np.atleast_2d(np.asarray(states, dtype=float))
    if states.shape[0] < 2:
        return 0.0
    return float(np.sum(np.linalg.norm(np.diff(states, axis=0), axis=1)))


# thin functional interface ------------------------------------------------

def eval_flux(model, u):
    return model.flux(u)


def eigen(model, u):
    return model.eigen(u)


def rarefaction_curve(model, u0, i, omega):
    return model.rarefaction_curve(u0, i, omega)


def gnl_region(model, u, i):
    return model.region(u, i)


def make_model(name, **params):
    """Build a model from its configuration name."""
    if name == "burgers":
        model = burgers(**params)
    elif name == "two_inflection":
        model = two_inflection(**params)
    elif name == "coupled66":
        from .example_lab import CoupledFlux
        model = CoupledFlux(**params)
    elif name == "custom":
        model = load_tabulated_flux(params["table"])
    else:
        raise ValueError(f"unknown model {name!r}")
    model.config = (name, dict(params))
    return model
