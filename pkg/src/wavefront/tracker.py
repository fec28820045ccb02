"""Event-driven front tracking with Glimm bookkeeping.

Fronts are straight segments in the ``(t, x)`` plane.  Adjacent pairs
that approach each other are kept in a priority queue keyed by their
crossing time; at each event the two incoming fronts are replaced by the
output of one of three Riemann solvers:

* crude, when the left incoming front is nonphysical;
* accurate, when the interaction amount is at least ``rho``;
* simplified, otherwise.

Simultaneous events are resolved one pair at a time in lexicographic
order of ``(t, x, left id)``, which is the limit of perturbing the
speeds by ``eta * rank`` with ``eta -> 0``.
"""
from __future__ import annotations

import heapq
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .envelope import lower_convex_envelope, upper_concave_envelope
from .flux_model import TV_WARNING, total_variation
from .riemann import (NONPHYSICAL, FrontSpec, RiemannError, accurate_solver, crude_solver,
                      fixed_point_curve, simplified_solver)

GUARD = 1e-13
SIGMA_SAMPLES = 8
ENVELOPE_SAMPLES = 129
TIE_TOL = 1e-12


class TrackerError(RuntimeError):
    pass


@dataclass(eq=False)
class Front:
    """Straight front ``x = x_birth + speed * (t - t_birth)``."""

    id: int
    family: int
    t_birth: float
    x_birth: float
    speed: float
    uL: np.ndarray
    uR: np.ndarray
    s: float
    kind: str
    generation: int = 1
    level: float | None = None
    t_death: float = math.inf
    birth_node: int = -1
    death_node: int = -1
    curve: object = None
    sigma: np.ndarray | None = None

    def position(self, t):
        return self.x_birth + self.speed * (t - self.t_birth)

    def alive(self, t):
        return self.t_birth <= t < self.t_death

    @property
    def physical(self):
        return self.kind != NONPHYSICAL


@dataclass
class InteractionNode:
    id: int
    t: float
    x: float
    in_ids: tuple
    out_ids: list
    I: float
    IC: float
    solver: str


@dataclass
class GlimmLedger:
    """Values of ``V`` and ``Q`` immediately before and after each node."""

    c0: float
    rows: list = field(default_factory=list)

    def record(self, node_id, t, v0, q0, v1, q1, amount, amount_c):
        self.rows.append((node_id, t, v0, q0, v1, q1, amount, amount_c))

    def array(self):
        if not self.rows:
            return np.zeros((0, 8))
        return np.array(self.rows, dtype=float)

    def upsilon(self):
        a = self.array()
        return a[:, 2] + self.c0 * a[:, 3], a[:, 4] + self.c0 * a[:, 5]

    def violations(self, rtol=1e-12):
        """Nodes where ``Upsilon`` increases beyond the relative tolerance."""
        before, after = self.upsilon()
        bad = after > before + rtol * np.maximum(1.0, np.abs(before))
        return [int(self.rows[k][0]) for k in np.nonzero(bad)[0]]


class FrontLog:
    """Complete record of a front-tracking run."""

    def __init__(self, model, eps, rho, params=None):
        self.model = model
        self.eps = eps
        self.rho = rho
        self.params = dict(params or {})
        self.fronts = {}
        self.nodes = []
        self.ledger = GlimmLedger(1.0)
        self.t_end = 0.0
        self.u_far_left = None

    def add_front(self, front):
        self.fronts[front.id] = front

    def live_at(self, t):
        """Fronts alive at ``t`` sorted by position, ties by speed."""
        live = [f for f in self.fronts.values() if f.t_birth <= t < f.t_death or
                (t == self.t_end and f.t_death == math.inf)]
        live.sort(key=lambda f: (f.position(t), f.speed, f.id))
        return self._chain_ties(live, t)

    def _chain_ties(self, live, t):
        # fronts meeting within round-off: order them so the states telescope
        out = []
        j = 0
        u = self.u_far_left
        while j < len(live):
            x = live[j].position(t)
            k = j + 1
            while k < len(live) and abs(live[k].position(t) - x) <= TIE_TOL * (1.0 + abs(x)):
                k += 1
            group = live[j:k]
            while group:
                pick = 0
                if u is not None and len(group) > 1:
                    pick = int(np.argmin([np.linalg.norm(f.uL - u) for f in group]))
                f = group.pop(pick)
                out.append(f)
                u = f.uR
            j = k
        return out

    def sample_solution(self, t):
        """Positions of the live fronts and the piecewise-constant states.

        Returns ``(x, states)`` with ``len(states) == len(x) + 1``.
        """
        if t > self.t_end * (1 + 1e-12) + 1e-12:
            raise ValueError(f"t={t} lies beyond the simulated horizon {self.t_end}")
        live = self.live_at(t)
        xs = np.array([f.position(t) for f in live])
        states = [self.u_far_left.copy()] + [f.uR.copy() for f in live]
        return xs, np.array(states)

    def evaluate(self, t, x):
        xs, states = self.sample_solution(t)
        k = np.searchsorted(xs, x, side="right")
        return states[k]

    def total_variation(self, t):
        return total_variation(self.sample_solution(t)[1])

    def physical_fronts(self):
        return [f for f in self.fronts.values() if f.physical]

    def curve_of(self, front):
        if front.curve is None and front.physical:
            front.curve = fixed_point_curve(self.model, front.uL, front.s, front.family)
        return front.curve


# ---------------------------------------------------------------------------
# interaction amount

def _samples(curve, k=None):
    k = ENVELOPE_SAMPLES if k is None else k
    t = np.linspace(0.0, curve.s, k)
    for p in curve.pieces:
        t = np.concatenate([t, [p.a, p.b]])
    t = np.unique(np.clip(t, min(0.0, curve.s), max(0.0, curve.s)))
    return t


def _conv(t, f, lo, hi):
    m = (t >= lo - 1e-15) & (t <= hi + 1e-15)
    env = lower_convex_envelope(t[m], f[m])
    return np.interp(t, t[m], env.values)


def _conc(t, f, lo, hi):
    m = (t >= lo - 1e-15) & (t <= hi + 1e-15)
    env = upper_concave_envelope(t[m], f[m])
    return np.interp(t, t[m], env.values)


def _l1(t, g, lo, hi):
    m = (t >= lo - 1e-15) & (t <= hi + 1e-15)
    tt, gg = t[m], np.abs(g[m])
    if tt.size < 2:
        return 0.0
    return float(np.sum(0.5 * np.diff(tt) * (gg[1:] + gg[:-1])))


def same_family_amount(c1, c2, samples=None):
    """Envelope-difference amount for two fronts of one family.

    ``c1`` is the left front and ``c2`` the right one; both are curves
    with ``ftilde`` and strength ``s``.  Negative left strength is handled
    by the reflection ``f(t) -> -f(-t)``, which swaps convex and concave
    envelopes.  ``samples`` points per curve (default ``ENVELOPE_SAMPLES``)
    set the quadrature; the error is second order in the spacing.
    """
    s1, s2 = c1.s, c2.s
    t1, t2 = _samples(c1, samples), _samples(c2, samples)
    f1, f2 = c1.ftilde(t1), c2.ftilde(t2)
    if s1 < 0:
        s1, s2 = -s1, -s2
        t1, f1 = -t1[::-1], -f1[::-1]
        t2, f2 = -t2[::-1], -f2[::-1]
    if s1 == 0.0 or s2 == 0.0:
        return 0.0
    if s2 > 0:
        t = np.unique(np.concatenate([t1, s1 + t2]))
        g = np.where(t <= s1, np.interp(t, t1, f1), np.interp(s1, t1, f1) + np.interp(t - s1, t2, f2))
        joint = _conv(t, g, 0.0, s1 + s2)
        left = _conv(t, np.interp(t, t1, f1), 0.0, s1)
        right = np.interp(s1, t1, f1) + _conv(t - s1, np.interp(t - s1, t2, f2), 0.0, s2)
        return _l1(t, left - joint, 0.0, s1) + _l1(t, right - joint, s1, s1 + s2)
    if s2 >= -s1:
        t = np.unique(np.concatenate([t1, [s1 + s2]]))
        f = np.interp(t, t1, f1)
        full = _conv(t, f, 0.0, s1)
        part = _conv(t, f, 0.0, s1 + s2)
        cap = _conc(t, f, s1 + s2, s1)
        return _l1(t, full - part, 0.0, s1 + s2) + _l1(t, full - cap, s1 + s2, s1)
    t = np.unique(np.concatenate([t2, [-s1]]))
    f = np.interp(t, t2, f2)
    full = _conc(t, f, s2, 0.0)
    part = _conc(t, f, s2, -s1)
    cup = _conv(t, f, -s1, 0.0)
    return _l1(t, full - part, s2, -s1) + _l1(t, full - cup, -s1, 0.0)


def interaction_amount(model, left, right, curve_of=None):
    """Interaction amount of two colliding fronts.

    Different families give ``|s' s''|``; a nonphysical partner counts
    with the size of its jump; one family gives the envelope-difference
    integral.
    """
    n = model.n
    if left.family != right.family or left.family == n:
        sa = left.s if left.family != n else float(np.linalg.norm(left.uR - left.uL))
        sb = right.s if right.family != n else float(np.linalg.norm(right.uR - right.uL))
        return abs(sa * sb)
    get = curve_of or (lambda f: f.curve)
    return same_family_amount(get(left), get(right))


def cancellation(left, right):
    if left.family != right.family or not left.physical:
        return 0.0
    return abs(left.s) + abs(right.s) - abs(left.s + right.s)


# ---------------------------------------------------------------------------
# Glimm functionals

def _pair_abs_sum(x, w):
    # sum_{j,k} w_j w_k |x_j - x_k|
    order = np.argsort(x)
    x, w = x[order], w[order]
    cw = np.cumsum(w)
    cwx = np.cumsum(w * x)
    inner = x[1:] * cw[:-1] - cwx[:-1]
    return 2.0 * float(np.sum(w[1:] * inner))


def glimm_functionals(fronts, n):
    """``V`` and ``Q`` of an ordered list of live fronts.

    ``V`` sums the physical strengths.  The transversal part of ``Q``
    sums ``|s_a s_b|`` over pairs with the faster family on the left,
    nonphysical fronts counting with their jump size; the same-family
    part is a quarter of the double integral of speed differences over
    ordered pairs of distinct fronts.
    """
    v = 0.0
    q1 = 0.0
    acc = np.zeros(n + 1)
    per_family = [[] for _ in range(n)]
    for f in fronts:
        if f.physical:
            a = abs(f.s)
            v += a
            q1 += a * float(np.sum(acc[f.family + 1:]))
            acc[f.family] += a
            if f.sigma is not None and a > 0:
                per_family[f.family].append((a, f.sigma))
        else:
            acc[n] += float(np.linalg.norm(f.uR - f.uL))
    q2 = 0.0
    for items in per_family:
        if len(items) < 2:
            continue
        xs, ws, self_terms = [], [], 0.0
        for a, sig in items:
            k = sig.size
            xs.append(sig)
            ws.append(np.full(k, a / k))
            self_terms += (a / k) ** 2 * float(np.sum(np.abs(sig[:, None] - sig[None, :])))
        total = _pair_abs_sum(np.concatenate(xs), np.concatenate(ws))
        q2 += 0.25 * (total - self_terms)
    return v, q1 + max(q2, 0.0)


# ---------------------------------------------------------------------------
# tracker

class FrontTracker:
    """Wave-front tracking approximation at resolution ``eps``.

    Parameters
    ----------
    model : FluxModel
    eps : float
        Speed resolution of rarefaction discretisation.
    rho : float, optional
        Threshold between accurate and simplified solvers, ``eps**3`` by
        default.
    c0 : float, optional
        Weight of ``Q`` in ``Upsilon = V + c0 Q``; calibrated on the
        initial interactions when omitted.
    """

    def __init__(self, model, eps, rho=None, c0=None, max_fronts=20000, max_events=2_000_000,
                 tv_bound=TV_WARNING):
        self.model = model
        self.eps = float(eps)
        self.rho = self.eps ** 3 if rho is None else float(rho)
        self.c0 = c0
        self.max_fronts = max_fronts
        self.max_events = max_events
        self.tv_bound = tv_bound
        self._next_id = 0
        self.log = None

    # -- list maintenance -------------------------------------------------
    def _new_front(self, spec, t, x, gen, node=-1):
        f = Front(self._next_id, spec.family, t, x, float(spec.speed), np.asarray(spec.uL, float),
                  np.asarray(spec.uR, float), float(spec.s), spec.kind, gen, spec.level,
                  birth_node=node, curve=spec.curve)
        if f.physical and f.curve is not None:
            f.sigma = np.asarray(f.curve.speed_samples(SIGMA_SAMPLES), dtype=float)
        self._next_id += 1
        self.log.add_front(f)
        return f

    def _schedule(self, a, b, now):
        if a is None or b is None or a.speed <= b.speed:
            return
        gap = b.position(now) - a.position(now)
        if gap < GUARD:
            gap = 0.0
        t = now + gap / (a.speed - b.speed)
        x = a.position(t) if gap > 0 else 0.5 * (a.position(now) + b.position(now))
        heapq.heappush(self._queue, (t, x, a.id, b.id))

    def init_approximation(self, breakpoints):
        """Initial fronts from ``[(x_k, state_k), ...]``.

        ``state_k`` holds to the right of ``x_k``; the first state also
        extends to the left.
        """
        model = self.model
        pts = sorted(((float(x), model.check(u)) for x, u in breakpoints), key=lambda p: p[0])
        states = [p[1] for p in pts]
        tv = total_variation(states)
        if tv > self.tv_bound:
            warnings.warn(f"total variation {tv:.3g} exceeds the smallness bound {self.tv_bound}")
        self.log = FrontLog(model, self.eps, self.rho)
        self.log.u_far_left = states[0].copy()
        self._order = []
        for k in range(1, len(pts)):
            x = pts[k][0]
            uL, uR = pts[k - 1][1], pts[k][1]
            if np.array_equal(uL, uR):
                continue
            left = self._order[-1].uR if self._order else uL
            specs = accurate_solver(model, left, uR, self.eps)
            for sp in specs:
                self._order.append(self._new_front(sp, 0.0, x, 1))
        self.log.initial = [(x, u.copy()) for x, u in pts]
        return list(self._order)

    def _calibrate(self, live):
        """``c0 = 2 * max(Delta V / -Delta Q)`` over pilot pair interactions."""
        n = self.model.n
        ratios = []
        for a, b in zip(live[:-1], live[1:]):
            if a.speed <= b.speed or not (a.physical and b.physical):
                continue
            try:
                out = accurate_solver(self.model, a.uL, b.uR, self.eps)
            except RiemannError:
                continue
            tmp = []
            for sp in out:
                f = Front(-1, sp.family, 0, 0, sp.speed, sp.uL, sp.uR, sp.s, sp.kind)
                f.sigma = sp.curve.speed_samples(SIGMA_SAMPLES) if sp.curve is not None else None
                tmp.append(f)
            v0, q0 = glimm_functionals([a, b], n)
            v1, q1 = glimm_functionals(tmp, n)
            if q1 < q0 and v1 > v0:
                ratios.append((v1 - v0) / (q0 - q1))
        return 2.0 * max([1.0] + ratios)

    def run(self, t_end):
        """Advance until ``t_end`` and return the :class:`FrontLog`."""
        model, n = self.model, self.model.n
        log = self.log
        log.t_end = float(t_end)
        live = self._order
        if self.c0 is None:
            self.c0 = self._calibrate(live)
        log.ledger = GlimmLedger(self.c0)
        ids = {f.id: f for f in live}
        nxt = {}
        prv = {}
        for a, b in zip(live[:-1], live[1:]):
            nxt[a.id], prv[b.id] = b.id, a.id
        self._queue = []
        for a, b in zip(live[:-1], live[1:]):
            self._schedule(a, b, 0.0)
        head = live[0].id if live else None
        order_cache = live[:]
        v_now, q_now = glimm_functionals(order_cache, n)
        events = 0
        now = 0.0
        while self._queue:
            t, x, ia, ib = heapq.heappop(self._queue)
            if t > t_end:
                break
            if ia not in ids or ib not in ids or nxt.get(ia) != ib:
                continue
            events += 1
            if events > self.max_events:
                raise TrackerError("event limit reached")
            now = max(now, t)
            a, b = ids[ia], ids[ib]
            specs, solver, amount = self._resolve(a, b)
            amount_c = amount + cancellation(a, b)
            node_id = len(log.nodes)
            gen = max(a.generation, b.generation)
            outs = []
            for sp in specs:
                if sp.family == a.family and sp.family == b.family:
                    g = min(a.generation, b.generation)
                elif sp.family == a.family:
                    g = a.generation
                elif sp.family == b.family:
                    g = b.generation
                else:
                    g = gen + 1
                outs.append(self._new_front(sp, now, x, g, node_id))
            for f in (a, b):
                f.t_death = now
                f.death_node = node_id
                del ids[f.id]
            left_id = prv.pop(ia, None)
            right_id = nxt.pop(ib, None)
            nxt.pop(ia, None)
            prv.pop(ib, None)
            chain = [left_id] + [f.id for f in outs] + [right_id]
            for f in outs:
                ids[f.id] = f
            for p, q in zip(chain[:-1], chain[1:]):
                if p is not None and q is not None:
                    nxt[p], prv[q] = q, p
            if head == ia:
                head = chain[1]
            if len(ids) > self.max_fronts:
                raise TrackerError("front explosion")
            for p, q in zip(chain[:-1], chain[1:]):
                self._schedule(ids.get(p) if p is not None else None,
                               ids.get(q) if q is not None else None, now)
            log.nodes.append(InteractionNode(node_id, now, x, (a.id, b.id), [f.id for f in outs],
                                             amount, amount_c, solver))
            ordered = self._walk(head, ids, nxt)
            v_new, q_new = glimm_functionals(ordered, n)
            log.ledger.record(node_id, now, v_now, q_now, v_new, q_new, amount, amount_c)
            v_now, q_now = v_new, q_new
        self._final = self._walk(head, ids, nxt)
        return log

    @staticmethod
    def _walk(head, ids, nxt):
        out = []
        k = head
        while k is not None:
            out.append(ids[k])
            k = nxt.get(k)
        return out

    def _resolve(self, a, b):
        model, n = self.model, self.model.n
        uL, uR = a.uL, b.uR
        if a.family == n:
            amount = interaction_amount(model, a, b)
            return crude_solver(model, uL, uR, (b.family, b.s)), "crude", amount
        if b.family == n:
            raise TrackerError("nonphysical front overtaken from the left")
        amount = interaction_amount(model, a, b, self.log.curve_of)
        if amount >= self.rho:
            return accurate_solver(model, uL, uR, self.eps), "accurate", amount
        return simplified_solver(model, uL, uR, (a.family, a.s), (b.family, b.s)), "simplified", amount


def run(model, eps, breakpoints, t_end, **kw):
    """Convenience wrapper: initialise, run and return the log."""
    tr = FrontTracker(model, eps, **kw)
    tr.init_approximation(breakpoints)
    return tr.run(t_end)


def next_interaction(fronts, now=0.0):
    """Earliest crossing among adjacent fronts of an ordered list.

    Returns ``(t, x, left_index)`` or None.
    """
    best = None
    for k, (a, b) in enumerate(zip(fronts[:-1], fronts[1:])):
        if a.speed <= b.speed:
            continue
        gap = max(0.0, b.position(now) - a.position(now))
        t = now + gap / (a.speed - b.speed)
        cand = (t, a.position(t), k)
        if best is None or cand < best:
            best = cand
    return best


@dataclass
class Balance:
    """Strength of one family entering and leaving a region.

    ``pos`` and ``neg`` split the totals by the sign of the strength
    (``neg`` holds absolute values).
    """

    w_in: float = 0.0
    w_out: float = 0.0
    in_pos: float = 0.0
    in_neg: float = 0.0
    out_pos: float = 0.0
    out_neg: float = 0.0
    mu_I: float = 0.0
    mu_IC: float = 0.0

    @property
    def imbalance(self):
        return abs(self.w_out - self.w_in)

    @property
    def imbalance_split(self):
        return max(abs(self.out_pos - self.in_pos), abs(self.out_neg - self.in_neg))

    def constants(self):
        """Smallest ``C`` with ``|dW| <= C mu_I`` and ``|dW+-| <= C mu_IC`` (inf if violated at zero)."""
        def ratio(d, mu):
            if d <= 1e-14:
                return 0.0
            return d / mu if mu > 0 else math.inf
        return ratio(self.imbalance, self.mu_I), ratio(self.imbalance_split, self.mu_IC)

    def _add(self, s, sign):
        if sign > 0:
            self.w_in += s
            self.in_pos += max(s, 0.0)
            self.in_neg += max(-s, 0.0)
        else:
            self.w_out += s
            self.out_pos += max(s, 0.0)
            self.out_neg += max(-s, 0.0)


def wave_balance(log, polygon, family):
    """Signed strength of ``family`` crossing the boundary of a polygon in the ``(t, x)`` plane.

    A front enters where its segment meets the boundary away from its
    birth point (fronts of the initial data entering along ``t = 0`` count
    as entering) and leaves where it meets the boundary away from its
    death point.  Returns a :class:`Balance` with the interaction and
    cancellation measures of the nodes inside.
    """
    from shapely.geometry import LineString, Point, Polygon

    poly = Polygon(polygon)
    boundary = poly.boundary
    out = Balance()
    for f in log.fronts.values():
        if f.family != family:
            continue
        t1 = min(f.t_death, log.t_end)
        if t1 <= f.t_birth:
            continue
        seg = LineString([(f.t_birth, f.x_birth), (t1, f.position(t1))])
        if not seg.intersects(poly):
            continue
        if seg.intersection(boundary).length > 1e-12:
            raise ValueError("non-transversal edge")
        inside = seg.intersection(poly)
        for part in getattr(inside, "geoms", [inside]):
            if part.is_empty or part.length == 0:
                continue
            start, end = sorted([part.coords[0], part.coords[-1]])
            on_start = boundary.distance(Point(start)) < 1e-12
            if on_start and (abs(start[0] - f.t_birth) > 1e-12 or f.t_birth == 0.0):
                out._add(f.s, +1)
            if boundary.distance(Point(end)) < 1e-12 and abs(end[0] - f.t_death) > 1e-12:
                out._add(f.s, -1)
    for nd in log.nodes:
        if poly.contains(Point(nd.t, nd.x)):
            out.mu_I += nd.I
            out.mu_IC += nd.IC
    return out
