"""Discontinuity structure of front-tracking approximations.

Fronts are split into ``(i, k)``-subdiscontinuity fronts according to
the GNL region ``k`` of family ``i`` that each part of their elementary
curve visits.  Subfronts above a threshold are chained through the
interaction nodes into approximate subdiscontinuity curves, matched
across a sequence of resolutions, and used to check the jump
conditions at sampled points.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import brentq

from .riemann import hugoniot_speed, liu_admissible

CROSSING_TOL = 1e-12
SCAN_POINTS = 257
POINT_TOL = 1e-10
BACK_GUARD = 1e-12
MAX_STEPS = 100_000


class StructureError(ValueError):
    pass


# ---------------------------------------------------------------------------
# substrengths

@dataclass(frozen=True)
class SubFrontRecord:
    """Part of a front lying in region ``k`` of family ``i``."""

    parent: int
    family: int
    region: int
    strength: float
    bracket: tuple


def _crossings(curve, model, tol=None):
    """Local parameters where ``grad lambda . r`` changes sign along the curve."""
    tol = CROSSING_TOL if tol is None else tol
    lo, hi = min(0.0, curve.s), max(0.0, curve.s)
    if hi == lo:
        return []
    prof = curve.profile
    off = curve.offset
    g = lambda t: float(np.asarray(prof.d2f(off + t)).ravel()[0])
    t = np.linspace(lo, hi, SCAN_POINTS)
    vals = np.array([g(x) for x in t])
    vals[np.abs(vals) <= model.manifold_tol] = 0.0
    out = []
    last = None
    for j in range(t.size):
        if vals[j] == 0.0:
            continue
        if last is not None and np.sign(vals[j]) != np.sign(vals[last]):
            out.append(brentq(g, t[last], t[j], xtol=tol))
        last = j
    return out


def decompose_substrengths(model, front, curve=None):
    """Split a physical front into its ``(i, k)``-subfronts.

    Only regions whose parity matches the sign of the strength are kept:
    even ``k`` for ``s > 0`` and odd ``k`` for ``s < 0``.  End intervals
    that reach into a region without crossing all the way through it are
    included.
    """
    if not front.physical or front.s == 0.0:
        return []
    curve = curve if curve is not None else front.curve
    if curve is None:
        from .riemann import fixed_point_curve
        curve = fixed_point_curve(model, front.uL, front.s, front.family)
    k0, _ = model.region(front.uL, front.family)
    cuts = _crossings(curve, model)
    s = curve.s
    if s > 0:
        bounds = [0.0] + cuts + [s]
        regions = [k0 + j for j in range(len(bounds) - 1)]
    else:
        bounds = [0.0] + cuts[::-1] + [s]
        regions = [k0 - j for j in range(len(bounds) - 1)]
    parity = 0 if s > 0 else 1
    out = []
    for (a, b), k in zip(zip(bounds[:-1], bounds[1:]), regions):
        if k % 2 != parity or b == a:
            continue
        out.append(SubFrontRecord(front.id, front.family, int(k), float(b - a), (float(a), float(b))))
    return out


def substrength_table(log, model, i):
    """``{front id: {k: SubFrontRecord}}`` for the physical fronts of family ``i``."""
    cache = log.params.setdefault("_substrengths", {})
    if i in cache:
        return cache[i]
    table = {}
    for f in log.fronts.values():
        if f.family != i or not f.physical:
            continue
        recs = decompose_substrengths(model, f, log.curve_of(f))
        table[f.id] = {r.region: r for r in recs}
    cache[i] = table
    return table


# ---------------------------------------------------------------------------
# approximate subdiscontinuity curves

@dataclass
class ApproxSubCurve:
    """Polygonal chain of ``(i, k)``-subfronts through interaction nodes."""

    family: int
    region: int
    eps: float
    nodes: list
    strengths: list
    fronts: list
    maximal: bool = True

    @property
    def t0(self):
        return self.nodes[0][0]

    @property
    def t1(self):
        return self.nodes[-1][0]

    def position(self, t):
        tt = np.array([p[0] for p in self.nodes])
        xx = np.array([p[1] for p in self.nodes])
        return np.interp(t, tt, xx)

    def slopes(self):
        p = np.asarray(self.nodes, dtype=float)
        dt = np.diff(p[:, 0])
        return np.diff(p[:, 1]) / np.where(dt > 0, dt, np.inf)


def _qualifies(s, eps, full=False):
    bar = eps if full else eps / 2
    return s >= bar if eps > 0 else s <= bar


def extract_approx_subcurves(log, model, eps, i, k):
    """Maximal ``(eps, i, k)``-approximate subdiscontinuity curves of one run.

    At a node reached by several qualifying subfronts the chain continues
    along the one coming from the left; the others end there.
    """
    if eps == 0:
        raise StructureError("eps must be nonzero")
    table = substrength_table(log, model, i)
    strength = {fid: recs[k].strength for fid, recs in table.items()
                if k in recs and _qualifies(recs[k].strength, eps)}
    fronts = log.fronts
    succ = {}
    continued = set()
    for node in log.nodes:
        inc = [fid for fid in node.in_ids if fid in strength]
        out = [fid for fid in node.out_ids if fid in strength]
        if not inc or not out:
            continue
        # in_ids are stored left to right
        head = inc[0]
        nxt = max(out, key=lambda fid: abs(strength[fid]))
        succ[head] = nxt
        continued.add(nxt)
    curves = []
    for fid in sorted(strength, key=lambda q: (fronts[q].t_birth, fronts[q].x_birth)):
        if fid in continued:
            continue
        chain = [fid]
        while chain[-1] in succ:
            chain.append(succ[chain[-1]])
        ss = [strength[q] for q in chain]
        if not any(_qualifies(s, eps, full=True) for s in ss):
            continue
        f0 = fronts[chain[0]]
        nodes = [(f0.t_birth, f0.x_birth)]
        for q in chain:
            f = fronts[q]
            t = min(f.t_death, log.t_end)
            nodes.append((t, f.position(t)))
        curves.append(ApproxSubCurve(i, k, eps, nodes, ss, chain))
    return curves


def curve_count(logs, model, eps, i, k):
    """Number of maximal curves per log, for the ``eps**-2`` bound."""
    return [len(extract_approx_subcurves(log, model, eps, i, k)) for log in logs]


# ---------------------------------------------------------------------------
# limit curves

@dataclass
class LimitCurve:
    family: int
    region: int
    eps: float
    t_range: tuple
    times: np.ndarray
    x: np.ndarray
    provenance: list
    distances: list
    ambiguous: bool = False

    def position(self, t):
        return np.interp(t, self.times, self.x)

    def slope(self, t):
        j = np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, self.times.size - 2)
        return float((self.x[j + 1] - self.x[j]) / (self.times[j + 1] - self.times[j]))

    def lipschitz(self):
        dt = np.diff(self.times)
        ok = dt > 0
        return float(np.max(np.abs(np.diff(self.x)[ok] / dt[ok]))) if np.any(ok) else 0.0


class CurveSet(list):
    """List of converged limit curves plus the matching diagnostics."""

    def __init__(self, items=(), unmatched=(), ambiguous=()):
        super().__init__(items)
        self.unmatched = list(unmatched)
        self.ambiguous = list(ambiguous)


def sup_distance(c1, c2, samples=201):
    """Uniform distance on the overlap of the two time domains (inf if disjoint)."""
    lo, hi = max(c1.t0, c2.t0), min(c1.t1, c2.t1)
    if hi < lo:
        return math.inf
    t = np.linspace(lo, hi, samples)
    return float(np.max(np.abs(c1.position(t) - c2.position(t))))


def limit_subcurves(logs, model, i, k, eps, tol=None):
    """Match curves across runs of decreasing ``eps_nu`` and keep converging lineages.

    Matching is greedy nearest neighbour in the uniform distance with
    threshold ``10 eps_nu (lambda_hat + 1)``.  A lineage becomes a
    :class:`LimitCurve` when its successive distances do not increase and
    the last one is below ``tol``.
    """
    if len(logs) < 3:
        raise StructureError("at least three runs are needed")
    logs = sorted(logs, key=lambda lg: -lg.eps)
    lam = float(model.lambda_hat)
    per = [extract_approx_subcurves(lg, model, eps, i, k) for lg in logs]
    lineages = [[c] for c in per[0]]
    dists = [[] for _ in lineages]
    flags = [False] * len(lineages)
    unmatched = []
    ambiguous = []
    for nu in range(1, len(per)):
        thr = 10 * logs[nu].eps * (lam + 1)
        used = set()
        new_l, new_d, new_f = [], [], []
        for lin, d, fl in zip(lineages, dists, flags):
            cands = sorted(((sup_distance(lin[-1], c), j) for j, c in enumerate(per[nu])),
                           key=lambda p: p[0])
            cands = [p for p in cands if p[0] <= thr]
            if not cands:
                unmatched.append(lin)
                continue
            amb = len(cands) > 1 and cands[1][0] <= thr and cands[1][0] - cands[0][0] <= thr / 10
            picks = cands[:2] if amb else cands[:1]
            if amb:
                ambiguous.append(lin)
            for dist, j in picks:
                used.add(j)
                new_l.append(lin + [per[nu][j]])
                new_d.append(d + [dist])
                new_f.append(fl or amb)
        unmatched.extend([c] for j, c in enumerate(per[nu]) if j not in used and nu == len(per) - 1)
        lineages, dists, flags = new_l, new_d, new_f
    tol = 10 * logs[-1].eps * (lam + 1) if tol is None else tol
    out = []
    for lin, d, fl in zip(lineages, dists, flags):
        mono = all(b <= a + 1e-12 for a, b in zip(d[:-1], d[1:]))
        if mono and d and d[-1] < tol:
            last = lin[-1]
            p = np.asarray(last.nodes, dtype=float)
            out.append(LimitCurve(i, k, eps, (last.t0, last.t1), p[:, 0], p[:, 1], lin, d, fl))
        else:
            unmatched.append(lin)
    return CurveSet(out, unmatched, ambiguous)


# ---------------------------------------------------------------------------
# generalized characteristics

@dataclass
class CharacteristicPath:
    family: int
    anchor: tuple
    direction: str
    points: list = field(default_factory=list)

    def position(self, t):
        p = np.asarray(self.points[::-1], dtype=float)
        return np.interp(t, p[:, 0], p[:, 1])

    def slopes(self):
        p = np.asarray(self.points[::-1], dtype=float)
        dt = np.diff(p[:, 0])
        return np.diff(p[:, 1]) / np.where(dt > 0, dt, np.inf)


def _incoming(log, t, x):
    """Fronts through ``(t, x)`` that exist just before ``t``, left to right."""
    tol = POINT_TOL * (1.0 + abs(x))
    inc = [f for f in log.fronts.values()
           if f.t_birth < t - BACK_GUARD and t <= f.t_death + BACK_GUARD and abs(f.position(t) - x) <= tol]
    inc.sort(key=lambda f: (-f.speed, f.id))
    return inc


def _options(log, model, i, t, x):
    """Ordered backward continuations: sectors and fronts from left to right."""
    inc = _incoming(log, t, x)
    lam = lambda u: float(model.speeds(u)[i])
    if not inc:
        u = log.evaluate(max(t - BACK_GUARD * 10, 0.0), x) if t > 0 else log.evaluate(0.0, x)
        return [("sector", lam(u), None)]
    opts = []
    bounds = [math.inf] + [f.speed for f in inc] + [-math.inf]
    states = [inc[0].uL] + [f.uR for f in inc]
    for j, u in enumerate(states):
        c = lam(u)
        # backward ray lies between the left bound (speed a) and right bound (speed b) iff b <= c <= a
        if bounds[j + 1] <= c <= bounds[j]:
            opts.append(("sector", c, None))
        if j < len(inc):
            f = inc[j]
            lo, hi = sorted((lam(f.uR), lam(f.uL)))
            if lo - 1e-14 <= f.speed <= hi + 1e-14:
                opts.append(("front", f.speed, f))
    return opts


def _next_hit(log, t, x, c, skip):
    """Latest time ``< t`` at which the backward ray of slope ``c`` meets a front."""
    best = 0.0
    for f in log.fronts.values():
        if f.id in skip or f.t_birth >= t:
            continue
        dv = f.speed - c
        if dv == 0.0:
            continue
        # x_f(tau) = x - c (t - tau)
        tau = t + (x - f.position(t)) / dv
        if tau < t - BACK_GUARD and tau >= max(f.t_birth, best) and tau <= f.t_death:
            best = tau
    return best


def generalized_characteristic(log, model, anchor, i, direction="minimal"):
    """Minimal or maximal backward generalized characteristic of family ``i``.

    In constant states the path has slope ``lambda_i(u)``; on reaching a
    front or a node the minimal path takes the leftmost admissible
    continuation and the maximal path the rightmost one.
    """
    T, xbar = float(anchor[0]), float(anchor[1])
    if not (0.0 <= T <= log.t_end):
        raise StructureError("anchor outside the simulated window")
    if direction not in ("minimal", "maximal"):
        raise StructureError("direction must be 'minimal' or 'maximal'")
    path = CharacteristicPath(i, (T, xbar), direction, [(T, xbar)])
    t, x = T, xbar
    for _ in range(MAX_STEPS):
        if t <= 0.0:
            break
        opts = _options(log, model, i, t, x)
        if not opts:
            raise StructureError("no admissible backward continuation")
        kind, c, f = opts[0] if direction == "minimal" else opts[-1]
        if kind == "front":
            t1 = max(f.t_birth, 0.0)
        else:
            skip = {g.id for g in _incoming(log, t, x)}
            t1 = _next_hit(log, t, x, c, skip)
        x = x - c * (t - t1)
        t = t1
        path.points.append((t, x))
    return path


# ---------------------------------------------------------------------------
# measure atoms

@dataclass
class AtomCluster:
    t: float
    x: float
    masses: dict
    stable: bool

    def mass(self, eps=None, which="IC"):
        eps = min(self.masses) if eps is None else eps
        return self.masses.get(eps, {"I": 0.0, "IC": 0.0})[which]


def measure_atoms(logs, window_radius, floor=1e-6):
    """Cluster interaction nodes of all runs by proximity.

    Each cluster records the summed ``I`` and ``IC`` per run.  A cluster
    is stable when its finest-run mass is above ``floor`` and within a
    factor two of the previous run.
    """
    pts = []
    for lg in logs:
        for n in lg.nodes:
            if n.IC > 0 or n.I > 0:
                pts.append((n.t, n.x, lg.eps, n.I, n.IC))
    clusters = []
    for t, x, eps, I, IC in sorted(pts):
        for c in clusters:
            if math.hypot(c["t"] - t, c["x"] - x) <= window_radius:
                m = c["m"].setdefault(eps, {"I": 0.0, "IC": 0.0})
                m["I"] += I
                m["IC"] += IC
                w = c["w"] + IC
                if w > 0:
                    c["t"] = (c["t"] * c["w"] + t * IC) / w
                    c["x"] = (c["x"] * c["w"] + x * IC) / w
                c["w"] = w
                break
        else:
            clusters.append({"t": t, "x": x, "w": IC, "m": {eps: {"I": I, "IC": IC}}})
    eps_all = sorted({lg.eps for lg in logs}, reverse=True)
    out = []
    for c in clusters:
        ms = [c["m"].get(e, {"IC": 0.0})["IC"] for e in eps_all]
        stable = ms[-1] > floor and (len(ms) < 2 or (ms[-2] > 0 and 0.5 <= ms[-1] / ms[-2] <= 2.0))
        out.append(AtomCluster(c["t"], c["x"], c["m"], bool(stable)))
    return out


def cluster_mass(atoms, point, radius, eps, which="IC"):
    """Total mass of the clusters within ``radius`` of ``point`` for run ``eps``."""
    t0, x0 = point
    return sum(a.mass(eps, which) for a in atoms if math.hypot(a.t - t0, a.x - x0) <= radius)


# ---------------------------------------------------------------------------
# jump points

@dataclass
class JumpReport:
    point: tuple
    radius: float
    p: int
    slopes: list
    slope: float
    uL: list
    uR: list
    rh_residual: float
    liu_ok: bool
    liu_margin: float
    intermediate: list
    multiplicity: str
    trend: list

    def to_text(self):
        lines = []
        for key, val in asdict(self).items():
            lines.append(f"{key} = {json.dumps(_plain(val))}")
        return "\n".join(lines) + "\n"


def _plain(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, np.generic):
        return v.item()
    return v


def parse_report(text):
    return {k.strip(): json.loads(v) for k, v in (line.split(" = ", 1) for line in text.splitlines() if line)}


def _window_fronts(log, model, family, t0, x0, r, floor):
    # fronts carrying a subdiscontinuity above the floor stand for the curves
    table = substrength_table(log, model, family)
    out = []
    for f in log.live_at(t0):
        if f.family != family or abs(f.position(t0) - x0) > r:
            continue
        recs = table.get(f.id, {})
        if any(abs(rec.strength) >= floor for rec in recs.values()):
            out.append(f)
    return out


def verify_jump_point(logs, model, point, family=0, radii=(8, 4, 2, 1), atom_threshold=None,
                      strength_floor=None):
    """Jump conditions at ``point`` measured on the finest run.

    Fronts of ``family`` within ``r = radius * eps (lambda_hat + 1)`` of
    the point whose subdiscontinuity strength exceeds the floor stand for
    the covering curves.  ``uL`` and ``uR`` are read
    just outside the leftmost and rightmost of them.  The trend entries
    hold ``(r, p, rh_residual)`` for each radius.
    """
    logs = sorted(logs, key=lambda lg: -lg.eps)
    fine = logs[-1]
    t0, x0 = float(point[0]), float(point[1])
    lam = float(model.lambda_hat)
    eps = fine.eps
    floor = eps / 2 if strength_floor is None else strength_floor
    rmax = radii[0] * eps * (lam + 1)
    if atom_threshold is not None:
        atoms = measure_atoms([fine], rmax)
        if cluster_mass(atoms, (t0, x0), rmax, eps) > atom_threshold:
            raise StructureError("interaction point, theorem not applicable")
    trend = []
    best = None
    for rr in radii:
        r = rr * eps * (lam + 1)
        fs = _window_fronts(fine, model, family, t0, x0, r, floor)
        if not fs:
            trend.append((r, 0, math.nan))
            continue
        xl = min(f.position(t0) for f in fs)
        xr = max(f.position(t0) for f in fs)
        uL = fine.evaluate(t0, xl - 1e-9 * (1 + abs(xl)))
        uR = fine.evaluate(t0, xr + 1e-9 * (1 + abs(xr)))
        speeds = [f.speed for f in fs]
        slope = float(np.mean(speeds))
        res = float(np.linalg.norm(slope * (uR - uL) - (model.flux(uR) - model.flux(uL))))
        trend.append((r, len(fs), res))
        best = (r, fs, uL, uR, speeds, slope, res)
    if best is None:
        raise StructureError("no discontinuity near the point")
    r, fs, uL, uR, speeds, slope, res = best
    try:
        ok, margin = liu_admissible(model, uL, uR, family)
    except Exception:
        ok, margin = False, math.nan
    inter = [f.uR.tolist() for f in sorted(fs, key=lambda f: f.position(t0))[:-1]]
    distinct = len({round(f.position(t0), 12) for f in fs})
    mult = "multiplicity undetermined" if distinct < len(fs) else "resolved"
    return JumpReport((t0, x0), r, len(fs), speeds, slope, uL.tolist(), uR.tolist(), res, bool(ok),
                      float(margin), inter, mult, trend)


# ---------------------------------------------------------------------------
# export

def export_curves(curves, path):
    """Write curves grouped by ``(family, region)`` as one JSON document per group."""
    groups = {}
    for c in curves:
        doc = groups.setdefault(f"{c.family},{c.region}", {"family": c.family, "region": c.region,
                                                            "curves": []})
        if isinstance(c, LimitCurve):
            doc["curves"].append({"type": "limit", "eps": c.eps, "t": c.times.tolist(),
                                  "x": c.x.tolist(), "distances": list(c.distances),
                                  "ambiguous": c.ambiguous,
                                  "provenance": [q.fronts for q in c.provenance]})
        else:
            doc["curves"].append({"type": "approx", "eps": c.eps, "nodes": [list(p) for p in c.nodes],
                                  "strengths": list(c.strengths), "fronts": list(c.fronts),
                                  "maximal": c.maximal})
    with open(path, "w") as fh:
        json.dump(list(groups.values()), fh, indent=1)
    return path


def load_curves(path):
    """Inverse of :func:`export_curves`; limit curves come back without provenance objects."""
    with open(path) as fh:
        docs = json.load(fh)
    out = []
    for doc in docs:
        i, k = doc["family"], doc["region"]
        for c in doc["curves"]:
            if c["type"] == "approx":
                out.append(ApproxSubCurve(i, k, c["eps"], [tuple(p) for p in c["nodes"]], c["strengths"],
                                          c["fronts"], c["maximal"]))
            else:
                t, x = np.array(c["t"]), np.array(c["x"])
                out.append(LimitCurve(i, k, c["eps"], (t[0], t[-1]), t, x, c["provenance"],
                                      c["distances"], c["ambiguous"]))
    return out


def non_crossing(c1, c2, samples=201):
    """True when ``sign(c1 - c2)`` is constant on the common lifetime (touching allowed)."""
    lo, hi = max(c1.t0, c2.t0), min(c1.t1, c2.t1)
    if hi <= lo:
        return True
    t = np.linspace(lo, hi, samples)
    d = c1.position(t) - c2.position(t)
    d = d[np.abs(d) > 1e-12]
    return d.size == 0 or bool(np.all(d > 0) or np.all(d < 0))
