"""Line-oriented text formats for front logs, snapshots and ledgers.

Floats are written with ``repr`` so every file reads back to identical
values.
"""
from __future__ import annotations

import json
import math

import numpy as np

from .tracker import Front, FrontLog, GlimmLedger, InteractionNode

FRONT_FIELDS = ("id", "family", "kind", "t_birth", "t_death", "x_birth", "speed", "s", "generation",
                "birth_node", "death_node")


def _f(x):
    return repr(float(x))


def _vec(u):
    return " ".join(_f(v) for v in np.atleast_1d(u))


def describe_model(model):
    """Configuration ``(name, params)`` that rebuilds ``model`` via ``make_model``."""
    if getattr(model, "config", None) is not None:
        return model.config
    if model.name == "coupled66":
        return "coupled66", {"a_values": [float(a) for a in model.table.a_values]}
    if model.name == "two_inflection":
        return "two_inflection", {"width": float(model.width), "drift": float(model.drift)}
    if model.name == "burgers":
        return "burgers", {}
    return model.name, {}


def export_log(log, path):
    """Write ``log`` as header, one ``F`` line per front and one ``N`` line per node."""
    with open(path, "w") as fh:
        name, params = describe_model(log.model)
        meta = {"model": name, "model_params": params,
                "n": log.model.n, "eps": log.eps, "rho": log.rho, "t_end": log.t_end,
                "c0": log.ledger.c0, "u_far_left": [float(v) for v in log.u_far_left]}
        fh.write("# frontlog " + json.dumps(meta, sort_keys=True) + "\n")
        for fid in sorted(log.fronts):
            f = log.fronts[fid]
            level = "nan" if f.level is None else _f(f.level)
            fh.write(f"F {f.id} {f.family} {f.kind} {_f(f.t_birth)} {_f(f.t_death)} {_f(f.x_birth)} "
                     f"{_f(f.speed)} {_f(f.s)} {f.generation} {f.birth_node} {f.death_node} {level} | "
                     f"{_vec(f.uL)} | {_vec(f.uR)}\n")
        for n in log.nodes:
            fh.write(f"N {n.id} {_f(n.t)} {_f(n.x)} {','.join(map(str, n.in_ids))} "
                     f"{','.join(map(str, n.out_ids)) or '-'} {_f(n.I)} {_f(n.IC)} {n.solver}\n")
        for row in log.ledger.rows:
            fh.write("L " + " ".join(_f(v) for v in row) + "\n")
    return path


def read_log(path, model=None):
    """Parse a front log.  ``model`` defaults to the one named in the header."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith("# frontlog "):
        raise ValueError(f"{path}: not a front log")
    meta = json.loads(lines[0][len("# frontlog "):])
    if model is None:
        from .flux_model import make_model
        model = make_model(meta["model"], **meta["model_params"])
    log = FrontLog(model, meta["eps"], meta["rho"])
    log.t_end = meta["t_end"]
    log.u_far_left = np.array(meta["u_far_left"], dtype=float)
    log.ledger = GlimmLedger(meta["c0"])
    for lineno, line in enumerate(lines[1:], start=2):
        tag = line[:1]
        try:
            if tag == "F":
                head, uL, uR = line[2:].split(" | ")
                p = head.split()
                level = float(p[11])
                f = Front(int(p[0]), int(p[1]), float(p[3]), float(p[5]), float(p[6]),
                          np.array(uL.split(), dtype=float), np.array(uR.split(), dtype=float),
                          float(p[7]), p[2], int(p[8]), None if math.isnan(level) else level,
                          float(p[4]), int(p[9]), int(p[10]))
                log.add_front(f)
            elif tag == "N":
                p = line[2:].split()
                outs = [] if p[4] == "-" else [int(q) for q in p[4].split(",")]
                log.nodes.append(InteractionNode(int(p[0]), float(p[1]), float(p[2]),
                                                 tuple(int(q) for q in p[3].split(",")), outs,
                                                 float(p[5]), float(p[6]), p[7]))
            elif tag == "L":
                v = [float(q) for q in line[2:].split()]
                log.ledger.rows.append((int(v[0]),) + tuple(v[1:]))
        except (ValueError, IndexError) as exc:
            raise ValueError(f"{path}:{lineno}: malformed record ({exc})") from exc
    return log


def logs_equal(a, b):
    """Field-wise equality of two logs (curves are ignored)."""
    if sorted(a.fronts) != sorted(b.fronts) or len(a.nodes) != len(b.nodes):
        return False
    for fid in a.fronts:
        fa, fb = a.fronts[fid], b.fronts[fid]
        for name in FRONT_FIELDS + ("level",):
            if getattr(fa, name) != getattr(fb, name):
                return False
        if not (np.array_equal(fa.uL, fb.uL) and np.array_equal(fa.uR, fb.uR)):
            return False
    for na, nb in zip(a.nodes, b.nodes):
        if (na.id, na.t, na.x, tuple(na.in_ids), list(na.out_ids), na.I, na.IC, na.solver) != \
                (nb.id, nb.t, nb.x, tuple(nb.in_ids), list(nb.out_ids), nb.I, nb.IC, nb.solver):
            return False
    return a.ledger.rows == b.ledger.rows and a.t_end == b.t_end and a.eps == b.eps


def export_snapshots(log, times, path):
    """Breakpoints and states of the approximate solution at each time."""
    with open(path, "w") as fh:
        for t in times:
            xs, states = log.sample_solution(t)
            fh.write(f"@ t {_f(t)}\n")
            fh.write(f"breakpoints {len(xs)}\n")
            for x in xs:
                fh.write(_f(x) + "\n")
            fh.write(f"states {len(states)}\n")
            for u in states:
                fh.write(_vec(u) + "\n")
    return path


def read_snapshots(path):
    """``{t: (x, states)}`` from :func:`export_snapshots`."""
    out = {}
    with open(path) as fh:
        lines = fh.read().splitlines()
    j = 0
    while j < len(lines):
        t = float(lines[j].split()[2])
        nb = int(lines[j + 1].split()[1])
        xs = np.array([float(v) for v in lines[j + 2:j + 2 + nb]])
        j += 2 + nb
        ns = int(lines[j].split()[1])
        states = np.array([[float(v) for v in row.split()] for row in lines[j + 1:j + 1 + ns]])
        j += 1 + ns
        out[t] = (xs, states)
    return out


def export_ledger(log, path):
    """Time series of ``V``, ``Q`` and ``Upsilon`` around every node."""
    header = "node t V_before Q_before V_after Q_after I IC Ups_before Ups_after"
    a = log.ledger.array()
    if a.size:
        before, after = log.ledger.upsilon()
        a = np.column_stack([a, before, after])
    else:
        a = np.zeros((0, 10))
    with open(path, "w") as fh:
        fh.write(f"# c0 {_f(log.ledger.c0)}\n# {header}\n")
        for row in a:
            fh.write(" ".join(_f(v) for v in row) + "\n")
    return path


def read_ledger(path):
    with open(path) as fh:
        c0 = float(fh.readline().split()[2])
        rows = [line for line in fh if not line.startswith("#")]
    data = np.loadtxt(rows, ndmin=2) if rows else np.zeros((0, 10))
    return c0, data


def export_fronts_xt(log, path):
    """Segments ``t0 x0 t1 x1 family s`` for x-t front diagrams."""
    with open(path, "w") as fh:
        fh.write("# t0 x0 t1 x1 family s\n")
        for fid in sorted(log.fronts):
            f = log.fronts[fid]
            t1 = min(f.t_death, log.t_end)
            fh.write(f"{_f(f.t_birth)} {_f(f.x_birth)} {_f(t1)} {_f(f.position(t1))} {f.family} {_f(f.s)}\n")
    return path


def l1_distance(snap_a, snap_b, lo=None, hi=None):
    """``L1`` distance of two piecewise-constant profiles ``(x, states)``."""
    xa, sa = snap_a
    xb, sb = snap_b
    pts = np.unique(np.concatenate([xa, xb]))
    if pts.size == 0:
        return 0.0 if np.array_equal(sa[0], sb[0]) else math.inf
    lo = pts[0] - 1.0 if lo is None else lo
    hi = pts[-1] + 1.0 if hi is None else hi
    grid = np.unique(np.clip(np.concatenate([[lo, hi], pts]), lo, hi))
    mids = 0.5 * (grid[:-1] + grid[1:])
    ua = sa[np.searchsorted(xa, mids, side="right")]
    ub = sb[np.searchsorted(xb, mids, side="right")]
    return float(np.sum(np.abs(ua - ub).sum(axis=1) * np.diff(grid)))
