"""Batch front end.

Usage::

    wavefront run CONFIG [--out DIR] [--workers N]
    wavefront converge CONFIG [--out DIR] [--workers N]
    wavefront analyze LOGDIR --curves i,k,eps --verify t,x [--out DIR]

Configs are TOML files.  A minimal one::

    model = "burgers"
    eps = 0.01
    t_end = 2.0
    initial_data = [[-1.0, [1.0]], [0.0, [0.0]]]
    snapshots = [1.0, 2.0]

``initial_data`` may be replaced by ``scenario = "<name>"`` (see
:data:`wavefront.example_lab.SCENARIOS`) with a ``[scenario_params]``
table, or by ``cantor = {m = 1, h = 1.0, a0 = 0.5, decay = 1.0}``.
Tolerances live in ``[numerics]``; see :data:`NUMERICS` for the keys and
defaults.
"""
from __future__ import annotations

import argparse
import importlib
import itertools
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

log = logging.getLogger("wavefront")

# key -> (module, attribute, default, meaning)
NUMERICS = {
    "grid_nodes": ("riemann", "GRID_NODES", 256, "initial cells of the fixed-point grid"),
    "fixed_point_tol": ("riemann", "FIXED_POINT_TOL", 1e-11, "contraction stopping distance"),
    "fixed_point_maxit": ("riemann", "FIXED_POINT_MAXIT", 200, "contraction iteration cap"),
    "grid_agreement": ("riemann", "GRID_AGREEMENT", 1e-9, "endpoint agreement under grid doubling"),
    "newton_tol": ("riemann", "NEWTON_TOL", 1e-10, "Riemann inversion residual"),
    "newton_maxit": ("riemann", "NEWTON_MAXIT", 60, "Riemann inversion iteration cap"),
    "bisect_tol": ("riemann", "BISECT_TOL", 1e-12, "root refinement tolerance"),
    "zero_wave": ("riemann", "ZERO_WAVE", 1e-13, "strengths treated as zero"),
    "guard": ("tracker", "GUARD", 1e-13, "gap below which fronts count as touching"),
    "sigma_samples": ("tracker", "SIGMA_SAMPLES", 8, "speed samples per front for Q"),
    "envelope_samples": ("tracker", "ENVELOPE_SAMPLES", 129, "samples for same-family amounts"),
    "crossing_tol": ("structure", "CROSSING_TOL", 1e-12, "GNL manifold crossing refinement"),
    "point_tol": ("structure", "POINT_TOL", 1e-10, "front-through-point tolerance"),
    "manifold_tol": ("flux_model", "MANIFOLD_TOL", 1e-9, "|grad lambda . r| counted as zero"),
    "fd_step": ("flux_model", "FD_STEP", 1e-6, "finite-difference step"),
    "table_rtol": ("example_lab", "TABLE_RTOL", 1e-12, "flux ODE relative tolerance"),
    "table_atol": ("example_lab", "TABLE_ATOL", 1e-14, "flux ODE absolute tolerance"),
}

RUN_FILES = ("frontlog.txt", "snapshots.txt", "ledger.txt")


class ConfigError(ValueError):
    pass


def apply_numerics(values):
    """Set the module tolerances; unknown keys are rejected."""
    for key, val in values.items():
        if key not in NUMERICS:
            raise ConfigError(f"[numerics]: unknown key {key!r}")
        mod, attr, default, _ = NUMERICS[key]
        setattr(importlib.import_module(f"wavefront.{mod}"), attr, type(default)(val))


@dataclass
class RunConfig:
    model: str
    model_params: dict
    eps: list
    t_end: float
    initial_data: list | None = None
    scenario: str | None = None
    scenario_params: dict = field(default_factory=dict)
    rho: float | None = None
    c0: float | None = None
    tv_bound: float = 0.5
    seed: int = 0
    snapshots: list = field(default_factory=list)
    numerics: dict = field(default_factory=dict)
    analysis: dict = field(default_factory=dict)
    source: str = ""


def _need(doc, key, path):
    if key not in doc:
        raise ConfigError(f"{path}: missing required key {key!r}")
    return doc[key]


def parse_config(path):
    """Read and validate a run configuration."""
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    model = _need(doc, "model", path)
    if model not in ("burgers", "two_inflection", "coupled66", "custom"):
        raise ConfigError(f"{path}: field 'model': unknown model {model!r}")
    eps = _need(doc, "eps", path)
    eps = [float(e) for e in (eps if isinstance(eps, list) else [eps])]
    if any(e <= 0 for e in eps) or any(b >= a for a, b in zip(eps[:-1], eps[1:])):
        raise ConfigError(f"{path}: field 'eps': must be positive and strictly decreasing")
    cfg = RunConfig(model, dict(doc.get("model_params", {})), eps, float(_need(doc, "t_end", path)),
                    source=str(path))
    cfg.rho = doc.get("rho")
    cfg.c0 = doc.get("c0")
    cfg.tv_bound = float(doc.get("tv_bound", 0.5))
    cfg.seed = int(doc.get("seed", 0))
    cfg.snapshots = [float(t) for t in doc.get("snapshots", [cfg.t_end])]
    cfg.numerics = dict(doc.get("numerics", {}))
    for key in cfg.numerics:
        if key not in NUMERICS:
            raise ConfigError(f"{path}: [numerics]: unknown key {key!r}")
    cfg.analysis = dict(doc.get("analysis", {}))
    if "cantor" in doc:
        cfg.scenario = "cantor"
        cfg.scenario_params = dict(doc["cantor"])
    elif "scenario" in doc:
        from .example_lab import SCENARIOS
        cfg.scenario = doc["scenario"]
        if cfg.scenario not in SCENARIOS:
            raise ConfigError(f"{path}: field 'scenario': unknown scenario {cfg.scenario!r}")
        cfg.scenario_params = dict(doc.get("scenario_params", {}))
        if cfg.scenario == "burgers_random":
            cfg.scenario_params.setdefault("seed", cfg.seed)
    else:
        data = _need(doc, "initial_data", path)
        try:
            cfg.initial_data = [(float(x), [float(v) for v in np.atleast_1d(u)]) for x, u in data]
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{path}: field 'initial_data': expected [[x, [u...]], ...]") from exc
        if not cfg.initial_data:
            raise ConfigError(f"{path}: field 'initial_data': empty")
    return cfg


def build_problem(cfg):
    """``(model, breakpoints)`` for a configuration."""
    from .flux_model import make_model
    if cfg.scenario is not None:
        from .example_lab import scenario
        model, data = scenario(cfg.scenario, **cfg.scenario_params)
        from .logio import describe_model
        if describe_model(model)[0] != cfg.model:
            raise ConfigError(f"{cfg.source}: field 'model': scenario {cfg.scenario!r} uses "
                              f"{describe_model(model)[0]!r}")
        return model, data
    return make_model(cfg.model, **cfg.model_params), cfg.initial_data


def _run_one(cfg, eps, outdir):
    """Run one resolution and write the three run files."""
    from .logio import export_ledger, export_log, export_snapshots
    from .tracker import FrontTracker
    apply_numerics(cfg.numerics)
    model, data = build_problem(cfg)
    if "manifold_tol" in cfg.numerics:
        model.manifold_tol = float(cfg.numerics["manifold_tol"])
    tr = FrontTracker(model, eps, rho=cfg.rho, c0=cfg.c0, tv_bound=cfg.tv_bound)
    tr.init_approximation(data)
    flog = tr.run(cfg.t_end)
    os.makedirs(outdir, exist_ok=True)
    export_log(flog, os.path.join(outdir, RUN_FILES[0]))
    export_snapshots(flog, cfg.snapshots, os.path.join(outdir, RUN_FILES[1]))
    export_ledger(flog, os.path.join(outdir, RUN_FILES[2]))
    return {"eps": eps, "dir": outdir, "fronts": len(flog.fronts), "nodes": len(flog.nodes),
            "violations": len(flog.ledger.violations())}


def _eps_dir(out, eps, many):
    return os.path.join(out, f"eps_{eps!r}") if many else out


def _pool_map(fn, args, workers):
    if workers <= 1 or len(args) <= 1:
        return [fn(*a) for a in args]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        futs = [ex.submit(fn, *a) for a in args]
        return [f.result() for f in futs]


def run_single(cfg, out, workers=1):
    many = len(cfg.eps) > 1
    args = [(cfg, e, _eps_dir(out, e, many)) for e in cfg.eps]
    return _pool_map(_run_one, args, workers)


def run_convergence(cfg, out, workers=1):
    """Run every resolution and write ``convergence.txt``."""
    from .logio import l1_distance, read_log, read_snapshots
    from .structure import limit_subcurves, measure_atoms, export_curves
    if len(cfg.eps) < 2:
        raise ConfigError(f"{cfg.source}: field 'eps': converge needs at least two values")
    args = [(cfg, e, _eps_dir(out, e, True)) for e in cfg.eps]
    results, errors = [], []
    if workers <= 1:
        for a in args:
            try:
                results.append(_run_one(*a))
            except Exception as exc:  # partial results are kept
                errors.append(f"eps={a[1]!r}: {exc}")
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            futs = [(a, ex.submit(_run_one, *a)) for a in args]
            for a, f in futs:
                try:
                    results.append(f.result())
                except Exception as exc:
                    errors.append(f"eps={a[1]!r}: {exc}")
    done = sorted(results, key=lambda r: -r["eps"])
    snaps = {r["eps"]: read_snapshots(os.path.join(r["dir"], RUN_FILES[1])) for r in done}
    lines = [f"config = {json.dumps(cfg.source)}", f"eps = {json.dumps([r['eps'] for r in done])}"]
    for r in done:
        lines.append(f"run.{r['eps']!r} = {json.dumps({k: v for k, v in r.items() if k != 'eps'})}")
    for (ea, sa), (eb, sb) in itertools.combinations(snaps.items(), 2):
        for t in cfg.snapshots:
            if t in sa and t in sb:
                lines.append(f"l1.{ea!r}.{eb!r}.t{t!r} = {l1_distance(sa[t], sb[t])!r}")
    apply_numerics(cfg.numerics)
    logs = [read_log(os.path.join(r["dir"], RUN_FILES[0])) for r in done]
    if logs:
        model = logs[0].model
        for lg in logs[1:]:
            lg.model = model
        radius = 4 * done[-1]["eps"] * (float(model.lambda_hat) + 1)
        atoms = measure_atoms(logs, radius)
        lines.append(f"atoms.count = {len(atoms)}")
        lines.append(f"atoms.stable = {sum(a.stable for a in atoms)}")
        for spec in cfg.analysis.get("curves", []):
            i, k, ce = int(spec[0]), int(spec[1]), float(spec[2])
            if len(logs) < 3:
                lines.append(f"curves.{i}.{k}.{ce!r} = \"needs three runs\"")
                continue
            lcs = limit_subcurves(logs, model, i, k, ce)
            export_curves(list(lcs), os.path.join(out, f"limit_curves_{i}_{k}_{ce!r}.json"))
            lines.append(f"curves.{i}.{k}.{ce!r} = {json.dumps({'limit': len(lcs), 'unmatched': len(lcs.unmatched), 'ambiguous': len(lcs.ambiguous)})}")
    if cfg.scenario == "cantor":
        from .example_lab import CantorSpec, pattern_mismatch, presence_intervals, shock_presence
        p = cfg.scenario_params
        spec = CantorSpec(int(p.get("m", 1)), float(p.get("h", 1.0)), float(p.get("a0", 0.5)),
                          float(p.get("decay", 1.0)))
        times = np.linspace(0.0, min(cfg.t_end, 6 * spec.h), 2401)
        jump = abs(float(p.get("u_l", 0.2)) - float(p.get("u_r", -0.2)))
        for lg in logs:
            gaps = presence_intervals(times, shock_presence(lg, times, 0.5 * jump, 10 * lg.eps))
            lines.append(f"cantor.{lg.eps!r}.absence = {json.dumps([list(map(float, g)) for g in gaps])}")
            lines.append(f"cantor.{lg.eps!r}.mismatch = {pattern_mismatch(gaps, spec.absence())!r}")
    for e in errors:
        lines.append(f"error = {json.dumps(e)}")
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "convergence.txt"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return lines, errors


def _find_logs(logdir):
    found = []
    for root, _, files in sorted(os.walk(logdir)):
        if RUN_FILES[0] in files:
            found.append(os.path.join(root, RUN_FILES[0]))
    return sorted(found)


def analyze(logdir, curves, verify, out):
    from .logio import export_fronts_xt, read_log
    from .structure import (export_curves, extract_approx_subcurves, limit_subcurves,
                            verify_jump_point)
    paths = _find_logs(logdir)
    if not paths:
        raise ConfigError(f"{logdir}: no {RUN_FILES[0]} found")
    logs = [read_log(p) for p in paths]
    model = logs[0].model
    for lg in logs[1:]:
        lg.model = model
    logs.sort(key=lambda lg: -lg.eps)
    os.makedirs(out, exist_ok=True)
    written = []
    for lg in logs:
        written.append(export_fronts_xt(lg, os.path.join(out, f"fronts_xt_{lg.eps!r}.txt")))
    for i, k, ce in curves:
        approx = extract_approx_subcurves(logs[-1], model, ce, i, k)
        written.append(export_curves(approx, os.path.join(out, f"curves_{i}_{k}_{ce!r}.json")))
        if len(logs) >= 3:
            lcs = limit_subcurves(logs, model, i, k, ce)
            written.append(export_curves(list(lcs), os.path.join(out, f"limit_curves_{i}_{k}_{ce!r}.json")))
    for j, (t, x) in enumerate(verify):
        fam = curves[0][0] if curves else 0
        rep = verify_jump_point(logs, model, (t, x), fam)
        p = os.path.join(out, f"jump_{j}.txt")
        with open(p, "w") as fh:
            fh.write(rep.to_text())
        written.append(p)
    return written


def _triple(text):
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected i,k,eps")
    return int(parts[0]), int(parts[1]), float(parts[2])


def _pair(text):
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("expected t,x")
    return float(parts[0]), float(parts[1])


def build_parser():
    p = argparse.ArgumentParser(prog="wavefront", description="Wave-front tracking runs and analysis.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("run", "converge"):
        q = sub.add_parser(name)
        q.add_argument("config")
        q.add_argument("--out", default="out")
        q.add_argument("--workers", type=int, default=1)
    q = sub.add_parser("analyze")
    q.add_argument("logdir")
    q.add_argument("--curves", type=_triple, action="append", default=[])
    q.add_argument("--verify", type=_pair, action="append", default=[])
    q.add_argument("--out", default=None)
    q.add_argument("--workers", type=int, default=1)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "run":
            cfg = parse_config(args.config)
            for r in run_single(cfg, args.out, args.workers):
                print(f"eps={r['eps']!r} fronts={r['fronts']} nodes={r['nodes']} -> {r['dir']}")
        elif args.command == "converge":
            cfg = parse_config(args.config)
            lines, errors = run_convergence(cfg, args.out, args.workers)
            print("\n".join(lines))
            if errors:
                return 1
        else:
            out = args.out or os.path.join(args.logdir, "analysis")
            for p in analyze(args.logdir, args.curves, args.verify, out):
                print(p)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
