"""Burgers' equation: a square pulse splits into a fan and a shock.

The data 0 | 1 | 0 on [0, 1] produces a centred rarefaction at x = 0 and a
shock at x = 1.  The fan catches the shock at t = 2, after which the shock
weakens like 1/sqrt(t).  The front tracker reproduces this with O(1/eps)
fronts, and the Glimm functional never increases.

Run with ``python3 demos/burgers_shock_and_fan.py``.
"""
import numpy as np

from wavefront.flux_model import burgers
from wavefront.tracker import run


def exact(x, t):
    # fan x/t behind a shock; before t = 2 the plateau 1 survives
    if t <= 2.0:
        s = 1.0 + 0.5 * t
        return np.where((x > 0) & (x < t), x / t, 0.0) + np.where((x >= t) & (x < s), 1.0, 0.0)
    s = np.sqrt(2.0 * t)
    return np.where((x > 0) & (x < s), x / t, 0.0)


def main():
    model = burgers()
    data = [(-1.0, [0.0]), (0.0, [1.0]), (1.0, [0.0])]
    x = np.linspace(-1.0, 5.0, 60001)
    print(" eps     fronts  nodes  L1 error at t=1  L1 error at t=4")
    for eps in (0.1, 0.05, 0.01):
        log = run(model, eps, data, 4.0, tv_bound=10.0)
        errs = []
        for t in (1.0, 4.0):
            xs, states = log.sample_solution(t)
            u = states[np.searchsorted(xs, x, side="right"), 0]
            errs.append(np.trapezoid(np.abs(u - exact(x, t)), x))
        print(f" {eps:<7} {len(log.fronts):>6} {len(log.nodes):>6}  {errs[0]:15.5f}  {errs[1]:15.5f}")

    before, after = log.ledger.upsilon()
    print(f"\nGlimm functional at eps = {eps}: {before[0]:.4f} -> {after[-1]:.4f} "
          f"over {len(log.nodes)} interactions, {len(log.ledger.violations())} increases")
    shock = max(log.live_at(4.0), key=lambda f: f.position(4.0))
    print(f"leading shock at t = 4: x = {shock.position(4.0):.4f} (exact {np.sqrt(8.0):.4f}), "
          f"left state {shock.uL[0]:.3f} (exact {np.sqrt(8.0) / 4:.3f})")


if __name__ == "__main__":
    main()
