"""A flux with two inflection points: a fan squeezed between two shocks.

``two_inflection(0.1)`` is ``f(u) = u**2 / 2 - u**4 / 0.12``, convex on
``|u| < 0.1`` and concave outside.  The data ``-sqrt(6)/10 | -0.08 | 0.08 |
sqrt(6)/10`` produce a left shock, a fan through the sonic state 0 and a right
shock.  The shocks eat the fan from both sides, but their inner states tend to
the sonic state, so their speeds tend to zero and they stall a finite distance
apart.  The script prints the gap between the two limit shock curves.

Run with ``python3 demos/fan_between_two_shocks.py`` (about 10 s).
"""

from wavefront.example_lab import scenario
from wavefront.structure import limit_subcurves
from wavefront.tracker import run


def main():
    model, data = scenario("fig2")
    print("initial states:", [round(float(s[0]), 4) for _, s in data])
    logs = [run(model, eps, data, 8.0) for eps in (1e-2, 5e-3, 2.5e-3)]
    fine = logs[-1]
    print("live fronts at t = 8 (finest run):", [f.kind for f in fine.live_at(8.0)])

    (left,) = limit_subcurves(logs, model, 0, 0, 0.02)
    (right,) = limit_subcurves(logs, model, 0, 2, 0.02)
    print("\n   t    left shock  right shock    gap")
    for t in (0.0, 1.0, 2.0, 4.0, 6.0, 8.0):
        xl, xr = left.position(t), right.position(t)
        print(f" {t:4.1f}  {xl:10.5f}  {xr:11.5f}  {xr - xl:8.5f}")
    print("\nmatching distances across runs:", [f"{d:.2e}" for d in left.distances])


if __name__ == "__main__":
    main()
