"""Test-side models and comparison helpers built on the package."""
import numpy as np

from oracles import scalar_riemann_oracle
from wavefront.envelope import CHORD
from wavefront.flux_model import EigenStructure, FluxModel
from wavefront.riemann import solve_riemann

SLIVER = 1e-9


class QuadraticPair(FluxModel):
    """Strictly hyperbolic 2x2 flux with quadratic terms and no closed-form curves.

    ``f = (u**2/2 + c v, 3 v + v**2/2 + c u)`` has a symmetric Jacobian
    with speeds near 0 and 3 on the box.
    """

    n = 2
    name = "quadratic_pair"

    def __init__(self, c=0.1, bound=0.5):
        super().__init__([-bound, -bound], [bound, bound])
        self.c = c

    def flux(self, w):
        return self._raw_flux(self.check(w))

    def _raw_flux(self, w):
        u, v = w
        return np.array([0.5 * u * u + self.c * v, 3.0 * v + 0.5 * v * v + self.c * u])

    def jacobian(self, w):
        u, v = self.check(w)
        return np.array([[u, self.c], [self.c, 3.0 + v]])

    def _fields(self, u, v):
        # closed-form eigenpairs of the symmetric Jacobian, r_0 ~ +x and r_1 ~ +y
        a, d, c = u, 3.0 + v, self.c
        mid, rad = 0.5 * (a + d), np.hypot(0.5 * (d - a), c)
        lam = np.stack([mid - rad, mid + rad], axis=-1)
        r0 = np.stack([d - lam[..., 0], -c * np.ones_like(a)], axis=-1)
        r1 = np.stack([c * np.ones_like(a), lam[..., 1] - a], axis=-1)
        r0 /= np.linalg.norm(r0, axis=-1, keepdims=True)
        r1 /= np.linalg.norm(r1, axis=-1, keepdims=True)
        return lam, r0, r1

    def eigen(self, w):
        u, v = self.check(w)
        lam, r0, r1 = self._fields(u, v)
        right = np.column_stack([r0, r1])
        return EigenStructure(lam, right, right.T.copy())

    def family_fields(self, states, i):
        states = np.atleast_2d(states)
        lam, r0, r1 = self._fields(states[:, 0], states[:, 1])
        return lam[:, i], (r0, r1)[i]


def our_scalar_pattern(model, uL, uR):
    """``[kind, u_start, u_end, speed]`` pieces of our solver in path order."""
    curve = solve_riemann(model, [uL], [uR]).curves[0]
    out = []
    if curve is None:
        return out
    for p in curve.path_pieces():
        a, b = (p.a, p.b) if curve.s >= 0 else (p.b, p.a)
        if p.kind != CHORD and abs(b - a) < SLIVER:
            continue
        kind = "shock" if p.kind == CHORD else "fan"
        if out and kind == "fan" and out[-1][0] == "fan":
            out[-1][2] = uL + b
            continue
        out.append([kind, uL + a, uL + b, p.slope if kind == "shock" else None])
    return out


def compare_with_oracle(model, uL, uR):
    """``(same_pattern, worst shock-speed difference)`` against the envelope oracle."""
    ours = our_scalar_pattern(model, uL, uR)
    ref = [x for x in scalar_riemann_oracle(model.f, model.df, model.d2f, uL, uR)
           if not (x[0] == "fan" and abs(x[2] - x[1]) < SLIVER)]
    if [x[0] for x in ours] != [x[0] for x in ref]:
        return False, np.inf
    worst = 0.0
    for o, q in zip(ours, ref):
        if o[0] == "shock":
            worst = max(worst, abs(o[3] - q[3]))
    return True, worst
