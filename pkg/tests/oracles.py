"""Independent reference computations used by the tests.

Nothing here imports the package's envelope, Riemann or tracker code.
"""
import numpy as np


def brute_convex_envelope(x, f):
    """Greatest convex minorant at the sample points by scanning all chords.

    ``O(M**3)``: for each node ``j`` take the minimum over chords
    ``(a, b)`` with ``a <= j <= b`` of the chord value at ``x[j]``.
    """
    x = np.asarray(x, dtype=float)
    f = np.asarray(f, dtype=float)
    m = x.size
    out = f.copy()
    for a in range(m - 2):
        # rows: right ends b; columns: interior nodes j, kept where a < j < b
        b = np.arange(a + 2, m)[:, None]
        j = np.arange(a + 1, m - 1)[None, :]
        w = (x[j] - x[a]) / (x[b] - x[a])
        chord = np.where(j < b, f[a] + w * (f[b] - f[a]), np.inf)
        np.minimum(out[a + 1:m - 1], chord.min(axis=0), out=out[a + 1:m - 1])
    return out


def brute_concave_envelope(x, f):
    return -brute_convex_envelope(x, -np.asarray(f, dtype=float))


def jarvis_lower_hull(x, f):
    """Indices of the lower hull by gift wrapping (smallest slope, farthest on ties)."""
    m = len(x)
    hull = [0]
    p = 0
    x = np.asarray(x, dtype=float)
    f = np.asarray(f, dtype=float)
    while p < m - 1:
        slopes = (f[p + 1:] - f[p]) / (x[p + 1:] - x[p])
        smin = slopes.min()
        ties = np.nonzero(slopes <= smin + 1e-15 * (1 + abs(smin)))[0]
        best = p + 1 + int(ties[-1])
        hull.append(best)
        p = best
    return hull


def _newton(fun, jac, z, tol=1e-14, maxit=50):
    z = np.array(z, dtype=float)
    for _ in range(maxit):
        r = np.atleast_1d(fun(z))
        if np.max(np.abs(r)) < tol:
            break
        J = np.atleast_2d(jac(z))
        dz = np.linalg.solve(J, -r)
        z = z + dz
        if np.max(np.abs(dz)) < 1e-15:
            break
    return z


def scalar_riemann_oracle(f, df, d2f, uL, uR, samples=1500):
    """Classical envelope construction of the scalar Riemann fan.

    Returns a list of ``(kind, u_start, u_end, speed)`` from ``uL`` to
    ``uR`` where ``kind`` is ``"shock"`` or ``"fan"`` and ``speed`` is the
    chord slope for shocks.  Chord endpoints are refined by Newton's
    method on the tangency conditions.
    """
    if uL == uR:
        return []
    sign = 1.0 if uR > uL else -1.0
    # reduce the concave case to the convex one by u -> -u, f -> -f(-u)
    g = lambda u: sign * f(sign * u)
    dg = lambda u: df(sign * u)
    d2g = lambda u: sign * d2f(sign * u)
    a0, b0 = sign * uL, sign * uR
    x = np.linspace(a0, b0, samples)
    y = np.array([g(v) for v in x])
    hull = jarvis_lower_hull(x, y)
    pieces = []
    for p, q in zip(hull[:-1], hull[1:]):
        kind = "shock" if q - p > 1 and np.max(y[p + 1:q] - (y[p] + (y[q] - y[p]) * (x[p + 1:q] - x[p]) / (x[q] - x[p]))) > 1e-13 else "fan"
        if pieces and kind == "fan" and pieces[-1][0] == "fan":
            pieces[-1][2] = x[q]
        else:
            pieces.append([kind, x[p], x[q]])
    out = []
    for j, (kind, a, b) in enumerate(pieces):
        if kind == "shock":
            m = (g(b) - g(a)) / (b - a)
            # a chord pinned at an end must leave it below the graph
            free_a = j > 0 or dg(a) < m
            free_b = j < len(pieces) - 1 or dg(b) > m
            if free_a and free_b:
                fun = lambda z: np.array([dg(z[0]) - dg(z[1]),
                                          dg(z[0]) * (z[1] - z[0]) - (g(z[1]) - g(z[0]))])
                jac = lambda z: np.array([[d2g(z[0]), -d2g(z[1])],
                                          [d2g(z[0]) * (z[1] - z[0]), dg(z[0]) - dg(z[1])]])
                a, b = _newton(fun, jac, [a, b])
            elif free_b:
                fun = lambda z: dg(z[0]) * (z[0] - a) - (g(z[0]) - g(a))
                jac = lambda z: np.array([[d2g(z[0]) * (z[0] - a)]])
                b = float(_newton(fun, jac, [b])[0])
            elif free_a:
                fun = lambda z: dg(z[0]) * (b - z[0]) - (g(b) - g(z[0]))
                jac = lambda z: np.array([[d2g(z[0]) * (b - z[0])]])
                a = float(_newton(fun, jac, [a])[0])
            out.append(("shock", a, b, (g(b) - g(a)) / (b - a)))
        else:
            out.append(("fan", a, b, None))
    # released pinned ends leave a contact sliver at the interval end
    if out and out[0][0] == "shock" and out[0][1] != a0:
        out.insert(0, ("fan", a0, out[0][1], None))
    if out and out[-1][0] == "shock" and out[-1][2] != b0:
        out.append(("fan", out[-1][2], b0, None))
    # fix up fan endpoints to neighbouring refined chord endpoints
    for j, item in enumerate(out):
        if item[0] == "fan":
            a = out[j - 1][2] if j > 0 else item[1]
            b = out[j + 1][1] if j < len(out) - 1 else item[2]
            out[j] = ("fan", a, b, None)
    return [(k, sign * a, sign * b, sp) for k, a, b, sp in out]


def next_event_bruteforce(positions, speeds, now=0.0):
    """Earliest crossing among all pairs, ``(t, i, j)`` with ``i`` left of ``j``."""
    best = None
    n = len(positions)
    for i in range(n):
        for j in range(n):
            if positions[i] < positions[j] and speeds[i] > speeds[j]:
                t = now + (positions[j] - positions[i]) / (speeds[i] - speeds[j])
                if best is None or t < best[0]:
                    best = (t, i, j)
    return best


def rk4_fixed(rhs, y0, t0, t1, steps):
    """Classical Runge-Kutta with a fixed step."""
    h = (t1 - t0) / steps
    y = np.array(y0, dtype=float)
    t = t0
    for _ in range(steps):
        k1 = np.asarray(rhs(t, y))
        k2 = np.asarray(rhs(t + h / 2, y + h / 2 * k1))
        k3 = np.asarray(rhs(t + h / 2, y + h / 2 * k2))
        k4 = np.asarray(rhs(t + h, y + h * k3))
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t += h
    return y


def glimm_naive(positions, families, strengths, sigmas, n):
    """``V`` and ``Q`` by direct double loops."""
    V = sum(abs(s) for s, k in zip(strengths, families) if k != n)
    m = len(positions)
    q1 = 0.0
    q2 = 0.0
    for a in range(m):
        for b in range(m):
            if a == b:
                continue
            if positions[a] < positions[b] and families[a] > families[b]:
                q1 += abs(strengths[a] * strengths[b])
            if families[a] == families[b] and families[a] != n:
                ia = sigmas[a]
                ib = sigmas[b]
                # |s_a| |s_b| times the mean of |sigma_a(t) - sigma_b(t')| over sample pairs
                d = np.mean(np.abs(ia[:, None] - ib[None, :]))
                q2 += 0.25 * abs(strengths[a] * strengths[b]) * d
    return V, q1 + q2
