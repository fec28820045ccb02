"""Convex and concave envelopes of sampled functions.

Envelopes are computed with the monotone chain sweep in ``O(n)`` for
sorted abscissae.  Points lying on the envelope within the contact
tolerance count as contact points, so collinear samples are treated as
touching.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

CONTACT = "CONTACT"
CHORD = "CHORD"


class EnvelopeError(ValueError):
    pass


@dataclass
class Envelope:
    """Envelope of a sampled function.

    Attributes
    ----------
    x, f : ndarray
        Sample points and sampled values.
    values : ndarray
        Envelope at the sample points.
    slopes : ndarray
        Envelope slope on each cell ``[x[j], x[j+1]]``.
    contact : ndarray of bool
        True where the function touches its envelope.
    vertices : ndarray of int
        Indices of the hull vertices.
    kind : str
        ``"convex"`` or ``"concave"``.
    """

    x: np.ndarray
    f: np.ndarray
    values: np.ndarray
    slopes: np.ndarray
    contact: np.ndarray
    vertices: np.ndarray
    kind: str

    def __call__(self, t):
        return np.interp(t, self.x, self.values)

    def derivative(self, t):
        """Right slope of the envelope at ``t``."""
        j = np.clip(np.searchsorted(self.x, t, side="right") - 1, 0, self.slopes.size - 1)
        return self.slopes[j]


def _prepare(x, f, a=None, b=None):
    x = np.asarray(x, dtype=float)
    f = np.asarray(f, dtype=float)
    if a is not None or b is not None:
        a = 0 if a is None else int(a)
        b = x.size - 1 if b is None else int(b)
        if a >= b or a < 0 or b >= x.size:
            raise EnvelopeError("empty interval")
        x, f = x[a:b + 1], f[a:b + 1]
    if x.size == 0:
        raise EnvelopeError("empty interval")
    if x.shape != f.shape or x.ndim != 1:
        raise EnvelopeError("x and f must be 1-d arrays of equal length")
    if x.size > 1 and np.any(np.diff(x) <= 0):
        raise EnvelopeError("abscissae must be strictly increasing")
    return x, f


COLLINEAR_ULPS = 64.0


def _lower_hull(x, f):
    hull = []
    # round-off allowance so that rounded chord values count as collinear
    slack = COLLINEAR_ULPS * np.finfo(float).eps * (1.0 + float(np.max(np.abs(f))))
    for j in range(x.size):
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            # pop b unless it lies clearly below the segment a-j
            cross = (x[b] - x[a]) * (f[j] - f[a]) - (f[b] - f[a]) * (x[j] - x[a])
            if cross <= slack * (x[j] - x[a]):
                hull.pop()
            else:
                break
        hull.append(j)
    return np.array(hull, dtype=int)


def default_tolerance(f):
    return 1e-10 * (1.0 + float(np.max(np.abs(f))))


def lower_convex_envelope(x, f, tol=None, a=None, b=None):
    """Largest convex function below the samples ``(x, f)``.

    ``a`` and ``b`` optionally restrict the computation to the index range
    ``a..b`` (inclusive); the result then lives on that sub-grid.
    """
    x, f = _prepare(x, f, a, b)
    if tol is None:
        tol = default_tolerance(f)
    if x.size == 1:
        return Envelope(x, f, f.copy(), np.zeros(0), np.ones(1, bool), np.zeros(1, int), "convex")
    hull = _lower_hull(x, f)
    values = np.interp(x, x[hull], f[hull])
    values[hull] = f[hull]
    slopes = np.diff(values) / np.diff(x)
    contact = f - values <= tol
    return Envelope(x, f, values, slopes, contact, hull, "convex")


def upper_concave_envelope(x, f, tol=None, a=None, b=None):
    """Smallest concave function above the samples, as ``-conv(-f)``."""
    x, f = _prepare(x, f, a, b)
    low = lower_convex_envelope(x, -f, tol)
    return Envelope(x, f, -low.values, -low.slopes, low.contact, low.vertices, "concave")


@dataclass(frozen=True)
class Piece:
    """Maximal interval on which the envelope is contact or a single chord."""

    a: float
    b: float
    kind: str
    slope: float


def contact_decomposition(env, tol=None):
    """Split the domain of an envelope into CONTACT and CHORD pieces.

    A hull edge spanning samples that do not touch the envelope becomes
    one CHORD piece; runs of touching cells merge into CONTACT pieces.
    Zero-length contact sets between two chords are dropped.
    """
    x, f = env.x, env.f
    if x.size == 1:
        return [Piece(float(x[0]), float(x[0]), CONTACT, 0.0)]
    contact = env.contact if tol is None else (np.abs(f - env.values) <= tol)
    pieces = []
    verts = env.vertices
    for a, b in zip(verts[:-1], verts[1:]):
        chord = b - a > 1 and not np.all(contact[a:b + 1])
        kind = CHORD if chord else CONTACT
        slope = float((env.values[b] - env.values[a]) / (x[b] - x[a]))
        if kind == CONTACT and pieces and pieces[-1].kind == CONTACT:
            prev = pieces[-1]
            pieces[-1] = Piece(prev.a, float(x[b]), CONTACT, slope)
        else:
            pieces.append(Piece(float(x[a]), float(x[b]), kind, slope))
    return pieces
