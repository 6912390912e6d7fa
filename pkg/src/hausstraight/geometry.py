"""Exact geometric primitives: balls, segments, enclosing balls, distances.

All mass-style queries elsewhere in the package treat balls as closed;
the radius-0 closed ball is a singleton.  Everything here is a pure
function on immutable data.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Ball",
    "Segment",
    "minimal_enclosing_ball",
    "ball_segment_length",
    "pairwise_set_distance",
    "point_segment_distance",
    "segment_segment_distance",
    "as_point",
]

_EPS = 1e-12


def as_point(p) -> np.ndarray:
    """Coerce a coordinate sequence into a finite 1-D float array."""
    arr = np.asarray(p, dtype=float)
    if arr.ndim != 1 or arr.size < 1:
        raise ValueError(f"a point must be a 1-D coordinate sequence, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"point has non-finite coordinates: {arr}")
    return arr


@dataclass(frozen=True)
class Ball:
    """Closed (default) or open ball in R^N."""

    center: np.ndarray
    radius: float
    closed: bool = True

    def __post_init__(self):
        object.__setattr__(self, "center", as_point(self.center))
        if not (self.radius >= 0.0):
            raise ValueError(f"ball radius must be >= 0, got {self.radius}")

    @property
    def dimension(self) -> int:
        return self.center.size

    def contains(self, p, tol: float = 0.0) -> bool:
        d = float(np.linalg.norm(as_point(p) - self.center))
        if self.closed:
            return d <= self.radius + tol
        return d < self.radius + tol

    def to_json(self) -> dict:
        return {"center": [float(c) for c in self.center], "radius": float(self.radius)}


@dataclass(frozen=True)
class Segment:
    """Line segment with distinct endpoints in a common R^N."""

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "a", as_point(self.a))
        object.__setattr__(self, "b", as_point(self.b))
        if self.a.size != self.b.size:
            raise ValueError("segment endpoints live in different dimensions")
        if np.array_equal(self.a, self.b):
            raise ValueError("segment endpoints must be distinct")

    @property
    def dimension(self) -> int:
        return self.a.size

    @property
    def direction(self) -> np.ndarray:
        return self.b - self.a

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.b - self.a))

    def point_at(self, t: float) -> np.ndarray:
        return self.a + t * (self.b - self.a)

    def subsegment(self, t0: float, t1: float) -> "Segment":
        if not (0.0 <= t0 < t1 <= 1.0):
            raise ValueError(f"bad parameter interval [{t0}, {t1}]")
        return Segment(self.point_at(t0), self.point_at(t1))


def _circumball(points: np.ndarray):
    """Smallest ball with all of `points` on its boundary, center restricted
    to their affine hull.  Returns (center, radius) or None when the points
    are affinely dependent (to working precision)."""
    k = points.shape[0]
    if k == 1:
        return points[0].copy(), 0.0
    p0 = points[0]
    V = points[1:] - p0  # (k-1, N)
    # 2 V alpha_coeffs ... solve for c = p0 + V^T y with 2 V (c - p0) = |V|^2 rows
    A = 2.0 * V @ V.T
    rhs = np.einsum("ij,ij->i", V, V)
    try:
        y = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError:
        return None
    # reject nearly singular systems (collinear/coplanar subsets)
    if not np.all(np.isfinite(y)):
        return None
    scale = max(1.0, float(np.max(np.abs(V))))
    if np.linalg.cond(A) > 1e12:
        return None
    c = p0 + y @ V
    r = float(np.linalg.norm(c - p0))
    # sanity: every defining point equidistant
    dists = np.linalg.norm(points - c, axis=1)
    if np.max(np.abs(dists - r)) > 1e-8 * max(1.0, r, scale):
        return None
    return c, r


def minimal_enclosing_ball(points) -> Ball:
    """Smallest closed ball containing all points.

    Exact for N <= 3 by enumerating support subsets of size <= N+1; ties
    broken by lexicographic order of the support-subset indices so the
    result does not depend on input permutation beyond coordinates.
    Higher dimensions fall back to an iterative approximation whose
    containment is verified before returning.
    """
    pts = [as_point(p) for p in points]
    if not pts:
        raise ValueError("minimal_enclosing_ball needs at least one point")
    dim = pts[0].size
    if any(p.size != dim for p in pts):
        raise ValueError("points have mixed dimensions")
    P = np.asarray(pts, dtype=float)
    n = P.shape[0]
    if n == 1:
        return Ball(P[0], 0.0)
    if dim <= 3 and n <= 40:  # support-subset enumeration is O(n^(dim+1))
        return _meb_exact(P)
    return _meb_iterative(P)


def _meb_exact(P: np.ndarray) -> Ball:
    n, dim = P.shape
    best = None  # (radius, center)
    max_support = min(n, dim + 1)
    for k in range(1, max_support + 1):
        for idx in itertools.combinations(range(n), k):
            cb = _circumball(P[list(idx)])
            if cb is None:
                continue
            c, r = cb
            dmax = float(np.max(np.linalg.norm(P - c, axis=1)))
            if dmax > r + 1e-9 * max(1.0, r):
                continue
            r_eff = max(r, dmax)
            if best is None or r_eff < best[0] - _EPS:
                best = (r_eff, c)
    if best is None:  # degenerate inputs; fall back
        return _meb_iterative(P)
    return Ball(best[1], best[0])


def _meb_iterative(P: np.ndarray, iters: int = 2000) -> Ball:
    # Badoiu-Clarkson style subgradient iteration with certified containment.
    c = P.mean(axis=0)
    for i in range(1, iters + 1):
        d = np.linalg.norm(P - c, axis=1)
        j = int(np.argmax(d))
        c = c + (P[j] - c) / (i + 1)
    r = float(np.max(np.linalg.norm(P - c, axis=1)))
    return Ball(c, r * (1.0 + 1e-12))


def ball_segment_length(ball: Ball, seg: Segment, density: float = 1.0) -> float:
    """Mass of a uniform-density segment inside a closed ball, in closed form.

    Clips the parameter interval of ``a + t (b-a)`` against
    ``|a + t(b-a) - c|^2 <= r^2`` and returns density * clipped length.
    """
    if ball.dimension != seg.dimension:
        raise ValueError("ball and segment live in different dimensions")
    if density < 0:
        raise ValueError("density must be nonnegative")
    d = seg.direction
    w = seg.a - ball.center
    A = float(d @ d)
    B = 2.0 * float(d @ w)
    C = float(w @ w) - ball.radius ** 2
    disc = B * B - 4.0 * A * C
    if disc <= 0.0:
        return 0.0
    sq = math.sqrt(disc)
    t0 = (-B - sq) / (2.0 * A)
    t1 = (-B + sq) / (2.0 * A)
    lo, hi = max(t0, 0.0), min(t1, 1.0)
    if hi <= lo:
        return 0.0
    return density * (hi - lo) * seg.length


def pairwise_set_distance(A, B) -> float:
    """Minimum Euclidean distance between two nonempty finite point sets."""
    PA = np.asarray([as_point(p) for p in A], dtype=float)
    PB = np.asarray([as_point(p) for p in B], dtype=float)
    if PA.size == 0 or PB.size == 0:
        raise ValueError("pairwise_set_distance needs nonempty point sets")
    diff = PA[:, None, :] - PB[None, :, :]
    return float(np.min(np.linalg.norm(diff, axis=2)))


def point_segment_distance(p, seg: Segment) -> float:
    p = as_point(p)
    d = seg.direction
    t = float((p - seg.a) @ d) / float(d @ d)
    t = min(1.0, max(0.0, t))
    return float(np.linalg.norm(p - seg.point_at(t)))


def segment_segment_distance(s1: Segment, s2: Segment) -> float:
    """Minimum distance between two segments (clamped closest-point pairs)."""
    d1 = s1.direction
    d2 = s2.direction
    r = s1.a - s2.a
    a = float(d1 @ d1)
    e = float(d2 @ d2)
    b = float(d1 @ d2)
    c = float(d1 @ r)
    f = float(d2 @ r)
    denom = a * e - b * b
    if denom > _EPS * a * e:
        s = (b * f - c * e) / denom
    else:
        s = 0.0
    s = min(1.0, max(0.0, s))
    t = (b * s + f) / e
    if t < 0.0:
        t = 0.0
        s = min(1.0, max(0.0, -c / a))
    elif t > 1.0:
        t = 1.0
        s = min(1.0, max(0.0, (b - c) / a))
    best = float(np.linalg.norm((s1.a + s * d1) - (s2.a + t * d2)))
    # guard parallel / corner cases by endpoint checks
    for p, sg in ((s1.a, s2), (s1.b, s2), (s2.a, s1), (s2.b, s1)):
        best = min(best, point_segment_distance(p, sg))
    return best
