"""Hausdorff capacity/content by covering optimization.

Exact mode solves a weighted set cover over candidate balls (minimal
enclosing balls of point subsets) by branch-and-bound with memoization;
greedy mode returns a feasible cover as an upper bound.  Both spherical
and diameter weight conventions are supported.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Ball, minimal_enclosing_ball
from .measure import CarrierSubset, DiscreteMeasure, restrict

__all__ = [
    "HausdorffParams",
    "Cover",
    "ContentEstimate",
    "omega",
    "content",
    "content_of_points",
    "capacity_profile",
    "sample_carrier",
]

EXACT_POINT_LIMIT = 14
MAX_SAMPLE_POINTS = 4096


def omega(s: float) -> float:
    """Volume of the s-dimensional unit ball, pi^(s/2) / Gamma(s/2 + 1)."""
    if s < 0:
        raise ValueError("s must be >= 0")
    return math.pi ** (s / 2.0) / math.gamma(s / 2.0 + 1.0)


@dataclass(frozen=True)
class HausdorffParams:
    s: float
    delta: float = math.inf
    convention: str = "spherical"

    def __post_init__(self):
        if self.s < 0:
            raise ValueError("s must be >= 0")
        if not self.delta > 0:
            raise ValueError("delta must be > 0")
        if self.convention not in ("spherical", "diameter"):
            raise ValueError(f"unknown convention {self.convention!r}")

    def ball_weight(self, radius: float) -> float:
        if self.convention == "spherical":
            return omega(self.s) * radius ** self.s
        return (2.0 * radius) ** self.s


@dataclass(frozen=True)
class Cover:
    balls: tuple
    params: HausdorffParams

    @property
    def weight(self) -> float:
        return float(sum(self.params.ball_weight(b.radius) for b in self.balls))

    def to_json(self):
        return [b.to_json() for b in self.balls]


@dataclass(frozen=True)
class ContentEstimate:
    lower: float
    upper: float
    witness: Cover
    mode: str
    pitch: float | None = None  # discretization pitch for segment carriers
    lower_semantics: str = "exact"

    def __post_init__(self):
        if self.lower > self.upper + 1e-12:
            raise ValueError("lower bound exceeds upper bound")


def sample_carrier(mu: DiscreteMeasure, sub: CarrierSubset | None, delta: float):
    """Discretize a carrier subset into sample points.

    Segments are sampled at pitch min(delta, diam/256); the pitch is
    reported so callers can flag the result as a discretization.
    """
    if sub is not None:
        mu = restrict(mu, sub)
    pts = [a.location for a in mu.atoms]
    pitch = None
    bbox = mu.bounding_box()
    if mu.pieces and bbox is not None:
        diam = float(np.linalg.norm(bbox[1] - bbox[0]))
        pitch = min(delta, diam / 256.0) if diam > 0 else delta
        if not math.isfinite(pitch) or pitch <= 0:
            pitch = max(p.segment.length for p in mu.pieces) / 16.0
        for p in mu.pieces:
            n = max(1, int(math.ceil(p.segment.length / pitch)))
            for t in np.linspace(0.0, 1.0, n + 1):
                pts.append(p.segment.point_at(float(t)))
    if not pts:
        return np.zeros((0, mu.dimension)), pitch
    P = np.asarray(pts, dtype=float)
    if P.shape[0] > MAX_SAMPLE_POINTS:
        raise ValueError(
            f"carrier discretizes to {P.shape[0]} points, above the {MAX_SAMPLE_POINTS} cap; "
            "raise delta or coarsen the carrier"
        )
    return P, pitch


def _candidate_balls(P: np.ndarray, params: HausdorffParams, rho: float):
    """MEBs of support subsets of size <= N+1, radius clamped to [rho, delta]."""
    n, dim = P.shape
    cands = {}
    max_k = min(n, dim + 1)
    for k in range(1, max_k + 1):
        for idx in itertools.combinations(range(n), k):
            ball = minimal_enclosing_ball(P[list(idx)])
            r = max(ball.radius, rho)
            if r > params.delta:
                continue
            d = np.linalg.norm(P - ball.center, axis=1)
            mask = 0
            for j in np.nonzero(d <= r * (1 + 1e-12) + 1e-12)[0]:
                mask |= 1 << int(j)
            w = params.ball_weight(r)
            prev = cands.get(mask)
            if prev is None or w < prev[0] - 1e-15:
                cands[mask] = (w, ball.center, r)
    # dominance: drop a candidate if another covers a superset at <= weight
    items = sorted(cands.items(), key=lambda kv: kv[1][0])
    kept = []
    for mask, rec in items:
        dominated = any(mask | m2 == m2 and rec2[0] <= rec[0] + 1e-15 for m2, rec2 in kept)
        if not dominated:
            kept.append((mask, rec))
    return kept


def _exact_cover(P: np.ndarray, params: HausdorffParams, rho: float):
    n = P.shape[0]
    if n == 0:
        return 0.0, []
    cands = _candidate_balls(P, params, rho)
    full = (1 << n) - 1
    # order candidates covering each point by weight
    per_point = [[] for _ in range(n)]
    for mask, (w, c, r) in cands:
        for j in range(n):
            if mask >> j & 1:
                per_point[j].append((w, mask, c, r))
    for lst in per_point:
        lst.sort(key=lambda t: t[0])
        if not lst:
            raise ValueError(
                "a point admits no candidate ball within the radius cap; "
                "delta is too small relative to the floor"
            )
    memo = {}

    def solve(uncovered: int) -> tuple[float, tuple]:
        if uncovered == 0:
            return 0.0, ()
        known = memo.get(uncovered)
        if known is not None:
            return known
        j = (uncovered & -uncovered).bit_length() - 1  # lowest uncovered point
        best_w, best_chain = math.inf, ()
        for w, mask, c, r in per_point[j]:
            if w >= best_w:  # weights ascending and subproblem cost >= 0
                break
            sub_w, sub_chain = solve(uncovered & ~mask)
            tot = w + sub_w
            if tot < best_w - 1e-15:
                best_w, best_chain = tot, ((c, r),) + sub_chain
        memo[uncovered] = (best_w, best_chain)
        return best_w, best_chain

    w, chain = solve(full)
    return w, list(chain)


def _greedy_cover(P: np.ndarray, params: HausdorffParams, rho: float):
    n = P.shape[0]
    if n == 0:
        return []
    meb = minimal_enclosing_ball(P)
    diam = 2.0 * meb.radius
    base = min(params.delta, diam) if diam > 0 else min(params.delta, 1.0)
    if not math.isfinite(base) or base <= 0:
        base = 1.0
    radii = []
    r = base
    floor = max(rho, base * 2.0 ** -20)
    while r >= floor:
        radii.append(max(r, rho))
        r /= 2.0
    if rho > 0:
        radii.append(rho)
    radii = sorted(set(radii))
    candidates = []
    r_full = max(meb.radius, rho)
    if r_full <= params.delta:
        candidates.append((meb.center, r_full))
    for i in range(n):
        for r in radii:
            if r <= params.delta:
                candidates.append((P[i], r))
    covered = np.zeros(n, dtype=bool)
    chosen = []
    cand_centers = np.asarray([c for c, _ in candidates])
    cand_radii = np.asarray([r for _, r in candidates])
    # chunk the candidate x point distance computation to bound memory
    inside = np.empty((len(candidates), n), dtype=bool)
    step = max(1, 10_000_000 // max(n, 1))
    for k0 in range(0, len(candidates), step):
        k1 = min(k0 + step, len(candidates))
        dist = np.linalg.norm(P[None, :, :] - cand_centers[k0:k1, None, :], axis=2)
        inside[k0:k1] = dist <= cand_radii[k0:k1, None] * (1 + 1e-12) + 1e-12
    weights = np.asarray([params.ball_weight(r) for r in cand_radii])
    while not covered.all():
        gain = inside[:, ~covered].sum(axis=1)
        score = np.where(gain > 0, gain / weights, -1.0)
        k = int(np.argmax(score))
        if gain[k] == 0:
            raise RuntimeError("greedy cover stalled")  # pragma: no cover
        chosen.append((cand_centers[k], float(cand_radii[k])))
        covered |= inside[k]
    return chosen


def content_of_points(points: np.ndarray, params: HausdorffParams, mode: str = "exact",
                      rho: float = 0.0, pitch: float | None = None) -> ContentEstimate:
    """Content estimate for a finite point set under the given convention."""
    P = np.atleast_2d(np.asarray(points, dtype=float)) if len(points) else np.zeros((0, 1))
    n = P.shape[0]
    if n == 0:
        return ContentEstimate(0.0, 0.0, Cover((), params), mode, pitch)
    if mode == "exact":
        if n > EXACT_POINT_LIMIT:
            raise ValueError(
                f"exact mode handles at most {EXACT_POINT_LIMIT} points, got {n}; use mode='greedy'"
            )
        w, balls = _exact_cover(P, params, rho)
        cover = Cover(tuple(Ball(c, r) for c, r in balls), params)
        return ContentEstimate(w, w, cover, "exact", pitch)
    if mode == "greedy":
        balls = _greedy_cover(P, params, rho)
        cover = Cover(tuple(Ball(c, r) for c, r in balls), params)
        lower = params.ball_weight(rho) if rho > 0 else 0.0
        return ContentEstimate(
            lower, cover.weight, cover, "greedy", pitch,
            lower_semantics="single-ball floor requirement; not a cover bound",
        )
    raise ValueError(f"unknown mode {mode!r}")


def content(mu: DiscreteMeasure, sub: CarrierSubset | None, params: HausdorffParams,
            mode: str = "exact", rho: float = 0.0) -> ContentEstimate:
    """Content of a carrier subset, after discretizing segments to points.

    When segments were sampled, ball radii are floored at the sampling
    pitch so covers of the samples remain meaningful covers of the
    carrier (balls below the pitch cover gaps between samples with
    vanishing weight, which says nothing about the continuum set).
    """
    P, pitch = sample_carrier(mu, sub, params.delta)
    rho_eff = max(rho, pitch) if pitch is not None else rho
    return content_of_points(P, params, mode, rho_eff, pitch)


def capacity_profile(mu: DiscreteMeasure, sub: CarrierSubset | None, s: float,
                     deltas, mode: str = "greedy", rho: float = 0.0,
                     convention: str = "spherical"):
    """Content estimates along a decreasing delta schedule (capacity profile)."""
    deltas = list(deltas)
    if any(d2 >= d1 for d1, d2 in zip(deltas, deltas[1:])):
        raise ValueError("deltas must be strictly decreasing")
    out = []
    for d in deltas:
        est = content(mu, sub, HausdorffParams(s=s, delta=d, convention=convention), mode, rho)
        out.append(est)
    if mode == "exact":
        for prev, cur in zip(out, out[1:]):
            assert cur.upper >= prev.upper - 1e-9, "capacity must not decrease as delta shrinks"
    return out
