"""Discrete measure model: weighted atoms plus uniform-density segments.

A :class:`DiscreteMeasure` is immutable after construction and every query
is pure, so concurrent read access is unrestricted.  Carrier subsets are
expressed at the granularity of atom indices and per-piece parameter
subintervals, which keeps restriction exact.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Ball, Segment, as_point, ball_segment_length

__all__ = [
    "Atom",
    "SegmentPiece",
    "DiscreteMeasure",
    "CarrierSubset",
    "MeasureFormatError",
    "total_mass",
    "ball_mass",
    "restrict",
    "load_measure",
    "save_measure",
    "BallMassEvaluator",
]


class MeasureFormatError(ValueError):
    """Raised when measure JSON violates the schema; carries the offending field."""

    def __init__(self, message: str, *, field_path: str = ""):
        super().__init__(f"{message}" + (f" (at {field_path})" if field_path else ""))
        self.field_path = field_path


@dataclass(frozen=True)
class Atom:
    location: np.ndarray
    mass: float

    def __post_init__(self):
        object.__setattr__(self, "location", as_point(self.location))
        if not (0.0 <= self.mass < math.inf):
            raise ValueError(f"atom mass must be finite and >= 0, got {self.mass}")


@dataclass(frozen=True)
class SegmentPiece:
    segment: Segment
    density: float

    def __post_init__(self):
        if not (0.0 <= self.density < math.inf):
            raise ValueError(f"piece density must be finite and >= 0, got {self.density}")

    @property
    def mass(self) -> float:
        return self.density * self.segment.length


class DiscreteMeasure:
    """Finite nonnegative Borel measure carried by atoms and segments in R^N."""

    def __init__(self, atoms=(), pieces=(), dimension=None):
        self.atoms: tuple[Atom, ...] = tuple(atoms)
        self.pieces: tuple[SegmentPiece, ...] = tuple(pieces)
        dims = {a.location.size for a in self.atoms} | {p.segment.dimension for p in self.pieces}
        if dimension is None:
            if not dims:
                raise ValueError("empty measure needs an explicit dimension")
            dimension = dims.pop() if len(dims) == 1 else None
            if dimension is None:
                raise ValueError("carriers live in mixed dimensions")
        else:
            if dims and dims != {dimension}:
                raise ValueError(f"carriers do not match dimension {dimension}")
        if dimension < 1:
            raise ValueError("dimension must be >= 1")
        self.dimension = int(dimension)

    # -- basic queries ---------------------------------------------------

    @property
    def n_elements(self) -> int:
        return len(self.atoms) + len(self.pieces)

    def is_zero(self) -> bool:
        return self.total_mass() <= 0.0

    def total_mass(self) -> float:
        return float(sum(a.mass for a in self.atoms) + sum(p.mass for p in self.pieces))

    def ball_mass(self, ball: Ball) -> float:
        if ball.dimension != self.dimension:
            raise ValueError("ball dimension does not match measure dimension")
        m = 0.0
        for a in self.atoms:
            if float(np.linalg.norm(a.location - ball.center)) <= ball.radius:
                m += a.mass
        for p in self.pieces:
            m += ball_segment_length(ball, p.segment, p.density)
        return m

    def support_points(self) -> np.ndarray:
        """Atom locations plus piece endpoints (carrier extreme points)."""
        pts = [a.location for a in self.atoms]
        for p in self.pieces:
            pts.append(p.segment.a)
            pts.append(p.segment.b)
        if not pts:
            return np.zeros((0, self.dimension))
        return np.asarray(pts, dtype=float)

    def bounding_box(self):
        pts = self.support_points()
        if pts.shape[0] == 0:
            return None
        return pts.min(axis=0), pts.max(axis=0)

    def full_subset(self) -> "CarrierSubset":
        return CarrierSubset(
            atom_indices=frozenset(range(len(self.atoms))),
            fragments={i: ((0.0, 1.0),) for i in range(len(self.pieces))},
        )

    # -- serialization ---------------------------------------------------

    def to_json(self) -> dict:
        return {
            "dimension": self.dimension,
            "atoms": [{"x": [float(c) for c in a.location], "mass": float(a.mass)} for a in self.atoms],
            "pieces": [
                {
                    "a": [float(c) for c in p.segment.a],
                    "b": [float(c) for c in p.segment.b],
                    "density": float(p.density),
                }
                for p in self.pieces
            ],
        }

    def __repr__(self):
        return (
            f"DiscreteMeasure(N={self.dimension}, atoms={len(self.atoms)}, "
            f"pieces={len(self.pieces)}, mass={self.total_mass():.6g})"
        )


def _merged_intervals(intervals):
    """Sort, clip to [0,1], and merge overlapping parameter subintervals."""
    ivs = sorted((max(0.0, lo), min(1.0, hi)) for lo, hi in intervals if hi > lo)
    out = []
    for lo, hi in ivs:
        if hi <= lo:
            continue
        if out and lo <= out[-1][1] + 1e-15:
            out[-1] = (out[-1][0], max(out[-1][1], hi))
        else:
            out.append((lo, hi))
    return tuple((float(lo), float(hi)) for lo, hi in out)


def _intersect_intervals(a, b):
    out = []
    for lo1, hi1 in a:
        for lo2, hi2 in b:
            lo, hi = max(lo1, lo2), min(hi1, hi2)
            if hi > lo:
                out.append((lo, hi))
    return _merged_intervals(out)


@dataclass(frozen=True)
class CarrierSubset:
    """Borel subset of a measure's carrier: atom indices + piece fragments.

    ``fragments`` maps a piece index to disjoint parameter subintervals of
    [0, 1]; a missing index means the piece is excluded entirely.
    """

    atom_indices: frozenset = frozenset()
    fragments: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "atom_indices", frozenset(int(i) for i in self.atom_indices))
        frags = {int(i): _merged_intervals(ivs) for i, ivs in self.fragments.items()}
        frags = {i: ivs for i, ivs in frags.items() if ivs}
        object.__setattr__(self, "fragments", frags)

    def is_empty(self) -> bool:
        return not self.atom_indices and not self.fragments

    def intersection(self, other: "CarrierSubset") -> "CarrierSubset":
        frags = {}
        for i in set(self.fragments) & set(other.fragments):
            ivs = _intersect_intervals(self.fragments[i], other.fragments[i])
            if ivs:
                frags[i] = ivs
        return CarrierSubset(self.atom_indices & other.atom_indices, frags)

    def union(self, other: "CarrierSubset") -> "CarrierSubset":
        frags = {}
        for i in set(self.fragments) | set(other.fragments):
            frags[i] = _merged_intervals(self.fragments.get(i, ()) + other.fragments.get(i, ()))
        return CarrierSubset(self.atom_indices | other.atom_indices, frags)

    def complement_in(self, mu: DiscreteMeasure) -> "CarrierSubset":
        atoms = frozenset(range(len(mu.atoms))) - self.atom_indices
        frags = {}
        for i in range(len(mu.pieces)):
            kept = self.fragments.get(i, ())
            holes, cur = [], 0.0
            for lo, hi in kept:
                if lo > cur:
                    holes.append((cur, lo))
                cur = hi
            if cur < 1.0:
                holes.append((cur, 1.0))
            if holes:
                frags[i] = tuple(holes)
        return CarrierSubset(atoms, frags)

    def to_json(self) -> dict:
        return {
            "atoms": sorted(self.atom_indices),
            "fragments": {str(i): [list(iv) for iv in ivs] for i, ivs in sorted(self.fragments.items())},
        }


def total_mass(mu: DiscreteMeasure) -> float:
    return mu.total_mass()


def ball_mass(mu: DiscreteMeasure, ball: Ball) -> float:
    return mu.ball_mass(ball)


def restrict(mu: DiscreteMeasure, sub: CarrierSubset) -> DiscreteMeasure:
    """Measure A -> mu(E ∩ A) realized by dropping/splitting carrier elements."""
    for i in sub.atom_indices:
        if not 0 <= i < len(mu.atoms):
            raise IndexError(f"atom index {i} out of range")
    atoms = [mu.atoms[i] for i in sorted(sub.atom_indices)]
    pieces = []
    for i in sorted(sub.fragments):
        if not 0 <= i < len(mu.pieces):
            raise IndexError(f"piece index {i} out of range")
        piece = mu.pieces[i]
        for lo, hi in sub.fragments[i]:
            pieces.append(SegmentPiece(piece.segment.subsegment(lo, hi), piece.density))
    return DiscreteMeasure(atoms, pieces, dimension=mu.dimension)


def subset_mass(mu: DiscreteMeasure, sub: CarrierSubset) -> float:
    m = sum(mu.atoms[i].mass for i in sub.atom_indices)
    for i, ivs in sub.fragments.items():
        piece = mu.pieces[i]
        m += piece.mass * sum(hi - lo for lo, hi in ivs)
    return float(m)


# -- JSON schema ----------------------------------------------------------

def _require(cond, message, path):
    if not cond:
        raise MeasureFormatError(message, field_path=path)


def measure_from_json(obj: dict) -> DiscreteMeasure:
    _require(isinstance(obj, dict), "measure document must be a JSON object", "$")
    _require("dimension" in obj, "missing field 'dimension'", "$")
    dim = obj["dimension"]
    _require(isinstance(dim, int) and dim >= 1, "'dimension' must be an integer >= 1", "$.dimension")
    atoms = []
    for k, rec in enumerate(obj.get("atoms", [])):
        path = f"$.atoms[{k}]"
        _require(isinstance(rec, dict) and "x" in rec and "mass" in rec, "atom needs 'x' and 'mass'", path)
        _require(isinstance(rec["x"], list) and len(rec["x"]) == dim, f"'x' must have {dim} coordinates", path)
        mass = rec["mass"]
        _require(isinstance(mass, (int, float)) and mass >= 0 and math.isfinite(mass), "'mass' must be a finite number >= 0", path + ".mass")
        atoms.append(Atom(rec["x"], float(mass)))
    pieces = []
    for k, rec in enumerate(obj.get("pieces", [])):
        path = f"$.pieces[{k}]"
        _require(isinstance(rec, dict) and "a" in rec and "b" in rec and "density" in rec, "piece needs 'a', 'b', 'density'", path)
        for key in ("a", "b"):
            _require(isinstance(rec[key], list) and len(rec[key]) == dim, f"'{key}' must have {dim} coordinates", path)
        dens = rec["density"]
        _require(isinstance(dens, (int, float)) and dens >= 0 and math.isfinite(dens), "'density' must be a finite number >= 0", path + ".density")
        pieces.append(SegmentPiece(Segment(rec["a"], rec["b"]), float(dens)))
    return DiscreteMeasure(atoms, pieces, dimension=dim)


def load_measure(source) -> DiscreteMeasure:
    """Load a measure from a path or readable stream of schema JSON."""
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source, "r", encoding="utf-8") as fh:
            text = fh.read()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MeasureFormatError(f"invalid JSON: {exc}") from exc
    return measure_from_json(obj)


def save_measure(mu: DiscreteMeasure, target) -> None:
    """Write a measure to a path or writable stream (deterministic layout)."""
    text = json.dumps(mu.to_json(), indent=2, sort_keys=True)
    if hasattr(target, "write"):
        target.write(text)
    else:
        with open(target, "w", encoding="utf-8") as fh:
            fh.write(text)


class BallMassEvaluator:
    """Vectorized closed-ball mass queries against a fixed measure.

    Precomputes carrier arrays once so branch-and-bound loops and grid
    oracles can evaluate many (center, radius) pairs cheaply.
    """

    def __init__(self, mu: DiscreteMeasure):
        self.mu = mu
        self.dim = mu.dimension
        na = len(mu.atoms)
        self.atom_xy = np.asarray([a.location for a in mu.atoms], dtype=float).reshape(na, self.dim)
        self.atom_w = np.asarray([a.mass for a in mu.atoms], dtype=float)
        ns = len(mu.pieces)
        self.seg_a = np.asarray([p.segment.a for p in mu.pieces], dtype=float).reshape(ns, self.dim)
        self.seg_d = np.asarray([p.segment.direction for p in mu.pieces], dtype=float).reshape(ns, self.dim)
        self.seg_len = np.linalg.norm(self.seg_d, axis=1) if ns else np.zeros(0)
        self.seg_dd = np.einsum("ij,ij->i", self.seg_d, self.seg_d) if ns else np.zeros(0)
        self.seg_density = np.asarray([p.density for p in mu.pieces], dtype=float)
        self.total = mu.total_mass()

    def mass(self, center, radius: float) -> float:
        return float(self.masses(np.asarray(center, dtype=float)[None, :], np.asarray([radius]))[0])

    def masses(self, centers: np.ndarray, radii: np.ndarray) -> np.ndarray:
        """Closed-ball masses for m (center, radius) pairs; shape (m,)."""
        centers = np.atleast_2d(np.asarray(centers, dtype=float))
        radii = np.asarray(radii, dtype=float)
        out = np.zeros(centers.shape[0])
        if self.atom_w.size:
            d = np.linalg.norm(centers[:, None, :] - self.atom_xy[None, :, :], axis=2)
            out += (d <= radii[:, None]) @ self.atom_w
        if self.seg_density.size:
            out += self._segment_masses(centers, radii).sum(axis=1)
        return out

    def _segment_masses(self, centers: np.ndarray, radii: np.ndarray) -> np.ndarray:
        """Per-piece masses inside closed balls; shape (m, n_pieces)."""
        w = self.seg_a[None, :, :] - centers[:, None, :]  # (m, ns, N)
        B = 2.0 * np.einsum("mnj,nj->mn", w, self.seg_d)
        C = np.einsum("mnj,mnj->mn", w, w) - radii[:, None] ** 2
        A = self.seg_dd[None, :]
        disc = B * B - 4.0 * A * C
        sq = np.sqrt(np.maximum(disc, 0.0))
        t0 = np.clip((-B - sq) / (2.0 * A), 0.0, 1.0)
        t1 = np.clip((-B + sq) / (2.0 * A), 0.0, 1.0)
        frac = np.where(disc > 0.0, np.maximum(t1 - t0, 0.0), 0.0)
        return frac * (self.seg_density * self.seg_len)[None, :]

    def atom_mass_within(self, center: np.ndarray, radius: float) -> float:
        if not self.atom_w.size:
            return 0.0
        d = np.linalg.norm(self.atom_xy - center[None, :], axis=1)
        return float(self.atom_w[d <= radius].sum())

    def segment_chords_within(self, center: np.ndarray, radius: float) -> np.ndarray:
        """Per-piece carrier length inside the closed ball B(center, radius)."""
        if not self.seg_density.size:
            return np.zeros(0)
        m = self._segment_masses(center[None, :], np.asarray([radius]))[0]
        with np.errstate(invalid="ignore", divide="ignore"):
            lengths = np.where(self.seg_density > 0, m / self.seg_density, 0.0)
        # zero-density pieces carry no mass; chord length irrelevant
        return lengths
