"""Deterministic generators for example measures.

Every fixture is reproducible bit-for-bit from its spec (including the
seed for random kinds), so serialized fixtures are stable across runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Segment
from .measure import Atom, DiscreteMeasure, SegmentPiece

__all__ = ["FixtureSpec", "generate", "CANTOR_DIMENSION", "FIXTURE_KINDS"]

CANTOR_DIMENSION = math.log(2.0) / math.log(3.0)

FIXTURE_KINDS = (
    "segment",
    "parallel_segments",
    "circle_polygon",
    "cantor_segments",
    "cantor_atoms",
    "atom_cloud",
)


@dataclass(frozen=True)
class FixtureSpec:
    kind: str
    params: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.kind not in FIXTURE_KINDS:
            raise ValueError(f"unknown fixture kind {self.kind!r}; choose from {FIXTURE_KINDS}")


def _cantor_intervals(depth: int):
    """Middle-thirds intervals of [0, 1] at the given depth."""
    intervals = [(0.0, 1.0)]
    for _ in range(depth):
        nxt = []
        for lo, hi in intervals:
            third = (hi - lo) / 3.0
            nxt.append((lo, lo + third))
            nxt.append((hi - third, hi))
        intervals = nxt
    return intervals


def generate(spec: FixtureSpec) -> DiscreteMeasure:
    p = dict(spec.params)
    kind = spec.kind

    if kind == "segment":
        length = float(p.pop("length", 10.0))
        density = float(p.pop("density", 1.0))
        _reject_extras(kind, p)
        if length <= 0:
            raise ValueError("segment length must be > 0")
        return DiscreteMeasure(pieces=[SegmentPiece(Segment([0.0, 0.0], [length, 0.0]), density)])

    if kind == "parallel_segments":
        length = float(p.pop("length", 10.0))
        gap = float(p.pop("gap", 0.5))
        density = float(p.pop("density", 1.0))
        _reject_extras(kind, p)
        if length <= 0 or gap <= 0:
            raise ValueError("parallel_segments needs positive length and gap")
        y = gap / 2.0
        return DiscreteMeasure(pieces=[
            SegmentPiece(Segment([0.0, y], [length, y]), density),
            SegmentPiece(Segment([0.0, -y], [length, -y]), density),
        ])

    if kind == "circle_polygon":
        n = int(p.pop("n", 1024))
        density = float(p.pop("density", 1.0))
        _reject_extras(kind, p)
        if n < 3:
            raise ValueError("circle_polygon needs n >= 3")
        angles = 2.0 * math.pi * np.arange(n + 1) / n
        verts = np.column_stack([np.cos(angles), np.sin(angles)])
        pieces = [SegmentPiece(Segment(verts[i], verts[i + 1]), density) for i in range(n)]
        return DiscreteMeasure(pieces=pieces)

    if kind == "cantor_segments":
        depth = int(p.pop("depth", 5))
        density = p.pop("density", None)
        _reject_extras(kind, p)
        if depth < 0:
            raise ValueError("depth must be >= 0")
        if density is None:
            density = 1.5 ** depth  # unit total mass: 2^depth pieces of length 3^-depth
        intervals = _cantor_intervals(depth)
        pieces = [SegmentPiece(Segment([lo, 0.0], [hi, 0.0]), float(density))
                  for lo, hi in intervals]
        return DiscreteMeasure(pieces=pieces)

    if kind == "cantor_atoms":
        depth = int(p.pop("depth", 5))
        _reject_extras(kind, p)
        if depth < 0:
            raise ValueError("depth must be >= 0")
        mass = 2.0 ** -depth
        atoms = [Atom([(lo + hi) / 2.0, 0.0], mass) for lo, hi in _cantor_intervals(depth)]
        return DiscreteMeasure(atoms=atoms)

    if kind == "atom_cloud":
        n = int(p.pop("n", 10))
        lo_m, hi_m = p.pop("mass_range", (0.05, 0.4))
        box = float(p.pop("box", 1.0))
        _reject_extras(kind, p)
        if n < 1:
            raise ValueError("atom_cloud needs n >= 1")
        rng = np.random.default_rng(spec.seed)
        atoms = [Atom(rng.uniform(0.0, box, 2), float(rng.uniform(lo_m, hi_m)))
                 for _ in range(n)]
        return DiscreteMeasure(atoms=atoms)

    raise ValueError(f"unknown fixture kind {kind!r}")  # pragma: no cover


def _reject_extras(kind: str, leftover: dict) -> None:
    if leftover:
        raise ValueError(f"unknown parameters for {kind}: {sorted(leftover)}")
