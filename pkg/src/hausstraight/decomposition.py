"""Decomposition of a discrete measure into certified straight parts.

The exhaustion loop repeatedly extracts a certifiable carrier subset of
(near-)maximal mass; whatever admits no certifiable element at the
resolution floor lands in the residual.  Localization then trades a
small unkept mass for a positive certification scale, half the minimum
pairwise distance between the kept parts.
"""

from __future__ import annotations

import bisect
import heapq
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    Segment,
    point_segment_distance,
    segment_segment_distance,
)
from .hausdorff import HausdorffParams, omega
from .measure import (
    BallMassEvaluator,
    CarrierSubset,
    DiscreteMeasure,
    restrict,
    subset_mass,
)
from .straightness import (
    CertRequest,
    DensityCertificate,
    atomic_candidate_balls,
    certify,
    worst_ball_ratio,
)

__all__ = [
    "ExtractionSchedule",
    "StraightPart",
    "Decomposition",
    "LocalizationStage",
    "LocalizedDecomposition",
    "MassSelection",
    "subset_with_mass",
    "extract_straight_part",
    "decompose",
    "localize",
]

EXACT_ATOM_EXTRACT_LIMIT = 16
EXACT_PIECE_EXTRACT_LIMIT = 8
SUBSET_SUM_EXACT_LIMIT = 24
_ULP_SLACK = 4e-12
_LOCALIZE_SCALE_MARGIN = 1e-3  # closed balls make delta = half min distance critical


def _default_epsilons():
    return tuple(2.0 ** -(j + 2) for j in range(6))  # sums to < 1


def _default_radii():
    return tuple(2.0 ** -(j + 1) for j in range(6))


@dataclass(frozen=True)
class ExtractionSchedule:
    """Proof-internal sequences steering extraction: slacks, scales, floor."""

    epsilons: tuple = field(default_factory=_default_epsilons)
    radii: tuple = field(default_factory=_default_radii)
    deltas: tuple | None = None
    r_min: float = 0.05

    def __post_init__(self):
        if self.deltas is None:
            object.__setattr__(self, "deltas", tuple(2.0 * r for r in self.radii))
        if sum(self.epsilons) >= 1.0:
            raise ValueError("schedule slacks must sum to < 1")
        if any(e <= 0 for e in self.epsilons):
            raise ValueError("schedule slacks must be positive")
        if any(r2 >= r1 for r1, r2 in zip(self.radii, self.radii[1:])):
            raise ValueError("schedule radii must be strictly decreasing")
        if len(self.deltas) != len(self.radii) or any(
            2.0 * r > d for r, d in zip(self.radii, self.deltas)
        ):
            raise ValueError("schedule needs 2 r_k <= delta_k for each k")
        if not self.r_min > 0:
            raise ValueError("schedule floor r_min must be > 0")

    def to_json(self):
        return {
            "epsilons": list(self.epsilons),
            "radii": list(self.radii),
            "deltas": list(self.deltas),
            "r_min": self.r_min,
        }


@dataclass(frozen=True)
class StraightPart:
    subset: CarrierSubset
    mass: float
    certificate: DensityCertificate

    def to_json(self):
        out = self.subset.to_json()
        out["mass"] = self.mass
        out["certificate"] = self.certificate.to_json()
        return out


@dataclass(frozen=True)
class Decomposition:
    parts: tuple
    residual: CarrierSubset
    d_values: tuple | None
    schedule: ExtractionSchedule
    mode: str
    epsilon: float = 0.0
    s: float = 1.0

    def to_json(self):
        out = {
            "parts": [p.to_json() for p in self.parts],
            "residual": self.residual.to_json(),
            "schedule": self.schedule.to_json(),
            "mode": self.mode,
            "epsilon": self.epsilon,
            "s": self.s,
        }
        if self.d_values is not None:
            out["d_values"] = list(self.d_values)
        return out


@dataclass(frozen=True)
class LocalizationStage:
    kept_prefix: int
    complement: CarrierSubset  # unkept carrier U_j
    delta: float
    complement_mass: float
    target: float
    certificate: DensityCertificate | None
    degenerate: bool = False

    def to_json(self):
        return {
            "kept_prefix": self.kept_prefix,
            "complement": self.complement.to_json(),
            "delta": self.delta,
            "complement_mass": self.complement_mass,
            "target": self.target,
            "certificate": None if self.certificate is None else self.certificate.to_json(),
            "degenerate": self.degenerate,
        }


@dataclass(frozen=True)
class LocalizedDecomposition:
    stages: tuple

    def to_json(self):
        return {"stages": [st.to_json() for st in self.stages]}


# ---------------------------------------------------------------------------
# prescribed-mass subsets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MassSelection:
    subset: CarrierSubset
    achieved_mass: float
    report: str


def _best_subset_sum(weights, target):
    """Max-sum subset with sum <= target; exact by meet in the middle."""
    n = len(weights)
    half = n // 2
    left, right = weights[:half], weights[half:]

    def sums(ws, base):
        out = [(0.0, frozenset())]
        for k, w in enumerate(ws):
            out += [(s + w, ids | {base + k}) for s, ids in out]
        return out

    L = sums(left, 0)
    R = sorted(sums(right, half))
    r_sums = [s for s, _ in R]
    # prefix argmax so a bisect lookup returns the best right-side partner
    best_idx = list(range(len(R)))
    for i in range(1, len(R)):
        if r_sums[best_idx[i - 1]] >= r_sums[i]:
            best_idx[i] = best_idx[i - 1]
    best = (-1.0, frozenset())
    for s, ids in L:
        if s > target + 1e-12:
            continue
        j = bisect.bisect_right(r_sums, target - s + 1e-12) - 1
        if j < 0:
            cand = (s, ids)
        else:
            k = best_idx[j]
            cand = (s + r_sums[k], ids | R[k][1])
        if cand[0] > best[0]:
            best = cand
    return best


def subset_with_mass(mu: DiscreteMeasure, c: float, mode: str = "auto") -> MassSelection:
    """Carrier subset of mass c: exact via segment splitting, else the
    closest achievable atomic mass <= c with the gap reported."""
    total = mu.total_mass()
    if not (0.0 < c < total):
        raise ValueError(f"target mass {c} must lie strictly between 0 and {total}")
    atom_w = [a.mass for a in mu.atoms]
    n = len(atom_w)
    if n == 0 or mode == "segments_only":
        # continuum part alone realizes any mass exactly
        atom_ids, got = frozenset(), 0.0
    elif mode == "greedy" or (mode == "auto" and n > SUBSET_SUM_EXACT_LIMIT):
        order = sorted(range(n), key=lambda i: (-atom_w[i], i))
        picked, got = set(), 0.0
        for i in order:
            if got + atom_w[i] <= c + 1e-12:
                picked.add(i)
                got += atom_w[i]
        atom_ids = frozenset(picked)
    else:
        got, atom_ids = _best_subset_sum(atom_w, c)
    remaining = c - got
    frags = {}
    if remaining > 1e-15:
        for i, piece in enumerate(mu.pieces):
            if remaining <= 1e-15:
                break
            m = piece.mass
            if m <= 0:
                continue
            take = min(m, remaining)
            frags[i] = ((0.0, take / m),)
            got += take
            remaining -= take
    sub = CarrierSubset(atom_ids, frags)
    gap = c - got
    if gap > 1e-12:
        report = f"atomic obstruction, gap {gap:.12g}"
    else:
        report = "exact"
    return MassSelection(sub, got, report)


# ---------------------------------------------------------------------------
# straight-part extraction
# ---------------------------------------------------------------------------

def _certify_restriction(mu, sub, params, r_min, epsilon, node_budget=2_000_000):
    nu = restrict(mu, sub)
    if nu.is_zero():
        return DensityCertificate("certified", 0.0, None, 0)
    return certify(CertRequest(nu, params, r_min=min(r_min, params.delta), epsilon=epsilon,
                               node_budget=node_budget))


def _element_subsets(mu):
    """One CarrierSubset per carrier element, in atom-then-piece order."""
    subs = [CarrierSubset(frozenset({i}), {}) for i in range(len(mu.atoms))]
    subs += [CarrierSubset(frozenset(), {i: ((0.0, 1.0),)}) for i in range(len(mu.pieces))]
    return subs


def _union_all(subs):
    out = CarrierSubset()
    for s in subs:
        out = out.union(s)
    return out


def _exact_atomic_extract(mu, sub_atoms, params, r_min, epsilon):
    """Max-mass certifiable atom subset by candidate-ball feasibility DP.

    sub_atoms: sorted original atom indices under consideration.
    Returns (d, chosen original indices).
    """
    atoms = [mu.atoms[i] for i in sub_atoms]
    nu = DiscreteMeasure(atoms, dimension=mu.dimension)
    ev = BallMassEvaluator(nu)
    n = len(atoms)
    C, R_eff = atomic_candidate_balls(ev, r_min, params.delta, params.s)
    w = np.array([a.mass for a in atoms])
    msum = np.zeros(1 << n)
    for S in range(1, 1 << n):
        low = S & -S
        msum[S] = msum[S ^ low] + w[low.bit_length() - 1]
    feasible = np.ones(1 << n, dtype=bool)
    if C.shape[0]:
        d2 = ((ev.atom_xy[None, :, :] - C[:, None, :]) ** 2).sum(axis=2)
        inside = d2 <= (R_eff[:, None] * (1 + 1e-12)) ** 2
        weights = (1.0 + epsilon) * omega(params.s) * R_eff ** params.s * (1.0 + _ULP_SLACK)
        all_S = np.arange(1 << n, dtype=np.int64)
        for b in range(C.shape[0]):
            mask = 0
            for j in np.nonzero(inside[b])[0]:
                mask |= 1 << int(j)
            feasible &= msum[all_S & mask] <= weights[b]
    masses = np.where(feasible, msum, -1.0)
    S_best = int(np.argmax(masses))
    chosen = frozenset(sub_atoms[j] for j in range(n) if S_best >> j & 1)
    return float(msum[S_best]), chosen


def _exact_lattice_extract(mu, atom_ids, piece_ids, params, r_min, epsilon):
    """Max-mass certifiable element subset by best-first lattice search."""
    elements = [("atom", i) for i in atom_ids] + [("piece", i) for i in piece_ids]
    masses = [mu.atoms[i].mass if k == "atom" else mu.pieces[i].mass for k, i in elements]
    n = len(elements)

    def to_subset(bits):
        a = frozenset(i for j, (k, i) in enumerate(elements) if k == "atom" and bits >> j & 1)
        f = {i: ((0.0, 1.0),) for j, (k, i) in enumerate(elements) if k == "piece" and bits >> j & 1}
        return CarrierSubset(a, f)

    full = (1 << n) - 1
    total = sum(masses)
    heap = [(-total, full)]
    seen = {full}
    while heap:
        neg_m, bits = heapq.heappop(heap)
        sub = to_subset(bits)
        cert = _certify_restriction(mu, sub, params, r_min, epsilon)
        if cert.status == "certified":
            return -neg_m, sub, cert
        for j in range(n):
            if bits >> j & 1:
                child = bits & ~(1 << j)
                if child and child not in seen:
                    seen.add(child)
                    heapq.heappush(heap, (neg_m + masses[j], child))
    raise RuntimeError("no certifiable element subset despite certifiable singletons")


def _greedy_extract(mu, atom_ids, piece_ids, params, r_min, epsilon):
    """Worst-ball peeling: drop the heaviest in-ball element until certified."""
    atom_ids = list(atom_ids)
    piece_ids = list(piece_ids)
    while atom_ids or piece_ids:
        sub = CarrierSubset(frozenset(atom_ids), {i: ((0.0, 1.0),) for i in piece_ids})
        cert = _certify_restriction(mu, sub, params, r_min, epsilon)
        if cert.status == "certified":
            return sub, cert
        witness = cert.witness
        if witness is None:
            _, witness = worst_ball_ratio(restrict(mu, sub), params, r_min)
        # element contributing the most mass inside the worst ball; ties to
        # the smallest index, atoms before pieces
        best = None
        for kind, ids in (("atom", atom_ids), ("piece", piece_ids)):
            for i in ids:
                if kind == "atom":
                    a = mu.atoms[i]
                    contrib = a.mass if witness.contains(a.location, tol=1e-12) else 0.0
                else:
                    from .geometry import ball_segment_length

                    p = mu.pieces[i]
                    contrib = ball_segment_length(witness, p.segment, p.density)
                if best is None or contrib > best[0] + 1e-15:
                    best = (contrib, kind, i)
        _, kind, i = best
        (atom_ids if kind == "atom" else piece_ids).remove(i)
    raise RuntimeError("greedy peeling removed every element without certifying")


def _proof_schedule_extract(mu, piece_ids, params, schedule, epsilon):
    """Finite-stage reenactment of the continuum construction for
    segment-only carriers: cut pieces to short fragments and retain a
    (1 - eps_j) centered fraction per fragment, stage by stage."""
    frags = {i: [(0.0, 1.0)] for i in piece_ids}
    for eps_j, r_j in zip(schedule.epsilons, schedule.radii[1:] + (schedule.radii[-1],)):
        new = {}
        for i, ivs in frags.items():
            length = mu.pieces[i].segment.length
            out = []
            for lo, hi in ivs:
                span = hi - lo
                k = max(1, int(math.ceil(span * length / r_j)))
                step = span / k
                keep = (1.0 - eps_j) * step
                for m in range(k):
                    a = lo + m * step + 0.5 * (step - keep)
                    out.append((a, a + keep))
            new[i] = out
        frags = new
    sub = CarrierSubset(frozenset(), {i: tuple(ivs) for i, ivs in frags.items()})
    cert = _certify_restriction(mu, sub, params, schedule.r_min, epsilon)
    if cert.status != "certified":
        raise RuntimeError(
            "schedule reenactment did not certify; refine the schedule "
            f"(sup ratio bound {cert.sup_ratio_bound:.6g})"
        )
    return sub, cert


def _certifiable_elements(mu, params, r_min, epsilon):
    """Original indices of atoms/pieces whose singleton restriction certifies."""
    atom_ok, piece_ok = [], []
    for i, a in enumerate(mu.atoms):
        if a.mass <= 0:
            continue
        if a.mass <= (1.0 + epsilon) * omega(params.s) * min(r_min, params.delta) ** params.s * (1.0 + _ULP_SLACK):
            atom_ok.append(i)
    for i, p in enumerate(mu.pieces):
        if p.mass <= 0:
            continue
        sub = CarrierSubset(frozenset(), {i: ((0.0, 1.0),)})
        if _certify_restriction(mu, sub, params, r_min, epsilon).status == "certified":
            piece_ok.append(i)
    return atom_ok, piece_ok


def extract_straight_part(mu: DiscreteMeasure, params: HausdorffParams,
                          schedule: ExtractionSchedule | None = None,
                          mode: str = "exact", epsilon: float = 0.0) -> StraightPart:
    """One certified part of positive mass; exact mode maximizes the mass."""
    schedule = schedule or ExtractionSchedule()
    r_min = schedule.r_min
    if mu.is_zero():
        raise ValueError("cannot extract from a zero measure")
    atom_ok, piece_ok = _certifiable_elements(mu, params, r_min, epsilon)
    if not atom_ok and not piece_ok:
        raise ValueError(
            "no certifiable carrier element at the floor; everything is residual"
        )
    if mode == "proof_schedule":
        if mu.atoms:
            raise ValueError("proof_schedule mode applies to segment-only measures")
        sub, cert = _proof_schedule_extract(mu, piece_ok, params, schedule, epsilon)
        return StraightPart(sub, subset_mass(mu, sub), cert)
    if mode == "exact":
        if len(atom_ok) > EXACT_ATOM_EXTRACT_LIMIT or len(piece_ok) > EXACT_PIECE_EXTRACT_LIMIT:
            raise ValueError(
                f"exact mode handles <= {EXACT_ATOM_EXTRACT_LIMIT} atoms and "
                f"<= {EXACT_PIECE_EXTRACT_LIMIT} pieces; use mode='greedy'"
            )
        if not piece_ok and params.convention == "spherical":
            d, chosen = _exact_atomic_extract(mu, atom_ok, params, r_min, epsilon)
            sub = CarrierSubset(chosen, {})
            cert = _certify_restriction(mu, sub, params, r_min, epsilon)
            if cert.status != "certified":  # pragma: no cover - cross-check
                raise RuntimeError("exact extraction produced an uncertifiable subset")
            return StraightPart(sub, d, cert)
        _, sub, cert = _exact_lattice_extract(mu, atom_ok, piece_ok, params, r_min, epsilon)
        return StraightPart(sub, subset_mass(mu, sub), cert)
    if mode == "greedy":
        sub, cert = _greedy_extract(mu, atom_ok, piece_ok, params, r_min, epsilon)
        return StraightPart(sub, subset_mass(mu, sub), cert)
    raise ValueError(f"unknown extraction mode {mode!r}")


# ---------------------------------------------------------------------------
# exhaustion loop and localization
# ---------------------------------------------------------------------------

def decompose(mu: DiscreteMeasure, params: HausdorffParams,
              schedule: ExtractionSchedule | None = None,
              mode: str = "exact", epsilon: float = 0.0) -> Decomposition:
    """Exhaust the measure into certified parts plus an uncertifiable residual."""
    if mode not in ("exact", "greedy"):
        raise ValueError("decompose supports modes 'exact' and 'greedy'")
    schedule = schedule or ExtractionSchedule()
    rem_atoms = set(range(len(mu.atoms)))
    rem_pieces = set(range(len(mu.pieces)))
    parts = []
    d_values = [] if mode == "exact" else None
    while True:
        atoms_r = sorted(rem_atoms)
        pieces_r = sorted(rem_pieces)
        sub_mu = DiscreteMeasure([mu.atoms[i] for i in atoms_r],
                                 [mu.pieces[i] for i in pieces_r],
                                 dimension=mu.dimension)
        if sub_mu.is_zero():
            break
        try:
            part = extract_straight_part(sub_mu, params, schedule, mode, epsilon)
        except ValueError:
            break  # no certifiable element left: remainder is the residual
        # map restricted indices back to the original carrier
        atoms_o = frozenset(atoms_r[i] for i in part.subset.atom_indices)
        pieces_o = {pieces_r[i]: ivs for i, ivs in part.subset.fragments.items()}
        sub_o = CarrierSubset(atoms_o, pieces_o)
        parts.append(StraightPart(sub_o, part.mass, part.certificate))
        if d_values is not None:
            d_values.append(part.mass)  # exact mode attains the supremum d_n
        rem_atoms -= atoms_o
        rem_pieces -= set(pieces_o)
        if part.mass <= 0:
            break
    residual = CarrierSubset(frozenset(rem_atoms),
                             {i: ((0.0, 1.0),) for i in rem_pieces})
    return Decomposition(tuple(parts), residual,
                         None if d_values is None else tuple(d_values),
                         schedule, mode, epsilon, params.s)


def _part_point_sets(mu, sub):
    """Atoms and segments carried by a subset, for set-distance queries."""
    nu = restrict(mu, sub)
    return [a.location for a in nu.atoms], [p.segment for p in nu.pieces]


def _set_distance(ps1, ps2):
    pts1, segs1 = ps1
    pts2, segs2 = ps2
    best = math.inf
    for p in pts1:
        for q in pts2:
            best = min(best, float(np.linalg.norm(p - q)))
        for s in segs2:
            best = min(best, point_segment_distance(p, s))
    for s in segs1:
        for q in pts2:
            best = min(best, point_segment_distance(q, s))
        for t in segs2:
            best = min(best, segment_segment_distance(s, t))
    return best


def localize(mu: DiscreteMeasure, dec: Decomposition, epsilons) -> LocalizedDecomposition:
    """Stagewise localization: keep part prefixes, certify at half the
    minimum pairwise distance among the kept parts."""
    epsilons = list(epsilons)
    if any(e2 >= e1 for e1, e2 in zip(epsilons, epsilons[1:])) or not epsilons:
        raise ValueError("localize needs a strictly decreasing positive stage sequence")
    params_inf = HausdorffParams(s=dec.s, delta=math.inf)
    total = mu.total_mass()
    part_masses = [p.mass for p in dec.parts]
    geoms = [_part_point_sets(mu, p.subset) for p in dec.parts]
    stages = []
    for eps in epsilons:
        kept = len(dec.parts)
        acc = 0.0
        for k in range(len(dec.parts) + 1):
            unkept = total - sum(part_masses[:k])
            if unkept <= eps * (1 + 1e-12):
                kept = k
                break
        kept_sub = _union_all([p.subset for p in dec.parts[:kept]]) if kept else CarrierSubset()
        complement = kept_sub.complement_in(mu)
        comp_mass = subset_mass(mu, complement)
        met = comp_mass <= eps * (1 + 1e-12)
        if kept <= 1:
            delta = math.inf  # vacuous pairwise minimum
        else:
            delta = 0.5 * min(
                _set_distance(geoms[i], geoms[j])
                for i in range(kept) for j in range(i + 1, kept)
            )
        if delta <= 0.0:
            stages.append(LocalizationStage(kept, complement, 0.0, comp_mass, eps,
                                            None, degenerate=True))
            continue
        # closed balls: back off the critical scale by a small margin
        delta_eff = delta if math.isinf(delta) else delta * (1.0 - _LOCALIZE_SCALE_MARGIN)
        params_j = HausdorffParams(s=dec.s, delta=delta_eff)
        cert = _certify_restriction(mu, kept_sub, params_j,
                                    min(dec.schedule.r_min, delta_eff), dec.epsilon)
        stages.append(LocalizationStage(kept, complement, delta, comp_mass, eps,
                                        cert, degenerate=not met))
    return LocalizedDecomposition(tuple(stages))
