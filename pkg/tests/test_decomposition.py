import math

import pytest

from hausstraight.decomposition import (
    ExtractionSchedule,
    decompose,
    extract_straight_part,
    localize,
    subset_with_mass,
)
from hausstraight.fixtures import FixtureSpec, generate
from hausstraight.hausdorff import HausdorffParams
from hausstraight.measure import (
    Atom,
    DiscreteMeasure,
    SegmentPiece,
    restrict,
    subset_mass,
)
from hausstraight.geometry import Segment
from hausstraight.straightness import CertRequest, certify


def test_schedule_validation():
    ExtractionSchedule()  # defaults are consistent
    with pytest.raises(ValueError):
        ExtractionSchedule(epsilons=(0.6, 0.6))
    with pytest.raises(ValueError):
        ExtractionSchedule(radii=(0.5, 0.5))
    with pytest.raises(ValueError):
        ExtractionSchedule(radii=(0.5, 0.25), deltas=(1.0, 0.3))
    with pytest.raises(ValueError):
        ExtractionSchedule(r_min=0.0)


def test_subset_with_mass_exact_atoms():
    mu = DiscreteMeasure(atoms=[Atom([float(i), 0.0], m)
                                for i, m in enumerate([3.0, 2.0, 2.0, 1.0])])
    sel = subset_with_mass(mu, 4.0)
    assert sel.report == "exact"
    assert sel.achieved_mass == pytest.approx(4.0)
    assert subset_mass(mu, sel.subset) == pytest.approx(4.0)


def test_subset_with_mass_atomic_obstruction():
    mu = DiscreteMeasure(atoms=[Atom([0.0, 0.0], 5.0)])
    sel = subset_with_mass(mu, 3.0)
    assert sel.achieved_mass == pytest.approx(0.0)
    assert sel.report.startswith("atomic obstruction")
    assert "3" in sel.report


def test_subset_with_mass_segment_splitting():
    mu = DiscreteMeasure(pieces=[SegmentPiece(Segment([0.0, 0.0], [10.0, 0.0]), 1.0)])
    sel = subset_with_mass(mu, math.pi)
    assert sel.report == "exact"
    assert subset_mass(mu, sel.subset) == pytest.approx(math.pi, rel=1e-12)


def test_subset_with_mass_rejects_out_of_range():
    mu = DiscreteMeasure(atoms=[Atom([0.0, 0.0], 1.0)])
    with pytest.raises(ValueError):
        subset_with_mass(mu, 0.0)
    with pytest.raises(ValueError):
        subset_with_mass(mu, 2.0)


def test_extract_parallel_takes_one_segment():
    mu = generate(FixtureSpec("parallel_segments", {"length": 10.0, "gap": 0.5}))
    part = extract_straight_part(mu, HausdorffParams(s=1.0),
                                 ExtractionSchedule(r_min=0.05), mode="exact")
    assert part.mass == pytest.approx(10.0, rel=1e-9)
    assert part.certificate.status == "certified"


def test_decompose_parallel_two_parts_empty_residual():
    mu = generate(FixtureSpec("parallel_segments", {"length": 10.0, "gap": 0.5}))
    dec = decompose(mu, HausdorffParams(s=1.0), ExtractionSchedule(r_min=0.05), mode="exact")
    assert len(dec.parts) == 2
    assert dec.residual.is_empty()
    assert sum(p.mass for p in dec.parts) == pytest.approx(mu.total_mass(), rel=1e-12)


def test_decompose_halving_invariant_exact_mode():
    mu = generate(FixtureSpec("atom_cloud", {"n": 8}, seed=4))
    dec = decompose(mu, HausdorffParams(s=1.0), ExtractionSchedule(r_min=0.2), mode="exact")
    assert dec.d_values is not None
    for part, d in zip(dec.parts, dec.d_values):
        assert part.mass <= d + 1e-9
        assert part.mass >= 0.5 * d - 1e-9


def test_decompose_parts_disjoint_and_recertify():
    mu = generate(FixtureSpec("atom_cloud", {"n": 8}, seed=4))
    dec = decompose(mu, HausdorffParams(s=1.0), ExtractionSchedule(r_min=0.2), mode="exact")
    seen = set()
    for part in dec.parts:
        assert not (part.subset.atom_indices & seen)
        seen |= part.subset.atom_indices
        # re-verify on the restricted measure
        nu = restrict(mu, part.subset)
        cert = certify(CertRequest(nu, HausdorffParams(s=1.0), r_min=0.2, epsilon=0.0))
        assert cert.status == "certified"
    mass_cover = sum(p.mass for p in dec.parts) + subset_mass(mu, dec.residual)
    assert mass_cover == pytest.approx(mu.total_mass(), rel=1e-12)


def test_heavy_atom_lands_in_residual():
    mu = DiscreteMeasure(atoms=[Atom([0.0, 0.0], 10.0), Atom([1.0, 0.0], 0.05)])
    dec = decompose(mu, HausdorffParams(s=1.0), ExtractionSchedule(r_min=0.05), mode="exact")
    assert 0 in dec.residual.atom_indices
    assert all(0 not in p.subset.atom_indices for p in dec.parts)


def test_proof_schedule_mode_on_segments():
    mu = generate(FixtureSpec("segment", {"length": 4.0}))
    part = extract_straight_part(mu, HausdorffParams(s=1.0),
                                 ExtractionSchedule(r_min=0.05),
                                 mode="proof_schedule")
    assert part.certificate.status == "certified"
    rest = part.subset.complement_in(mu)
    assert part.mass + subset_mass(mu, rest) == pytest.approx(4.0, rel=1e-12)


def test_localize_single_part_degenerate_delta():
    mu = generate(FixtureSpec("segment", {"length": 4.0}))
    dec = decompose(mu, HausdorffParams(s=1.0), ExtractionSchedule(r_min=0.05), mode="exact")
    loc = localize(mu, dec, [0.5])
    st = loc.stages[0]
    assert st.delta == math.inf
    assert st.complement_mass <= 0.5 + 1e-12


def test_localize_stage_masses_non_increasing():
    mu = DiscreteMeasure(atoms=[
        Atom([0.0, 0.0], 0.9), Atom([1.0, 0.0], 0.2), Atom([0.0, 0.93], 0.1),
    ])
    dec = decompose(mu, HausdorffParams(s=1.0), ExtractionSchedule(r_min=0.46), mode="exact")
    loc = localize(mu, dec, [0.5, 0.1, 0.01])
    masses = [st.complement_mass for st in loc.stages]
    assert all(a >= b - 1e-12 for a, b in zip(masses, masses[1:]))
    for st in loc.stages:
        assert st.complement_mass <= st.target + 1e-12
        if not st.degenerate and st.certificate is not None:
            assert st.certificate.status == "certified"


def test_localize_requires_decreasing_targets():
    mu = generate(FixtureSpec("segment", {}))
    dec = decompose(mu, HausdorffParams(s=1.0), ExtractionSchedule(r_min=0.05), mode="exact")
    with pytest.raises(ValueError):
        localize(mu, dec, [0.1, 0.5])
