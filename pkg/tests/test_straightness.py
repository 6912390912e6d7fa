import math

import pytest

from hausstraight.fixtures import FixtureSpec, generate
from hausstraight.hausdorff import HausdorffParams, omega
from hausstraight.measure import Atom, DiscreteMeasure, SegmentPiece
from hausstraight.geometry import Segment
from hausstraight.straightness import (
    CertRequest,
    certify,
    max_scale_of_straightness,
    worst_ball_ratio,
)

# independent closed forms used as oracles:
#   two parallel unit-density segments (length L, gap g): the worst ball is
#   centered between the midpoints with radius r = sqrt((L/2)^2 + (g/2)^2),
#   capturing both full segments, ratio = 2L / (2r).
PARALLEL_SUP = 20.0 / (2.0 * math.sqrt(5.0 ** 2 + 0.25 ** 2))
#   the largest certifying delta for gap g solves 2*2*sqrt(r^2-(g/2)^2) = 2r,
#   i.e. r = g/sqrt(3).
PARALLEL_DELTA_STAR = 0.5 / math.sqrt(3.0)


def test_unit_segment_certifies_at_ratio_one():
    mu = generate(FixtureSpec("segment", {"length": 10.0}))
    cert = certify(CertRequest(mu, HausdorffParams(s=1.0), r_min=1e-3, epsilon=1e-9))
    assert cert.status == "certified"
    assert cert.sup_ratio_bound == pytest.approx(1.0, abs=1e-6)


def test_overdense_segment_violates():
    mu = DiscreteMeasure(pieces=[SegmentPiece(Segment([0.0, 0.0], [1.0, 0.0]), 1.2)])
    cert = certify(CertRequest(mu, HausdorffParams(s=1.0), r_min=1e-3, epsilon=0.0))
    assert cert.status == "violated"
    assert cert.witness is not None
    # the witness really does exceed the bound
    ratio = mu.ball_mass(cert.witness) / (omega(1.0) * cert.witness.radius)
    assert ratio > 1.0


def test_single_atom_exact_ratio():
    m, r_min = 0.3, 0.1
    mu = DiscreteMeasure(atoms=[Atom([0.0, 0.0], m)])
    sup, witness = worst_ball_ratio(mu, HausdorffParams(s=1.0), r_min=r_min)
    assert sup == pytest.approx(m / (omega(1.0) * r_min), rel=1e-9)
    assert witness.radius == pytest.approx(r_min, rel=1e-9)
    assert certify(CertRequest(mu, HausdorffParams(s=1.0), r_min=r_min)).status == "violated"
    assert certify(CertRequest(mu, HausdorffParams(s=1.0), r_min=r_min,
                               epsilon=0.6)).status == "certified"


def test_atom_at_exact_equality_certifies():
    # mass exactly omega_1 * r_min: ratio 1, must not tip to violated by rounding
    r_min = 0.1
    mu = DiscreteMeasure(atoms=[Atom([0.0, 0.0], omega(1.0) * r_min)])
    cert = certify(CertRequest(mu, HausdorffParams(s=1.0), r_min=r_min, epsilon=0.0))
    assert cert.status == "certified"
    assert max_scale_of_straightness(mu, 1.0, r_min) == math.inf


def test_two_atom_pair_ball():
    mu = DiscreteMeasure(atoms=[Atom([0.0, 0.0], 1.0), Atom([1.0, 0.0], 1.0)])
    sup, witness = worst_ball_ratio(mu, HausdorffParams(s=1.0), r_min=0.5)
    # ball of radius 0.5 at the midpoint holds both atoms: 2 / (2 * 0.5) = 2
    assert sup == pytest.approx(2.0, rel=1e-9)
    assert witness.radius == pytest.approx(0.5, rel=1e-6)


def test_mixed_carrier_violation_detected():
    mu = DiscreteMeasure(
        atoms=[Atom([0.5, 0.0], 0.3)],
        pieces=[SegmentPiece(Segment([0.0, 0.0], [1.0, 0.0]), 1.0)],
    )
    cert = certify(CertRequest(mu, HausdorffParams(s=1.0), r_min=0.01, epsilon=0.05))
    assert cert.status == "violated"


def test_parallel_segments_worst_ratio_oracle():
    mu = generate(FixtureSpec("parallel_segments", {"length": 10.0, "gap": 0.5}))
    ratio, witness = worst_ball_ratio(mu, HausdorffParams(s=1.0), r_min=0.05,
                                      rel_tol=1e-3, node_budget=2_000_000)
    assert ratio == pytest.approx(PARALLEL_SUP, rel=2e-3)
    assert witness is not None
    # the bracket's lower end is a genuine sampled ratio
    attained = mu.ball_mass(witness) / (omega(1.0) * witness.radius)
    assert attained <= ratio * (1 + 1e-9)
    assert attained >= PARALLEL_SUP * (1 - 2e-3)


def test_max_scale_segment_unbounded():
    mu = generate(FixtureSpec("segment", {"length": 10.0}))
    assert max_scale_of_straightness(mu, 1.0, 1e-3) == math.inf


def test_max_scale_parallel_matches_analytic():
    mu = generate(FixtureSpec("parallel_segments", {"length": 2.0, "gap": 0.5}))
    got = max_scale_of_straightness(mu, 1.0, 0.01, rel_tol=2e-3, node_budget=5_000_000)
    assert got == pytest.approx(PARALLEL_DELTA_STAR, rel=1e-2)


def test_heavy_atom_scale_zero():
    mu = DiscreteMeasure(atoms=[Atom([0.0, 0.0], 10.0)])
    assert max_scale_of_straightness(mu, 1.0, 0.1) == 0.0


def test_budget_exhaustion_is_inconclusive():
    mu = generate(FixtureSpec("parallel_segments", {"length": 10.0, "gap": 0.5}))
    # delta just below the critical scale: truly certified, but far too few
    # nodes to finish the proof
    cert = certify(CertRequest(mu, HausdorffParams(s=1.0, delta=0.28), r_min=0.01,
                               node_budget=16))
    assert cert.status == "inconclusive"
    assert cert.sup_ratio_bound >= 1.0  # the open bound still dominates the truth


def test_request_validation():
    mu = generate(FixtureSpec("segment", {}))
    with pytest.raises(ValueError):
        CertRequest(mu, HausdorffParams(s=1.0), r_min=0.0)
    with pytest.raises(ValueError):
        CertRequest(mu, HausdorffParams(s=1.0), r_min=0.1, epsilon=-0.1)
    with pytest.raises(ValueError):
        CertRequest(mu, HausdorffParams(s=1.0, delta=0.05), r_min=0.1)
