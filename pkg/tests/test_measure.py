import json
import math

import numpy as np
import pytest

from hausstraight.geometry import Ball, Segment
from hausstraight.measure import (
    Atom,
    BallMassEvaluator,
    CarrierSubset,
    DiscreteMeasure,
    MeasureFormatError,
    SegmentPiece,
    load_measure,
    restrict,
    save_measure,
    subset_mass,
)


@pytest.fixture
def mixed():
    return DiscreteMeasure(
        atoms=[Atom([0.0, 0.0], 0.5), Atom([2.0, 0.0], 0.25)],
        pieces=[SegmentPiece(Segment([0.0, 1.0], [4.0, 1.0]), 0.5)],
    )


def test_total_and_ball_mass(mixed):
    assert mixed.total_mass() == pytest.approx(0.75 + 2.0)
    # ball catches the first atom and the chord at height 1, clipped at x = 0
    r = 1.5
    chord = math.sqrt(r * r - 1.0)
    got = mixed.ball_mass(Ball([0.0, 0.0], r))
    assert got == pytest.approx(0.5 + 0.5 * chord, rel=1e-12)


def test_evaluator_matches_scalar(mixed):
    ev = BallMassEvaluator(mixed)
    centers = np.array([[0.0, 0.0], [2.0, 0.0], [2.0, 1.0]])
    radii = np.array([1.5, 0.1, 0.5])
    batch = ev.masses(centers, radii)
    for c, r, m in zip(centers, radii, batch):
        assert m == pytest.approx(mixed.ball_mass(Ball(c, float(r))), rel=1e-12)


def test_restrict_and_subset_mass(mixed):
    sub = CarrierSubset(frozenset({0}), {0: ((0.25, 0.75),)})
    assert subset_mass(mixed, sub) == pytest.approx(0.5 + 0.5 * 2.0)
    nu = restrict(mixed, sub)
    assert nu.total_mass() == pytest.approx(1.5)
    assert len(nu.atoms) == 1 and len(nu.pieces) == 1
    assert nu.pieces[0].segment.length == pytest.approx(2.0)


def test_subset_algebra(mixed):
    a = CarrierSubset(frozenset({0}), {0: ((0.0, 0.5),)})
    b = CarrierSubset(frozenset({1}), {0: ((0.25, 1.0),)})
    u = a.union(b)
    assert u.atom_indices == frozenset({0, 1})
    assert u.fragments[0] == ((0.0, 1.0),)
    i = a.intersection(b)
    assert i.atom_indices == frozenset()
    assert i.fragments[0] == ((0.25, 0.5),)
    comp = a.complement_in(mixed)
    # complement + original tile the carrier exactly
    assert subset_mass(mixed, a) + subset_mass(mixed, comp) == pytest.approx(
        mixed.total_mass(), rel=1e-12
    )


def test_json_round_trip(tmp_path, mixed):
    path = tmp_path / "m.json"
    save_measure(mixed, path)
    back = load_measure(path)
    assert back.total_mass() == pytest.approx(mixed.total_mass(), rel=0, abs=0)
    assert len(back.atoms) == 2 and len(back.pieces) == 1
    assert np.array_equal(back.atoms[0].location, mixed.atoms[0].location)


def test_format_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"dimension": 2, "atoms": [{"x": [0, 0], "mass": -1}]}))
    with pytest.raises(MeasureFormatError):
        load_measure(bad)
    bad.write_text("not json")
    with pytest.raises(MeasureFormatError):
        load_measure(bad)


def test_dimension_mismatch_rejected():
    with pytest.raises(ValueError):
        DiscreteMeasure(atoms=[Atom([0.0, 0.0], 1.0), Atom([0.0, 0.0, 0.0], 1.0)])
