import math

import numpy as np
import pytest

from hausstraight.geometry import Segment
from hausstraight.measure import Atom, DiscreteMeasure, SegmentPiece
from hausstraight.potential_pde import (
    BumpTestFunction,
    GridDomain,
    GridField,
    SchemeConfig,
    distributional_residual,
    exp_integrability_probe,
    minimize_energy,
    newtonian_potential,
    solve_with_measure,
)


def test_log_kernel_values():
    nu = DiscreteMeasure(atoms=[Atom([0.0, 0.0], 1.0)])
    pts = np.array([[1.0, 0.0], [math.e, 0.0], [0.5, 0.0]])
    got = newtonian_potential(nu, pts)
    want = -np.log([1.0, math.e, 0.5]) / (2.0 * math.pi)
    assert np.allclose(got, want, rtol=1e-12)


def test_three_d_kernel_values():
    nu = DiscreteMeasure(atoms=[Atom([0.0, 0.0, 0.0], 2.0)])
    got = newtonian_potential(nu, np.array([[2.0, 0.0, 0.0]]))
    assert got[0] == pytest.approx(2.0 / (4.0 * math.pi * 2.0), rel=1e-12)


def test_segment_potential_against_riemann_sum():
    seg = Segment([0.0, 0.0], [1.0, 0.0])
    nu = DiscreteMeasure(pieces=[SegmentPiece(seg, 1.0)])
    x = np.array([[0.5, 1.0]])
    got = float(newtonian_potential(nu, x)[0])
    # independent oracle: fine midpoint rule over the segment parameter
    n = 200_000
    t = (np.arange(n) + 0.5) / n
    pts = np.column_stack([t, np.zeros(n)])
    d = np.linalg.norm(pts - x[0], axis=1)
    oracle = float(np.mean(-np.log(d) / (2.0 * math.pi)))
    assert got == pytest.approx(oracle, rel=1e-8)


def test_potential_rejects_unsupported_dimension():
    nu = DiscreteMeasure(atoms=[Atom([0.0], 1.0)])
    with pytest.raises(ValueError):
        newtonian_potential(nu, np.array([[1.0]]))


def test_minimize_energy_zero_data():
    dom = GridDomain(0.0, 1.0, 0.0, 1.0, 1.0 / 16)
    f = GridField(dom, np.zeros((dom.nx - 1) * (dom.ny - 1)))
    u, _info = minimize_energy(dom, f)
    assert np.max(np.abs(u.values)) <= 1e-12


def test_minimize_energy_constant_data_below_linear_solution():
    # with f = 1 the absorption term only lowers u below the linear Poisson
    # solution, whose center value on the unit square is ~0.07367
    dom = GridDomain(0.0, 1.0, 0.0, 1.0, 1.0 / 32)
    f = GridField(dom, np.ones((dom.nx - 1) * (dom.ny - 1)))
    u, _info = minimize_energy(dom, f)
    center = u.as_grid()[(dom.ny - 1) // 2, (dom.nx - 1) // 2]
    assert 0.0 < center < 0.07367


def test_solver_zero_measure_gives_zero():
    dom = GridDomain(0.0, 1.0, 0.0, 1.0, 1.0 / 32)
    nu = DiscreteMeasure(atoms=[Atom([0.5, 0.5], 0.0)])
    u, report = solve_with_measure(dom, nu, SchemeConfig(n_stages=3))
    assert np.max(np.abs(u.values)) <= 1e-10


def test_solver_rejects_supercritical_atom():
    dom = GridDomain(0.0, 1.0, 0.0, 1.0, 1.0 / 32)
    nu = DiscreteMeasure(atoms=[Atom([0.5, 0.5], 4.5 * math.pi)])
    with pytest.raises(ValueError):
        solve_with_measure(dom, nu, SchemeConfig(n_stages=2))


def test_solver_monotone_stages_and_absorption():
    dom = GridDomain(0.0, 1.0, 0.0, 1.0, 1.0 / 64)
    nu = DiscreteMeasure(atoms=[Atom([0.5, 0.5], 2.0 * math.pi)])
    u, report = solve_with_measure(dom, nu, SchemeConfig(n_stages=4))
    assert report.monotonicity_violation <= 1e-10
    assert all(a <= nu.total_mass() * (1 + 1e-9) for a in report.l1_exp_minus_one)
    assert np.all(u.values >= -1e-10)


def test_bump_laplacian_matches_finite_differences():
    phi = BumpTestFunction(center=[0.3, 0.4], radius=0.25, power=4)
    rng = np.random.default_rng(1)
    pts = phi.center + rng.uniform(-0.2, 0.2, size=(20, 2)) * phi.radius
    h = 1e-5
    for p in pts:
        fd = 0.0
        for k in range(2):
            e = np.zeros(2)
            e[k] = h
            fd += (phi(np.array([p + e]))[0] - 2.0 * phi(np.array([p]))[0]
                   + phi(np.array([p - e]))[0]) / h**2
        assert phi.laplacian(np.array([p]))[0] == pytest.approx(fd, rel=1e-4, abs=1e-6)


def test_distributional_residual_zero_case():
    dom = GridDomain(0.0, 1.0, 0.0, 1.0, 1.0 / 32)
    u = GridField(dom, np.zeros((dom.nx - 1) * (dom.ny - 1)))
    nu = DiscreteMeasure(atoms=[Atom([0.5, 0.5], 0.0)])
    phi = BumpTestFunction(center=[0.5, 0.5], radius=0.3)
    (res,) = distributional_residual(u, nu, [phi])
    assert abs(res) <= 1e-12


def test_distributional_residual_rejects_boundary_bumps():
    dom = GridDomain(0.0, 1.0, 0.0, 1.0, 1.0 / 32)
    u = GridField(dom, np.zeros((dom.nx - 1) * (dom.ny - 1)))
    nu = DiscreteMeasure(atoms=[Atom([0.5, 0.5], 0.0)])
    phi = BumpTestFunction(center=[0.9, 0.5], radius=0.3)  # pokes out of the square
    with pytest.raises(ValueError):
        distributional_residual(u, nu, [phi])


def test_exp_probe_classifications():
    sub = DiscreteMeasure(atoms=[Atom([0.5, 0.5], math.pi)])
    sup = DiscreteMeasure(atoms=[Atom([0.5, 0.5], 4.4 * math.pi)])
    assert exp_integrability_probe(sub)["classification"] == "bounded"
    assert exp_integrability_probe(sup)["classification"] == "divergent"
