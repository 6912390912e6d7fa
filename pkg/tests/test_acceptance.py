"""Acceptance tests: one test per published criterion.

Each test drives the corresponding end-to-end suite in
``hausstraight.verify`` (which holds the oracles and tolerances) and
asserts both the verdict and the stated runtime budget.
"""

import time

import pytest

from hausstraight import verify


def run(name: str, budget_seconds: float, seed: int = 0):
    t0 = time.monotonic()
    result = verify.run_suite(name, seed)
    elapsed = time.monotonic() - t0
    assert result.passed, f"{name} failed: {result.detail}"
    assert elapsed < budget_seconds, f"{name} took {elapsed:.1f}s (budget {budget_seconds}s)"
    return result


def test_01_flat_set_identity():
    """Unit-density length-10 segment at s=1 certifies with sup ratio
    within 1e-6 of 1; budget 5 s."""
    run("flat-identity", 5.0)


def test_02_sphere_non_straightness():
    """1024-gon circle at s=1 is violated with a witness ratio >= 1.3 at
    some r in [1.5, 2]; greedy content upper bound within 5% of 2 while the
    mass/upper ratio is >= pi * 0.95; budget 60 s."""
    run("sphere", 60.0)


def test_03_density_criterion_equivalence():
    """100 random <= 10-atom measures with floor r_min = rho = 0.05: the
    certify verdict agrees with a dense grid oracle 100/100, and on all
    <= 8-atom instances the verdict matches the exact-content subset
    comparison (mass <= content per subset <=> certified); budget 600 s."""
    result = run("density-oracle", 600.0, seed=7)
    assert "100/100" in result.detail


def test_04_halving_invariant():
    """50 random 12-atom instances in exact mode: every extracted part mass
    lies in [d_n / 2, d_n] where d_n comes from exhaustive subset search
    (slack 1e-9); budget 600 s."""
    result = run("halving", 600.0, seed=11)
    assert "0 halving violations" in result.detail


def test_05_decomposition_partition_properties():
    """On every fixture: parts pairwise disjoint, parts + residual mass
    equals total to 1e-12 relative, every certificate re-verifies; the
    parallel-segments fixture yields exactly 2 parts and empty residual."""
    run("partition", 120.0)


def test_06_localization():
    """3-cluster fixture with stage targets {0.5, 0.1, 0.01}: complement
    mass non-increasing and <= target per stage; each kept union certifies
    at delta_j = half the minimum pairwise part distance; budget 60 s."""
    run("localization", 60.0)


def test_07_pde_scheme_estimates():
    """2*pi Dirac at the center of the unit square, h = 1/256, 6 stages:
    nodewise monotonicity violation <= 1e-10; ||e^w - 1||_L1 <= nu(Omega)
    and ||Lap w||_L1 <= 2 nu(Omega) every stage; 0 <= w <= potential away
    from the atom to 1e-6; budget 300 s."""
    run("pde-estimates", 300.0)


def test_08_exponential_integrability_threshold():
    """Refinement of the grid integral of e^(potential): atom masses pi,
    2*pi, 3.9*pi classify as bounded (shrinking increments) while 4.4*pi
    classifies as divergent with refinement ratios >= 1.05 persisting
    across h, h/2, h/4; budget 120 s."""
    result = run("exp-threshold", 120.0)
    assert "4.4pi" in result.detail and "divergent" in result.detail


def test_09_manufactured_solution_convergence():
    """Distributional residual of the manufactured smooth case decreases
    under h -> h/2 -> h/4 with empirical order >= 1.8; budget 120 s."""
    run("manufactured", 120.0)


def test_10_energy_gradient_check():
    """Discrete energy gradient vs central finite differences agrees to
    1e-6 relative at 20 random iterates; budget 30 s."""
    run("gradient-check", 30.0, seed=5)
