import json
import math

import numpy as np
import pytest

from casimirgas import functionals as fu
from casimirgas import integrator as ig
from casimirgas import models, solutions
from casimirgas.grid import Grid


def test_chaplygin_sample_point_values(grid128):
    s = solutions.sample(solutions.chaplygin_solution(0.5), 0.0, grid128)
    assert s.p.values[0] == pytest.approx(3.0)          # x = 0
    assert s.rho.values[0] == pytest.approx(1.0 / 3.0)
    assert s.time == 0.0


def test_borninfeld_sample_point_values(grid128):
    s = solutions.sample(solutions.borninfeld_solution(), 1.5, grid128)
    mid = grid128.n // 2  # x = pi
    assert s.p.values[mid] == pytest.approx(1.0)
    assert s.rho.values[mid] == pytest.approx(1.0)
    assert s.time == 1.5


@pytest.mark.parametrize("n", [16, 64, 256])
def test_constraint_residual_at_any_resolution(n):
    g = Grid(n)
    for sol in (solutions.chaplygin_solution(0.5), solutions.borninfeld_solution()):
        s = solutions.sample(sol, 0.0, g)
        kappa = sol.model.kappa
        assert np.max(np.abs(s.p.values * s.rho.values - kappa)) < 1e-15


@pytest.mark.parametrize("make", [
    lambda: solutions.chaplygin_solution(0.5),
    solutions.borninfeld_solution,
])
def test_residual_small_at_n128(make):
    assert solutions.residual(make(), Grid(128)) < 1e-12


def test_residual_at_rounding_floor_for_all_n():
    # the fluxes are exactly constant on the constraint set, so the steady
    # residual has no truncation component at any resolution
    sol = solutions.chaplygin_solution(0.5)
    for n in (16, 32, 64, 128):
        assert solutions.residual(sol, Grid(n)) < 1e-12


def test_profile_derivative_converges_spectrally():
    # the profile itself is rational, so its derivative carries a geometric
    # spectral tail that collapses to the floor once the grid resolves it
    from casimirgas.grid import derivative

    sol = solutions.chaplygin_solution(0.5)
    errs = {}
    for n in (16, 32, 64):
        g = Grid(n)
        rho = g.field(sol.rho_of_x(g.x))
        exact = np.sin(g.x) / (2.0 + np.cos(g.x)) ** 2
        errs[n] = np.max(np.abs(derivative(rho).values - exact))
    assert errs[16] > 1e3 * errs[32]
    assert errs[64] < 1e-12


def test_residual_central4_stays_at_rounding_floor():
    # the fluxes are constant on the constraint set, so the central
    # difference residual is rounding noise at any resolution
    sol = solutions.borninfeld_solution()
    for n in (64, 128):
        assert solutions.residual(sol, Grid(n), "central4") < 1e-12


def test_oracle_values_chaplygin_default():
    vals = solutions.oracle_values(solutions.chaplygin_solution(0.5))
    assert vals["H"] == pytest.approx(4 * math.pi, rel=1e-15)
    assert vals["C"] == pytest.approx(4 * math.pi / 3**1.5, rel=1e-15)
    assert vals["rho_inf"] == pytest.approx(1.0 / 3.0)
    assert vals["rho_sup"] == pytest.approx(1.0)


def test_oracle_values_borninfeld():
    vals = solutions.oracle_values(solutions.borninfeld_solution())
    h = 2 * math.pi / math.sqrt(3) + 4 * math.pi
    assert vals["H"] == pytest.approx(h, rel=1e-15)
    assert vals["C"] == pytest.approx(-0.5 * h, rel=1e-15)
    assert vals["rho_inf"] == pytest.approx(1.0 / 3.0)
    assert vals["rho_sup"] == pytest.approx(1.0)


@pytest.mark.parametrize("lam", [0.5, 2.0])
def test_oracles_match_quadrature(grid256, lam):
    sol = solutions.chaplygin_solution(lam)
    s = solutions.sample(sol, 0.0, grid256)
    oracle = solutions.oracle_values(sol)
    m = sol.model
    assert fu.evaluate(models.hamiltonian_density(m), s) == pytest.approx(
        oracle["H"], rel=1e-12)
    assert fu.evaluate(models.casimir_density(m), s) == pytest.approx(
        oracle["C"], rel=1e-12)


def test_bounds_match_sampled_extremes(grid256):
    sol = solutions.borninfeld_solution()
    s = solutions.sample(sol, 0.0, grid256)
    assert float(s.rho.values.min()) == pytest.approx(sol.bounds[0], abs=1e-12)
    assert float(s.rho.values.max()) == pytest.approx(sol.bounds[1], abs=1e-12)


def test_oracle_scaling_with_lambda():
    # values scale linearly in kappa = sqrt(2*lam)
    v1 = solutions.oracle_values(solutions.chaplygin_solution(0.5))
    v2 = solutions.oracle_values(solutions.chaplygin_solution(2.0))
    assert v2["H"] == pytest.approx(2.0 * v1["H"], rel=1e-14)
    assert v2["C"] == pytest.approx(2.0 * v1["C"], rel=1e-14)


def test_theta_provenance_profile():
    sol = solutions.chaplygin_solution(0.5)
    x = np.linspace(0.0, 1.0, 5)
    np.testing.assert_allclose(sol.theta_of_xt(x, 2.0), np.sin(x) + 2 * x - 2.0)


def test_steady_solution_is_fixed_point_of_evolve(grid256, bi):
    s0 = solutions.sample(solutions.borninfeld_solution(), 0.0, grid256)
    dt = 0.5 * ig.cfl_dt(s0, bi)
    traj = ig.evolve(s0, 10.0, dt, bi)
    final = traj.states[-1]
    drift = max(np.max(np.abs(final.p.values - s0.p.values)),
                np.max(np.abs(final.rho.values - s0.rho.values)))
    assert drift < 1e-9


def test_oracle_fixture_json_parses():
    text = solutions.oracle_fixture_json(solutions.chaplygin_solution(0.5))
    rec = json.loads(text)
    assert rec["model"] == {"model": "chaplygin", "lambda": 0.5}
    assert rec["H"] == pytest.approx(4 * math.pi)
