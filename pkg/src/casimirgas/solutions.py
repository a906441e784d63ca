"""Closed-form steady solutions and their exact functional values.

Both models admit the profile p = cos x + 2 with rho = kappa/p, which sits
on the steady constraint set, so the full residual of the evolution
equations reduces to the spatial flux divergence.  The momentum potential
theta = sin x + 2x - t is kept for provenance only; the state variables are
(p, rho) and they do not move.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import models
from .grid import Grid
from .reporting import dumps_json

SQRT3 = math.sqrt(3.0)


@dataclass(frozen=True)
class ExactSolution:
    model: models.ModelParams
    label: str
    p_of_x: Callable[[np.ndarray], np.ndarray]
    rho_of_x: Callable[[np.ndarray], np.ndarray]
    theta_of_xt: Callable[[np.ndarray, float], np.ndarray]
    bounds: tuple[float, float]  # (inf rho, sup rho)


def chaplygin_solution(lam: float = 0.5) -> ExactSolution:
    """p = cos x + 2, rho = sqrt(2*lam)/(cos x + 2)."""
    kappa = math.sqrt(2.0 * lam)
    return ExactSolution(
        model=models.Chaplygin(lam),
        label="chaplygin-cosine",
        p_of_x=lambda x: np.cos(x) + 2.0,
        rho_of_x=lambda x: kappa / (np.cos(x) + 2.0),
        theta_of_xt=lambda x, t: np.sin(x) + 2.0 * x - t,
        bounds=(kappa / 3.0, kappa),
    )


def borninfeld_solution() -> ExactSolution:
    """p = cos x + 2, rho = 1/(cos x + 2), for a = c = 1."""
    return ExactSolution(
        model=models.BornInfeld(a=1.0, c=1.0),
        label="born-infeld-cosine",
        p_of_x=lambda x: np.cos(x) + 2.0,
        rho_of_x=lambda x: 1.0 / (np.cos(x) + 2.0),
        theta_of_xt=lambda x, t: np.sin(x) + 2.0 * x - t,
        bounds=(1.0 / 3.0, 1.0),
    )


def sample(sol: ExactSolution, t: float, grid: Grid) -> models.State:
    """State with the closed forms evaluated at the grid points."""
    return models.state_from_arrays(sol.p_of_x(grid.x), sol.rho_of_x(grid.x), grid, time=t)


def residual(sol: ExactSolution, grid: Grid, scheme: str = "spectral") -> float:
    """max |tendency| of the sampled profile; pure discretization error."""
    dp, dr = models.rhs(sample(sol, 0.0, grid), sol.model, scheme)
    return float(max(np.max(np.abs(dp.values)), np.max(np.abs(dr.values))))


def oracle_values(sol: ExactSolution) -> dict[str, float]:
    """Exact values of the energy and Casimir functionals on the profile.

    Uses integral(dx/(2+cos x)) = 2*pi/sqrt(3) and
    integral(dx/(2+cos x)^2) = 4*pi/3^(3/2) over one period.
    """
    if isinstance(sol.model, models.Chaplygin):
        kappa = sol.model.kappa
        # on the constraint set the energy density reduces to kappa*p
        h = kappa * 4.0 * math.pi
        c = kappa * 4.0 * math.pi / 3.0**1.5
    else:
        # energy density reduces to rho + 1/rho; the Casimir is -1/2 of it
        h = 2.0 * math.pi / SQRT3 + 4.0 * math.pi
        c = -0.5 * h
    return {"H": h, "C": c, "rho_inf": sol.bounds[0], "rho_sup": sol.bounds[1]}


def oracle_fixture_json(sol: ExactSolution) -> str:
    """Oracle record in the JSON fixture format used by the test suite."""
    rec = {"label": sol.label, "model": models.model_to_dict(sol.model)}
    rec.update(oracle_values(sol))
    return dumps_json(rec)
