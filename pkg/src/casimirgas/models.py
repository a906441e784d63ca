"""The two Hamiltonian gas models: parameters, states, fluxes, tendencies,
constraint manifolds, and named equilibria.

Chaplygin gas (momentum p, density rho, constant lam > 0):

    dp/dt   = -d/dx( p^2/2 - lam/rho^2 )
    drho/dt = -d/dx( p*rho )

with energy density h = rho*p^2/2 + lam/rho.

Born-Infeld model (interaction strength a, light speed c):

    drho/dt = -d/dx( p * sqrt(rho^2 c^2 + a^2) / sqrt(c^2 + p^2) )
    dp/dt   = -d/dx( rho c^2 * sqrt(c^2 + p^2) / sqrt(rho^2 c^2 + a^2) )

with energy density h = sqrt(rho^2 c^2 + a^2) * sqrt(c^2 + p^2).  As
c -> infinity at fixed state the tendencies approach the Chaplygin ones
with lam = a^2/2 (the constant part of the p-flux drops under d/dx).

Any state with p*rho constant at the right value makes both fluxes constant
in x, so the whole constraint set consists of steady states.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, PositivityError
from .functionals import LocalFunctional, QuadraticForm
from .grid import Field, Grid, derivative_values

RHO_MIN = 1e-10

CBRT2 = 2.0 ** (1.0 / 3.0)


@dataclass(frozen=True)
class Chaplygin:
    """Chaplygin gas parameters."""

    lam: float = 0.5

    def __post_init__(self):
        if not self.lam > 0:
            raise ParameterError(f"lambda must be positive, got {self.lam}")

    @property
    def kappa(self) -> float:
        """Momentum-density product on the steady constraint set."""
        return math.sqrt(2.0 * self.lam)


@dataclass(frozen=True)
class BornInfeld:
    """Born-Infeld parameters."""

    a: float = 1.0
    c: float = 1.0

    def __post_init__(self):
        if not self.a > 0:
            raise ParameterError(f"a must be positive, got {self.a}")
        if not self.c > 0:
            raise ParameterError(f"c must be positive, got {self.c}")

    @property
    def kappa(self) -> float:
        # both fluxes are constant in x exactly when p*rho = a
        return self.a


ModelParams = Chaplygin | BornInfeld


@dataclass(frozen=True, eq=False)
class State:
    """Phase-space point: momentum and density fields on one grid."""

    p: Field
    rho: Field
    time: float = 0.0

    def __post_init__(self):
        if self.p.grid != self.rho.grid:
            raise ValueError("p and rho live on different grids")
        rmin = float(self.rho.values.min())
        if rmin <= RHO_MIN:
            i = int(np.argmin(self.rho.values))
            raise PositivityError(
                f"density must exceed {RHO_MIN:g} everywhere; rho[{i}] = {rmin:.6g}"
            )

    @property
    def grid(self) -> Grid:
        return self.p.grid


def state_from_arrays(p, rho, grid: Grid, time: float = 0.0) -> State:
    return State(Field(np.asarray(p, dtype=float), grid),
                 Field(np.asarray(rho, dtype=float), grid), time)


def state_increment(s: State, ref: State) -> tuple[Field, Field]:
    """The increment pair (p - p_ref, rho - rho_ref)."""
    return (Field(s.p.values - ref.p.values, s.grid),
            Field(s.rho.values - ref.rho.values, s.grid))


@dataclass(frozen=True)
class ConstraintManifold:
    """States with pointwise p*rho = kappa; every one of them is steady."""

    kappa: float

    def __post_init__(self):
        if not self.kappa > 0:
            raise ParameterError(f"kappa must be positive, got {self.kappa}")

    @classmethod
    def for_model(cls, m: ModelParams) -> "ConstraintManifold":
        return cls(m.kappa)

    def residual(self, s: State) -> float:
        return float(np.max(np.abs(s.p.values * s.rho.values - self.kappa)))


# ---------------------------------------------------------------------------
# fluxes and tendencies
# ---------------------------------------------------------------------------

def flux_arrays(p: np.ndarray, rho: np.ndarray, m: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(m, Chaplygin):
        return 0.5 * p * p - m.lam / (rho * rho), p * rho
    r = np.sqrt(rho * rho * m.c**2 + m.a**2)
    q = np.sqrt(m.c**2 + p * p)
    return rho * m.c**2 * q / r, p * r / q


def flux(s: State, m: ModelParams) -> tuple[Field, Field]:
    """Flux pair (F_p, F_rho) with tendencies (-dF_p/dx, -dF_rho/dx)."""
    fp, fr = flux_arrays(s.p.values, s.rho.values, m)
    return Field(fp, s.grid), Field(fr, s.grid)


def rhs_arrays(p: np.ndarray, rho: np.ndarray, m: ModelParams,
               scheme: str = "spectral") -> tuple[np.ndarray, np.ndarray]:
    fp, fr = flux_arrays(p, rho, m)
    return -derivative_values(fp, scheme), -derivative_values(fr, scheme)


def rhs(s: State, m: ModelParams, scheme: str = "spectral") -> tuple[Field, Field]:
    """Tendencies (dp/dt, drho/dt) at the state."""
    dp, dr = rhs_arrays(s.p.values, s.rho.values, m, scheme)
    return Field(dp, s.grid), Field(dr, s.grid)


# ---------------------------------------------------------------------------
# energy and Casimir densities
# ---------------------------------------------------------------------------

def hamiltonian_density(m: ModelParams) -> LocalFunctional:
    """Energy functional of the model, with exact partials."""
    if isinstance(m, Chaplygin):
        lam = m.lam
        return LocalFunctional(
            density=lambda p, rho: 0.5 * rho * p * p + lam / rho,
            d_dp=lambda p, rho: rho * p,
            d_drho=lambda p, rho: 0.5 * p * p - lam / (rho * rho),
            label="H[chaplygin]",
        )
    a2 = m.a**2
    c2 = m.c**2
    return LocalFunctional(
        density=lambda p, rho: np.sqrt(rho * rho * c2 + a2) * np.sqrt(c2 + p * p),
        d_dp=lambda p, rho: p * np.sqrt((rho * rho * c2 + a2) / (c2 + p * p)),
        d_drho=lambda p, rho: rho * c2 * np.sqrt((c2 + p * p) / (rho * rho * c2 + a2)),
        label="H[born-infeld]",
    )


def casimir_density(m: ModelParams) -> LocalFunctional:
    """The conserved companion functional used by the stability pipeline:
    integral(rho/p) dx for the Chaplygin gas and -1/2 integral(1/rho + rho) dx
    for the Born-Infeld model."""
    if isinstance(m, Chaplygin):
        return LocalFunctional(
            density=lambda p, rho: rho / p,
            d_dp=lambda p, rho: -rho / (p * p),
            d_drho=lambda p, rho: 1.0 / p,
            label="C[chaplygin]",
        )
    return LocalFunctional(
        density=lambda p, rho: -0.5 * (1.0 / rho + rho),
        d_dp=lambda p, rho: 0.0 * p,
        d_drho=lambda p, rho: 0.5 * (1.0 / (rho * rho) - 1.0),
        label="C[born-infeld]",
    )


def extended_hamiltonian_density(m: ModelParams) -> LocalFunctional:
    """Energy plus Casimir, the functional whose first variation is tested
    at the equilibrium."""
    return hamiltonian_density(m) + casimir_density(m)


# ---------------------------------------------------------------------------
# equilibria and the relativistic limit
# ---------------------------------------------------------------------------

def equilibrium_values(m: ModelParams) -> tuple[float, float]:
    """(p_e, rho_e) of the distinguished equilibrium."""
    if isinstance(m, Chaplygin):
        return CBRT2, math.sqrt(2.0 * m.lam) / CBRT2
    if (m.a, m.c) != (1.0, 1.0):
        raise ParameterError(
            f"the Born-Infeld equilibrium is only defined for a = c = 1, got a={m.a}, c={m.c}"
        )
    return 1.0, 1.0


def named_equilibrium(m: ModelParams, grid: Grid) -> State:
    """Constant state at the distinguished equilibrium."""
    p_e, rho_e = equilibrium_values(m)
    return State(grid.constant(p_e), grid.constant(rho_e))


def chaplygin_limit_gap(s: State, a: float, c: float, scheme: str = "spectral") -> float:
    """Max-norm distance between the Born-Infeld tendencies at (a, c) and
    the Chaplygin tendencies with lam = a^2/2, at a fixed state.

    Constants in the fluxes drop under d/dx, so the tendencies compare
    directly and the gap decays as 1/c^2.
    """
    if c < 1.0:
        raise ParameterError(f"the limit check needs c >= 1, got c={c}")
    dp_b, dr_b = rhs(s, BornInfeld(a=a, c=c), scheme)
    dp_c, dr_c = rhs(s, Chaplygin(lam=0.5 * a * a), scheme)
    return float(max(np.max(np.abs(dp_b.values - dp_c.values)),
                     np.max(np.abs(dr_b.values - dr_c.values))))


def stability_norm_form(m: ModelParams, beta: float, grid: Grid) -> QuadraticForm:
    """The model's stability quadratic form on density increments.

    Chaplygin: weight sqrt(2*lam)/(rho_e*beta) * (1/rho_e + 1/beta); the
    energy remainder vanishes on the constraint set, so the Casimir form
    alone is the norm.  Born-Infeld (a = c = 1): weight 1/beta.
    beta must dominate sup rho over the states the form will measure.
    """
    if beta <= 0:
        raise ParameterError(f"beta must be positive, got {beta}")
    if isinstance(m, Chaplygin):
        _, rho_e = equilibrium_values(m)
        w = math.sqrt(2.0 * m.lam) / (rho_e * beta) * (1.0 / rho_e + 1.0 / beta)
        return QuadraticForm(grid.constant(w), target="rho")
    equilibrium_values(m)  # enforces a = c = 1
    return QuadraticForm(grid.constant(1.0 / beta), target="rho")


# ---------------------------------------------------------------------------
# config round-trip
# ---------------------------------------------------------------------------

def model_to_dict(m: ModelParams) -> dict:
    if isinstance(m, Chaplygin):
        return {"model": "chaplygin", "lambda": m.lam}
    return {"model": "born-infeld", "a": m.a, "c": m.c}


def model_from_dict(d: dict) -> ModelParams:
    name = d.get("model")
    if name == "chaplygin":
        return Chaplygin(lam=float(d.get("lambda", 0.5)))
    if name == "born-infeld":
        return BornInfeld(a=float(d.get("a", 1.0)), c=float(d.get("c", 1.0)))
    raise ParameterError(f"unknown model {name!r}; expected 'chaplygin' or 'born-infeld'")
