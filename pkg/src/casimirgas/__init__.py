"""Numerical verification of energy-Casimir stability for the Chaplygin
and Born-Infeld gas models on the periodic cell [0, 2*pi)."""

__version__ = "0.1.0"

from .grid import Field, Grid, derivative, integrate
from .models import (
    BornInfeld,
    Chaplygin,
    ConstraintManifold,
    State,
    casimir_density,
    chaplygin_limit_gap,
    equilibrium_values,
    extended_hamiltonian_density,
    flux,
    hamiltonian_density,
    named_equilibrium,
    rhs,
    state_from_arrays,
)
from .functionals import (
    LocalFunctional,
    QuadraticForm,
    energy_norm,
    evaluate,
    pairing,
    poisson_bracket,
    variational_derivative,
)
from .integrator import Trajectory, cfl_dt, evolve, step_rk4
from .solutions import borninfeld_solution, chaplygin_solution, oracle_values
from .stability import (
    StabilityReport,
    check_equilibrium,
    first_variation_report,
    perturbation_experiment,
    sample_manifold_state,
    verify_convexity_estimates,
)

__all__ = [
    "__version__",
    "Field", "Grid", "derivative", "integrate",
    "BornInfeld", "Chaplygin", "ConstraintManifold", "State",
    "casimir_density", "chaplygin_limit_gap", "equilibrium_values",
    "extended_hamiltonian_density", "flux", "hamiltonian_density",
    "named_equilibrium", "rhs", "state_from_arrays",
    "LocalFunctional", "QuadraticForm", "energy_norm", "evaluate",
    "pairing", "poisson_bracket", "variational_derivative",
    "Trajectory", "cfl_dt", "evolve", "step_rk4",
    "borninfeld_solution", "chaplygin_solution", "oracle_values",
    "StabilityReport", "check_equilibrium", "first_variation_report",
    "perturbation_experiment", "sample_manifold_state",
    "verify_convexity_estimates",
]
