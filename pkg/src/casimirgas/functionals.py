"""Functional calculus for fields: local functionals, variational
derivatives, the Poisson bracket, quadratic forms, and the convexity
machinery behind the energy-Casimir stability checks.

A local functional F(u) = integral of f(p(x), rho(x)) dx is represented by
its density f together with the exact partials f_p and f_rho.  Only
zeroth-order densities are supported, so the variational derivative of F is
the pointwise pair (f_p, f_rho); this is the simplification the whole
module is built on.

The Poisson bracket used throughout is

    {F, G} = -integral( dF/drho * d/dx(dG/dp) + dF/dp * d/dx(dG/drho) ) dx,

discretized with either derivative scheme.  The differentiation matrix is
skew-symmetric on the periodic grid, so the discrete bracket is skew and,
being generated by a constant skew operator, satisfies the Jacobi identity
up to rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import numpy.polynomial.polynomial as npp

from .errors import (
    EvaluationError,
    ManifoldError,
    NormDegeneracyError,
    ParameterError,
)
from .grid import Field, Grid, derivative_values, integrate, integrate_values


def _sum_of(f: Callable | None, g: Callable | None) -> Callable | None:
    if f is None or g is None:
        return None
    return lambda p, rho: f(p, rho) + g(p, rho)


@dataclass(frozen=True)
class LocalFunctional:
    """A functional integral of f(p, rho) dx, with exact partial derivatives.

    The callables must accept numpy arrays (scalars also work) and should be
    written with numpy operations so that complex-step differentiation can
    pass complex arrays through them.  Second partials are optional; they
    are only needed to form brackets of brackets (the Jacobi check).
    """

    density: Callable
    d_dp: Callable
    d_drho: Callable
    label: str = ""
    d2_pp: Callable | None = None
    d2_prho: Callable | None = None
    d2_rhorho: Callable | None = None

    def __add__(self, other: "LocalFunctional") -> "LocalFunctional":
        return LocalFunctional(
            density=lambda p, rho: self.density(p, rho) + other.density(p, rho),
            d_dp=lambda p, rho: self.d_dp(p, rho) + other.d_dp(p, rho),
            d_drho=lambda p, rho: self.d_drho(p, rho) + other.d_drho(p, rho),
            label=f"{self.label or 'F'}+{other.label or 'G'}",
            d2_pp=_sum_of(self.d2_pp, other.d2_pp),
            d2_prho=_sum_of(self.d2_prho, other.d2_prho),
            d2_rhorho=_sum_of(self.d2_rhorho, other.d2_rhorho),
        )


def _pointwise(fn: Callable, p: np.ndarray, rho: np.ndarray, n: int) -> np.ndarray:
    out = np.asarray(fn(p, rho))
    if out.ndim == 0:
        out = np.broadcast_to(out, (n,))
    return out


def evaluate(F: LocalFunctional, s) -> float:
    """Quadrature of the density over one period."""
    n = s.grid.n
    vals = _pointwise(F.density, s.p.values, s.rho.values, n)
    bad = np.flatnonzero(~np.isfinite(vals))
    if bad.size:
        i = int(bad[0])
        raise EvaluationError(
            f"density of {F.label or 'functional'} is non-finite at grid index {i} "
            f"(x={s.grid.x[i]:.6g}, p={s.p.values[i]:.6g}, rho={s.rho.values[i]:.6g})"
        )
    return integrate_values(vals.astype(float), s.grid)


def evaluate_raw(F: LocalFunctional, p: np.ndarray, rho: np.ndarray, grid: Grid):
    """Quadrature of the density on raw (possibly complex) sample arrays."""
    return grid.dx * _pointwise(F.density, p, rho, grid.n).sum()


def variational_derivative(F: LocalFunctional, s) -> tuple[Field, Field]:
    """The pair (dF/dp, dF/drho) evaluated pointwise on the state.

    Contract: pairing(variational_derivative(F, s), du) equals the
    directional derivative of evaluate(F, .) at s for every increment du.
    """
    n = s.grid.n
    fp = _pointwise(F.d_dp, s.p.values, s.rho.values, n).astype(float)
    fr = _pointwise(F.d_drho, s.p.values, s.rho.values, n).astype(float)
    return Field(fp, s.grid), Field(fr, s.grid)


def pairing(df: tuple[Field, Field], du: tuple[Field, Field]) -> float:
    """Duality pairing integral(df_p * du_p + df_rho * du_rho) dx."""
    fp, fr = df
    up, ur = du
    return integrate_values(fp.values * up.values + fr.values * ur.values, fp.grid)


def _bracket_value(F, G, p, rho, grid, scheme):
    n = grid.n
    f_p = _pointwise(F.d_dp, p, rho, n)
    f_r = _pointwise(F.d_drho, p, rho, n)
    g_p = _pointwise(G.d_dp, p, rho, n)
    g_r = _pointwise(G.d_drho, p, rho, n)
    integrand = f_r * derivative_values(np.ascontiguousarray(g_p), scheme)
    integrand = integrand + f_p * derivative_values(np.ascontiguousarray(g_r), scheme)
    return -grid.dx * integrand.sum()


def poisson_bracket(F: LocalFunctional, G: LocalFunctional, s, scheme: str = "spectral") -> float:
    """{F, G} at the state s."""
    return float(_bracket_value(F, G, s.p.values, s.rho.values, s.grid, scheme))


def hamiltonian_vector_field_check(s, m, F: LocalFunctional, scheme: str = "spectral") -> float:
    """Defect |<dF(s), du/dt> - {F, H}(s)| between the model tendencies and
    the bracket dynamics; zero up to discretization and rounding."""
    from . import models

    H = models.hamiltonian_density(m)
    dpdt, drdt = models.rhs(s, m, scheme)
    lhs = pairing(variational_derivative(F, s), (dpdt, drdt))
    return abs(lhs - poisson_bracket(F, H, s, scheme))


# ---------------------------------------------------------------------------
# gradients by complex-step differentiation (used as an independent oracle
# and for brackets of composite, non-local functionals)
# ---------------------------------------------------------------------------

def numeric_variational_derivative(fn, p: np.ndarray, rho: np.ndarray, grid: Grid,
                                   eps: float = 1e-100) -> tuple[np.ndarray, np.ndarray]:
    """Gradient fields of a scalar functional of the sampled (p, rho).

    fn(p_array, rho_array) -> scalar must be analytic in its inputs
    (numpy operations only); the complex step makes the result exact to
    rounding, with no subtractive cancellation.  Not suitable for
    functionals that apply an FFT internally: the transform round trip
    leaves O(1e-16) imaginary residue that buries the step signal.
    """
    n = grid.n
    gp = np.empty(n)
    gr = np.empty(n)
    pc = p.astype(complex)
    rc = rho.astype(complex)
    for j in range(n):
        pj = pc.copy()
        pj[j] += 1j * eps
        gp[j] = complex(fn(pj, rho)).imag / (eps * grid.dx)
        rj = rc.copy()
        rj[j] += 1j * eps
        gr[j] = complex(fn(p, rj)).imag / (eps * grid.dx)
    return gp, gr


def nested_bracket_gradient(A: LocalFunctional, B: LocalFunctional,
                            p: np.ndarray, rho: np.ndarray, grid: Grid,
                            scheme: str = "spectral") -> tuple[np.ndarray, np.ndarray]:
    """Variational derivative of the composite functional u -> {A, B}(u).

    The inner bracket depends on first derivatives of the state, so its
    gradient involves the second partials of both densities; both
    functionals must therefore carry them.  Uses the exact skew symmetry of
    the differentiation matrix on the periodic grid.
    """
    for fn in (A, B):
        if None in (fn.d2_pp, fn.d2_prho, fn.d2_rhorho):
            raise ParameterError(
                f"{fn.label or 'functional'} lacks second partials; "
                "nested brackets need them")
    n = grid.n

    def at(fn):
        return _pointwise(fn, p, rho, n)

    a_p, a_r = at(A.d_dp), at(A.d_drho)
    b_p, b_r = at(B.d_dp), at(B.d_drho)
    a_pp, a_pr, a_rr = at(A.d2_pp), at(A.d2_prho), at(A.d2_rhorho)
    b_pp, b_pr, b_rr = at(B.d2_pp), at(B.d2_prho), at(B.d2_rhorho)

    def D(v):
        return derivative_values(np.ascontiguousarray(v), scheme)

    db_p, db_r = D(b_p), D(b_r)
    da_p, da_r = D(a_p), D(a_r)
    kp = -(a_pr * db_p + a_pp * db_r) + (da_r * b_pp + da_p * b_pr)
    kr = -(a_rr * db_p + a_pr * db_r) + (da_r * b_pr + da_p * b_rr)
    return kp, kr


def jacobi_cyclic_sum(F: LocalFunctional, G: LocalFunctional, H: LocalFunctional,
                      s, scheme: str = "spectral") -> float:
    """{F,{G,H}} + {G,{H,F}} + {H,{F,G}} for the discrete bracket.

    Vanishes up to rounding: the discrete bracket is generated by a
    constant skew operator.
    """
    grid = s.grid
    p = s.p.values
    rho = s.rho.values

    def outer(A, B, C):
        kp, kr = nested_bracket_gradient(B, C, p, rho, grid, scheme)
        a_p = _pointwise(A.d_dp, p, rho, grid.n)
        a_r = _pointwise(A.d_drho, p, rho, grid.n)
        integrand = a_r * derivative_values(kp, scheme) + a_p * derivative_values(kr, scheme)
        return -grid.dx * integrand.sum()

    total = outer(F, G, H) + outer(G, H, F) + outer(H, F, G)
    return float(total)


# ---------------------------------------------------------------------------
# second-order expansions and quadratic forms on the constraint manifold
# ---------------------------------------------------------------------------

def q1_chaplygin_residual(s, lam: float) -> float:
    """H(u) - H(u_e) - <dH(u_e), u - u_e> for a Chaplygin state on the
    constraint set p*rho = sqrt(2*lam).

    On that set the second-order remainder of H cancels identically, so the
    returned value is a pure floating-point residual.
    """
    from . import models

    m = models.Chaplygin(lam)
    kappa = m.kappa
    off = float(np.max(np.abs(s.p.values * s.rho.values - kappa)))
    if off > 1e-8:
        raise ManifoldError(
            f"state is off the constraint set: max|p*rho - {kappa:.6g}| = {off:.3g}"
        )
    u_e = models.named_equilibrium(m, s.grid)
    H = models.hamiltonian_density(m)
    du = models.state_increment(s, u_e)
    return evaluate(H, s) - evaluate(H, u_e) - pairing(variational_derivative(H, u_e), du)


def q2_chaplygin(drho: Field, rho_e: float, beta: float, lam: float) -> float:
    """Chaplygin quadratic form
    Q2(drho) = integral( sqrt(2*lam)/(rho_e*beta) * (1/rho_e + 1/beta) * drho^2 ) dx,
    a lower bound for the Casimir remainder whenever beta >= sup rho."""
    if beta <= 0:
        raise ParameterError(f"beta must be positive, got {beta}")
    if rho_e <= 0:
        raise ParameterError(f"rho_e must be positive, got {rho_e}")
    if lam <= 0:
        raise ParameterError(f"lambda must be positive, got {lam}")
    w = math.sqrt(2.0 * lam) / (rho_e * beta) * (1.0 / rho_e + 1.0 / beta)
    return w * integrate_values(drho.values**2, drho.grid)


def chaplygin_casimir_remainder(drho: Field, rho: Field, rho_e: float, lam: float) -> float:
    """Second-order Casimir increment on the constraint set,
    integral( sqrt(2*lam)/(rho_e*rho) * (1/rho_e + 1/rho) * drho^2 ) dx."""
    if rho_e <= 0:
        raise ParameterError(f"rho_e must be positive, got {rho_e}")
    s2l = math.sqrt(2.0 * lam)
    r = rho.values
    vals = s2l / (rho_e * r) * (1.0 / rho_e + 1.0 / r) * drho.values**2
    return integrate_values(vals, drho.grid)


def q1_borninfeld(drho: Field, beta: float) -> float:
    """Born-Infeld quadratic form Q1(drho) = integral(drho^2 / beta) dx."""
    if beta <= 0:
        raise ParameterError(f"beta must be positive, got {beta}")
    return integrate_values(drho.values**2, drho.grid) / beta


def borninfeld_energy_remainder(drho: Field, rho: Field) -> float:
    """Second-order energy increment on p*rho = 1 with unit equilibrium,
    integral(drho^2 / rho) dx; equals integral(rho + 1/rho - 2) dx exactly."""
    return integrate_values(drho.values**2 / rho.values, drho.grid)


@dataclass(frozen=True)
class QuadraticForm:
    """Weighted quadratic form Q(du) = integral(weight * du^2) dx.

    target selects which increment the form consumes: "p", "rho", or "pair"
    (sum of both squared components).  Weights must be nonnegative; strict
    positivity is required when the form is used as a norm.
    """

    weight: Field
    target: str = "rho"

    def __post_init__(self):
        if self.target not in ("p", "rho", "pair"):
            raise ParameterError(f"unknown quadratic-form target {self.target!r}")
        if float(self.weight.values.min()) < 0.0:
            raise ParameterError("quadratic-form weight must be nonnegative")

    def __call__(self, du: tuple[Field, Field]) -> float:
        dp, drho = du
        w = self.weight.values
        if self.target == "p":
            vals = w * dp.values**2
        elif self.target == "rho":
            vals = w * drho.values**2
        else:
            vals = w * (dp.values**2 + drho.values**2)
        return integrate_values(vals, self.weight.grid)


def energy_norm(du: tuple[Field, Field], form: QuadraticForm) -> float:
    """sqrt(Q(du)); requires a strictly positive weight."""
    if float(form.weight.values.min()) <= 0.0:
        raise NormDegeneracyError("quadratic-form weight vanishes somewhere; no norm")
    return math.sqrt(max(form(du), 0.0))


def continuity_constants(m, samples: Sequence) -> tuple[float, float]:
    """Observed and predicted continuity constants over a family of
    constraint-manifold states.

    The observed constant is the largest ratio of the second-order remainder
    to the squared stability norm over the samples; the predicted one is
    (sup rho / inf rho)^2 for the Chaplygin model and sup rho / inf rho for
    Born-Infeld.
    """
    from . import models

    samples = list(samples)
    if not samples:
        raise ParameterError("continuity_constants needs at least one sample state")
    rho_all = np.concatenate([s.rho.values for s in samples])
    lo = float(rho_all.min())
    hi = float(rho_all.max())
    _, rho_e = models.equilibrium_values(m)

    a_observed = 0.0
    if isinstance(m, models.Chaplygin):
        a_paper = (hi / lo) ** 2
        for s in samples:
            drho = Field(s.rho.values - rho_e, s.grid)
            norm2 = q2_chaplygin(drho, rho_e, hi, m.lam)
            if norm2 <= 0.0:
                continue
            rem = chaplygin_casimir_remainder(drho, s.rho, rho_e, m.lam)
            a_observed = max(a_observed, rem / norm2)
    else:
        a_paper = hi / lo
        for s in samples:
            drho = Field(s.rho.values - rho_e, s.grid)
            norm2 = q1_borninfeld(drho, hi)
            if norm2 <= 0.0:
                continue
            rem = borninfeld_energy_remainder(drho, s.rho)
            a_observed = max(a_observed, rem / norm2)
    return a_observed, a_paper


# ---------------------------------------------------------------------------
# random functionals for property tests and commutation sampling
# ---------------------------------------------------------------------------

def random_polynomial_functional(seed: int, degree: int = 3, scale: float = 1.0) -> LocalFunctional:
    """Random polynomial density in (p, rho) with exact first and second
    partials, suitable for bracket axioms and directional-derivative checks."""
    rng = np.random.default_rng(seed)
    c = rng.standard_normal((degree + 1, degree + 1)) * scale
    cp = npp.polyder(c, axis=0)
    cr = npp.polyder(c, axis=1)
    cpp = npp.polyder(cp, axis=0)
    cpr = npp.polyder(cp, axis=1)
    crr = npp.polyder(cr, axis=1)

    def ev(coeffs):
        return lambda p, rho: npp.polyval2d(p, rho, coeffs)

    return LocalFunctional(
        density=ev(c),
        d_dp=ev(cp),
        d_drho=ev(cr),
        label=f"poly[seed={seed}]",
        d2_pp=ev(cpp),
        d2_prho=ev(cpr),
        d2_rhorho=ev(crr),
    )


def check_partials(F: LocalFunctional, seed: int = 0, n_points: int = 100,
                   p_range=(0.5, 3.0), rho_range=(0.4, 3.0),
                   eps: float = 1e-6) -> float:
    """Max relative mismatch between the stored partials and centered finite
    differences of the density at random points."""
    rng = np.random.default_rng(seed)
    p = rng.uniform(*p_range, n_points)
    rho = rng.uniform(*rho_range, n_points)
    fd_p = (F.density(p + eps, rho) - F.density(p - eps, rho)) / (2 * eps)
    fd_r = (F.density(p, rho + eps) - F.density(p, rho - eps)) / (2 * eps)
    ap = np.broadcast_to(np.asarray(F.d_dp(p, rho), dtype=float), (n_points,))
    ar = np.broadcast_to(np.asarray(F.d_drho(p, rho), dtype=float), (n_points,))
    scale = np.maximum.reduce([np.abs(ap), np.abs(ar), np.ones(n_points)])
    err = np.maximum(np.abs(fd_p - ap), np.abs(fd_r - ar)) / scale
    return float(err.max())
