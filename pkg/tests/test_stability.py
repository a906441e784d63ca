import numpy as np
import pytest

from casimirgas import functionals as fu
from casimirgas import integrator as ig
from casimirgas import models, stability as stab
from casimirgas.errors import ParameterError
from casimirgas.grid import Grid

CBRT2 = 2.0 ** (1.0 / 3.0)


# ---------------------------------------------------------------------------
# equilibrium residuals
# ---------------------------------------------------------------------------

def test_named_equilibrium_residual(grid128, chap, bi):
    for m in (chap, bi):
        u = models.named_equilibrium(m, grid128)
        assert stab.check_equilibrium(u, m) < 1e-13


def test_whole_manifold_is_steady(grid128, chap):
    p = np.cos(grid128.x) + 2.0
    s = models.state_from_arrays(p, 1.0 / p, grid128)
    assert stab.check_equilibrium(s, chap) < 1e-11


def test_off_manifold_state_is_not_steady(grid128, chap):
    s = models.state_from_arrays(np.cos(grid128.x) + 2.0, np.ones(grid128.n), grid128)
    assert stab.check_equilibrium(s, chap) > 0.1


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def test_zero_amplitude_returns_equilibrium(grid128):
    s = stab.sample_manifold_state(1, 0.0, 1.0, 4, grid128)
    np.testing.assert_array_equal(s.p.values, CBRT2)
    np.testing.assert_array_equal(s.rho.values, 1.0 / CBRT2)


def test_sampling_enforces_constraint(grid128):
    for seed in range(20):
        s = stab.sample_manifold_state(seed, 0.2, 1.0, 4, grid128)
        assert np.max(np.abs(s.p.values * s.rho.values - 1.0)) < 1e-13


def test_sampling_is_deterministic(grid128):
    a = stab.sample_manifold_state(77, 0.2, 1.0, 4, grid128)
    b = stab.sample_manifold_state(77, 0.2, 1.0, 4, grid128)
    np.testing.assert_array_equal(a.p.values, b.p.values)
    np.testing.assert_array_equal(a.rho.values, b.rho.values)


def test_sampled_states_are_steady(grid128, chap):
    for seed in range(20):
        s = stab.sample_manifold_state(seed, 0.2, chap.kappa, 4, grid128)
        assert stab.check_equilibrium(s, chap) < 1e-10


def test_sampling_validation(grid128):
    with pytest.raises(ParameterError):
        stab.sample_manifold_state(1, 1.5, 1.0, 4, grid128)
    with pytest.raises(ParameterError):
        stab.sample_manifold_state(1, 0.2, -1.0, 4, grid128)
    with pytest.raises(ParameterError):
        stab.sample_manifold_state(1, 0.2, 1.0, 60, grid128)


def test_off_manifold_sampling_violates_constraint(grid128, chap):
    s = stab.sample_off_manifold_state(5, 0.1, chap, grid128)
    assert np.max(np.abs(s.p.values * s.rho.values - 1.0)) > 1e-3


# ---------------------------------------------------------------------------
# first variation
# ---------------------------------------------------------------------------

def test_first_variation_vanishes_at_equilibria(chap, bi):
    assert stab.first_variation_report(chap) < 1e-12
    assert stab.first_variation_report(bi) < 1e-12


def test_reduced_integrand_matches_closed_form(grid128, chap, bi):
    u = models.named_equilibrium(chap, grid128)
    reduced = stab.reduced_first_variation(chap, u).values
    closed = stab.chaplygin_reduced_closed_form(u.p.values, chap.lam)
    np.testing.assert_allclose(reduced, closed, atol=1e-13)
    np.testing.assert_allclose(reduced, 0.0, atol=1e-13)

    v = models.named_equilibrium(bi, grid128)
    reduced_b = stab.reduced_first_variation(bi, v).values
    closed_b = stab.borninfeld_reduced_closed_form(v.rho.values)
    np.testing.assert_allclose(reduced_b, closed_b, atol=1e-13)
    np.testing.assert_allclose(reduced_b, 0.0, atol=1e-13)


def test_reduced_integrand_along_manifold(grid128, chap):
    # at a generic constraint-set state the reduced integrand follows the
    # closed form and is nonzero away from the critical momentum
    p = np.cos(grid128.x) + 2.0
    s = models.state_from_arrays(p, 1.0 / p, grid128)
    reduced = stab.reduced_first_variation(chap, s).values
    np.testing.assert_allclose(
        reduced, stab.chaplygin_reduced_closed_form(p, 0.5), atol=1e-12)


def test_first_variation_nonzero_at_noncritical_point(grid128, chap):
    # p = 2 everywhere: reduced integrand is 1 - 2/8 = 3/4 times kappa
    s = models.state_from_arrays(np.full(grid128.n, 2.0),
                                 np.full(grid128.n, 0.5), grid128)
    reduced = stab.reduced_first_variation(chap, s).values
    np.testing.assert_allclose(reduced, 0.75, rtol=1e-13)
    value = stab.first_variation_report(chap, at_state=s)
    assert value > 0.1


# ---------------------------------------------------------------------------
# convexity estimates
# ---------------------------------------------------------------------------

def test_convexity_clean_for_both_models(chap, bi):
    for m in (chap, bi):
        stats = stab.verify_convexity_estimates(m, 100, 0.2, seed=42)
        assert stats.n_samples == 100
        assert stats.n_violations == 0
        assert stats.a_observed <= stats.a_paper * (1 + 1e-8)
        assert stats.casimir_commutator_on_manifold < 1e-10


def test_convexity_chaplygin_identity_residual(chap):
    stats = stab.verify_convexity_estimates(chap, 50, 0.2, seed=7)
    assert stats.max_q1_residual is not None
    assert stats.max_q1_residual < 1e-11


def test_convexity_expansions_scale_quadratically(grid128, chap):
    # same draws at two amplitudes: the quadratic form and the remainder
    # both shrink ~100x when the amplitude drops 10x; their gap closes even
    # faster (cubically), so the inequality only tightens
    rho_e = 2.0 ** (-1.0 / 3.0)
    u_e = models.named_equilibrium(chap, grid128)
    rem_ratios, q2_ratios = [], []
    for i in range(20):
        vals = {}
        for amp in (0.2, 0.02):
            s = stab.sample_manifold_state(31337 + i, amp, 1.0, 4, grid128)
            drho = models.state_increment(s, u_e)[1]
            beta = float(s.rho.values.max())
            vals[amp] = (fu.chaplygin_casimir_remainder(drho, s.rho, rho_e, 0.5),
                         fu.q2_chaplygin(drho, rho_e, beta, 0.5))
            assert vals[amp][1] <= vals[amp][0] * (1 + 1e-12)
        rem_ratios.append(vals[0.2][0] / vals[0.02][0])
        q2_ratios.append(vals[0.2][1] / vals[0.02][1])
    assert 50.0 < np.median(rem_ratios) < 200.0
    assert 50.0 < np.median(q2_ratios) < 200.0


def test_convexity_verdict_stable_under_refinement(chap, bi):
    for m in (chap, bi):
        v128 = stab.verify_convexity_estimates(m, 40, 0.2, seed=3, n=128).n_violations
        v256 = stab.verify_convexity_estimates(m, 40, 0.2, seed=3, n=256).n_violations
        assert v128 == v256 == 0


def test_convexity_casimir_commutator_off_manifold_is_nonzero(chap):
    stats = stab.verify_convexity_estimates(chap, 20, 0.2, seed=11)
    assert stats.casimir_commutator_off_manifold > 1e-6


def test_inequality_stats_external_keys(chap):
    d = stab.verify_convexity_estimates(chap, 10, 0.2, seed=1).to_dict()
    for key in ("samples", "violations", "max_residual", "a_observed", "a_paper"):
        assert key in d


# ---------------------------------------------------------------------------
# perturbation experiments
# ---------------------------------------------------------------------------

def test_zero_amplitude_convention(chap):
    rep = stab.perturbation_experiment(chap, [0.0], T=0.1, seed=1, n=64,
                                       n_inequality_samples=5)
    run = rep.on_manifold_runs[0]
    assert run.q_amplification == 1.0
    assert run.l2_amplification == 1.0


def test_constraint_set_experiment_is_consistent(chap):
    rep = stab.perturbation_experiment(chap, [1e-3, 1e-2], T=1.0, seed=42, n=64,
                                       n_inequality_samples=20)
    assert rep.verdict == stab.VERDICT_CONSISTENT
    for run in rep.on_manifold_runs:
        assert run.q_amplification is not None
        assert run.q_amplification < 10.0
        assert run.h_drift < 1e-9
        assert run.c_drift < 1e-9
    assert rep.equilibrium_residual < 1e-13
    assert rep.first_variation_norm < 1e-12


def test_off_manifold_experiment_segregated(chap):
    rep = stab.perturbation_experiment(chap, [1e-2], on_manifold=False, T=1.0,
                                       seed=42, n=64, n_inequality_samples=10)
    assert rep.on_manifold_runs == []
    assert len(rep.off_manifold_runs) == 1
    run = rep.off_manifold_runs[0]
    assert run.h_drift < 1e-9          # energy is conserved off the constraint set
    assert run.c_drift > 1e-9          # the Casimir is not; recorded, not asserted


def test_initial_q_distance_matches_form(grid64, chap):
    u_e = models.named_equilibrium(chap, grid64)
    s0 = stab.sample_manifold_state(4, 1e-2, chap.kappa, 4, grid64)
    beta = float(max(s0.rho.values.max(), u_e.rho.values.max()))
    form = models.stability_norm_form(chap, beta, grid64)
    dt = 0.5 * ig.cfl_dt(s0, chap)
    traj = ig.evolve(s0, 10 * dt, dt, chap, reference=u_e, q_form=form)
    du = models.state_increment(s0, u_e)
    assert traj.monitors["q_dist"][0] == pytest.approx(
        fu.energy_norm(du, form), abs=1e-13)


def test_trajectory_failure_downgrades_verdict(chap):
    # a deliberately absurd step size makes the off-constraint run blow up
    with pytest.warns(UserWarning):
        rep = stab.perturbation_experiment(chap, [0.5], on_manifold=False, T=5.0,
                                           seed=3, n=64, cfl_fraction=400.0,
                                           n_inequality_samples=5)
    assert rep.verdict == stab.VERDICT_LEFT_SMOOTH
    assert rep.off_manifold_runs[0].failure_time is not None


def test_tight_bound_flags_violation(chap):
    rep = stab.perturbation_experiment(chap, [1e-2], T=0.5, seed=42, n=64,
                                       amplification_bound=0.5,
                                       n_inequality_samples=5)
    assert rep.verdict == stab.VERDICT_VIOLATION


def test_sweep_report_combines_regimes(chap):
    rep = stab.stability_sweep_report(chap, [1e-2], T=0.5, seed=42,
                                      include_off_manifold=True, n=64,
                                      n_inequality_samples=10)
    assert len(rep.on_manifold_runs) == 1
    assert len(rep.off_manifold_runs) == 1
    assert rep.verdict == stab.VERDICT_CONSISTENT


def test_report_dict_and_summary(chap):
    rep = stab.perturbation_experiment(chap, [1e-2], T=0.5, seed=42, n=64,
                                       n_inequality_samples=5)
    d = rep.to_dict()
    assert d["verdict"] == rep.verdict
    assert d["model"] == {"model": "chaplygin", "lambda": 0.5}
    assert "inequality_stats" in d
    text = rep.summary()
    assert "verdict" in text
    assert "amplification" in text


def test_thread_cap_env_var_is_respected(chap, monkeypatch):
    monkeypatch.setenv("CASIMIR_GAS_THREADS", "4")
    rep_par = stab.perturbation_experiment(chap, [1e-3, 1e-2], T=0.5, seed=42,
                                           n=64, n_inequality_samples=5)
    monkeypatch.setenv("CASIMIR_GAS_THREADS", "1")
    rep_seq = stab.perturbation_experiment(chap, [1e-3, 1e-2], T=0.5, seed=42,
                                           n=64, n_inequality_samples=5)
    assert rep_par.to_dict() == rep_seq.to_dict()
