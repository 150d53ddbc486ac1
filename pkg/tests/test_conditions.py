import json
import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import digamma, erf

from recest import conditions as cond
from recest.engine import EstimatorState, HistoryWindow, initial_state, run_trajectory
from recest.errors import NonMonotone
from recest.estimators import (EstimatingProcedure, LinearProcedureSpec, least_squares_ar_spec,
                               linear_phi, make_campbell_robust, make_iid_mle, make_student_ar1,
                               sample_mean_spec, sign_phi, student_phi)
from recest.models import (ARModel, GaussianInnovation, StudentInnovation, normal_location,
                           student_location)


# -- grid and reports ------------------------------------------------------------

def test_ugrid_one_dimension():
    grid = cond.UGrid(eps=0.1, n_magnitudes=7)
    norms = np.linalg.norm(grid.points, axis=1)
    assert len(grid) == 14
    assert np.all(norms >= 0.1 - 1e-15) and np.all(norms <= 10 + 1e-12)
    assert np.any(grid.points > 0) and np.any(grid.points < 0)


@pytest.mark.parametrize("dim", [2, 3])
def test_ugrid_directions_are_unit_and_cover_both_signs(dim):
    grid = cond.UGrid(dim=dim, n_directions=8)
    assert np.allclose(np.linalg.norm(grid.directions, axis=1), 1.0)
    for k in range(dim):
        assert grid.directions[:, k].max() > 0.5 and grid.directions[:, k].min() < -0.5
    assert not np.any(np.all(grid.points == 0, axis=1))


def test_ugrid_rejects_bad_eps():
    with pytest.raises(ValueError):
        cond.UGrid(eps=1.0)


def test_report_json_round_trip():
    rep = cond.ConditionReport("C1", cond.PASS, math.inf, [{"u": np.array([0.5]), "x": np.float64(2)}],
                               {"tol_margin": 0.0})
    data = json.loads(rep.to_json())
    assert data["margin"] == "inf" and data["evidence"][0]["u"] == [0.5]
    assert rep.passed and not rep.failed


# -- drift -----------------------------------------------------------------------

def test_normal_location_drift_is_minus_u():
    model = normal_location()
    proc = make_iid_mle(model)
    state = initial_state(proc, [0.0])
    d = cond.conditional_drift(model, proc, [0.0], [0.3], state)
    assert d.b[0] == pytest.approx(-0.3, abs=1e-8)
    assert d.inner == pytest.approx(-0.09, abs=1e-8)
    # E (X - 0.3)^2 under N(0, 1)
    assert d.second_moment == pytest.approx(1.09, abs=1e-8)


def test_student_ar_drift_matches_G():
    model = ARModel(1, StudentInnovation(3))
    proc = make_student_ar1(3)
    state = EstimatorState(5, np.array([0.5]), np.eye(1), HistoryWindow(1, (1.0,), 5))
    d = cond.conditional_drift(model, proc, [0.5], [0.5], state)
    G = cond.compute_G(student_phi(3), StudentInnovation(3), 0.5)
    assert d.b[0] == pytest.approx(-G / 0.5, abs=1e-8)


def test_fixed_rule_and_batched_drift_agree_with_adaptive():
    model = ARModel(1, StudentInnovation(3))
    proc = make_campbell_robust(sign_phi)
    theta = np.array([0.5])
    state = cond.sample_histories(model, proc, theta, n=1, seed=4)[0]
    grid = cond.UGrid(n_magnitudes=6)
    batch = cond.drift_grid(model, proc, theta, grid.points, state)
    for u, bd in zip(grid.points, batch):
        ad = cond.conditional_drift(model, proc, theta, u, state)
        gd = cond.conditional_drift(model, proc, theta, u, state, method="gauss")
        assert bd.b == pytest.approx(ad.b, abs=1e-9)
        assert gd.b == pytest.approx(ad.b, abs=1e-9)
        assert bd.second_moment == pytest.approx(ad.second_moment, rel=1e-8)


# -- G --------------------------------------------------------------------------

@pytest.mark.parametrize("w", [0.1, 1.0, 3.0, -0.1, -1.0, -3.0])
def test_G_linear_gaussian_is_w_squared(w):
    assert cond.compute_G(linear_phi, GaussianInnovation(), w) == pytest.approx(w * w, abs=1e-8)


def test_G_sign_gaussian_closed_form():
    expected = erf(1 / math.sqrt(2))  # 2 Phi(1) - 1
    assert cond.compute_G(sign_phi, GaussianInnovation(), 1.0) == pytest.approx(expected, abs=1e-6)
    assert expected == pytest.approx(0.68269, abs=1e-5)


def test_G_at_zero_is_exactly_zero():
    assert cond.compute_G(student_phi(3), StudentInnovation(3), 0.0) == 0.0
    assert cond.G_batch(sign_phi, GaussianInnovation(), [0.0])[0] == 0.0


@given(w=st.floats(0.01, 50))
def test_G_is_even_in_w(w):
    phi, g = student_phi(3), StudentInnovation(3)
    assert cond.compute_G(phi, g, w) == pytest.approx(cond.compute_G(phi, g, -w), rel=1e-8, abs=1e-14)


def test_G_batch_matches_adaptive():
    ws = np.array([-20.0, -1.0, -0.05, 0.05, 0.3, 4.0, 20.0, 1e3])
    phi, g = student_phi(3), StudentInnovation(3)
    ref = np.array([cond.compute_G(phi, g, w) for w in ws])
    assert np.allclose(cond.G_batch(phi, g, ws), ref, rtol=1e-8, atol=1e-14)


def test_G_positivity_truncated_cubic():
    def cubic(z):
        return np.clip(np.asarray(z, dtype=float) ** 3, -8.0, 8.0)
    rep = cond.check_G_positivity(cubic, GaussianInnovation())
    assert rep.verdict == cond.PASS and rep.margin > 0


def test_G_positivity_precondition_surfaces_as_inconclusive():
    rep = cond.check_G_positivity(lambda z: np.asarray(z, dtype=float) + 0.1, GaussianInnovation())
    assert rep.verdict == cond.INCONCLUSIVE and "odd" in rep.reason


# -- C1 / C2 / C3 ---------------------------------------------------------------

def test_C1_invariant_under_constant_rescaling():
    model = ARModel(1, StudentInnovation(3))
    proc = make_student_ar1(3)
    base = proc.normalizer
    scaled = replace(proc, normalizer=lambda th, h, t, prev: 7.0 * base(th, h, t, prev))
    theta = np.array([0.5])
    grid = cond.UGrid(n_magnitudes=8)
    hist = cond.sample_histories(model, proc, theta, n=5, seed=1)
    a = cond.check_C1_C2_C3(model, proc, theta, grid, hist, which=("C1",))["C1"]
    b = cond.check_C1_C2_C3(model, scaled, theta, grid, hist, which=("C1",))["C1"]
    assert a.verdict == b.verdict == cond.PASS
    signs_a = [np.sign(e["inner"]) for e in a.evidence]
    signs_b = [np.sign(e["inner"]) for e in b.evidence]
    assert signs_a == signs_b


def test_student_ar1_general_conditions():
    model = ARModel(1, StudentInnovation(3))
    proc = make_student_ar1(3)
    theta = np.array([0.5])
    reports = cond.check_C1_C2_C3(model, proc, theta, T_check=2000, seed=0)
    assert reports["C1"].verdict == cond.PASS
    assert reports["C2"].verdict == cond.EMPIRICAL_PASS
    assert reports["C3"].verdict == cond.EMPIRICAL_PASS
    assert reports["C2"].caveat == cond.ASYMPTOTIC_CAVEAT


def test_student_ar_path_conditions():
    model = ARModel(1, StudentInnovation(3))
    theta = np.array([0.5])
    reps = cond.check_ar_conditions(model, make_student_ar1(3), theta, student=True, seed=3)
    assert reps["StArC1"].verdict == cond.EMPIRICAL_PASS
    assert reps["StArC2"].verdict == cond.EMPIRICAL_PASS
    flipped = cond.check_ar_conditions(model, make_student_ar1(3).flipped(), theta, student=True, seed=3)
    assert flipped["StArC1"].verdict == cond.EMPIRICAL_FAIL


def test_robust_ar_path_conditions_with_sign_phi():
    model = ARModel(1, GaussianInnovation())
    reps = cond.check_ar_conditions(model, make_campbell_robust(sign_phi), np.array([0.5]), seed=2)
    assert reps["ArC1"].verdict == cond.EMPIRICAL_PASS
    assert reps["ArC2"].verdict == cond.EMPIRICAL_PASS


# -- i.i.d. pair -------------------------------------------------------------------

def test_iid_pair_normal_location():
    model = normal_location()
    reps = cond.check_corollary41(model, make_iid_mle(model), [0.0])
    assert reps["I"].verdict == cond.PASS and reps["II"].verdict == cond.PASS
    eps = cond.UGrid().eps
    # sup of u * (-u) over the annulus is -eps^2
    assert reps["I"].margin == pytest.approx(eps ** 2, rel=1e-8)


def test_iid_pair_cauchy_location():
    model = student_location(1)
    reps = cond.check_corollary41(model, make_iid_mle(model), [0.0])
    assert reps["I"].verdict == cond.PASS and reps["II"].verdict == cond.PASS


def test_iid_pair_data_free_psi_fails():
    model = normal_location()
    proc = EstimatingProcedure("ignores_data", 1, lambda th, x, h, t: np.broadcast_to(
        th, np.shape(x) + (1,)).copy(), lambda th, h, t, prev: np.eye(1))
    reps = cond.check_corollary41(model, proc, [0.0])
    assert reps["I"].verdict == cond.FAIL


# -- linear procedures -----------------------------------------------------------

def test_least_squares_linear_conditions():
    model = ARModel(1, GaussianInnovation())
    theta = np.array([0.5])
    path = cond.stationary_path(model, theta, 2000, seed=5)
    reps = cond.check_corollary42(least_squares_ar_spec(), model, path, theta)
    assert reps["a"].verdict == cond.PASS
    assert reps["b"].verdict == cond.EMPIRICAL_PASS
    assert reps["c"].verdict == cond.EMPIRICAL_PASS
    assert reps["b"].margin >= 1.0 - 1e-12  # gamma_t <= Gamma_t gives delta >= 1


def test_sample_mean_linear_conditions():
    model = normal_location()
    theta = np.array([1.0])
    path = cond.stationary_path(model, theta, 2000, seed=5)
    reps = cond.check_corollary42(sample_mean_spec(), model, path, theta)
    assert [reps[k].verdict for k in "abc"] == [cond.PASS, cond.EMPIRICAL_PASS, cond.EMPIRICAL_PASS]


def test_quadratic_normalizer_fails_divergence():
    spec = LinearProcedureSpec(h=lambda x, h, t: np.asarray(x, dtype=float)[..., None],
                               gamma=lambda h, t: 1.0, Gamma=lambda h, t, prev: np.array([[t * t]]))
    model = normal_location()
    theta = np.array([0.0])
    path = cond.stationary_path(model, theta, 2000, seed=2)
    reps = cond.check_corollary42(spec, model, path, theta)
    assert reps["b"].verdict == cond.EMPIRICAL_FAIL


# -- series -----------------------------------------------------------------------

def test_series_harmonic_and_telescoping():
    N = 10 ** 4
    res = cond.series_A3(np.arange(N + 1, dtype=float))
    assert res.first[-1] == pytest.approx(digamma(N + 1) + np.euler_gamma, abs=1e-10)
    assert res.first[-1] == pytest.approx(9.7876, abs=1e-4)
    assert res.second[-1] == pytest.approx(np.sum(1.0 / np.arange(1, N + 1) ** 2), rel=1e-12)
    assert res.second[-1] <= res.bound


def test_series_constant_and_geometric():
    const = cond.series_A3(np.full(50, 3.0))
    assert np.all(const.first == 0) and np.all(const.second == 0)
    N = 40
    geo = cond.series_A3(2.0 ** np.arange(N + 1))
    assert geo.first[-1] == pytest.approx(N / 2, abs=1e-12)
    assert geo.second[-1] <= 1.0 and geo.bound == pytest.approx(1 - 2.0 ** -N)


def test_series_rejects_decreasing():
    with pytest.raises(NonMonotone):
        cond.series_A3([1.0, 2.0, 1.5])


@given(d=st.lists(st.floats(1e-3, 1e3), min_size=2, max_size=60))
def test_series_second_sum_below_telescoping_bound(d):
    d = np.sort(np.asarray(d))
    res = cond.series_A3(d)
    assert np.all(res.second <= res.bound * (1 + 1e-12) + 1e-15)
    assert np.all(np.diff(res.first) >= 0)


@given(c=st.floats(1e-6, 1e3), T=st.integers(8, 4000))
def test_constant_terms_diverge(c, T):
    verdict, _ = cond.classify_series(np.full(T, c), "diverge")
    assert verdict == cond.EMPIRICAL_PASS


@given(c=st.floats(1e-4, 1.0), p=st.floats(1.8, 4.0), T=st.integers(64, 4000))
def test_power_terms_converge(c, p, T):
    terms = c / np.arange(1, T + 1) ** p
    assert cond.classify_series(terms, "converge")[0] == cond.EMPIRICAL_PASS
    assert cond.classify_series(terms, "diverge")[0] != cond.EMPIRICAL_PASS


@given(c=st.floats(1e-3, 1e3), seed=st.integers(0, 1000))
def test_convergence_verdict_is_scale_free(c, seed):
    terms = np.abs(np.random.default_rng(seed).standard_normal(500)) / np.arange(1, 501) ** 1.2
    assert cond.classify_series(terms, "converge")[0] == cond.classify_series(c * terms, "converge")[0]


def test_nonpositive_sum_cannot_diverge():
    assert cond.classify_series(-np.ones(100), "diverge")[0] == cond.EMPIRICAL_FAIL


def test_short_series_inconclusive():
    assert cond.classify_series(np.ones(5), "converge")[0] == cond.INCONCLUSIVE


def test_normalizer_rules():
    T = 2000
    t = np.arange(1, T + 1)
    D = np.concatenate([[1.0], t.astype(float)])
    # sum 1/t diverges: terms y_t / D_t with y_t = 1
    v, ev = cond.classify_series(1.0 / t, "diverge", D)
    assert v == cond.EMPIRICAL_PASS and ev["rule"] == "cesaro quotient"
    v, _ = cond.classify_series(1.0 / t, "converge", D)
    assert v != cond.EMPIRICAL_PASS
    v, ev = cond.classify_series(1.0 / t ** 2, "converge", D)
    assert v == cond.EMPIRICAL_PASS
    v, _ = cond.classify_series(1.0 / t ** 2, "diverge", D)
    assert v == cond.EMPIRICAL_FAIL


# -- Lyapunov monitor ----------------------------------------------------------------

def test_lyapunov_quadratic_identity():
    model = ARModel(1, StudentInnovation(3))
    proc = make_student_ar1(3)
    traj = run_trajectory(model, proc, [0.5], [0.1], 60, 3)
    rec = cond.lyapunov_monitor(traj, model, proc)
    states = traj.pre_step_states()
    for i in (5, 20, 59):
        st = states[i]
        u = st.theta_hat - 0.5
        d = cond.conditional_drift(model, proc, [0.5], u, st)
        Ginv = np.linalg.inv(proc.gamma(st.theta_hat, st.history, st.t + 1, st.gamma_acc))
        direct = float(2 * u @ Ginv @ d.b + d.second_moment)
        assert rec.N[i] == pytest.approx(direct, abs=1e-10)


def test_lyapunov_zero_psi():
    model = normal_location()
    proc = EstimatingProcedure("zero", 1, lambda th, x, h, t: np.zeros(np.shape(x) + (1,)),
                               lambda th, h, t, prev: np.eye(1) * t)
    traj = run_trajectory(model, proc, [0.0], [1.0], 30, 1)
    rec = cond.lyapunov_monitor(traj, model, proc)
    assert np.all(rec.N == 0)


def test_lyapunov_healthy_student_run():
    model = ARModel(1, StudentInnovation(3))
    proc = make_student_ar1(3)
    traj = run_trajectory(model, proc, [0.5], [0.1], 2000, 5)
    rec = cond.lyapunov_monitor(traj, model, proc)
    assert rec.B_verdict == cond.EMPIRICAL_PASS
    assert np.all(np.isfinite(rec.Y)) and np.all(np.isfinite(rec.B))
    assert rec.Y[-1] < 10 * rec.Y[len(rec.Y) // 2] + 1
