import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from recest.engine import (EngineOptions, HistoryWindow, OnlineEstimator, estimate_path,
                           initial_state, read_sidecar, read_trajectory_csv, run_ensemble,
                           run_trajectory, step, write_sidecar, write_trajectory_csv)
from recest.errors import NonFiniteStep, SingularNormalizer
from recest.estimators import (EstimatingProcedure, LinearProcedureSpec, least_squares_ar_spec,
                               make_linear, make_student_ar1, sample_mean_spec)
from recest.models import ARModel, GaussianInnovation, StudentInnovation, normal_location

finite = st.floats(-50, 50, allow_nan=False)


def constant_procedure(psi_value=0.0, gamma_value=1.0, depth=0):
    return EstimatingProcedure(
        "const", 1,
        psi=lambda theta, x, h, t: np.array([psi_value]),
        normalizer=lambda theta, h, t, prev: np.array([[gamma_value]]),
        depth=depth)


def test_zero_increment_is_a_fixed_point():
    s = initial_state(constant_procedure(0.0, 3.0), [0.0])
    s = step(s, 1.7, constant_procedure(0.0, 3.0))
    assert s.t == 1 and s.theta_hat[0] == 0.0


def test_running_mean_on_two_points():
    proc = make_linear(sample_mean_spec())
    traj = estimate_path(proc, [2.0, 4.0], [0.0])
    assert [s.theta_hat[0] for s in traj.states] == [2.0, 3.0]


def student_step(fisher):
    proc = make_student_ar1(3, fisher=fisher)
    hist = HistoryWindow(1, (1.0,), 4)
    from recest.engine import EstimatorState
    state = EstimatorState(4, np.array([0.1]), np.array([[4.0 / 3.0]]), hist)
    return step(state, 0.6, proc)


def test_student_worked_step_with_paper_information():
    # i^g = 4/3 as printed: I_t = 8/3, psi = 4 * 0.5 / 3.25
    s = student_step(4.0 / 3.0)
    assert s.diagnostics.psi_norm == pytest.approx(4 * 0.5 / 3.25, abs=1e-12)
    assert s.gamma_acc[0, 0] == pytest.approx(8.0 / 3.0, abs=1e-14)
    assert s.theta_hat[0] == pytest.approx(0.1 + (2.0 / 3.25) / (8.0 / 3.0), abs=1e-14)
    assert s.theta_hat[0] == pytest.approx(0.33077, abs=1e-5)


def test_student_worked_step_with_exact_information():
    # i^g = 2/3: I_t = 4/3 + 2/3 = 2
    s = student_step(None)
    assert s.gamma_acc[0, 0] == pytest.approx(2.0, abs=1e-12)
    assert s.theta_hat[0] == pytest.approx(0.1 + (2.0 / 3.25) / 2.0, abs=1e-12)


def test_T_zero_rejected():
    with pytest.raises(ValueError):
        run_trajectory(normal_location(), make_linear(sample_mean_spec()), [1.0], [0.0], 0, 1)


def test_running_mean_equals_mean_of_draws():
    traj = run_trajectory(normal_location(), make_linear(sample_mean_spec()), [1.0], [0.0], 10, 3)
    assert traj.final.theta_hat[0] == pytest.approx(np.mean(traj.data), rel=1e-15)
    assert len(traj) == 10
    assert [s.t for s in traj.states] == list(range(1, 11))


def test_figure1_length_trajectory_settles():
    model = ARModel(1, StudentInnovation(3))
    traj = run_trajectory(model, make_student_ar1(3), [0.5], [0.7], 40, 2)
    path = traj.theta_path()[:, 0]
    assert path.shape == (40,)
    assert np.all(np.isfinite(path))


def test_trajectories_are_bit_identical():
    model = ARModel(1, StudentInnovation(3))
    proc = make_student_ar1(3)
    a = run_trajectory(model, proc, [0.5], [0.7], 200, 11)
    b = run_trajectory(model, proc, [0.5], [0.7], 200, 11)
    assert np.array_equal(a.theta_path(), b.theta_path())
    assert np.array_equal(a.det_gammas(), b.det_gammas())


def test_ensemble_cardinality_and_order():
    model = ARModel(1, StudentInnovation(3))
    proc = make_student_ar1(3)
    trajs = run_ensemble(model, proc, [0.5], [[-0.2], [0.1], [0.7]], 40, [5])
    assert len(trajs) == 3
    assert [t.theta0[0] for t in trajs] == [-0.2, 0.1, 0.7]
    # same seed: same data for every start
    assert all(np.array_equal(trajs[0].data, t.data) for t in trajs)
    zipped = run_ensemble(model, proc, [0.5], [[0.1], [0.7]], 40, [1, 2], pairing="zip")
    assert [(t.theta0[0], t.seed) for t in zipped] == [(0.1, 1), (0.7, 2)]


def test_ensemble_threads_do_not_change_results(monkeypatch):
    model = ARModel(1, StudentInnovation(3))
    proc = make_student_ar1(3)
    serial = run_ensemble(model, proc, [0.5], [[0.1], [0.7]], 100, [1, 2, 3], max_workers=1)
    threaded = run_ensemble(model, proc, [0.5], [[0.1], [0.7]], 100, [1, 2, 3], max_workers=4)
    for a, b in zip(serial, threaded):
        assert np.array_equal(a.theta_path(), b.theta_path())


def test_ensemble_rejects_empty_lists():
    with pytest.raises(ValueError):
        run_ensemble(normal_location(), make_linear(sample_mean_spec()), [0.0], [], 5, [1])


def test_singular_normalizer_raises_without_regularization():
    proc = constant_procedure(1.0, 0.0)
    state = initial_state(proc, [0.0])
    with pytest.raises(SingularNormalizer):
        step(state, 1.0, proc, EngineOptions(regularize=False))


def test_warm_up_holds_estimate_while_normalizer_is_tiny():
    proc = constant_procedure(1.0, 1e-13)
    state = step(initial_state(proc, [0.3]), 1.0, proc)
    assert state.diagnostics.skipped and state.theta_hat[0] == 0.3 and state.t == 1


def test_non_finite_step_raises_with_time_index():
    proc = constant_procedure(np.inf, 1.0)
    with pytest.raises(NonFiniteStep) as err:
        estimate_path(proc, [1.0, 2.0], [0.0])
    assert err.value.t == 1


def test_step_clamping():
    proc = constant_procedure(10.0, 1.0)
    s = step(initial_state(proc, [0.0]), 0.0, proc, EngineOptions(max_step_norm=0.5))
    assert s.theta_hat[0] == 0.5 and s.diagnostics.clamped


def test_history_window_keeps_last_values_in_order():
    h = HistoryWindow(2)
    for x in (1.0, 2.0, 3.0):
        h = h.append(x)
    assert h.values == (2.0, 3.0) and h.t == 3
    assert list(h.regressor()) == [3.0, 2.0]


def test_normalizer_never_sees_current_observation():
    seen = []

    def normalizer(theta, history, t, prev):
        # predictable: the window holds X_1..X_{t-1} only
        seen.append((t, history.t, history.values))
        return prev + 1.0

    proc = EstimatingProcedure("probe", 1, lambda th, x, h, t: np.array([x - th[0]]),
                               normalizer, depth=1, gamma0=np.zeros((1, 1)))
    data = [10.0, 20.0, 30.0]
    estimate_path(proc, data, [0.0], presample=(0.0,))
    for t, ht, values in seen:
        assert ht == t - 1
        assert data[t - 1] not in values


def test_online_estimator_matches_batch():
    model = ARModel(1, StudentInnovation(3))
    proc = make_student_ar1(3)
    traj = run_trajectory(model, proc, [0.5], [0.1], 50, 4)
    online = OnlineEstimator(proc, [0.1], (0.0,))
    for x, s in zip(traj.data, traj.states):
        assert np.array_equal(online.update(x), s.theta_hat)


def test_csv_and_sidecar_round_trip(tmp_path):
    model = ARModel(1, StudentInnovation(3))
    traj = run_trajectory(model, make_student_ar1(3), [0.5], [0.1], 30, 4)
    path = tmp_path / "traj.csv"
    write_trajectory_csv(traj, path)
    header = path.read_text().splitlines()[0]
    assert header == "t,theta_hat_1,step_norm,det_gamma"
    t, theta, norms, dets = read_trajectory_csv(path)
    assert list(t) == list(range(1, 31))
    assert np.array_equal(theta, traj.theta_path())
    assert np.array_equal(norms, traj.step_norms())
    assert np.array_equal(dets, traj.det_gammas())
    cfg = {"alpha": 3.0, "starts": [[0.1]], "x": 0.1 + 0.2}
    write_sidecar(tmp_path / "s.json", cfg, 4)
    assert read_sidecar(tmp_path / "s.json") == {"config": cfg, "seed": 4}


def test_linear_identity_literal_form_with_unit_start():
    rng = np.random.default_rng(0)
    _, data = ARModel(1, GaussianInnovation()).simulate(np.array([0.6]), 300, rng)
    spec = least_squares_ar_spec(Gamma0=np.eye(1))
    traj = estimate_path(make_linear(spec), data, [0.25], presample=(0.0,))
    xprev = np.concatenate([[0.0], data[:-1]])
    Gamma = 1.0 + np.cumsum(xprev ** 2)
    expected = (0.25 + np.cumsum(xprev * data)) / Gamma
    assert np.allclose(traj.theta_path()[:, 0], expected, rtol=1e-10, atol=0)


@given(theta0=finite, gamma0=st.floats(1e-3, 10.0), seed=st.integers(0, 2 ** 16))
def test_linear_identity_general_form(theta0, gamma0, seed):
    rng = np.random.default_rng(seed)
    _, data = ARModel(1, StudentInnovation(5)).simulate(np.array([0.3]), 60, rng)
    spec = least_squares_ar_spec(Gamma0=np.array([[gamma0]]))
    traj = estimate_path(make_linear(spec), data, [theta0], presample=(0.0,))
    xprev = np.concatenate([[0.0], data[:-1]])
    Gamma = gamma0 + np.cumsum(xprev ** 2)
    expected = (gamma0 * theta0 + np.cumsum(xprev * data)) / Gamma
    got = traj.theta_path()[:, 0]
    assert np.allclose(got, expected, rtol=1e-9, atol=1e-9 * (1 + abs(theta0)))


@given(theta0=finite, data=st.lists(finite, min_size=1, max_size=30))
def test_zero_psi_keeps_start(theta0, data):
    proc = constant_procedure(0.0, 2.0)
    traj = estimate_path(proc, data, [theta0])
    assert all(s.theta_hat[0] == theta0 for s in traj.states)


@given(seed=st.integers(0, 2 ** 20), start=st.floats(-1, 1))
def test_determinism_property(seed, start):
    model = ARModel(1, StudentInnovation(3))
    proc = make_student_ar1(3)
    a = run_trajectory(model, proc, [0.5], [start], 25, seed)
    b = run_trajectory(model, proc, [0.5], [start], 25, seed)
    assert np.array_equal(a.theta_path(), b.theta_path())


def test_parameter_validation():
    proc = make_student_ar1(3)
    with pytest.raises(ValueError):
        initial_state(proc, [math.nan])
    with pytest.raises(ValueError):
        initial_state(proc, [0.1, 0.2])


def test_multivariate_least_squares_recovers_ar2():
    model = ARModel(2, GaussianInnovation())
    proc = make_linear(least_squares_ar_spec(order=2))
    traj = run_trajectory(model, proc, [0.5, -0.3], [0.0, 0.0], 4000, 9)
    assert np.allclose(traj.final.theta_hat, [0.5, -0.3], atol=0.06)


def test_linear_spec_with_explicit_normalizer():
    spec = LinearProcedureSpec(h=lambda x, h, t: np.asarray(x, dtype=float)[..., None],
                               gamma=lambda h, t: 1.0, Gamma=lambda h, t, prev: np.array([[t]]))
    traj = estimate_path(make_linear(spec), [2.0, 4.0, 6.0], [0.0])
    assert traj.final.theta_hat[0] == pytest.approx(4.0)
