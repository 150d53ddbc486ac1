"""The generic recursion and trajectory execution.

One step maps the estimate at t-1 to the estimate at t,

    theta_t = theta_{t-1} + Gamma_t(theta_{t-1})^{-1} psi_t(theta_{t-1}),

where ``psi_t`` may look at the new observation and a window of past ones,
and ``Gamma_t`` may only look at the past.  Nothing here knows about a
particular model; procedures are built in :mod:`recest.estimators`.
"""
import csv
import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import product
from typing import Optional

import numpy as np

from .errors import NonFiniteStep, RecestError, SingularNormalizer

log = logging.getLogger(__name__)

DELTA0 = 1e-6
DELTA_DET = 1e-12


def as_parameter(theta, dim=None):
    """Validate and copy a parameter vector."""
    arr = np.array(theta, dtype=float).reshape(-1)
    if arr.size < 1:
        raise ValueError("parameter vector must have dimension >= 1")
    if dim is not None and arr.size != dim:
        raise ValueError(f"expected parameter of dimension {dim}, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"parameter has non-finite coordinates: {arr}")
    return arr


@dataclass(frozen=True)
class HistoryWindow:
    """The last ``depth`` observations, oldest first.

    ``t`` counts observations appended so far; values present at t=0 are the
    model's pre-sample (e.g. X_0 = 0 for an autoregression).
    """
    depth: int
    values: tuple = ()
    t: int = 0
    _regressor: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.depth < 0:
            raise ValueError("depth must be nonnegative")
        if len(self.values) > self.depth:
            raise ValueError("more values than depth")
        object.__setattr__(self, "_regressor", np.array(self.values[::-1], dtype=float))

    def append(self, x):
        if self.depth == 0:
            return HistoryWindow(0, (), self.t + 1)
        return HistoryWindow(self.depth, (self.values + (x,))[-self.depth:], self.t + 1)

    def regressor(self):
        """Past values as a vector, most recent first: (X_{t-1}, ..., X_{t-k})."""
        return self._regressor


@dataclass(frozen=True)
class StepDiagnostics:
    step_norm: float
    psi_norm: float
    det_gamma: float
    skipped: bool = False
    projected: bool = False
    clamped: bool = False


@dataclass(frozen=True, eq=False)
class EstimatorState:
    """Value-semantic snapshot after ``t`` steps.

    ``gamma_acc`` holds the untuned normalizer of the last step (the
    accumulated Gamma_t for cumulative normalizers).
    """
    t: int
    theta_hat: np.ndarray
    gamma_acc: np.ndarray
    history: HistoryWindow
    diagnostics: Optional[StepDiagnostics] = None


@dataclass(frozen=True)
class EngineOptions:
    """Numerical safeguards around a step.

    Steps are held (estimate unchanged) while ``|det Gamma_t| < delta_det``
    unless ``regularize`` is off, in which case an exactly singular
    normalizer raises.  ``delta0`` seeds accumulators that start from zero.
    """
    delta0: float = DELTA0
    delta_det: float = DELTA_DET
    regularize: bool = True
    max_step_norm: Optional[float] = None


DEFAULT_OPTIONS = EngineOptions()


def initial_state(procedure, theta0, presample=(), options=DEFAULT_OPTIONS):
    theta0 = as_parameter(theta0, procedure.dim)
    if procedure.gamma0 is None:
        gamma0 = options.delta0 * np.eye(procedure.dim)
    else:
        gamma0 = np.array(procedure.gamma0, dtype=float).reshape(procedure.dim, procedure.dim)
    history = HistoryWindow(procedure.depth, tuple(presample)[-procedure.depth:] if procedure.depth else ())
    return EstimatorState(0, theta0, gamma0, history)


def step(state, x_t, procedure, options=DEFAULT_OPTIONS):
    """Advance ``state`` by one observation."""
    t = state.t + 1
    theta = state.theta_hat
    history = state.history
    raw = procedure.normalizer(theta, history, t, state.gamma_acc)
    c = procedure.tuning(t)
    m = theta.size
    if m == 1:
        g = c * float(raw[0, 0])
        det = g
    else:
        gamma = c * raw
        det = float(np.linalg.det(gamma))
    if not math.isfinite(det):
        raise SingularNormalizer(f"non-finite normalizer at t={t}")
    if abs(det) < options.delta_det:
        if not options.regularize and det == 0.0:
            raise SingularNormalizer(f"det Gamma_t = 0 at t={t}")
        if options.regularize:
            diag = StepDiagnostics(0.0, 0.0, det, skipped=True)
            return EstimatorState(t, theta, raw, history.append(x_t), diag)

    psi = np.asarray(procedure.psi(theta, x_t, history, t), dtype=float).reshape(m)
    if m == 1:
        p = float(psi[0])
        incr = np.array([p / g])
        psi_norm = abs(p)
        norm = abs(float(incr[0]))
    else:
        incr = np.linalg.solve(gamma, psi)
        psi_norm = math.sqrt(float(psi @ psi))
        norm = math.sqrt(float(incr @ incr))
    clamped = False
    if options.max_step_norm is not None and norm > options.max_step_norm:
        incr = incr * (options.max_step_norm / norm)
        norm = options.max_step_norm
        clamped = True
    new = theta + incr
    projected = False
    if procedure.project is not None:
        proj = procedure.project(new)
        if not np.array_equal(proj, new):
            log.info("t=%d: estimate %s projected to %s", t, new, proj)
            projected = True
        new = proj
    if not (math.isfinite(norm) and np.isfinite(new).all()):
        raise NonFiniteStep(f"non-finite estimate {new} at t={t}")
    diag = StepDiagnostics(norm, psi_norm, det, projected=projected, clamped=clamped)
    return EstimatorState(t, new, raw, history.append(x_t), diag)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """States 1..T of one run plus what is needed to reproduce it."""
    states: tuple
    seed: Optional[int]
    theta_true: Optional[np.ndarray]
    config_id: str = ""
    theta0: Optional[np.ndarray] = None
    data: Optional[np.ndarray] = None
    initial: Optional[EstimatorState] = None

    def __len__(self):
        return len(self.states)

    @property
    def final(self):
        return self.states[-1]

    def theta_path(self):
        """Estimates as a (T, m) array."""
        return np.array([s.theta_hat for s in self.states])

    def step_norms(self):
        return np.array([s.diagnostics.step_norm for s in self.states])

    def det_gammas(self):
        return np.array([s.diagnostics.det_gamma for s in self.states])

    def pre_step_states(self):
        """The state each step started from: initial, states[0], ..., states[T-2]."""
        return (self.initial, *self.states[:-1])


def estimate_path(procedure, data, theta0, presample=(), options=DEFAULT_OPTIONS,
                  seed=None, theta_true=None, config_id=""):
    """Run the recursion over a fixed observation sequence."""
    state = initial_state(procedure, theta0, presample, options)
    first = state
    states = []
    for x in data:
        try:
            state = step(state, x, procedure, options)
        except RecestError as err:
            err.t = state.t + 1
            err.args = (f"step {state.t + 1}: {err}",)
            raise
        states.append(state)
    return Trajectory(tuple(states), seed,
                      None if theta_true is None else as_parameter(theta_true),
                      config_id, first.theta_hat, np.asarray(data, dtype=float), first)


def _check_compatible(model, procedure):
    if model.dim != procedure.dim:
        raise ValueError(f"model dimension {model.dim} != procedure dimension {procedure.dim}")
    if procedure.depth > model.depth and procedure.depth:
        raise ValueError(f"procedure needs {procedure.depth} past values, model keeps {model.depth}")


def run_trajectory(model, procedure, theta_true, theta0, T, seed,
                   options=DEFAULT_OPTIONS, config_id=""):
    """Simulate T observations at ``theta_true`` and run the recursion on them.

    The data depend only on ``(model, theta_true, T, seed)``, so different
    starting points with the same seed see the same path.
    """
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    _check_compatible(model, procedure)
    theta_true = as_parameter(theta_true, model.dim)
    theta0 = as_parameter(theta0, procedure.dim)
    rng = np.random.default_rng(seed)
    presample, data = model.simulate(theta_true, T, rng)
    return estimate_path(procedure, data, theta0, presample, options,
                         seed, theta_true, config_id)


def _max_workers():
    env = os.environ.get("RECEST_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def run_ensemble(model, procedure, theta_true, theta0s, T, seeds, pairing="cartesian",
                 options=DEFAULT_OPTIONS, config_id="", max_workers=None):
    """Run one trajectory per (start, seed) pair.

    ``pairing`` is ``"cartesian"`` (every start with every seed, start-major)
    or ``"zip"``.  Results come back in that deterministic order however many
    workers ran them.
    """
    theta0s = list(theta0s)
    seeds = list(seeds)
    if not theta0s or not seeds:
        raise ValueError("theta0s and seeds must be nonempty")
    if pairing == "cartesian":
        jobs = list(product(theta0s, seeds))
    elif pairing == "zip":
        if len(theta0s) != len(seeds):
            raise ValueError("zip pairing needs equally many starts and seeds")
        jobs = list(zip(theta0s, seeds))
    else:
        raise ValueError(f"unknown pairing {pairing!r}")

    def run(job):
        start, seed = job
        return run_trajectory(model, procedure, theta_true, start, T, seed, options, config_id)

    workers = min(max_workers or _max_workers(), len(jobs))
    if workers <= 1:
        return [run(j) for j in jobs]
    with ThreadPoolExecutor(workers) as pool:
        return list(pool.map(run, jobs))


class OnlineEstimator:
    """Feed observations one at a time; for data that arrive sequentially."""

    def __init__(self, procedure, theta0, presample=(), options=DEFAULT_OPTIONS):
        self.procedure = procedure
        self.options = options
        self.state = initial_state(procedure, theta0, presample, options)

    def update(self, x):
        self.state = step(self.state, x, self.procedure, self.options)
        return self.state.theta_hat


# -- serialization ----------------------------------------------------------

def trajectory_header(m):
    return ["t", *(f"theta_hat_{k + 1}" for k in range(m)), "step_norm", "det_gamma"]


def write_trajectory_csv(traj, path):
    m = traj.states[0].theta_hat.size
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(trajectory_header(m))
        for s in traj.states:
            w.writerow([s.t, *(repr(float(v)) for v in s.theta_hat),
                        repr(s.diagnostics.step_norm), repr(s.diagnostics.det_gamma)])


def read_trajectory_csv(path):
    """Return ``(t, theta_hat, step_norm, det_gamma)`` arrays."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    m = len(header) - 3
    arr = np.array([[float(v) for v in r] for r in body]).reshape(len(body), m + 3)
    return arr[:, 0].astype(int), arr[:, 1:1 + m], arr[:, 1 + m], arr[:, 2 + m]


def write_sidecar(path, config, seed, **extra):
    payload = {"config": config, "seed": seed, **extra}
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_sidecar(path):
    with open(path) as fh:
        return json.load(fh)


__all__ = [
    "EngineOptions", "EstimatorState", "HistoryWindow", "OnlineEstimator",
    "StepDiagnostics", "Trajectory", "as_parameter", "estimate_path",
    "initial_state", "read_sidecar", "read_trajectory_csv", "run_ensemble",
    "run_trajectory", "step", "write_sidecar", "write_trajectory_csv",
]
