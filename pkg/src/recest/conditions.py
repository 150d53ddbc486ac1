"""Numerical certificates for the convergence conditions.

Pointwise conditions (drift sign, G positivity, the i.i.d. pair) are decided
on a finite grid of perturbations ``u`` and a finite set of histories;
the verdict is ``pass`` only if every evaluation clears the margin.

Conditions about infinite series (divergence or convergence of a sum along
the data path) cannot be decided from finite data.  They are classified from
the shape of the partial sums, see `classify_series`, and reported as
``pass (empirical)``, ``fail (empirical)`` or ``inconclusive``.
"""
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .engine import EstimatorState, initial_state
from .errors import QuadratureFailure
from .models import is_bell_shaped
from .quadrature import gauss_nodes, gauss_rows, integrate_line, integrate_line_batch

PASS = "pass"
FAIL = "fail"
INCONCLUSIVE = "inconclusive"
EMPIRICAL_PASS = "pass (empirical)"
EMPIRICAL_FAIL = "fail (empirical)"
SKIPPED = "skipped"

ASYMPTOTIC_CAVEAT = ("finite-path certificate: almost-sure and in-probability "
                     "statements are not certified")

THRESHOLD_DIV = 50.0
TAIL_RTOL = 1e-4
RATIO_DIV = 0.9
RATIO_CONV = 0.75
CESARO_FLOOR = 0.75
K_SLACK = 1.25


class UGrid:
    """Perturbations u with eps <= ||u|| <= 1/eps.

    Magnitudes are log-spaced.  In one dimension both signs are used; in two,
    ``n_directions`` equally spaced angles; beyond that the signed axes plus
    fixed pseudo-random unit vectors up to ``n_directions``.
    """

    def __init__(self, eps=0.05, n_magnitudes=20, dim=1, n_directions=16):
        if not 0 < eps < 1:
            raise ValueError("eps must lie in (0, 1)")
        self.eps = eps
        self.dim = dim
        self.magnitudes = np.logspace(np.log10(eps), -np.log10(eps), n_magnitudes)
        if dim == 1:
            dirs = np.array([[1.0], [-1.0]])
        elif dim == 2:
            ang = 2 * np.pi * np.arange(n_directions) / n_directions
            dirs = np.column_stack([np.cos(ang), np.sin(ang)])
        else:
            axes = np.vstack([np.eye(dim), -np.eye(dim)])
            extra = max(0, n_directions - len(axes))
            rnd = np.random.default_rng(0).standard_normal((extra, dim))
            rnd /= np.linalg.norm(rnd, axis=1, keepdims=True)
            dirs = np.vstack([axes, rnd])
        self.directions = dirs
        self.points = (self.magnitudes[:, None, None] * dirs[None]).reshape(-1, dim)

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)


@dataclass
class ConditionReport:
    condition: str
    verdict: str
    margin: Optional[float] = None
    evidence: list = field(default_factory=list)
    tolerances: dict = field(default_factory=dict)
    reason: str = ""
    caveat: str = ""

    @property
    def passed(self):
        return self.verdict in (PASS, EMPIRICAL_PASS)

    @property
    def failed(self):
        return self.verdict in (FAIL, EMPIRICAL_FAIL)

    def to_dict(self):
        return _jsonable(asdict(self))

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


@dataclass(frozen=True)
class DriftValue:
    u: np.ndarray
    b: np.ndarray
    inner: float
    second_moment: float


# -- drift ---------------------------------------------------------------------

def _normalizer_inverse(procedure, v, state):
    G = procedure.gamma(v, state.history, state.t + 1, state.gamma_acc)
    return np.linalg.inv(G)


def conditional_drift(model, procedure, theta, u, state, method="adaptive", second=True):
    """b_t(theta, u) = E_theta[psi_t(theta + u) | past] and companions.

    ``state`` is the estimator state before step t; only its time index,
    history and normalizer accumulator are used.  ``inner`` is
    u^T Gamma_t(theta+u)^{-1} b and ``second_moment`` is
    E||Gamma_t(theta+u)^{-1} psi_t(theta+u)||^2 (NaN with ``second=False``).
    """
    theta = np.asarray(theta, dtype=float)
    u = np.asarray(u, dtype=float).reshape(theta.shape)
    v = theta + u
    t = state.t + 1
    hist = state.history
    m = theta.size
    Ginv = _normalizer_inverse(procedure, v, state)
    bp = procedure.jumps(v, hist)

    def psi(x):
        return procedure.psi(v, x, hist, t)

    def sq(x):
        q = psi(x) @ Ginv.T
        return np.sum(q * q, axis=-1)

    if method == "gauss" and model.measure == "lebesgue":
        x, w = gauss_nodes(model.center(theta, hist), model.scale, bp)
        wd = w * model.density(theta, x, hist)
        p = np.asarray(psi(x), dtype=float).reshape(x.size, m)
        b = wd @ p
        q = p @ Ginv.T
        second = float(wd @ np.sum(q * q, axis=1))
    else:
        b = np.asarray(model.expect(psi, theta, hist, bp, size=m), dtype=float).reshape(m)
        second = float(model.expect(sq, theta, hist, bp)) if second else math.nan
    inner = float(u @ (Ginv @ b))
    return DriftValue(u, b, inner, second)


def drift_grid(model, procedure, theta, U, state, second=True):
    """`conditional_drift` for every row of ``U`` in one adaptive pass.

    Lebesgue models integrate all drifts jointly (split at the union of the
    procedures' jump points); counting models fall back to one call per u.
    Returns a list of DriftValue in the order of ``U``.
    """
    theta = np.asarray(theta, dtype=float)
    U = np.asarray(U, dtype=float).reshape(-1, theta.size)
    if model.measure != "lebesgue":
        return [conditional_drift(model, procedure, theta, u, state, second=second) for u in U]
    t = state.t + 1
    hist = state.history
    m = theta.size
    n = len(U)
    V = theta + U
    Ginv = np.array([_normalizer_inverse(procedure, v, state) for v in V])
    bps = sorted({b for v in V for b in procedure.jumps(v, hist)})

    def fn(x):
        d = model.density(theta, x, hist)
        P = np.stack([np.asarray(procedure.psi(v, x, hist, t), dtype=float).reshape(x.size, m)
                      for v in V], axis=1)
        if not second:
            return P * d[:, None, None]
        Q = np.einsum("uij,nuj->nui", Ginv, P)
        out = np.concatenate([P, np.sum(Q * Q, axis=2)[:, :, None]], axis=2)
        return out * d[:, None, None]

    val = integrate_line_batch(fn, model.center(theta, hist), model.scale, bps)
    out = []
    for k in range(n):
        b = val[k, :m]
        inner = float(U[k] @ (Ginv[k] @ b))
        out.append(DriftValue(U[k], b, inner, float(val[k, m]) if second else math.nan))
    return out


def normalizer_states(procedure, data, presample, theta):
    """Pre-step states along a data path with the estimate held at ``theta``."""
    state = initial_state(procedure, theta, presample)
    out = []
    for x in data:
        out.append(state)
        t = state.t + 1
        raw = procedure.normalizer(state.theta_hat, state.history, t, state.gamma_acc)
        state = EstimatorState(t, state.theta_hat, raw, state.history.append(x))
    return out


def normalizer_scale(procedure, states, theta):
    """D_0, ..., D_T: trace(Gamma_t(theta)) / m along pre-step ``states``.

    D_0 comes from the first state's accumulator.  Used to read path sums
    as sums of y_t / D_t.  Tuning constants are left out: they equal 1
    eventually, and a tuned prefix would make D non-monotone.
    """
    m = np.asarray(theta).size
    D = np.empty(len(states) + 1)
    D[0] = np.trace(states[0].gamma_acc) / m
    for i, st in enumerate(states):
        D[i + 1] = np.trace(procedure.normalizer(theta, st.history, st.t + 1, st.gamma_acc)) / m
    return D


def stationary_path(model, theta, T, seed=0, burn_in=200):
    """Simulate T observations after discarding ``burn_in`` of them."""
    rng = np.random.default_rng(seed)
    pre, data = model.simulate(np.asarray(theta, dtype=float), T + burn_in, rng)
    if burn_in and model.depth:
        full = np.concatenate([np.asarray(pre, dtype=float), data])
        pre = tuple(full[burn_in:burn_in + model.depth])
    return pre, data[burn_in:]


def sample_histories(model, procedure, theta, n=25, seed=0, burn_in=200, spacing=8):
    """``n`` pre-step states spread over a burned-in stationary path."""
    pre, data = stationary_path(model, theta, burn_in + n * spacing, seed, burn_in=0)
    states = normalizer_states(procedure, data, pre, theta)
    return [states[burn_in + k * spacing] for k in range(n)]


# -- partial sums --------------------------------------------------------------

def _shape_verdict(kind, total, late, s_h, ratio, tail_rtol, ratio_div, ratio_conv):
    if kind == "diverge":
        if ratio >= ratio_div:
            return EMPIRICAL_PASS, "growth ratio"
        if ratio <= ratio_conv:
            return EMPIRICAL_FAIL, "growth ratio"
        return INCONCLUSIVE, "growth ratio between thresholds"
    if late <= tail_rtol * abs(s_h):
        return EMPIRICAL_PASS, "tail increment"
    if ratio <= ratio_conv:
        return EMPIRICAL_PASS, "growth ratio"
    if ratio >= ratio_div:
        return EMPIRICAL_FAIL, "growth ratio"
    return INCONCLUSIVE, "growth ratio between thresholds"


def classify_series(terms, kind, normalizer=None, threshold_div=THRESHOLD_DIV,
                    tail_rtol=TAIL_RTOL, ratio_div=RATIO_DIV, ratio_conv=RATIO_CONV,
                    threshold_conv=math.inf, cesaro_floor=CESARO_FLOOR):
    """Empirical verdict on whether sum(terms) diverges or converges.

    Absolute rules come first: divergence is accepted once the sum exceeds
    ``threshold_div``, convergence rejected once it exceeds ``threshold_conv``.

    If ``normalizer`` gives D_0, ..., D_T (nondecreasing, one more entry than
    ``terms``) the series is read as sum y_t / D_t:

    * diverge: D must at least double over the last three quarters and the
      quotient Q_t = (y_1 + ... + y_t) / D_t must hold its level,
      Q_T >= ``cesaro_floor`` * Q_{T/2}.  A quotient settling at a positive
      level forces divergence; one decaying like 1/t signals convergence.
    * converge: terms_t <= K (D_t - D_{t-1}) / (D_t D_{t-1}) bounds the sum
      by K (1/D_0 - 1/D_T).  K is read off the first half of the path and
      must cover the second half up to ``K_SLACK``.

    Otherwise (or if the normalizer rule is undecided) the shape of the
    partial sums decides: with q = (S_T - S_{T/2}) / (S_{T/2} - S_{T/4}),
    terms decaying like t^-p give q ~ 2^(1-p), so q >= ``ratio_div`` reads
    as divergent and q <= ``ratio_conv`` as convergent; a last-half increment
    below ``tail_rtol`` times the first half also reads as convergent.

    Returns ``(verdict, evidence)``; the verdict refers to ``kind`` ("diverge"
    or "converge") holding.
    """
    if kind not in ("diverge", "converge"):
        raise ValueError(f"unknown kind {kind!r}")
    terms = np.asarray(terms, dtype=float)
    S = np.cumsum(terms)
    T = len(S)
    if T < 8:
        return INCONCLUSIVE, {"reason": "path too short", "partial_sum": float(S[-1]) if T else 0.0,
                              "thresholds": {}}
    total = float(S[-1])
    s_q, s_h = float(S[T // 4 - 1]), float(S[T // 2 - 1])
    late, mid = total - s_h, s_h - s_q
    if mid > 0:
        ratio = late / mid
    else:
        ratio = 0.0 if late == 0 else math.inf
    ev = {"partial_sum": total, "half_sum": s_h, "quarter_sum": s_q, "growth_ratio": ratio,
          "thresholds": {"threshold_div": threshold_div, "tail_rtol": tail_rtol,
                         "ratio_div": ratio_div, "ratio_conv": ratio_conv,
                         "threshold_conv": threshold_conv, "cesaro_floor": cesaro_floor}}
    if not math.isfinite(total):
        ev["rule"] = "non-finite partial sum"
        return (EMPIRICAL_PASS if kind == "diverge" else EMPIRICAL_FAIL), ev
    if kind == "diverge" and total <= 0:
        ev["rule"] = "nonpositive partial sum"
        return EMPIRICAL_FAIL, ev
    if kind == "diverge" and total >= threshold_div:
        ev["rule"] = "threshold"
        return EMPIRICAL_PASS, ev
    if kind == "converge" and total >= threshold_conv:
        ev["rule"] = "threshold"
        return EMPIRICAL_FAIL, ev

    D = None if normalizer is None else np.asarray(normalizer, dtype=float)
    if D is not None and (D.shape != (T + 1,) or np.any(np.diff(D) < 0) or not D[1] > 0):
        ev["normalizer_note"] = "normalizer unusable (needs D_0..D_T, nondecreasing, positive)"
        D = None
    if D is not None and kind == "diverge":
        Q = np.cumsum(terms * D[1:]) / D[1:]
        growth = D[-1] / D[T // 4]
        q_ratio = Q[-1] / Q[T // 2 - 1] if Q[T // 2 - 1] > 0 else 0.0
        ev.update({"normalizer_growth": float(growth), "cesaro_final": float(Q[-1]),
                   "cesaro_half": float(Q[T // 2 - 1]), "cesaro_ratio": float(q_ratio)})
        if growth >= 2.0 and Q[-1] > 0:
            ev["rule"] = "cesaro quotient"
            return (EMPIRICAL_PASS if q_ratio >= cesaro_floor else EMPIRICAL_FAIL), ev
    if D is not None and kind == "converge" and D[0] > 0:
        inc = D[1:] - D[:-1]
        comp = inc / (D[1:] * D[:-1])
        with np.errstate(divide="ignore", invalid="ignore"):
            K = np.where(terms > 0, terms / comp, 0.0)
        k1, k2 = float(np.max(K[:T // 2])), float(np.max(K[T // 2:]))
        ev.update({"comparison_K_first_half": k1, "comparison_K_second_half": k2})
        if math.isfinite(k1) and math.isfinite(k2) and k2 <= K_SLACK * k1:
            kmax = max(k1, k2)
            ev["rule"] = "telescoping comparison"
            ev["sum_bound"] = kmax * (1.0 / D[0] - 1.0 / D[-1])
            return EMPIRICAL_PASS, ev
    verdict, rule = _shape_verdict(kind, total, late, s_h, ratio, tail_rtol, ratio_div, ratio_conv)
    ev["rule"] = rule
    return verdict, ev


@dataclass(frozen=True)
class SeriesA3:
    first: np.ndarray
    second: np.ndarray
    bound: float


def series_A3(d):
    """Partial sums of (d_n - d_{n-1}) / d_n and of (d_n - d_{n-1}) / d_n^2.

    ``d`` holds d_0, ..., d_N, nondecreasing, with d_n > 0 for n >= 1.  The
    second sum is bounded by the telescoping sum 1/d_0 - 1/d_N.  If d_0 = 0
    the first term equals 1/d_1 and the telescoping bound starts at n = 2,
    giving 2/d_1 - 1/d_N.
    """
    from .errors import NonMonotone
    d = np.asarray(d, dtype=float)
    if d.ndim != 1 or d.size < 2:
        raise ValueError("need d_0, ..., d_N with N >= 1")
    diff = np.diff(d)
    if np.any(diff < 0):
        raise NonMonotone(f"sequence decreases at n={int(np.argmax(diff < 0)) + 1}")
    if d[0] < 0 or np.any(d[1:] <= 0):
        raise ValueError("d_0 must be >= 0 and d_n > 0 for n >= 1")
    tail = d[1:]
    first = np.cumsum(diff / tail)
    second = np.cumsum(diff / (tail * tail))
    if d[0] > 0:
        bound = 1.0 / d[0] - 1.0 / d[-1]
    else:
        bound = 2.0 / d[1] - 1.0 / d[-1]
    return SeriesA3(first, second, bound)


# -- G positivity -------------------------------------------------------------

def compute_G(phi, g, w):
    """G(w) = -w * integral of phi(z - w) g(z) dz."""
    w = float(w)
    if w == 0.0:
        return 0.0
    val = integrate_line(lambda z: phi(z - w) * g.pdf(z), 0.0, g.scale, (w,))
    return -w * val


def G_batch(phi, g, ws, n=64):
    """Vectorized G over an array of w.

    Fixed Gauss rule split at 0, w/2, w and w +- scale so that the phi
    feature at z = w stays resolved when |w| is large.
    """
    ws = np.asarray(ws, dtype=float)
    flat = ws.reshape(-1)
    s = g.scale
    cuts = np.column_stack([flat, flat - s, flat + s, 0.5 * flat])
    x, wt = gauss_rows(np.zeros_like(flat), s, cuts, n)
    vals = -flat * np.sum(wt * phi(x - flat[:, None]) * g.pdf(x), axis=1)
    vals[flat == 0] = 0.0
    return vals.reshape(ws.shape)


def check_G_positivity(phi, g, grid=None, margin=0.0):
    """G(w) > margin at every grid w (both signs)."""
    grid = grid or UGrid()
    ws = grid.points[:, 0] if grid.dim == 1 else np.concatenate([grid.magnitudes, -grid.magnitudes])
    tol = {"margin": margin, "odd_tol": 1e-12}
    z = np.concatenate([np.linspace(1e-3, 10.0, 400), np.logspace(1, 4, 40)])
    reasons = []
    if np.max(np.abs(phi(z) + phi(-z))) > 1e-12 or phi(np.array([0.0]))[0] != 0.0:
        reasons.append("phi is not odd")
    if np.any(phi(z) <= 0):
        reasons.append("phi(z) > 0 fails for some z > 0")
    if not is_bell_shaped(g):
        reasons.append("g is not even and decreasing on the positive half-line")
    if reasons:
        return ConditionReport("G_positivity", INCONCLUSIVE, tolerances=tol,
                               reason="precondition: " + "; ".join(reasons))
    evidence = []
    try:
        values = [compute_G(phi, g, w) for w in ws]
    except QuadratureFailure as err:
        return ConditionReport("G_positivity", INCONCLUSIVE, tolerances=tol, reason=str(err))
    for w, G in zip(ws, values):
        evidence.append({"w": float(w), "G": G})
    low = min(values)
    verdict = PASS if low > margin else FAIL
    return ConditionReport("G_positivity", verdict, low, evidence, tol)


# -- general conditions along a path ---------------------------------------------

def check_C1_C2_C3(model, procedure, theta, grid=None, hist_samples=None, path=None,
                   T_check=2000, seed=0, tol_margin=0.0, method_path="gauss",
                   which=("C1", "C2", "C3"), **series_kw):
    """Drift sign (C1) on sampled histories; divergence (C2) and summability
    (C3) along a simulated path.

    ``path`` is ``(presample, data)``; by default a burned-in stationary path
    of length ``T_check`` at ``theta``.  Returns a dict with a report per
    condition in ``which``.
    """
    theta = np.asarray(theta, dtype=float)
    grid = grid or UGrid(dim=theta.size)
    out = {}
    if "C1" in which:
        out["C1"] = _check_C1(model, procedure, theta, grid, hist_samples, seed, tol_margin)
    if "C2" not in which and "C3" not in which:
        return out
    if path is None:
        path = stationary_path(model, theta, T_check, seed + 1)
    pre, data = path
    states = normalizer_states(procedure, data, pre, theta)
    D = normalizer_scale(procedure, states, theta)
    n_u = len(grid)
    inf_terms = np.empty(len(states))
    sup_terms = np.empty(len(states))
    norm2 = 1.0 + np.sum(grid.points ** 2, axis=1)
    for i, state in enumerate(states):
        inner = np.empty(n_u)
        second = np.empty(n_u)
        for j, u in enumerate(grid):
            d = conditional_drift(model, procedure, theta, u, state, method=method_path)
            inner[j] = d.inner
            second[j] = d.second_moment
        inf_terms[i] = np.min(np.abs(inner))
        sup_terms[i] = np.max(second / norm2)
    if "C2" in which:
        v2, ev2 = classify_series(inf_terms, "diverge", D, **series_kw)
        ev2["path_length"] = len(states)
        out["C2"] = ConditionReport("C2", v2, ev2["partial_sum"], [ev2], ev2["thresholds"],
                                    caveat=ASYMPTOTIC_CAVEAT)
    if "C3" in which:
        v3, ev3 = classify_series(sup_terms, "converge", D, **series_kw)
        ev3["path_length"] = len(states)
        ev3["B_hat_max"] = float(np.max(sup_terms))
        out["C3"] = ConditionReport("C3", v3, ev3["partial_sum"], [ev3], ev3["thresholds"],
                                    caveat=ASYMPTOTIC_CAVEAT)
    return out


def _check_C1(model, procedure, theta, grid, hist_samples, seed, tol_margin):
    if hist_samples is None:
        hist_samples = sample_histories(model, procedure, theta, seed=seed)
    tol = {"tol_margin": tol_margin}
    evidence = []
    worst = -math.inf
    try:
        for k, state in enumerate(hist_samples):
            for d in drift_grid(model, procedure, theta, grid.points, state, second=False):
                u = d.u
                evidence.append({"history": k, "t": state.t + 1, "u": u.tolist(), "inner": d.inner})
                worst = max(worst, d.inner)
    except QuadratureFailure as err:
        return ConditionReport("C1", INCONCLUSIVE, tolerances=tol, reason=str(err))
    return ConditionReport("C1", PASS if worst < -tol_margin else FAIL, -worst, evidence, tol,
                           caveat="certified on sampled histories only")


def check_corollary41(family, procedure, theta, grid=None, growth_factor=2.0):
    """The i.i.d. pair: negative drift on the annulus (I) and quadratic growth
    of the second moment (II), both with the t = 1 normalizer gamma(theta+u)."""
    theta = np.asarray(theta, dtype=float)
    grid = grid or UGrid(dim=theta.size)
    state = initial_state(procedure, theta, ())
    ev1, ev2 = [], []
    sup_inner = -math.inf
    ratios = []
    try:
        for u in grid:
            d = conditional_drift(family, procedure, theta, u, state)
            sup_inner = max(sup_inner, d.inner)
            ratio = d.second_moment / (1.0 + u @ u)
            ratios.append(ratio)
            ev1.append({"u": u.tolist(), "inner": d.inner})
            ev2.append({"u": u.tolist(), "second_moment": d.second_moment, "ratio": ratio})
        d0 = conditional_drift(family, procedure, theta, np.zeros_like(theta), state)
        ratios.append(d0.second_moment)
        far = grid.magnitudes[-1] * 10 * grid.directions[0]
        dfar = conditional_drift(family, procedure, theta, far, state)
        far_ratio = dfar.second_moment / (1.0 + far @ far)
    except QuadratureFailure as err:
        bad = ConditionReport("I", INCONCLUSIVE, reason=str(err))
        return {"I": bad, "II": ConditionReport("II", INCONCLUSIVE, reason=str(err))}
    rep1 = ConditionReport("I", PASS if sup_inner < 0 else FAIL, -sup_inner, ev1,
                           {"strict": 0.0})
    K = max(ratios)
    grows = far_ratio > growth_factor * K
    ev2.append({"u": far.tolist(), "ratio": far_ratio, "note": "growth probe beyond the grid"})
    verdict = PASS if math.isfinite(K) and not grows else (FAIL if not math.isfinite(K) else INCONCLUSIVE)
    rep2 = ConditionReport("II", verdict, K, ev2, {"growth_factor": growth_factor},
                           reason="" if verdict == PASS else "second moment grows faster than 1+|u|^2",
                           caveat=f"K_hat = {K:.6g}")
    return {"I": rep1, "II": rep2}


def check_corollary42(spec, model, path, theta, delta_min=0.0, **series_kw):
    """Conditions for scalar linear procedures psi_t = h_t - gamma_t theta.

    (a) E[h_t | past] = gamma_t theta by quadrature at each step;
    (b) 0 <= gamma_t / Gamma_t <= 2 - delta on the second half of the path and
    divergence of sum gamma_t / Gamma_t; (c) summability of
    E[(h_t - theta gamma_t)^2 | past] / Gamma_t^2.
    """
    from .estimators import make_linear
    if spec.dim != 1:
        raise ValueError("linear-procedure conditions are for scalar theta")
    theta = np.asarray(theta, dtype=float).reshape(1)
    proc = make_linear(spec)
    pre, data = path
    states = normalizer_states(proc, data, pre, theta)
    T = len(states)
    dev = np.empty(T)
    P = np.empty(T)
    ratio = np.empty(T)
    Gam = np.empty(T)
    for i, st in enumerate(states):
        t = st.t + 1
        gam = float(np.asarray(spec.gamma(st.history, t)).reshape(-1)[0])
        G = float(proc.normalizer(theta, st.history, t, st.gamma_acc)[0, 0])
        target = gam * theta[0]
        if model.measure == "lebesgue":
            x, w = gauss_nodes(model.center(theta, st.history), model.scale)
            wd = w * model.density(theta, x, st.history)
            h = np.asarray(spec.h(x, st.history, t), dtype=float).reshape(x.size)
            Eh = float(wd @ h)
            P[i] = float(wd @ (h - target) ** 2)
        else:
            Eh = float(model.expect(lambda z: float(np.ravel(spec.h(z, st.history, t))[0]), theta, st.history))
            P[i] = float(model.expect(lambda z: (float(np.ravel(spec.h(z, st.history, t))[0]) - target) ** 2,
                                      theta, st.history))
        dev[i] = abs(Eh - target) / (1.0 + abs(target))
        ratio[i] = gam / G
        Gam[i] = G
    D = np.concatenate([[float(states[0].gamma_acc[0, 0])], Gam])
    worst = float(np.max(dev))
    rep_a = ConditionReport("a", PASS if worst <= 1e-8 else FAIL, worst,
                            [{"max_relative_deviation": worst}], {"rtol": 1e-8})
    late = ratio[T // 2:]
    lo, hi = float(np.min(late)), float(np.max(late))
    delta_hat = 2.0 - hi
    bounds_ok = lo >= 0 and delta_hat > delta_min
    vdiv, evdiv = classify_series(ratio, "diverge", D, **series_kw)
    evdiv.update({"min_ratio": lo, "max_ratio": hi, "delta_hat": delta_hat})
    if not bounds_ok:
        vb = FAIL
    else:
        vb = vdiv
    rep_b = ConditionReport("b", vb, delta_hat, [evdiv], evdiv["thresholds"],
                            reason="" if bounds_ok else "gamma_t / Gamma_t leaves [0, 2 - delta]",
                            caveat=ASYMPTOTIC_CAVEAT)
    vc, evc = classify_series(P / Gam ** 2, "converge", D, **series_kw)
    rep_c = ConditionReport("c", vc, evc["partial_sum"], [evc], evc["thresholds"],
                            caveat=ASYMPTOTIC_CAVEAT)
    return {"a": rep_a, "b": rep_b, "c": rep_c}


# -- autoregressive path conditions ----------------------------------------------

def ar_path_terms(model, procedure, theta, path, grid=None):
    """Per-step ingredients of the AR path conditions.

    Returns a dict of arrays: ``gain`` a_t (inverse of the tuned scalar
    normalizer), ``weight`` h(x_prev), ``inf_G`` the infimum over the grid of
    G(u^T x_prev), ``xnorm2`` ||x_prev||^2, and ``normalizer`` D_0, ..., D_T
    with D_t the untuned scalar normalizer for t >= 1 and D_0 the initial
    accumulator.
    """
    theta = np.asarray(theta, dtype=float)
    grid = grid or UGrid(dim=theta.size)
    phi = procedure.info["phi"]
    h = procedure.info["h"]
    g = model.innovation
    pre, data = path
    states = normalizer_states(procedure, data, pre, theta)
    X = np.array([s.history.regressor() for s in states])
    gain = np.array([1.0 / procedure.gamma(theta, s.history, s.t + 1, s.gamma_acc)[0, 0]
                     for s in states])
    raw = np.array([procedure.normalizer(theta, s.history, s.t + 1, s.gamma_acc)[0, 0]
                    for s in states])
    weight = np.array([h(x) for x in X], dtype=float)
    W = X @ grid.points.T
    inf_G = np.min(G_batch(phi, g, W), axis=1)
    return {"gain": gain, "weight": weight, "inf_G": inf_G,
            "xnorm2": np.sum(X * X, axis=1),
            "normalizer": np.concatenate([[float(states[0].gamma_acc[0, 0])], raw])}


def check_ar_conditions(model, procedure, theta, path=None, grid=None, T_check=2000, seed=0,
                        student=False, **series_kw):
    """Divergence of sum a_t h inf G(u^T x_prev) and summability of
    sum a_t^2 ||x_prev||^2 h^2 along a path.

    With ``student=True`` the reports carry the Student AR(1) names.  The
    evidence includes the Cesaro averages (1/t) sum h inf G and (1/t) D_t,
    whose positive limits drive the divergence argument.
    """
    theta = np.asarray(theta, dtype=float)
    if path is None:
        path = stationary_path(model, theta, T_check, seed + 1)
    terms = ar_path_terms(model, procedure, theta, path, grid)
    a, h, G = terms["gain"], terms["weight"], terms["inf_G"]
    div_terms = a * h * G
    conv_terms = a * a * terms["xnorm2"] * h * h
    T = len(a)
    t = np.arange(1, T + 1)
    cesaro_G = np.cumsum(h * G) / t
    D = terms["normalizer"]
    cesaro_d = D[1:] / t
    v1, ev1 = classify_series(div_terms, "diverge", D, **series_kw)
    ev1.update({"cesaro_hG_final": float(cesaro_G[-1]), "cesaro_hG_half": float(cesaro_G[T // 2 - 1]),
                "cesaro_normalizer_final": float(cesaro_d[-1])})
    v2, ev2 = classify_series(conv_terms, "converge", D, **series_kw)
    names = ("StArC1", "StArC2") if student else ("ArC1", "ArC2")
    return {
        names[0]: ConditionReport(names[0], v1, ev1["partial_sum"], [ev1], ev1["thresholds"],
                                  caveat=ASYMPTOTIC_CAVEAT),
        names[1]: ConditionReport(names[1], v2, ev2["partial_sum"], [ev2], ev2["thresholds"],
                                  caveat=ASYMPTOTIC_CAVEAT),
    }


# -- Lyapunov monitor ------------------------------------------------------------

class QuadraticLyapunov:
    """V(u) = ||u||^2, gradient 2u, Hessian 2 * identity."""

    hess_sup = 2.0

    def __call__(self, u):
        return float(u @ u)

    def grad(self, u):
        return 2.0 * u


@dataclass(frozen=True)
class LyapunovRecord:
    t: np.ndarray
    N: np.ndarray
    drift_term: np.ndarray
    second_moment: np.ndarray
    V: np.ndarray
    B: np.ndarray
    Y: np.ndarray
    B_verdict: str
    B_evidence: dict


def lyapunov_monitor(trajectory, model, procedure, theta=None, V=None, method="gauss",
                     **series_kw):
    """N_t(Delta_{t-1}) along a trajectory and the Robbins-Siegmund split.

    N_t = grad V(Delta) Gamma^{-1} b + (1/2) sup||V''|| E||Gamma^{-1} psi||^2,
    B_t = [N_t]^+ / (1 + V(Delta)), Y_t = running sum of [N_t]^-.
    """
    V = V or QuadraticLyapunov()
    theta = np.asarray(trajectory.theta_true if theta is None else theta, dtype=float)
    pre_states = trajectory.pre_step_states()
    T = len(pre_states)
    N = np.empty(T)
    drift = np.empty(T)
    second = np.empty(T)
    Vs = np.empty(T)
    for i, st in enumerate(pre_states):
        delta = st.theta_hat - theta
        d = conditional_drift(model, procedure, theta, delta, st, method=method)
        Ginv = _normalizer_inverse(procedure, theta + delta, st)
        drift[i] = float(V.grad(delta) @ (Ginv @ d.b))
        second[i] = d.second_moment
        N[i] = drift[i] + 0.5 * V.hess_sup * second[i]
        Vs[i] = V(delta)
    B = np.maximum(N, 0.0) / (1.0 + Vs)
    Y = np.cumsum(np.maximum(-N, 0.0))
    D = normalizer_scale(procedure, pre_states, theta)
    verdict, ev = classify_series(B, "converge", D, **series_kw)
    return LyapunovRecord(np.arange(1, T + 1), N, drift, second, Vs, B, Y, verdict, ev)
