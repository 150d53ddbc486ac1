"""Concrete estimating procedures: pairs (psi_t, Gamma_t) for the engine.

``psi(theta, x, history, t)`` may be called with an array of candidate
observations ``x`` (conditional expectations do this); it returns shape
``x.shape + (m,)``.  ``normalizer(theta, history, t, previous)`` never sees
the current observation, so every normalizer here is predictable by
construction.
"""
import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .engine import as_parameter
from .errors import InvalidAlpha, InvalidPhi, SingularFisher
from .models import StudentInnovation, update_cumulative_fisher

log = logging.getLogger(__name__)

EPS_DOMAIN = 1e-6


@dataclass(frozen=True)
class TuningSchedule:
    """Multipliers c_t on the normalizer; c_t = 1 once t exceeds ``until``."""
    values: tuple = ()

    def __post_init__(self):
        if any(not (c > 0) for c in self.values):
            raise ValueError("tuning constants must be positive")

    @classmethod
    def constant_prefix(cls, values, until):
        values = tuple(float(v) for v in values)
        if len(values) == 1:
            values = values * int(until)
        if len(values) != int(until):
            raise ValueError(f"need 1 or {until} tuning values, got {len(values)}")
        return cls(values)

    @property
    def until(self):
        return len(self.values)

    def __call__(self, t):
        return self.values[t - 1] if t <= len(self.values) else 1.0

    def to_config(self):
        return {"type": "constant_prefix", "values": list(self.values), "until": self.until}


NO_TUNING = TuningSchedule()


@dataclass(frozen=True, eq=False)
class EstimatingProcedure:
    name: str
    dim: int
    psi: Callable
    normalizer: Callable
    depth: int = 0
    gamma0: Optional[np.ndarray] = None
    tuning: TuningSchedule = NO_TUNING
    project: Optional[Callable] = None
    breakpoints: Optional[Callable] = None
    info: dict = field(default_factory=dict)

    def gamma(self, theta, history, t, previous):
        """Tuned Gamma_t(theta)."""
        return self.tuning(t) * self.normalizer(theta, history, t, previous)

    def jumps(self, theta, history):
        """x locations where psi may be discontinuous."""
        return () if self.breakpoints is None else tuple(self.breakpoints(theta, history))

    def with_tuning(self, tuning):
        return replace(self, tuning=tuning)

    def flipped(self):
        """Same procedure with psi negated (a deliberately broken control)."""
        psi = self.psi

        def neg(theta, x, history, t):
            return -psi(theta, x, history, t)
        info = {**self.info, "flipped": True}
        if "phi" in info:
            phi = info["phi"]
            info["phi"] = lambda z: -phi(z)
        return replace(self, name=f"{self.name}[flipped]", psi=neg, info=info)


# -- i.i.d. and linear --------------------------------------------------------

def make_iid_mle(family, eps_domain=EPS_DOMAIN):
    """psi = score, Gamma_t(v) = t * i(v).

    Families with a bounded parameter domain get their estimates projected
    onto [lo + eps, hi - eps].
    """
    def psi(theta, x, history, t):
        return family.score(theta, x)

    def normalizer(theta, history, t, previous):
        i = family.fisher(theta)
        if not np.all(np.isfinite(i)) or np.linalg.det(i) == 0:
            raise SingularFisher(f"Fisher information {i} at {theta} is singular")
        return t * i

    project = None
    domain = getattr(family, "domain", None)
    if domain is not None:
        lo, hi = domain[0] + eps_domain, domain[1] - eps_domain

        def project(theta):
            return np.clip(theta, lo, hi)
    return EstimatingProcedure("iid_mle", family.dim, psi, normalizer, depth=0,
                               project=project, info={"family": repr(family)})


@dataclass(frozen=True, eq=False)
class LinearProcedureSpec:
    """psi_t(theta) = h_t - gamma_t theta.

    ``h(x, history, t)`` is adapted, ``gamma(history, t)`` predictable.
    ``Gamma`` is None for the cumulative choice Gamma_t = Gamma_{t-1} +
    gamma_t started at ``Gamma0``, or a callable ``(history, t, previous)``.
    """
    h: Callable
    gamma: Callable
    dim: int = 1
    depth: int = 0
    Gamma: Optional[Callable] = None
    Gamma0: Optional[np.ndarray] = None
    name: str = "linear"


def make_linear(spec):
    m = spec.dim

    def psi(theta, x, history, t):
        g = np.asarray(spec.gamma(history, t), dtype=float).reshape(m, m)
        return np.asarray(spec.h(x, history, t), dtype=float) - (g @ theta)

    if spec.Gamma is None:
        def normalizer(theta, history, t, previous):
            return previous + np.asarray(spec.gamma(history, t), dtype=float).reshape(m, m)
    else:
        def normalizer(theta, history, t, previous):
            return np.asarray(spec.Gamma(history, t, previous), dtype=float).reshape(m, m)

    return EstimatingProcedure(spec.name, m, psi, normalizer, depth=spec.depth,
                               gamma0=spec.Gamma0, info={"linear_spec": spec})


def sample_mean_spec():
    """h_t = X_t, gamma_t = 1, Gamma_t = t."""
    return LinearProcedureSpec(h=lambda x, hist, t: np.asarray(x, dtype=float)[..., None],
                               gamma=lambda hist, t: 1.0, Gamma0=np.zeros((1, 1)),
                               name="sample_mean")


def least_squares_ar_spec(order=1, D=None, Gamma0=None):
    """Recursive least squares for AR(order).

    h_t = D_t^{-1} x_prev X_t, gamma_t = D_t^{-1} x_prev x_prev^T with
    cumulative Gamma.  ``D`` is a constant or a callable ``(history, t)``;
    default 1.
    """
    def D_t(hist, t):
        if D is None:
            return 1.0
        return float(D(hist, t)) if callable(D) else float(D)

    def h(x, hist, t):
        return np.multiply.outer(np.asarray(x, dtype=float), hist.regressor()) / D_t(hist, t)

    def gamma(hist, t):
        xp = hist.regressor()
        return np.outer(xp, xp) / D_t(hist, t)

    return LinearProcedureSpec(h=h, gamma=gamma, dim=order, depth=order, Gamma0=Gamma0,
                               name="least_squares")


# -- robust autoregression ----------------------------------------------------

def student_phi(alpha):
    """(alpha+1) z / (alpha + z^2); the Student t likelihood influence."""
    def phi(z):
        z = np.asarray(z, dtype=float)
        return (alpha + 1) * z / (alpha + z * z)
    phi.__name__ = f"student_phi({alpha:g})"
    return phi


def sign_phi(z):
    return np.sign(np.asarray(z, dtype=float))


def linear_phi(z):
    return np.asarray(z, dtype=float)


def huber_phi(c=1.345):
    def phi(z):
        return np.clip(np.asarray(z, dtype=float), -c, c)
    phi.__name__ = f"huber_phi({c:g})"
    return phi


def phi_from_config(cfg):
    kind = cfg.get("type")
    if kind == "student":
        return student_phi(float(cfg["alpha"]))
    if kind == "sign":
        return sign_phi
    if kind == "linear":
        return linear_phi
    if kind == "huber":
        return huber_phi(float(cfg.get("c", 1.345)))
    raise ValueError(f"unknown phi type {kind!r}")


_ODD_GRID = np.concatenate([np.linspace(0.0, 10.0, 201), np.logspace(1, 6, 26)])


def phi_is_odd(phi, tol=1e-12):
    return bool(np.all(np.abs(phi(_ODD_GRID) + phi(-_ODD_GRID)) <= tol))


def phi_is_bounded(phi):
    """Heuristic: |phi| far out stays within 10x its size on [0, 10]."""
    near = np.max(np.abs(phi(np.linspace(0.0, 10.0, 201))))
    far = np.max(np.abs(phi(np.logspace(3, 8, 11))))
    return bool(far <= 10.0 * max(near, 1.0))


def harmonic_gain(t):
    return 1.0 / t


def make_campbell_robust(phi, h=None, a=None, order=1, g_bell_shaped=True, normalizer=None,
                         tuning=NO_TUNING, name="campbell"):
    """psi_t(theta) = x_prev h(x_prev) phi(X_t - theta^T x_prev), Gamma_t = I / a_t.

    ``a(t)`` defaults to 1/t.  A stochastic normalizer may be passed as
    ``normalizer`` instead of ``a``.  Unbounded phi is accepted with a
    warning: only the bounded-phi certificate needs boundedness.
    """
    if not phi_is_odd(phi):
        raise InvalidPhi(f"{getattr(phi, '__name__', phi)} is not odd")
    bounded = phi_is_bounded(phi)
    if not bounded:
        warnings.warn(f"{getattr(phi, '__name__', phi)} looks unbounded; "
                      "the bounded-phi convergence certificate does not apply",
                      UserWarning, stacklevel=2)
    if not g_bell_shaped:
        warnings.warn("innovation density not declared bell-shaped; "
                      "drift positivity is not guaranteed", UserWarning, stacklevel=2)
    weight = (lambda xp: 1.0) if h is None else h
    gain = harmonic_gain if a is None else a
    eye = np.eye(order)

    def psi(theta, x, history, t):
        xp = history.regressor()
        r = np.asarray(x, dtype=float) - theta @ xp
        return np.multiply.outer(phi(r), xp * weight(xp))

    if normalizer is None:
        def normalizer(theta, history, t, previous):
            return eye / gain(t)

    def jumps(theta, history):
        return (float(theta @ history.regressor()),)

    return EstimatingProcedure(name, order, psi, normalizer, depth=order, tuning=tuning,
                               breakpoints=jumps,
                               info={"phi": phi, "h": weight, "a": gain, "phi_bounded": bounded,
                                     "g_bell_shaped": g_bell_shaped})


def student_fisher_normalizer(innovation, info=None):
    """Cumulative I_t = I_{t-1} + i^g x_prev x_prev^T."""
    def normalizer(theta, history, t, previous):
        return update_cumulative_fisher(previous, innovation, history, info)
    return normalizer


def make_student_ar1(alpha, tuning=NO_TUNING, fisher=None):
    """Likelihood recursion for AR(1) with Student t innovations.

    psi_t(theta) = (alpha+1) X_{t-1} r / (alpha + r^2), r = X_t - theta X_{t-1},
    normalized by the conditional Fisher information I_t (times c_t).
    ``fisher`` replaces i^g; by default the exact (alpha+1)/(alpha+3).
    ``alpha = inf`` gives the Gaussian limit, i.e. least squares.
    """
    alpha = float(alpha)
    if not alpha > 0:
        raise InvalidAlpha(f"alpha must be > 0, got {alpha}")
    if math.isinf(alpha):
        from .models import GaussianInnovation
        g = GaussianInnovation(1.0)
        phi = linear_phi
    else:
        g = StudentInnovation(alpha)
        phi = student_phi(alpha)
    with warnings.catch_warnings():
        # the Gaussian limit uses phi(z) = z on purpose
        warnings.simplefilter("ignore", UserWarning)
        proc = make_campbell_robust(phi, order=1, normalizer=student_fisher_normalizer(g, fisher),
                                    tuning=tuning, name="student_ar1")
    return replace(proc, info={**proc.info, "alpha": alpha, "innovation": g,
                               "fisher": g.fisher if fisher is None else float(fisher)})


# -- batch baseline -----------------------------------------------------------

def newton_raphson_scoring(batch, family, theta0, iters):
    """Method of scoring for an i.i.d. sample.

    theta_k = theta_{k-1} + (n i(theta_{k-1}))^{-1} sum_i score(theta_{k-1}, X_i).
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    x = np.asarray(batch, dtype=float)
    n = x.size
    theta = as_parameter(theta0, family.dim)
    for _ in range(iters):
        J = n * family.fisher(theta)
        if not np.all(np.isfinite(J)) or np.linalg.det(J) == 0:
            raise SingularFisher(f"information {J} at {theta} is singular")
        total = family.score(theta, x).sum(axis=0)
        theta = theta + np.linalg.solve(J, total)
        domain = getattr(family, "domain", None)
        if domain is not None:
            theta = np.clip(theta, domain[0] + EPS_DOMAIN, domain[1] - EPS_DOMAIN)
    return theta
