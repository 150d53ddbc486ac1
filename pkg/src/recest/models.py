"""Data-generating processes and their likelihood objects.

Every model exposes, for a parameter ``theta`` and a window of past
observations, the conditional density of the next observation, its score
(gradient of the log density in theta, zero where the density vanishes), the
one-step conditional Fisher information, and conditional expectations
computed by quadrature (Lebesgue models) or summation (counting models).
"""
import math
import warnings
from abc import ABC, abstractmethod
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np
from scipy.special import betaln

from .engine import HistoryWindow, as_parameter
from .errors import InvalidAlpha, QuadratureFailure
from .quadrature import integrate_gauss, integrate_line, integrate_line_vec

BURN_IN = 200


# -- innovation densities -----------------------------------------------------

class Innovation(ABC):
    """A density g on R, symmetric about zero."""

    scale = 1.0

    @abstractmethod
    def logpdf(self, z): ...

    def pdf(self, z):
        return np.exp(self.logpdf(z))

    @abstractmethod
    def dlogpdf(self, z):
        """g'(z) / g(z)."""

    @abstractmethod
    def sample(self, rng, size=None): ...

    def closed_form_fisher(self):
        return None

    @cached_property
    def fisher(self):
        """Location Fisher information of g (quadrature-verified)."""
        return fisher_scalar(self).value

    @abstractmethod
    def to_config(self): ...


class StudentInnovation(Innovation):
    """Student t density with ``alpha`` degrees of freedom."""

    def __init__(self, alpha):
        alpha = float(alpha)
        if not alpha > 0:
            raise InvalidAlpha(f"alpha must be > 0, got {alpha}")
        self.alpha = alpha
        # 1 / (sqrt(alpha) B(alpha/2, 1/2)); a gammaln difference cancels for large alpha
        self.log_c = -betaln(alpha / 2, 0.5) - 0.5 * math.log(alpha)

    @property
    def c_alpha(self):
        return math.exp(self.log_c)

    def logpdf(self, z):
        a = self.alpha
        return self.log_c - 0.5 * (a + 1) * np.log1p(np.square(z) / a)

    def dlogpdf(self, z):
        a = self.alpha
        return -(a + 1) * z / (a + np.square(z))

    def sample(self, rng, size=None):
        return sample_student(self.alpha, rng, size)

    def closed_form_fisher(self):
        return (self.alpha + 1) / (self.alpha + 3)

    def to_config(self):
        return {"type": "student", "alpha": self.alpha}

    def __repr__(self):
        return f"StudentInnovation(alpha={self.alpha:g})"


class GaussianInnovation(Innovation):

    def __init__(self, sigma=1.0):
        if not sigma > 0:
            raise ValueError("sigma must be > 0")
        self.sigma = float(sigma)
        self.scale = self.sigma

    def logpdf(self, z):
        s = self.sigma
        return -0.5 * np.square(z / s) - math.log(s * math.sqrt(2 * math.pi))

    def dlogpdf(self, z):
        return -np.asarray(z) / self.sigma ** 2

    def sample(self, rng, size=None):
        return self.sigma * rng.standard_normal(size)

    def closed_form_fisher(self):
        return 1.0 / self.sigma ** 2

    def to_config(self):
        return {"type": "gaussian", "sigma": self.sigma}

    def __repr__(self):
        return f"GaussianInnovation(sigma={self.sigma:g})"


def innovation_from_config(cfg):
    kind = cfg.get("type")
    if kind == "student":
        return StudentInnovation(cfg["alpha"])
    if kind in ("gaussian", "normal"):
        return GaussianInnovation(cfg.get("sigma", 1.0))
    raise ValueError(f"unknown innovation type {kind!r}")


def sample_student(alpha, rng, size=None):
    """Student t draws as Z / sqrt(V / alpha), V chi-square with alpha dof.

    For integer alpha, V is a sum of alpha squared normals; otherwise
    V = 2 * Gamma(alpha / 2).
    """
    alpha = float(alpha)
    if not alpha > 0:
        raise InvalidAlpha(f"alpha must be > 0, got {alpha}")
    z = rng.standard_normal(size)
    if alpha.is_integer() and alpha <= 64:
        k = int(alpha)
        shape = (k,) if size is None else (*np.atleast_1d(size), k)
        v = np.square(rng.standard_normal(shape)).sum(axis=-1)
    else:
        v = 2.0 * rng.standard_gamma(alpha / 2, size)
    out = z / np.sqrt(v / alpha)
    return float(out) if size is None else out


@dataclass(frozen=True)
class FisherScalar:
    value: float
    method: str
    closed_form: Optional[float] = None


def fisher_scalar(g):
    """Integral of (g'/g)^2 g over R.

    Where ``g`` knows a closed form, both are returned and must agree to
    1e-8 relative.
    """
    value = integrate_line(lambda z: np.square(g.dlogpdf(z)) * g.pdf(z),
                           scale=g.scale)
    if not value > 0:
        raise QuadratureFailure(f"Fisher information {value} is not positive")
    closed = g.closed_form_fisher()
    if closed is None:
        return FisherScalar(value, "quadrature")
    if abs(value - closed) > 1e-8 * closed:
        raise QuadratureFailure(f"quadrature {value!r} disagrees with closed form {closed!r}")
    return FisherScalar(value, "quadrature", closed)


def is_bell_shaped(g, zmax=50.0, n=2001):
    """Even, and strictly decreasing on a positive grid until it underflows."""
    z = np.linspace(0.0, zmax, n)[1:]
    if not np.array_equal(g.pdf(z), g.pdf(-z)):
        return False
    p = g.pdf(np.concatenate([[0.0], z]))
    d = np.diff(p)
    return bool(np.all(d <= 0) and np.all(d[p[1:] > 0] < 0))


# -- observation models -------------------------------------------------------

class ObservationModel(ABC):
    """Conditional law of X_t given the last ``depth`` observations."""

    dim = 1
    depth = 0
    measure = "lebesgue"

    def presample(self):
        return ()

    def history(self):
        return HistoryWindow(self.depth, self.presample())

    @abstractmethod
    def sample_next(self, theta, history, rng): ...

    def simulate(self, theta, T, rng):
        """Return ``(presample, path)`` with ``len(path) == T``."""
        hist = self.history()
        pre = hist.values
        out = np.empty(T)
        for i in range(T):
            out[i] = self.sample_next(theta, hist, rng)
            hist = hist.append(out[i])
        return pre, out

    @abstractmethod
    def log_density(self, theta, x, history): ...

    def density(self, theta, x, history):
        return np.exp(self.log_density(theta, x, history))

    @abstractmethod
    def score(self, theta, x, history):
        """Gradient in theta of the log density; shape ``x.shape + (dim,)``."""

    @abstractmethod
    def one_step_fisher(self, theta, history): ...

    @abstractmethod
    def center(self, theta, history):
        """Location of the conditional law, used to place quadrature panels."""

    def expect(self, fn, theta, history, breakpoints=(), method="adaptive", size=None):
        """E[fn(X_t) | history] under ``theta``.

        ``size`` is the length of a vector-valued ``fn`` (None for scalar).
        The ``gauss`` method requires ``fn`` vectorized over its argument.
        """
        theta = np.asarray(theta, dtype=float)
        c = self.center(theta, history)

        def weighted(x):
            d = self.density(theta, x, history)
            v = fn(x)
            if np.ndim(v) > np.ndim(d):
                return v * np.reshape(d, np.shape(d) + (1,) * (np.ndim(v) - np.ndim(d)))
            return v * d

        scale = self.scale
        if method == "gauss":
            return integrate_gauss(weighted, c, scale, breakpoints)
        if size is None:
            return integrate_line(weighted, c, scale, breakpoints)
        return integrate_line_vec(weighted, size, c, scale, breakpoints)

    scale = 1.0


class LocationModel(ObservationModel):
    """I.i.d. X_t = theta + xi_t with xi_t ~ g."""

    def __init__(self, innovation):
        self.innovation = innovation
        self.scale = innovation.scale

    def sample_next(self, theta, history, rng):
        return float(theta[0] + self.innovation.sample(rng))

    def simulate(self, theta, T, rng):
        return (), float(theta[0]) + self.innovation.sample(rng, T)

    def log_density(self, theta, x, history=None):
        return self.innovation.logpdf(np.asarray(x) - theta[0])

    def score(self, theta, x, history=None):
        return -self.innovation.dlogpdf(np.asarray(x) - theta[0])[..., None]

    def one_step_fisher(self, theta, history=None):
        return np.array([[self.innovation.fisher]])

    def fisher(self, theta):
        return self.one_step_fisher(theta)

    def center(self, theta, history=None):
        return float(theta[0])

    def to_config(self):
        return {"type": "location", "innovation": self.innovation.to_config()}

    def __repr__(self):
        return f"LocationModel({self.innovation!r})"


def normal_location(sigma=1.0):
    return LocationModel(GaussianInnovation(sigma))


def student_location(alpha):
    """Location family of Student t; alpha=1 is the Cauchy."""
    return LocationModel(StudentInnovation(alpha))


class BernoulliModel(ObservationModel):
    """I.i.d. Bernoulli(p) with respect to counting measure on {0, 1}."""

    measure = "counting"
    domain = (0.0, 1.0)

    def sample_next(self, theta, history, rng):
        return float(rng.random() < theta[0])

    def simulate(self, theta, T, rng):
        return (), (rng.random(T) < theta[0]).astype(float)

    def log_density(self, theta, x, history=None):
        p = theta[0]
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            return x * np.log(p) + (1 - x) * np.log1p(-p)

    def score(self, theta, x, history=None):
        p = theta[0]
        x = np.asarray(x, dtype=float)
        return (x / p - (1 - x) / (1 - p))[..., None]

    def one_step_fisher(self, theta, history=None):
        p = theta[0]
        return np.array([[1.0 / (p * (1 - p))]])

    def fisher(self, theta):
        return self.one_step_fisher(theta)

    def center(self, theta, history=None):
        return float(theta[0])

    def expect(self, fn, theta, history=None, breakpoints=(), method="adaptive", size=None):
        p = float(theta[0])
        return (1 - p) * np.asarray(fn(0.0), dtype=float) + p * np.asarray(fn(1.0), dtype=float)

    def to_config(self):
        return {"type": "bernoulli"}


class ARModel(ObservationModel):
    """X_t = theta^T (X_{t-1}, ..., X_{t-m}) + xi_t, xi_t i.i.d. ~ g.

    Pre-sample values are zero.  With ``burn_in > 0`` the first ``burn_in``
    simulated values are discarded and the last ``order`` of them become the
    pre-sample, which approximates a draw from the stationary law.
    """

    def __init__(self, order, innovation, burn_in=0):
        if order < 1:
            raise ValueError("order must be >= 1")
        self.order = int(order)
        self.dim = self.depth = self.order
        self.innovation = innovation
        self.scale = innovation.scale
        self.burn_in = int(burn_in)

    def presample(self):
        return (0.0,) * self.order

    @staticmethod
    def is_stationary(theta):
        """All companion eigenvalues strictly inside the unit circle."""
        theta = np.asarray(theta, dtype=float).reshape(-1)
        m = theta.size
        comp = np.zeros((m, m))
        comp[0] = theta
        comp[1:, :-1] = np.eye(m - 1)
        return bool(np.all(np.abs(np.linalg.eigvals(comp)) < 1))

    def sample_next(self, theta, history, rng):
        return float(theta @ history.regressor() + self.innovation.sample(rng))

    def simulate(self, theta, T, rng):
        theta = as_parameter(theta, self.dim)
        if not self.is_stationary(theta):
            warnings.warn(f"AR coefficients {theta} are outside the stationary region",
                          RuntimeWarning, stacklevel=2)
        m = self.order
        n = T + self.burn_in
        xi = self.innovation.sample(rng, n)
        x = np.zeros(n + m)
        coef = theta[::-1]  # matches x[i:i+m] = (X_{t-m}, ..., X_{t-1})
        for i in range(n):
            x[i + m] = coef @ x[i:i + m] + xi[i]
        keep = x[self.burn_in:]
        return tuple(keep[:m]), keep[m:].copy()

    def residual(self, theta, x, history):
        return np.asarray(x, dtype=float) - theta @ history.regressor()

    def log_density(self, theta, x, history):
        return self.innovation.logpdf(self.residual(theta, x, history))

    def score(self, theta, x, history):
        return score_ar(self.innovation, theta, x, history)

    def one_step_fisher(self, theta, history):
        xp = history.regressor()
        return self.innovation.fisher * np.outer(xp, xp)

    def center(self, theta, history):
        return float(theta @ history.regressor())

    def to_config(self):
        return {"model": "ar", "order": self.order, "innovation": self.innovation.to_config(),
                "burn_in": self.burn_in}

    def __repr__(self):
        return f"ARModel(order={self.order}, {self.innovation!r}, burn_in={self.burn_in})"


def score_ar(g, theta, x_t, hist):
    """-(g'/g)(x_t - theta^T x_prev) * x_prev; shape ``x_t.shape + (m,)``."""
    xp = hist.regressor()
    r = np.asarray(x_t, dtype=float) - np.asarray(theta) @ xp
    return -np.multiply.outer(g.dlogpdf(r), xp)


def update_cumulative_fisher(I_prev, g, hist, info=None):
    """I_t = I_{t-1} + i^g x_prev x_prev^T.

    ``info`` overrides the innovation's Fisher information i^g.
    """
    xp = hist.regressor()
    ig = g.fisher if info is None else info
    return I_prev + ig * (xp[:, None] * xp)
