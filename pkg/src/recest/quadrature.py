"""Integration over the real line for densities with possibly heavy tails.

Both routines integrate after the substitution ``x = center + scale * tan(v)``,
which maps R onto (-pi/2, pi/2).  A density with polynomial tails such as a
Cauchy then becomes a bounded integrand on a finite interval, so neither
routine has to pick a truncation range.
"""
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy.integrate import cubature

from .errors import QuadratureFailure

HALF_PI = 0.5 * np.pi

#: convergence target for adaptive integration
RTOL = 1e-8
ATOL = 1e-10


def _edges(center, scale, breakpoints):
    cuts = {0.0}
    for b in breakpoints:
        v = float(np.arctan((b - center) / scale))
        if abs(v) < HALF_PI:
            cuts.add(v)
    return [-HALF_PI, *sorted(cuts), HALF_PI]


def integrate_line(fn, center=0.0, scale=1.0, breakpoints=(), rtol=RTOL, atol=ATOL):
    """Adaptive integral of a scalar function over R.

    ``breakpoints`` are x locations where ``fn`` may jump; the range is split
    there so that QUADPACK never straddles a discontinuity.

    Raises QuadratureFailure if the estimated error exceeds
    ``max(atol, rtol * sum |panel value|)``; measuring relative error against
    the panels keeps integrals that cancel to ~0 (zero-mean scores) decidable.
    """
    def integrand(v):
        c = np.cos(v)
        return fn(center + scale * np.tan(v)) * scale / (c * c)

    edges = _edges(center, scale, breakpoints)
    total = 0.0
    size = 0.0
    err = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        out = integrate.quad(integrand, lo, hi, epsabs=0.01 * atol,
                             epsrel=0.01 * rtol, limit=400, full_output=1)
        total += out[0]
        size += abs(out[0])
        err += out[1]
    if not np.isfinite(total) or err > max(atol, rtol * size):
        raise QuadratureFailure(
            f"integral {total!r} with error estimate {err:.3g} misses "
            f"rtol={rtol:g}, atol={atol:g}")
    return float(total)


def integrate_line_vec(fn, size, center=0.0, scale=1.0, breakpoints=(),
                       rtol=RTOL, atol=ATOL):
    """Componentwise `integrate_line` for an R^size-valued function."""
    out = np.empty(size)
    for k in range(size):
        out[k] = integrate_line(lambda x, k=k: np.ravel(fn(x))[k], center,
                                scale, breakpoints, rtol, atol)
    return out


def integrate_line_batch(fn, center=0.0, scale=1.0, breakpoints=(), rtol=RTOL, atol=ATOL):
    """Adaptive integral of an array-valued function over R, all components at once.

    ``fn`` takes a 1-D array of x and returns shape ``(len(x), ...)``.  The
    range is split at every breakpoint.  Each component must meet
    ``max(atol, rtol * |value|)`` or QuadratureFailure is raised.
    """
    edges = _edges(center, scale, breakpoints)

    def integrand(v):
        v = v[:, 0]
        c = np.cos(v)
        vals = np.asarray(fn(center + scale * np.tan(v)), dtype=float)
        jac = scale / (c * c)
        return vals * jac.reshape((-1,) + (1,) * (vals.ndim - 1))

    res = cubature(integrand, [edges[0]], [edges[-1]], rtol=0.01 * rtol, atol=0.01 * atol,
                   points=[np.array([e]) for e in edges[1:-1]], max_subdivisions=20000)
    val = np.asarray(res.estimate, dtype=float)
    err = np.asarray(res.error, dtype=float)
    if res.status != "converged" or not np.all(np.isfinite(val)) or \
            np.any(err > np.maximum(atol, rtol * np.abs(val))):
        raise QuadratureFailure(
            f"batched integral did not converge (status {res.status}, "
            f"max error estimate {np.max(err):.3g})")
    return val


@lru_cache(maxsize=8)
def _legendre(n):
    return np.polynomial.legendre.leggauss(n)


def gauss_nodes(center=0.0, scale=1.0, breakpoints=(), n=64):
    """Nodes and weights of a composite Gauss-Legendre rule on R.

    One panel of ``n`` nodes per interval between consecutive breakpoints
    (the center always counts as one).  Returns ``(x, w)`` such that
    ``sum(w * f(x))`` approximates the integral of ``f``.
    """
    t, wt = _legendre(n)
    edges = _edges(center, scale, breakpoints)
    xs, ws = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        half = 0.5 * (hi - lo)
        v = lo + half * (t + 1.0)
        c = np.cos(v)
        xs.append(center + scale * np.tan(v))
        ws.append(half * wt * scale / (c * c))
    return np.concatenate(xs), np.concatenate(ws)


def integrate_gauss(fn, center=0.0, scale=1.0, breakpoints=(), n=64):
    """Fixed-rule integral of a function vectorized over its first axis.

    ``fn`` receives the node array and may return shape ``(N,)`` or
    ``(N, ...)``; the result drops the node axis.  There is no error control;
    use it for path sweeps after validating against `integrate_line`.
    """
    x, w = gauss_nodes(center, scale, breakpoints, n)
    vals = np.asarray(fn(x), dtype=float)
    return np.tensordot(w, vals, axes=(0, 0))


def gauss_rows(centers, scale=1.0, breakpoints=None, n=64):
    """Per-row composite rules for many integrals at once.

    ``centers`` has shape (R,); ``breakpoints`` (R, K) holds K jump locations
    per row (may coincide with the center).  Returns ``(x, w)`` of shape
    (R, (K + 1) * n); a row's integral is ``(w * f(x)).sum(axis=1)``.
    """
    centers = np.asarray(centers, dtype=float).reshape(-1)
    R = centers.size
    if breakpoints is None:
        cuts = np.zeros((R, 1))
    else:
        bp = np.asarray(breakpoints, dtype=float).reshape(R, -1)
        cuts = np.concatenate([np.zeros((R, 1)), np.arctan((bp - centers[:, None]) / scale)], axis=1)
    cuts = np.sort(cuts, axis=1)
    edges = np.concatenate([np.full((R, 1), -HALF_PI), cuts, np.full((R, 1), HALF_PI)], axis=1)
    t, wt = _legendre(n)
    lo = edges[:, :-1, None]
    half = 0.5 * (edges[:, 1:, None] - lo)
    v = lo + half * (t + 1.0)
    c = np.cos(v)
    x = centers[:, None, None] + scale * np.tan(v)
    w = half * wt * scale / (c * c)
    return x.reshape(R, -1), w.reshape(R, -1)
