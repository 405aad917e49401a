"""Densities and distribution functions from Cauchy transforms.

Densities are recovered by Stieltjes inversion ``rho(x) = -Im G(x + i eps) / pi``
on a short schedule of ``eps`` values followed by linear extrapolation to
``eps = 0``.  Near-axis evaluation lies outside the certified domain of the
fixed-point solver; evaluators built here run it in its averaged mode.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .errors import FreeCLTError, NegativeMass, UnknownKind
from .freemoments import FreeFamilySpec
from .linpoly import LinearPencil
from .opmodel import CovarianceMap
from .scsolver import SemicircularSpec, solve_cauchy_batch

__all__ = [
    "DEFAULT_EPS",
    "GridDensity",
    "Cdf",
    "density_from_cauchy",
    "cdf_from_density",
    "kolmogorov",
    "oracle_density",
    "oracle_cdf",
    "semicircle_evaluator",
    "pencil_evaluator",
    "dr_plus_mesh",
    "sup_on_dr_plus",
    "lipschitz_estimate",
]

DEFAULT_EPS = (1e-2, 5e-3, 2.5e-3)
NEAR_AXIS_MAX_ITER = 200_000


@dataclass(frozen=True, eq=False)
class GridDensity:
    x: np.ndarray
    values: np.ndarray
    eps_schedule: tuple
    failures: list = field(default_factory=list)


@dataclass(frozen=True, eq=False)
class Cdf:
    x: np.ndarray
    values: np.ndarray

    def __call__(self, t):
        return np.interp(t, self.x, self.values, left=0.0, right=1.0)


def _evaluate(evaluator: Callable, z: np.ndarray):
    """Vectorized call with a per-point fallback that records failures."""
    try:
        out = np.asarray(evaluator(z), dtype=complex)
        if out.shape == z.shape and np.all(np.isfinite(out)):
            return out, []
    except (FreeCLTError, ValueError, ArithmeticError, np.linalg.LinAlgError):
        pass
    out = np.full(z.shape, complex(np.nan, np.nan))
    failures = []
    for k, zk in enumerate(z):
        try:
            out[k] = complex(np.asarray(evaluator(np.array([zk]))).ravel()[0])
        except (FreeCLTError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
            failures.append((float(zk.real), f"{type(exc).__name__}: {exc}"))
    return out, failures


def density_from_cauchy(evaluator: Callable, grid, eps_schedule: Sequence[float] = DEFAULT_EPS) -> GridDensity:
    """Stieltjes inversion with linear extrapolation in ``eps``.

    Parameters
    ----------
    evaluator : callable
        Maps an array of points in the upper half plane to ``G`` values.
    grid : array_like
        Ascending real abscissae.
    eps_schedule : sequence of float
        Distances to the real axis.  With several values the density is the
        intercept of the least-squares line through ``(eps, -Im G / pi)``.

    Failed points are reported in ``failures`` and carry NaN.
    """
    x = np.asarray(grid, dtype=float)
    eps = tuple(float(e) for e in eps_schedule)
    if not eps or min(eps) <= 0:
        raise ValueError("eps schedule must contain positive values")
    samples = []
    failures = []
    for e in eps:
        g, fail = _evaluate(evaluator, x + 1j * e)
        samples.append(-g.imag / math.pi)
        failures += [(xf, f"eps={e:g}: {msg}") for xf, msg in fail]
    samples = np.array(samples)
    if len(eps) == 1:
        dens = samples[0]
    else:
        # intercept of the least-squares fit rho(eps) = rho0 + slope * eps
        design = np.vstack([np.ones(len(eps)), np.array(eps)]).T
        coef = np.linalg.lstsq(design, samples, rcond=None)[0]
        dens = coef[0]
    dens = np.where(np.isnan(dens), np.nan, np.maximum(dens, 0.0))
    return GridDensity(x, dens, eps, failures)


def cdf_from_density(d: GridDensity) -> Cdf:
    """Trapezoid integral renormalized to total mass 1."""
    vals = np.nan_to_num(np.maximum(d.values, 0.0))
    cum = cumulative_trapezoid(vals, d.x, initial=0.0)
    mass = cum[-1] if cum.size else 0.0
    if not mass >= 0.5:
        raise NegativeMass(f"density integrates to {mass:.3g}")
    return Cdf(d.x.copy(), np.clip(np.maximum.accumulate(cum / mass), 0.0, 1.0))


def kolmogorov(F1: Cdf, F2: Cdf) -> float:
    """``sup_x |F1(x) - F2(x)|`` over the merged grid (linear interpolation)."""
    x = np.union1d(F1.x, F2.x)
    return float(np.max(np.abs(F1(x) - F2(x))))


def oracle_density(kind: str, x, variance: float = 1.0, atoms=(2.0, -0.5), weights=(0.2, 0.8)):
    """Closed-form densities.

    ``semicircle``: ``sqrt(4 v - x^2) / (2 pi v)``.
    ``sc_square``: law of ``s^2`` for a standard semicircular ``s``,
    ``sqrt(4 - x) / (2 pi sqrt(x))`` on ``(0, 4]``.
    ``two_atom``: purely atomic; 0 off the atoms and ``inf`` on them.
    """
    x = np.asarray(x, dtype=float)
    if kind == "semicircle":
        r = 4.0 * variance - x**2
        return np.where(r > 0, np.sqrt(np.clip(r, 0, None)) / (2 * math.pi * variance), 0.0)
    if kind == "sc_square":
        inside = (x > 0) & (x <= 4)
        safe = np.where(inside, x, 1.0)
        return np.where(inside, np.sqrt(np.clip(4 - safe, 0, None)) / (2 * math.pi * np.sqrt(safe)), 0.0)
    if kind == "two_atom":
        on = np.zeros(x.shape, dtype=bool)
        for a in atoms:
            on |= x == a
        return np.where(on, np.inf, 0.0)
    raise UnknownKind(f"unknown oracle density {kind!r}")


def oracle_cdf(kind: str, x, variance: float = 1.0) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if kind == "semicircle":
        t = np.clip(x / math.sqrt(variance), -2, 2)
        return 0.5 + t * np.sqrt(4 - t**2) / (4 * math.pi) + np.arcsin(t / 2) / math.pi
    if kind == "sc_square":
        r = np.sqrt(np.clip(x, 0, 4))
        return np.where(x <= 0, 0.0, 2 * oracle_cdf("semicircle", r) - 1)
    raise UnknownKind(f"no closed-form distribution function for {kind!r}")


def semicircle_evaluator(variance: float = 1.0, tol: float = 1e-12,
                         max_iter: int = NEAR_AXIS_MAX_ITER) -> Callable:
    spec = SemicircularSpec.scalar(variance)

    def evaluate(z):
        w, _, _, _ = solve_cauchy_batch(spec, np.asarray(z, dtype=complex), tol=tol, max_iter=max_iter)
        return w[:, 0, 0]
    return evaluate


def pencil_evaluator(pencil: LinearPencil, family: FreeFamilySpec, tol: float = 1e-12,
                     max_iter: int = NEAR_AXIS_MAX_ITER) -> Callable:
    """``z -> pi(G_s(Lambda(z, 1)))`` for the semicircular family with the same covariance."""
    spec = SemicircularSpec(pencil.a0, CovarianceMap(pencil.coeffs, family.Sigma))
    m = pencil.m

    def evaluate(z):
        z = np.asarray(z, dtype=complex).ravel()
        bs = np.zeros((z.size, m, m), dtype=complex)
        bs[:, 0, 0] = z
        for j in range(1, m):
            bs[:, j, j] = 1.0
        w, _, _, _ = solve_cauchy_batch(spec, bs, tol=tol, max_iter=max_iter)
        return w[:, 0, 0]
    return evaluate


def dr_plus_mesh(R: float, radii=(1.05, 1.5, 2.0, 4.0), angles: int = 16) -> np.ndarray:
    """Polar mesh of ``D_R^+ = {Im z > 0, |z| > R}``."""
    th = math.pi * (np.arange(angles) + 0.5) / angles
    return np.array([f * R * np.exp(1j * t) for f in radii for t in th])


def sup_on_dr_plus(G1: Callable, G2: Callable, R: float, **mesh) -> float:
    """Grid maximum of ``|G1 - G2|`` over :func:`dr_plus_mesh`."""
    z = dr_plus_mesh(R, **mesh)
    return float(np.max(np.abs(np.asarray(G1(z)) - np.asarray(G2(z)))))


def lipschitz_estimate(F: Cdf) -> float:
    """Largest difference quotient of ``F`` on its grid (empirical modulus of continuity)."""
    return float(np.max(np.diff(F.values) / np.diff(F.x)))
