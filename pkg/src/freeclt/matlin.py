"""Dense complex matrix kernel and the geometry of Omega domains.

Matrices are plain ``numpy`` arrays of dtype ``complex128``.  The Omega
domain used throughout is

    Omega = {b invertible : ||b^-1|| < kappa, ||b|| ||b^-1|| < c}

with ``kappa = theta / (norm bound of the reference operator)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import InvalidParams, PreconditionFailed, Singular, ZeroParameter

__all__ = [
    "as_cmatrix",
    "op_norm",
    "inverse",
    "neumann_inverse_bound",
    "OmegaParams",
    "CertifiedConstants",
    "in_omega",
    "lambda_diag",
    "annulus_contains",
    "omega_path",
    "random_omega_point",
]

# relative guard band for strict inequalities at floating point boundaries
GUARD = 1e-12
SVD_MAX_DIM = 64
PIVOT_RTOL = 1e-13


def as_cmatrix(a) -> np.ndarray:
    """Coerce ``a`` to a finite square complex matrix (scalars become 1x1)."""
    arr = np.asarray(a, dtype=complex)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 1:
        raise ValueError(f"expected a non-empty square matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("matrix has non-finite entries")
    return arr


def _power_norm(a: np.ndarray, tol: float = 1e-12, max_iter: int = 10_000) -> float:
    # power iteration on a^* a, deterministic start vector
    m = a.shape[0]
    v = np.ones(m, dtype=complex) / math.sqrt(m)
    ah = a.conj().T
    lam = 0.0
    for _ in range(max_iter):
        w = ah @ (a @ v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        if abs(nw - lam) <= tol * nw:
            lam = nw
            break
        lam = nw
    return math.sqrt(lam)


def op_norm(a) -> float:
    """Largest singular value of ``a``."""
    a = np.asarray(a, dtype=complex)
    if a.ndim == 0:
        return float(abs(a))
    if a.shape[0] <= SVD_MAX_DIM:
        return float(np.linalg.norm(a, 2))
    return _power_norm(a)


def inverse(a) -> np.ndarray:
    """Inverse through LU with partial pivoting.

    Raises
    ------
    Singular
        If a pivot falls below ``1e-13 * op_norm(a)`` in modulus.
    """
    a = as_cmatrix(a)
    scale = op_norm(a)
    if scale == 0.0:
        raise Singular("zero matrix")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(a, check_finite=False)
    if np.min(np.abs(np.diag(lu))) < PIVOT_RTOL * scale:
        raise Singular("pivot below singularity threshold")
    return sla.lu_solve((lu, piv), np.eye(a.shape[0], dtype=complex), check_finite=False)


def neumann_inverse_bound(x, y, sigma_frac: float) -> float:
    """Norm bound ``||x^-1|| / (1 - sigma_frac)`` for the inverse of a perturbation.

    Valid whenever ``||x - y|| < sigma_frac / ||x^-1||``; the bound is checked
    against the actual inverse of ``y`` before returning.
    """
    if not 0.0 < sigma_frac < 1.0:
        raise PreconditionFailed("sigma_frac must lie in (0, 1)")
    x = as_cmatrix(x)
    y = as_cmatrix(y)
    xinv_norm = op_norm(inverse(x))
    if not op_norm(x - y) < sigma_frac / xinv_norm:
        raise PreconditionFailed("||x - y|| too large for the Neumann perturbation bound")
    bound = xinv_norm / (1.0 - sigma_frac)
    actual = op_norm(inverse(y))
    if actual > bound * (1.0 + GUARD):
        raise AssertionError(f"Neumann bound violated: {actual} > {bound}")
    return bound


@dataclass(frozen=True)
class OmegaParams:
    """Parameters of an Omega domain.

    ``kappa`` is normally ``theta / norm_bound`` (see :meth:`from_norm`).
    """

    theta: float = 0.2
    sigma: float = 0.9
    c: float = 2.0
    kappa: float = 0.1

    def __post_init__(self):
        if not 0.0 < self.theta < 1.0:
            raise InvalidParams(f"theta must lie in (0,1), got {self.theta}")
        if not 0.0 < self.sigma < 1.0:
            raise InvalidParams(f"sigma must lie in (0,1), got {self.sigma}")
        if not self.c > 1.0:
            raise InvalidParams(f"c must exceed 1, got {self.c}")
        if not self.kappa > 0.0:
            raise InvalidParams(f"kappa must be positive, got {self.kappa}")

    @classmethod
    def from_norm(cls, norm_bound: float, theta=0.2, sigma=0.9, c=2.0) -> "OmegaParams":
        if not norm_bound > 0.0:
            raise InvalidParams("norm bound must be positive")
        return cls(theta=theta, sigma=sigma, c=c, kappa=theta / norm_bound)

    def certification_holds(self, alpha_norm: float, eta_bound: float) -> bool:
        """``theta/(1-theta) < sigma * min(1/c, alpha_norm/eta_bound)``."""
        lhs = self.theta / (1.0 - self.theta)
        ratio = math.inf if eta_bound == 0.0 else alpha_norm / eta_bound
        return lhs < self.sigma * min(1.0 / self.c, ratio)


@dataclass(frozen=True)
class CertifiedConstants:
    gamma: float
    theta_star: float
    c_star: float

    @classmethod
    def from_params(cls, p: OmegaParams, gamma: float = 0.1, theta_star: float | None = None):
        if not 0.0 < gamma < (p.c - 1.0) / (p.c + 1.0):
            raise InvalidParams(f"gamma must lie in (0, (c-1)/(c+1)), got {gamma}")
        upper = (1.0 - gamma) * p.theta
        if theta_star is None:
            theta_star = 0.9 * upper
        if not 0.0 < theta_star < upper:
            raise InvalidParams(f"theta_star must lie in (0, {upper}), got {theta_star}")
        c_star = p.c - (1.0 + p.c) * gamma
        return cls(gamma=gamma, theta_star=theta_star, c_star=c_star)

    def holds(self, p: OmegaParams) -> bool:
        return 1.0 < self.c_star < p.c and (
            self.theta_star / (1.0 - self.theta_star) < p.sigma / self.c_star
        )


def in_omega(b, p: OmegaParams) -> bool:
    """Membership in Omega; strict inequalities with a relative guard band."""
    b = as_cmatrix(b)
    try:
        binv = inverse(b)
    except Singular:
        return False
    ninv = op_norm(binv)
    return ninv < p.kappa * (1.0 - GUARD) and op_norm(b) * ninv < p.c * (1.0 - GUARD)


def lambda_diag(lam: complex, mu: complex, m: int) -> np.ndarray:
    """``diag(lam, mu, ..., mu)`` of size ``m``."""
    if lam == 0 or mu == 0:
        raise ZeroParameter("lambda and mu must be non-zero")
    if m < 1:
        raise ValueError("m must be positive")
    out = np.full(m, complex(mu))
    out[0] = lam
    return np.diag(out)


def annulus_contains(lam: complex, mu: complex, p: OmegaParams) -> bool:
    """``max(1/kappa, |mu|/c) < |lam| < c |mu|``, requires ``|mu| > 1/kappa``."""
    if mu == 0:
        raise ZeroParameter("mu must be non-zero")
    if not abs(mu) > 1.0 / p.kappa:
        raise PreconditionFailed("|mu| must exceed 1/kappa")
    r = abs(lam)
    # same relative guard band as in_omega, so the implication holds in floating point
    return max(1.0 / p.kappa, abs(mu) / p.c) * (1.0 + GUARD) < r < p.c * abs(mu) * (1.0 - GUARD)


def _unitary_power(u: np.ndarray, t: float) -> np.ndarray:
    # complex Schur form of a normal matrix is diagonal up to roundoff
    tri, z = sla.schur(u, output="complex")
    phases = np.angle(np.diag(tri))
    phases = np.where(phases <= -math.pi, phases + 2 * math.pi, phases)
    return (z * np.exp(1j * t * phases)) @ z.conj().T


def _posdef_power(p: np.ndarray, t: float) -> np.ndarray:
    w, v = np.linalg.eigh(p)
    return (v * w**t) @ v.conj().T


def omega_path(b1, b2, t: float) -> np.ndarray:
    """Point ``U1^(1-t) P1^(1-t) U2^t P2^t`` on the polar-decomposition path."""
    b1 = as_cmatrix(b1)
    b2 = as_cmatrix(b2)
    inverse(b1)
    inverse(b2)
    if t == 0.0 or np.array_equal(b1, b2):
        # the polar formula only returns b at t in (0, 1) when b is normal
        return b1.copy()
    if t == 1.0:
        return b2.copy()
    u1, p1 = sla.polar(b1, side="right")
    u2, p2 = sla.polar(b2, side="right")
    s = 1.0 - t
    return _unitary_power(u1, s) @ _posdef_power(p1, s) @ _unitary_power(u2, t) @ _posdef_power(p2, t)


def random_unitary(m: int, rng: np.random.Generator) -> np.ndarray:
    """Haar unitary by QR of a complex Ginibre matrix with phase correction."""
    z = (rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))) / math.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_omega_point(m: int, kappa: float, c: float, rng: np.random.Generator,
                       max_radius_factor: float = 4.0) -> np.ndarray:
    """Random ``b = U diag(s) V*`` with singular values in ``(1/kappa, ...)``, cond < c.

    The smallest singular value is drawn in ``(1/kappa, max_radius_factor/kappa)``
    and the others within a factor ``c`` of it.
    """
    smin = (1.0 + (max_radius_factor - 1.0) * rng.random()) / kappa
    smin *= 1.0 + 1e-6
    ratio = 1.0 + (c - 1.0) * rng.random() * (1.0 - 1e-6)
    svals = smin * (1.0 + (ratio - 1.0) * rng.random(m))
    svals[0] = smin
    u = random_unitary(m, rng)
    v = random_unitary(m, rng)
    return (u * svals) @ v.conj().T
