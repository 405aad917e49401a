"""Fixed-point solver for operator-valued semicircular Cauchy transforms.

For a semicircular element ``s`` with covariance map ``eta`` and shift
``a0``, ``w = G(b) = E[(b - a0 - s)^-1]`` solves ``(b - a0) w = 1 + eta(w) w``.
On the certified domain the map ``w -> ((b - a0) - eta(w))^-1`` sends the
ball ``||w|| < theta/(1-theta)/||s||`` strictly into itself and plain
iteration converges to the unique fixed point.  Off that domain (points near
the real axis with positive imaginary part) the averaged map
``w -> (w + F(w)) / 2`` is iterated instead and the result is flagged as
uncertified.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .errors import NoConvergence, OnSupport, PreconditionFailed, Singular
from .matlin import OmegaParams, as_cmatrix, in_omega, op_norm, random_unitary
from .opmodel import CovarianceMap, eta_bound

__all__ = [
    "SemicircularSpec",
    "SolveReport",
    "solve_cauchy",
    "solve_cauchy_batch",
    "certify_domain",
    "scalar_semicircle_cauchy",
    "uniqueness_probe",
]

DEFAULT_TOL = 1e-12
DEFAULT_MAX_ITER = 10_000


@dataclass(frozen=True, eq=False)
class SemicircularSpec:
    a0: np.ndarray
    eta: CovarianceMap

    def __post_init__(self):
        a0 = as_cmatrix(self.a0)
        if a0.shape[0] != self.eta.m:
            raise ValueError(f"shift has size {a0.shape[0]}, covariance map acts on {self.eta.m}")
        object.__setattr__(self, "a0", a0)

    @classmethod
    def from_model(cls, model) -> "SemicircularSpec":
        """Semicircular limit of an operator model (same ``a0``, same covariance)."""
        return cls(model.a0, model.covariance_map())

    @classmethod
    def scalar(cls, variance: float = 1.0) -> "SemicircularSpec":
        return cls(np.zeros((1, 1)), CovarianceMap(np.ones((1, 1, 1)), [[variance]]))

    @property
    def m(self) -> int:
        return self.a0.shape[0]

    def norm_bound(self) -> float:
        """Rigorous ``||s|| <= 2 sum_j sqrt(w_j) ||B_j||`` from ``Sigma = V diag(w) V^T``."""
        w, big_b = self.eta.factorization()
        w = np.clip(w, 0.0, None)
        return 2.0 * float(sum(math.sqrt(wj) * op_norm(bj) for wj, bj in zip(w, big_b)))

    def alpha(self) -> np.ndarray:
        """``E[s^* s] = sum_{k,l} a_k^* a_l sigma_{k,l}``."""
        co = self.eta.coeffs
        right = np.einsum("kl,lab->kab", self.eta.Sigma, co)
        return np.einsum("kba,kbc->ac", co.conj(), right)

    def alpha_norm(self) -> float:
        return op_norm(self.alpha())

    def default_params(self, theta=0.2, sigma=0.9, c=2.0) -> OmegaParams:
        nb = self.norm_bound()
        return OmegaParams.from_norm(nb if nb > 0 else 1.0, theta, sigma, c)


@dataclass(frozen=True, eq=False)
class SolveReport:
    w: np.ndarray
    iterations: int
    residual: float
    certified: bool
    domain_note: str

    def to_json(self) -> dict:
        from .jsonio import matrix_to_json
        return {"w": matrix_to_json(self.w), "iterations": self.iterations,
                "residual": self.residual, "certified": self.certified,
                "domain_note": self.domain_note}


def certify_domain(spec: SemicircularSpec, b, p: OmegaParams, alpha_norm: float) -> bool:
    """Certification inequality for ``(p, alpha_norm)`` and ``b - a0`` in Omega."""
    if not alpha_norm > 0.0:
        raise PreconditionFailed("alpha_norm must be positive")
    if not p.certification_holds(alpha_norm, eta_bound(spec.eta)):
        return False
    return in_omega(as_cmatrix(b) - spec.a0, p)


def _upper_half(db) -> bool:
    # imaginary part positive semidefinite and not zero
    imag = (db - db.conj().T) / 2j
    ev = np.linalg.eigvalsh(imag)
    return bool(ev.min() >= -1e-14 * max(1.0, abs(ev).max()) and ev.max() > 0)


def _note(certified: bool, b, a0) -> str:
    if certified:
        return "certified: unique fixed point in Omega'"
    if _upper_half(as_cmatrix(b) - a0):
        return "uncertified: imaginary part positive semidefinite, averaged iteration"
    return "uncertified: outside Omega"


def _certify_default(spec, b, p, alpha_norm):
    p = spec.default_params() if p is None else p
    an = spec.alpha_norm() if alpha_norm is None else alpha_norm
    if an <= 0.0:
        return False
    return certify_domain(spec, b, p, an)


def _solve_scalar(spec, b, tol, max_iter, damped, w0):
    e = complex(np.einsum("k,kl,l->", spec.eta.coeffs[:, 0, 0], spec.eta.Sigma, spec.eta.coeffs[:, 0, 0]))
    z = complex(b[0, 0] - spec.a0[0, 0])
    if z == 0:
        raise Singular("b - a0 is singular")
    w = 1.0 / z if w0 is None else complex(w0[0, 0])
    for it in range(1, max_iter + 1):
        den = z - e * w
        if den == 0:
            raise Singular("b - a0 - eta(w) is singular")
        fw = 1.0 / den
        new = 0.5 * (w + fw) if damped else fw
        step = abs(new - w)
        w = new
        res = abs(z * w - 1.0 - e * w * w)
        if step < tol * max(1.0, abs(w)) and res < 10 * tol:
            return np.array([[w]]), it, res
    raise NoConvergence(f"no convergence after {max_iter} iterations (residual {res:.3g})")


def solve_cauchy(spec: SemicircularSpec, b, tol: float = DEFAULT_TOL,
                 max_iter: int = DEFAULT_MAX_ITER, p: OmegaParams | None = None,
                 alpha_norm: float | None = None, w0=None) -> SolveReport:
    """Operator-valued Cauchy transform ``G_s(b)`` by fixed-point iteration.

    Parameters
    ----------
    spec : SemicircularSpec
    b : array_like
        Point with ``b - a0`` invertible.
    tol, max_iter : float, int
        Stop once ``||w_{k+1} - w_k|| < tol max(1, ||w_k||)`` and the residual
        of ``(b - a0) w = 1 + eta(w) w`` is below ``10 tol``.
    p, alpha_norm : optional
        Domain parameters used for the certificate; default to
        ``spec.default_params()`` and ``||E[s^* s]||``.
    w0 : array_like, optional
        Starting point; defaults to ``(b - a0)^-1``.
    """
    b = as_cmatrix(b)
    certified = _certify_default(spec, b, p, alpha_norm)
    damped = (not certified) and _upper_half(b - spec.a0)
    if spec.m == 1:
        w, it, res = _solve_scalar(spec, b, tol, max_iter, damped, w0 if w0 is None else as_cmatrix(w0))
    else:
        ws, its, ress = _iterate(spec, b[None], tol, max_iter, np.array([damped]),
                                 None if w0 is None else as_cmatrix(w0)[None])
        w, it, res = ws[0], int(its[0]), float(ress[0])
    return SolveReport(w, it, res, certified, _note(certified, b, spec.a0))


def _residuals(spec, db, w):
    eye = np.eye(spec.m)
    etaw = _eta_batch(spec, w)
    return np.linalg.norm(db @ w - eye - etaw @ w, 2, axis=(1, 2))


def _eta_batch(spec, w):
    right = np.einsum("kl,lab->kab", spec.eta.Sigma, spec.eta.coeffs)
    return np.einsum("kab,Kbc,kcd->Kad", spec.eta.coeffs, w, right, optimize=True)


def _iterate(spec, bs, tol, max_iter, damped, w0=None):
    db = bs - spec.a0[None]
    try:
        w = np.linalg.inv(db) if w0 is None else np.array(w0, dtype=complex)
    except np.linalg.LinAlgError as exc:
        raise Singular("b - a0 is singular") from exc
    K = bs.shape[0]
    done = np.zeros(K, dtype=bool)
    iters = np.zeros(K, dtype=int)
    res = np.full(K, np.inf)
    half = np.where(damped, 0.5, 0.0)[:, None, None]
    for it in range(1, max_iter + 1):
        act = ~done
        wa = w[act]
        try:
            fw = np.linalg.inv(db[act] - _eta_batch(spec, wa))
        except np.linalg.LinAlgError as exc:
            raise Singular("b - a0 - eta(w) is singular") from exc
        h = half[act]
        new = h * wa + (1.0 - h) * fw
        if not np.all(np.isfinite(new)):
            raise Singular("iteration produced non-finite values")
        step = np.linalg.norm(new - wa, 2, axis=(1, 2))
        scale = np.maximum(1.0, np.linalg.norm(new, 2, axis=(1, 2)))
        w[act] = new
        r = _residuals(spec, db[act], new)
        ok = (step < tol * scale) & (r < 10 * tol)
        idx = np.nonzero(act)[0]
        res[idx] = r
        iters[idx[ok]] = it
        done[idx[ok]] = True
        if done.all():
            return w, iters, res
    raise NoConvergence(f"{int((~done).sum())} of {K} points did not converge in {max_iter} iterations")


def solve_cauchy_batch(spec: SemicircularSpec, bs, tol: float = DEFAULT_TOL,
                       max_iter: int = DEFAULT_MAX_ITER, p: OmegaParams | None = None,
                       alpha_norm: float | None = None):
    """Vectorized :func:`solve_cauchy` over a stack ``bs`` of shape ``(K, m, m)``.

    Returns ``(w, iterations, residuals, certified)`` arrays.
    """
    bs = np.asarray(bs, dtype=complex)
    if bs.ndim == 1:
        bs = bs[:, None, None]
    cert = np.array([_certify_default(spec, b, p, alpha_norm) for b in bs], dtype=bool)
    damped = np.array([not c and _upper_half(b - spec.a0) for b, c in zip(bs, cert)], dtype=bool)
    w, its, res = _iterate(spec, bs, tol, max_iter, damped)
    return w, its, res, cert


def scalar_semicircle_cauchy(variance: float, z: complex) -> complex:
    """Closed form ``(z - sqrt(z^2 - 4 v)) / (2 v)`` on the branch with ``G ~ 1/z``."""
    if not variance > 0:
        raise ValueError("variance must be positive")
    z = complex(z)
    edge = 2.0 * math.sqrt(variance)
    if abs(z.imag) <= 1e-15 * max(1.0, abs(z)) and abs(z.real) <= edge * (1 + 1e-15):
        raise OnSupport(f"z = {z} lies on the support [-{edge}, {edge}]")
    # product of principal roots: analytic off the cut, ~ z at infinity
    root = cmath.sqrt(z - edge) * cmath.sqrt(z + edge)
    # the subtraction cancels for large |z|; use 2 / (z + root) instead
    return 2.0 / (z + root)


def uniqueness_probe(spec: SemicircularSpec, b, starts: int = 20, seed=0,
                     tol: float = DEFAULT_TOL, p: OmegaParams | None = None,
                     alpha_norm: float | None = None) -> float:
    """Largest pairwise distance between fixed points reached from random starts.

    Starts are drawn uniformly in direction and radius inside the ball
    ``||w|| < theta/(1-theta) / ||s||``.  Uncertified inputs are run as well
    but carry no uniqueness guarantee.
    """
    b = as_cmatrix(b)
    p = spec.default_params() if p is None else p
    nb = spec.norm_bound()
    radius = p.theta / (1.0 - p.theta) / (nb if nb > 0 else 1.0)
    rng = np.random.default_rng(seed)
    m = spec.m
    sols = []
    for _ in range(starts):
        g = random_unitary(m, rng) * (0.05 + 0.95 * rng.random(m))
        g = g @ random_unitary(m, rng)
        w0 = g * (radius * rng.random() * (1 - 1e-9) / op_norm(g))
        rep = solve_cauchy(spec, b, tol=tol, p=p, alpha_norm=alpha_norm, w0=w0)
        sols.append(rep.w)
    spread = 0.0
    for i in range(len(sols)):
        for j in range(i + 1, len(sols)):
            spread = max(spread, op_norm(sols[i] - sols[j]))
    return spread
