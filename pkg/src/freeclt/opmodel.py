"""Operator-valued models over M_m(C).

A model is ``X = a0 (x) 1 + sum_k a_k (x) x^(k)`` where ``(x^(k))`` is a
:class:`~freeclt.freemoments.FreeFamilySpec`.  The conditional expectation is
``E = id (x) tau``.  Writing the family through its free base,
``X = a0 + sum_r A_r y_r`` with ``A_r = sum_k C[k, r] a_k``, which is the
form used by the series engine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError, DimensionMismatch, Divergent, OrderExceeded, Singular
from .freemoments import DEFAULT_ORDER, FreeFamilySpec, clt_cumulants, norm_upper_estimate
from .jsonio import matrix_from_json, matrix_to_json
from .matlin import as_cmatrix, inverse, op_norm

__all__ = [
    "CovarianceMap",
    "OperatorModel",
    "SumModel",
    "apply_eta",
    "eta_bound",
    "alpha",
    "model_norm_estimate",
    "cauchy_series",
    "Membership",
    "resolvent_member",
]

# moment order used for the norm estimates of the base variables
NORM_ORDER = 16
NORM_SAFETY = 1.1
# relative slack of the geometric decay check
DECAY_SLACK = 1e-9


def _stack(coeffs: Sequence, m: int | None = None) -> np.ndarray:
    arrs = [as_cmatrix(a) for a in coeffs]
    if not arrs:
        if m is None:
            raise DimensionMismatch("cannot infer dimension from an empty coefficient list")
        return np.zeros((0, m, m), dtype=complex)
    dims = {a.shape[0] for a in arrs}
    if len(dims) != 1 or (m is not None and dims != {m}):
        raise DimensionMismatch(f"coefficient dimensions {sorted(dims)} disagree")
    return np.stack(arrs)


@dataclass(frozen=True, eq=False)
class CovarianceMap:
    """``eta(b) = sum_{k,l} a_k b a_l sigma_{k,l}``."""

    coeffs: np.ndarray
    Sigma: np.ndarray

    def __post_init__(self):
        co = _stack(self.coeffs) if not isinstance(self.coeffs, np.ndarray) or self.coeffs.ndim != 3 \
            else self.coeffs.astype(complex)
        sig = np.atleast_2d(np.asarray(self.Sigma, dtype=float))
        if sig.shape != (co.shape[0], co.shape[0]):
            raise DimensionMismatch(f"Sigma shape {sig.shape} does not match {co.shape[0]} coefficients")
        object.__setattr__(self, "coeffs", co)
        object.__setattr__(self, "Sigma", sig)

    @property
    def m(self) -> int:
        return self.coeffs.shape[1]

    def factorization(self):
        """``(w, B)`` with ``eta(b) = sum_j w_j B_j b B_j`` from ``Sigma = V diag(w) V^T``."""
        w, v = np.linalg.eigh(self.Sigma)
        return w, np.einsum("kj,kab->jab", v, self.coeffs)


def apply_eta(eta: CovarianceMap, b) -> np.ndarray:
    b = as_cmatrix(b)
    if b.shape[0] != eta.m:
        raise DimensionMismatch(f"b has size {b.shape[0]}, map acts on {eta.m}x{eta.m}")
    # sum_l sigma_{k,l} a_l, then sum_k a_k b (.)
    right = np.einsum("kl,lab->kab", eta.Sigma, eta.coeffs)
    return np.einsum("kab,bc,kcd->ad", eta.coeffs, b, right)


def eta_bound(eta: CovarianceMap) -> float:
    """``M = sum_{k,l} ||a_k|| ||a_l|| |sigma_{k,l}|``."""
    norms = np.array([op_norm(a) for a in eta.coeffs])
    return float(norms @ np.abs(eta.Sigma) @ norms)


@dataclass(frozen=True, eq=False)
class OperatorModel:
    a0: np.ndarray
    coeffs: np.ndarray
    family: FreeFamilySpec

    def __post_init__(self):
        a0 = as_cmatrix(self.a0)
        co = _stack(list(self.coeffs), a0.shape[0])
        if co.shape[0] != self.family.d:
            raise DimensionMismatch(f"{co.shape[0]} coefficients for a family of {self.family.d} variables")
        object.__setattr__(self, "a0", a0)
        object.__setattr__(self, "coeffs", co)

    @classmethod
    def centered(cls, coeffs: Sequence, family: FreeFamilySpec) -> "OperatorModel":
        m = as_cmatrix(coeffs[0]).shape[0]
        return cls(np.zeros((m, m), dtype=complex), coeffs, family)

    @property
    def m(self) -> int:
        return self.a0.shape[0]

    @property
    def d(self) -> int:
        return self.coeffs.shape[0]

    @property
    def n(self) -> int:
        return 1

    @property
    def is_selfadjoint(self) -> bool:
        herm = lambda a: np.allclose(a, a.conj().T, rtol=0, atol=1e-14 * max(1.0, op_norm(a)))
        return herm(self.a0) and all(herm(a) for a in self.coeffs)

    def covariance_map(self) -> CovarianceMap:
        return CovarianceMap(self.coeffs, self.family.Sigma)

    def base_coefficients(self) -> np.ndarray:
        """``A_r = sum_k C[k, r] a_k`` for each free base variable."""
        mix = np.asarray(self.family.mixing, dtype=float)
        return np.einsum("kr,kab->rab", mix, self.coeffs)

    def summed(self, n: int) -> "SumModel":
        return SumModel(self, n)

    def to_json(self) -> dict:
        return {"m": self.m, "a0": matrix_to_json(self.a0),
                "coeffs": [matrix_to_json(a) for a in self.coeffs],
                "family": self.family.to_json()}

    @classmethod
    def from_json(cls, obj: dict) -> "OperatorModel":
        unknown = set(obj) - {"m", "a0", "coeffs", "family"}
        if unknown:
            raise ConfigError(f"unknown model keys: {sorted(unknown)}")
        coeffs = [matrix_from_json(a) for a in obj["coeffs"]]
        m = int(obj.get("m", coeffs[0].shape[0] if coeffs else 1))
        a0 = matrix_from_json(obj["a0"]) if "a0" in obj else np.zeros((m, m), dtype=complex)
        if a0.shape[0] != m or any(a.shape[0] != m for a in coeffs):
            raise ConfigError(f"matrix sizes disagree with m = {m}")
        return cls(a0, coeffs, FreeFamilySpec.from_json(obj["family"]))


@dataclass(frozen=True, eq=False)
class SumModel:
    """``S_n = n^{-1/2} sum_i X_i`` for free copies ``X_i`` of the centered part of ``base``.

    The constant ``a0`` is carried over unscaled.
    """

    base: OperatorModel
    n: int
    family: FreeFamilySpec = field(init=False)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be a positive integer")
        object.__setattr__(self, "family", clt_cumulants(self.base.family, self.n))

    @property
    def a0(self):
        return self.base.a0

    @property
    def coeffs(self):
        return self.base.coeffs

    @property
    def m(self):
        return self.base.m

    @property
    def d(self):
        return self.base.d

    def covariance_map(self) -> CovarianceMap:
        return self.base.covariance_map()

    def base_coefficients(self) -> np.ndarray:
        return self.base.base_coefficients()


Model = OperatorModel | SumModel


def alpha(model: Model) -> np.ndarray:
    """``E[X^* X] = sum_{k,l} a_k^* a_l sigma_{k,l} + a0^* a0``."""
    co = model.coeffs
    sig = model.family.Sigma
    right = np.einsum("kl,lab->kab", sig, co)
    out = np.einsum("kba,kbc->ac", co.conj(), right)
    return out + model.a0.conj().T @ model.a0


def _base_norms(family: FreeFamilySpec) -> np.ndarray:
    order = min(NORM_ORDER, family.order)
    out = []
    for j in range(family.n_base):
        mom = family.base_moments(j, order)
        out.append(norm_upper_estimate(mom, NORM_SAFETY))
    return np.array(out)


def model_norm_estimate(model: Model) -> float:
    """Estimate of ``||X||``: ``||a0|| + sum_r ||A_r|| est(y_r)`` (triangle inequality)."""
    big_a = model.base_coefficients()
    norms = np.array([op_norm(a) for a in big_a])
    return op_norm(model.a0) + float(norms @ _base_norms(model.family))


def _components(model: Model, order: int):
    """Matrices and scaled cumulant lists of the free components, ``a0`` included."""
    big_a = model.base_coefficients()
    kaps = model.family.base_cumulants(order)
    comps = []
    for a, kap in zip(big_a, kaps):
        if op_norm(a) == 0.0:
            continue
        comps.append((a, np.array([float(k) for k in kap])))
    if op_norm(model.a0) > 0.0:
        kap = np.zeros(order)
        kap[0] = 1.0
        comps.append((model.a0, kap))
    return comps


def _required_order(cnorm: float, q: float, tol: float) -> int:
    # smallest J with ||c|| q^(J+1) / (1 - q) < tol
    if cnorm == 0.0 or q == 0.0:
        return 0
    ratio = tol * (1.0 - q) / cnorm
    if ratio >= 1.0:
        return 0
    return max(0, math.floor(math.log(ratio) / math.log(q)))


def cauchy_series(model: Model, b, tol: float = 1e-12, Jmax: int = DEFAULT_ORDER):
    """Matrix-valued Cauchy transform ``E[(b - X)^-1]`` by its Neumann series.

    With ``c = b^-1`` the degree-j term ``F_j = E[(c X)^j c]`` is built from
    lower-degree terms by splitting off the block of the noncrossing partition
    that contains the first factor: for a component ``A_r y_r``,

        F_j = sum_r sum_s kappa_s(y_r) sum_{g_1+...+g_s = j-s} c A_r F_{g_1} A_r F_{g_2} ... A_r F_{g_s}.

    Parameters
    ----------
    model : OperatorModel or SumModel
    b : array_like
        Invertible ``m x m`` matrix.
    tol : float
        Target for the geometric tail bound.
    Jmax : int
        Largest admissible truncation degree.

    Returns
    -------
    G : ndarray
        Truncated series ``sum_{j <= J} F_j``.
    tail : float
        ``||c|| q^(J+1) / (1 - q)`` with ``q = ||c|| * model_norm_estimate(model)``.

    Raises
    ------
    Divergent
        ``q >= 1``, or some term exceeds its geometric envelope ``||c|| q^j``.
    OrderExceeded
        The required degree exceeds ``Jmax`` or the available moment data.
    """
    b = as_cmatrix(b)
    if b.shape[0] != model.m:
        raise DimensionMismatch(f"b has size {b.shape[0]}, model has m = {model.m}")
    c = inverse(b)
    cnorm = op_norm(c)
    q = cnorm * model_norm_estimate(model)
    if not q < 1.0:
        raise Divergent(f"q = {q:.6g} >= 1, series not certified")
    J = _required_order(cnorm, q, tol)
    if J > Jmax:
        raise OrderExceeded(f"tail bound needs degree {J} > Jmax = {Jmax}")
    tail = cnorm * q ** (J + 1) / (1.0 - q)
    if J == 0:
        return c.copy(), tail
    comps = _components(model, J)
    m = model.m
    eye = np.eye(m, dtype=complex)
    F = [c]
    # P[r][t][l] = sum over g_1+..+g_t = l of (A_r F_g1)...(A_r F_gt)
    smax = []
    for a, kap in comps:
        nz = np.nonzero(kap)[0]
        smax.append(int(nz[-1]) + 1 if nz.size else 0)
    P = [[{0: eye}] + [dict() for _ in range(s)] for s in smax]
    AF = [[] for _ in comps]  # AF[r][g] = A_r F_g
    for j in range(1, J + 1):
        for r, (a, kap) in enumerate(comps):
            AF[r].append(a @ F[j - 1])
            for t in range(1, min(smax[r], j) + 1):
                ell = j - t
                # P_t(ell) = sum_g (A_r F_g) P_{t-1}(ell - g), g = 0..ell
                acc = np.zeros((m, m), dtype=complex)
                prev = P[r][t - 1]
                for g in range(ell + 1):
                    rest = prev.get(ell - g)
                    if rest is not None:
                        acc += AF[r][g] @ rest
                P[r][t][ell] = acc
        total = np.zeros((m, m), dtype=complex)
        for r, (a, kap) in enumerate(comps):
            for s in range(1, min(smax[r], j) + 1):
                if kap[s - 1] != 0.0:
                    total += kap[s - 1] * P[r][s][j - s]
        Fj = c @ total
        envelope = cnorm * q**j
        if op_norm(Fj) > envelope * (1.0 + DECAY_SLACK) + 1e-300:
            raise Divergent(f"term of degree {j} exceeds its geometric envelope; norm estimate too small")
        F.append(Fj)
    G = np.sum(F, axis=0)
    return G, tail


@dataclass(frozen=True)
class Membership:
    """``status`` is True (certified member) or None (undecided)."""

    status: bool | None
    certificate: str


def resolvent_member(model: Model, b) -> Membership:
    """Sufficient test ``||b^-1|| < 1 / ||X||`` for ``b - X`` to be invertible."""
    try:
        c = inverse(b)
    except (Singular, ValueError):
        return Membership(None, "unknown")
    est = model_norm_estimate(model)
    if op_norm(c) * est < 1.0:
        return Membership(True, "norm")
    return Membership(None, "unknown")
