"""Scalar free probability combinatorics.

Free moment/cumulant conversion, joint moments of families built from freely
independent base variables, and the cumulant rescaling of normalized free
sums.  Sequences are 1-indexed in the mathematical sense: ``values[0]`` is the
first moment (or cumulant); the zeroth moment 1 is implicit.

All routines work either in double precision or, when fed ``Fraction``
values, in exact rational arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np
import scipy.linalg as sla

from .errors import ConfigError, OrderExceeded

__all__ = [
    "MomentSequence",
    "CumulantSequence",
    "BaseLaw",
    "semicircular",
    "bernoulli",
    "two_atom",
    "custom_moments",
    "FreeFamilySpec",
    "cumulants_from_moments",
    "moments_from_cumulants",
    "clt_cumulants",
    "joint_moment",
    "norm_upper_estimate",
    "DEFAULT_ORDER",
]

DEFAULT_ORDER = 16


@dataclass(frozen=True)
class MomentSequence:
    values: tuple

    @property
    def order(self) -> int:
        return len(self.values)

    def __getitem__(self, k: int):
        """``m[k]`` is the k-th moment, ``m[0] == 1``."""
        if k == 0:
            return 1
        return self.values[k - 1]


@dataclass(frozen=True)
class CumulantSequence:
    values: tuple

    @property
    def order(self) -> int:
        return len(self.values)

    def __getitem__(self, k: int):
        return self.values[k - 1]


def _zero_like(x):
    return Fraction(0) if isinstance(x, Fraction) else 0.0


def _power_coefficient_table(moms: list, n: int, zero) -> list:
    # pw[s][k] = [x^k] M(x)^s for 0 <= s, k <= n, using moms[0..n]
    pw = [[zero] * (n + 1) for _ in range(n + 1)]
    pw[0][0] = zero + 1
    for s in range(1, n + 1):
        prev = pw[s - 1]
        cur = pw[s]
        for k in range(n + 1):
            acc = zero
            for i in range(k + 1):
                if moms[i] and prev[k - i]:
                    acc += moms[i] * prev[k - i]
            cur[k] = acc
    return pw


def moments_from_cumulants(k: CumulantSequence | Sequence) -> MomentSequence:
    """Moments from free cumulants via ``M(x) = 1 + sum_s kappa_s x^s M(x)^s``."""
    kap = list(k.values if isinstance(k, CumulantSequence) else k)
    order = len(kap)
    if order == 0:
        return MomentSequence(())
    zero = _zero_like(kap[0])
    moms = [zero + 1] + [zero] * order
    # pw[s][j] = [x^j] M^s; rebuilt column by column as moments become known
    pw = [[zero] * (order + 1) for _ in range(order + 1)]
    for s in range(order + 1):
        pw[s][0] = zero + 1
    for n in range(1, order + 1):
        # coefficients of degree n - s <= n - 1 only need moments up to n - 1
        total = zero
        for s in range(1, n + 1):
            if kap[s - 1]:
                total += kap[s - 1] * pw[s][n - s]
        moms[n] = total
        # extend every power to degree n now that m_n is known
        for s in range(1, order + 1):
            acc = zero
            prev = pw[s - 1]
            for i in range(n + 1):
                if moms[i] and prev[n - i]:
                    acc += moms[i] * prev[n - i]
            pw[s][n] = acc
    return MomentSequence(tuple(moms[1:]))


def cumulants_from_moments(m: MomentSequence | Sequence) -> CumulantSequence:
    """Inverse of :func:`moments_from_cumulants`."""
    vals = list(m.values if isinstance(m, MomentSequence) else m)
    order = len(vals)
    if order == 0:
        return CumulantSequence(())
    zero = _zero_like(vals[0])
    moms = [zero + 1] + vals
    pw = _power_coefficient_table(moms, order, zero)
    kap = [zero] * order
    for n in range(1, order + 1):
        acc = moms[n]
        for s in range(1, n):
            if kap[s - 1]:
                acc -= kap[s - 1] * pw[s][n - s]
        kap[n - 1] = acc
    return CumulantSequence(tuple(kap))


def _exact(x):
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    return Fraction(str(x))


@dataclass(frozen=True)
class BaseLaw:
    """A centered, compactly supported scalar distribution.

    ``kind`` is one of ``semicircular``, ``bernoulli``, ``two_atom`` or
    ``moments``; see the module-level constructors.
    """

    kind: str
    params: tuple = ()

    def __post_init__(self):
        if self.kind not in ("semicircular", "bernoulli", "two_atom", "moments"):
            raise ConfigError(f"unknown distribution kind {self.kind!r}")
        if self.kind == "semicircular" and not self.params[0] > 0:
            raise ConfigError("semicircular variance must be positive")
        if self.kind == "two_atom":
            (a, b), (p, q) = self.params
            if not (p > 0 and q > 0 and abs(p + q - 1) < 1e-12):
                raise ConfigError("two_atom weights must be positive and sum to 1")
            if abs(p * a + q * b) > 1e-12:
                raise ConfigError("two_atom law must be centered")
        if self.kind == "moments":
            vals = self.params
            if len(vals) < 2:
                raise ConfigError("custom moment list needs at least two moments")
            if vals[0] != 0:
                raise ConfigError("custom moment list must be centered (m1 = 0)")

    @property
    def max_order(self) -> float:
        return len(self.params) if self.kind == "moments" else math.inf

    @property
    def variance(self) -> float:
        return float(self.moments(2).values[1])

    def moments(self, order: int, exact: bool = False) -> MomentSequence:
        if order > self.max_order:
            raise OrderExceeded(f"{self.kind} law provides {self.max_order} moments, {order} requested")
        conv = _exact if exact else float
        if self.kind == "semicircular":
            return moments_from_cumulants(self.cumulants(order, exact))
        if self.kind == "bernoulli":
            return MomentSequence(tuple(conv(1 if k % 2 == 0 else 0) for k in range(1, order + 1)))
        if self.kind == "two_atom":
            (a, b), (p, q) = self.params
            a, b, p, q = conv(a), conv(b), conv(p), conv(q)
            return MomentSequence(tuple(p * a**k + q * b**k for k in range(1, order + 1)))
        return MomentSequence(tuple(conv(v) for v in self.params[:order]))

    def cumulants(self, order: int, exact: bool = False) -> CumulantSequence:
        if self.kind == "semicircular":
            conv = _exact if exact else float
            zero = conv(0)
            vals = [zero] * order
            if order >= 2:
                vals[1] = conv(self.params[0])
            return CumulantSequence(tuple(vals))
        return cumulants_from_moments(self.moments(order, exact))

    def to_json(self) -> dict:
        if self.kind == "semicircular":
            return {"kind": "semicircular", "variance": float(self.params[0])}
        if self.kind == "bernoulli":
            return {"kind": "bernoulli"}
        if self.kind == "two_atom":
            (a, b), (p, q) = self.params
            return {"kind": "two_atom", "atoms": [a, b], "weights": [p, q]}
        return {"kind": "moments", "moments": list(self.params)}

    @classmethod
    def from_json(cls, obj: dict) -> "BaseLaw":
        kind = obj.get("kind")
        if kind == "semicircular":
            return semicircular(obj.get("variance", 1.0))
        if kind == "bernoulli":
            return bernoulli()
        if kind == "two_atom":
            return two_atom(tuple(obj.get("atoms", (2.0, -0.5))), tuple(obj.get("weights", (0.2, 0.8))))
        if kind == "moments":
            return custom_moments(obj["moments"])
        raise ConfigError(f"unknown distribution kind {kind!r}")


def semicircular(variance=1.0) -> BaseLaw:
    return BaseLaw("semicircular", (variance,))


def bernoulli() -> BaseLaw:
    """Symmetric Bernoulli law with atoms +1 and -1."""
    return BaseLaw("bernoulli")


def two_atom(atoms=(2.0, -0.5), weights=(0.2, 0.8)) -> BaseLaw:
    """Two-atom law; the default is the skewed law with mean 0, variance 1, m3 = 1.5."""
    return BaseLaw("two_atom", (tuple(atoms), tuple(weights)))


def custom_moments(moments: Sequence) -> BaseLaw:
    return BaseLaw("moments", tuple(moments))


def _clt_factor(n: int, r: int, exact: bool):
    # n^(1 - r/2)
    if n == 1:
        return Fraction(1) if exact else 1.0
    if exact:
        if r % 2 == 0:
            return Fraction(n) / Fraction(n) ** (r // 2)
        s = math.isqrt(n)
        if s * s == n:
            return Fraction(s) ** (2 - r) if r <= 2 else Fraction(1, s ** (r - 2))
        return float(n) ** (1.0 - r / 2.0)
    return float(n) ** (1.0 - r / 2.0)


@dataclass(frozen=True)
class FreeFamilySpec:
    """Family ``x^(k) = sum_j C[k, j] y_j`` over freely independent base laws ``y_j``.

    ``n`` records the normalized free sum ``S_n = n^{-1/2} sum_i x_i``: every
    order-r cumulant of the base laws is multiplied by ``n^{1 - r/2}``.
    """

    base: tuple
    mixing: np.ndarray = field(default=None)
    n: int = 1
    order: int = DEFAULT_ORDER
    exact: bool = False

    def __post_init__(self):
        base = tuple(self.base)
        object.__setattr__(self, "base", base)
        if not base:
            raise ConfigError("family needs at least one base law")
        if self.mixing is None:
            mix = np.eye(len(base), dtype=object if self.exact else float)
            if self.exact:
                mix = np.array([[Fraction(int(i == j)) for j in range(len(base))]
                                for i in range(len(base))], dtype=object)
        else:
            mix = np.array(self.mixing, dtype=object if self.exact else float)
            if self.exact:
                mix = np.vectorize(_exact, otypes=[object])(mix)
        if mix.ndim != 2 or mix.shape[1] != len(base):
            raise ConfigError(f"mixing matrix must have {len(base)} columns, got shape {mix.shape}")
        if not self.exact and not np.all(np.isfinite(mix)):
            raise ConfigError("mixing matrix has non-finite entries")
        object.__setattr__(self, "mixing", mix)
        if self.n < 1:
            raise ConfigError("n must be a positive integer")
        for law in base:
            if law.max_order < self.order:
                object.__setattr__(self, "order", int(min(self.order, law.max_order)))
            first = law.moments(1).values[0]
            if abs(first) > 1e-12:
                raise ConfigError("base laws must be centered")

    @classmethod
    def free(cls, laws: Sequence[BaseLaw], **kw) -> "FreeFamilySpec":
        return cls(base=tuple(laws), **kw)

    @property
    def d(self) -> int:
        return self.mixing.shape[0]

    @property
    def n_base(self) -> int:
        return len(self.base)

    @property
    def Sigma(self) -> np.ndarray:
        """Covariance ``C diag(var_j) C^T`` (invariant under the free CLT)."""
        mix = np.asarray(self.mixing, dtype=float)
        var = np.array([law.variance for law in self.base])
        return (mix * var) @ mix.T

    def base_cumulants(self, order: int | None = None) -> list:
        """Rescaled cumulant lists ``[kappa_1, ..., kappa_order]`` per base law."""
        order = self.order if order is None else order
        out = []
        for law in self.base:
            if order > law.max_order:
                raise OrderExceeded(f"order {order} exceeds available moment data")
            kap = law.cumulants(order, self.exact).values
            out.append(tuple(kap[r - 1] * _clt_factor(self.n, r, self.exact) if kap[r - 1] else kap[r - 1]
                             for r in range(1, order + 1)))
        return out

    def base_moments(self, j: int, order: int | None = None) -> MomentSequence:
        """Moments of the j-th (rescaled) base variable."""
        order = self.order if order is None else order
        return moments_from_cumulants(self.base_cumulants(order)[j])

    def is_semicircular(self) -> bool:
        return all(law.kind == "semicircular" for law in self.base)

    def to_json(self) -> dict:
        return {"base": [law.to_json() for law in self.base],
                "mixing": np.asarray(self.mixing, dtype=float).tolist()}

    @classmethod
    def from_json(cls, obj: dict, order: int = DEFAULT_ORDER) -> "FreeFamilySpec":
        unknown = set(obj) - {"base", "mixing"}
        if unknown:
            raise ConfigError(f"unknown family keys: {sorted(unknown)}")
        laws = tuple(BaseLaw.from_json(o) for o in obj["base"])
        return cls(base=laws, mixing=obj.get("mixing"), order=order)


def clt_cumulants(f: FreeFamilySpec, n: int) -> FreeFamilySpec:
    """Family of ``(S_n^(1), ..., S_n^(d))``; order-r cumulants scale by ``n^{1-r/2}``."""
    if n < 1:
        raise ValueError("n must be a positive integer")
    return replace(f, n=f.n * n)


def joint_moment(f: FreeFamilySpec, w: Sequence[int]):
    """Mixed moment ``tau(x^(w1) ... x^(wj))`` with letters in ``1..d``.

    First-block recursion over noncrossing partitions, memoized on contiguous
    subwords.  Mixed cumulants across distinct base laws vanish, so the block
    through the first letter is attached to one base law at a time and its
    weight factorizes over the letters it contains.
    """
    word = tuple(int(k) - 1 for k in w)
    L = len(word)
    if L == 0:
        return Fraction(1) if f.exact else 1.0
    if L > f.order:
        raise OrderExceeded(f"word of length {L} exceeds moment order {f.order}")
    if min(word) < 0 or max(word) >= f.d:
        raise ValueError(f"letters must lie in 1..{f.d}")
    kap = f.base_cumulants(L)
    nb = f.n_base
    zero = Fraction(0) if f.exact else 0.0
    coef = [[f.mixing[word[p], j] for j in range(nb)] for p in range(L)]

    @lru_cache(maxsize=None)
    def moment(a: int, b: int):
        if a == b:
            return zero + 1
        total = zero
        for j in range(nb):
            cj = coef[a][j]
            if cj:
                total += cj * block(j, a, b, 1)
        return total

    @lru_cache(maxsize=None)
    def block(j: int, p: int, b: int, r: int):
        # block of base law j, last element at p, r elements so far, inside (p, b)
        total = zero
        k = kap[j][r - 1]
        if k:
            total += k * moment(p + 1, b)
        for q in range(p + 1, b):
            cq = coef[q][j]
            if not cq:
                continue
            inner = moment(p + 1, q)
            if inner:
                total += inner * cq * block(j, q, b, r + 1)
        return total

    return moment(0, L)


def _gauss_nodes(moms: Sequence[float]) -> np.ndarray:
    """Gauss quadrature nodes from moments ``m_0 .. m_{2K-1}`` (Chebyshev algorithm).

    Stops early when the measure is exhausted (finitely many atoms).
    """
    moms = np.asarray(moms, dtype=float)
    K = len(moms) // 2
    alpha = np.zeros(K)
    beta = np.zeros(K)
    sig_prev = np.zeros(2 * K)
    sig = moms[: 2 * K].copy()
    alpha[0] = sig[1] / sig[0]
    beta[0] = sig[0]
    used = 1
    scale = max(1.0, float(np.max(np.abs(moms[: 2 * K]))))
    for k in range(1, K):
        sig_new = np.zeros(2 * K)
        for l in range(k, 2 * K - k):
            sig_new[l] = sig[l + 1] - alpha[k - 1] * sig[l] - beta[k - 1] * sig_prev[l]
        if not sig_new[k] > 1e-12 * scale:
            break
        alpha[k] = sig_new[k + 1] / sig_new[k] - sig[k] / sig[k - 1]
        beta[k] = sig_new[k] / sig[k - 1]
        sig_prev, sig = sig, sig_new
        used = k + 1
    if used == 1:
        return np.array([alpha[0]])
    return sla.eigh_tridiagonal(alpha[:used], np.sqrt(beta[1:used]), eigvals_only=True)


def norm_upper_estimate(m: MomentSequence, safety: float = 1.1) -> float:
    """Heuristic upper estimate of ``||x||`` from finitely many moments.

    Returns ``safety`` times the larger of ``max_k m_{2k}^{1/(2k)}`` and the
    largest Gauss node modulus of the moment data.  Both are lower bounds of
    the true norm that converge to it as the order grows; the Gauss node
    converges much faster.  This is an estimate, not a certificate.
    """
    if safety < 1.0:
        raise ValueError("safety must be >= 1")
    if m.order < 8:
        raise OrderExceeded("need moments up to order 8 at least")
    vals = [float(v) for v in m.values]
    even = [vals[2 * k - 1] for k in range(1, m.order // 2 + 1)]
    if max(abs(v) for v in even) == 0.0:
        return 0.0
    root = max(max(v, 0.0) ** (1.0 / (2 * k)) for k, v in enumerate(even, start=1))
    K = m.order // 2
    nodes = _gauss_nodes([1.0] + vals[: 2 * K - 1])
    return safety * max(root, float(np.max(np.abs(nodes))))
