"""Noncommutative polynomials and their linearization pencils.

A pencil ``L = a0 (x) 1 + sum_k a_k (x) x_k`` of size ``m`` linearizes ``p``
when, writing ``L`` in blocks of sizes ``1`` and ``m - 1``,

    p = L11 + L12 (1 - L22)^-1 L21,

so that the (1,1) entry of ``(Lambda(lam, 1) - L)^-1`` is ``(lam - p)^-1``.
Two constructions are provided:

``bidiagonal``
    each monomial ``c x_i1 ... x_ik`` (k >= 2) contributes a block of size
    ``k - 1`` with a nilpotent upper bidiagonal ``L22``.  Works for every
    polynomial, and for homogeneous ``p`` of degree g it also satisfies the
    rescaling identity ``(Lambda(lam, mu) - L)^-1_11 = mu^(g-1) (lam mu^(g-1) - p)^-1``.
``hermitian``
    self-adjoint pencils for self-adjoint ``p``: palindromic monomials are
    nested symmetric blocks, other monomials are paired with their adjoints.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError, DomainError, NotValidated, ZeroPolynomial
from .freemoments import FreeFamilySpec
from .matlin import CertifiedConstants, OmegaParams, annulus_contains, lambda_diag, op_norm
from .opmodel import CovarianceMap, OperatorModel, SumModel, cauchy_series, model_norm_estimate
from .scsolver import SemicircularSpec, solve_cauchy

__all__ = [
    "NcPoly",
    "LinearPencil",
    "CauchyEvalConfig",
    "linearize",
    "validate_pencil",
    "check_mu_identity",
    "scalar_cauchy_from_pencil",
    "mu_rescaled_eval",
    "series_domain",
]

COEF_ATOL = 1e-14


# ---------------------------------------------------------------- polynomials

@dataclass(frozen=True)
class NcPoly:
    """Polynomial in noncommuting ``x_1 .. x_d``; ``terms`` holds ``(coef, word)`` pairs.

    Words are tuples of 1-based generator indices.  The constructor merges
    duplicate words, drops zero coefficients and sorts by (length, word).
    """

    d: int
    terms: tuple = ()

    def __post_init__(self):
        merged: dict = {}
        for coef, word in self.terms:
            word = tuple(int(k) for k in word)
            if any(k < 1 or k > self.d for k in word):
                raise ConfigError(f"generator index out of range 1..{self.d} in {word}")
            merged[word] = merged.get(word, 0) + complex(coef)
        items = sorted(((w, c) for w, c in merged.items() if abs(c) > COEF_ATOL),
                       key=lambda t: (len(t[0]), t[0]))
        object.__setattr__(self, "terms", tuple((c, w) for w, c in items))

    @classmethod
    def parse(cls, text: str, d: int | None = None) -> "NcPoly":
        terms, dmax = _Parser(text).parse()
        d = max(dmax, 1) if d is None else d
        if dmax > d:
            raise ConfigError(f"polynomial uses x{dmax} but d = {d}")
        return cls(d, tuple((c, w) for w, c in terms.items()))

    @property
    def degree(self) -> int:
        return max((len(w) for _, w in self.terms), default=0)

    @property
    def is_zero(self) -> bool:
        return not self.terms

    @property
    def is_homogeneous(self) -> bool:
        return len({len(w) for _, w in self.terms}) <= 1

    def coefficient(self, word) -> complex:
        word = tuple(word)
        for c, w in self.terms:
            if w == word:
                return c
        return 0j

    def adjoint(self) -> "NcPoly":
        return NcPoly(self.d, tuple((c.conjugate(), w[::-1]) for c, w in self.terms))

    def is_selfadjoint(self, tol: float = 1e-12) -> bool:
        adj = dict((w, c) for c, w in self.adjoint().terms)
        own = dict((w, c) for c, w in self.terms)
        return set(adj) == set(own) and all(abs(own[w] - adj[w]) <= tol for w in own)

    def evaluate(self, mats: Sequence[np.ndarray]) -> np.ndarray:
        """``p(A_1, ..., A_d)`` for square matrices of a common size."""
        mats = [np.asarray(a, dtype=complex) for a in mats]
        if len(mats) != self.d:
            raise ValueError(f"need {self.d} matrices, got {len(mats)}")
        N = mats[0].shape[0]
        out = np.zeros((N, N), dtype=complex)
        for c, w in self.terms:
            prod = np.eye(N, dtype=complex)
            for k in w:
                prod = prod @ mats[k - 1]
            out += c * prod
        return out

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for c, w in self.terms:
            coef = f"{c.real:g}" if c.imag == 0 else f"({c.real:g}{c.imag:+g}i)"
            mono = "*".join(f"x{k}" for k in w)
            parts.append(coef if not w else (mono if c == 1 else f"{coef}*{mono}"))
        return " + ".join(parts)


_TOKEN = re.compile(r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)(?P<imag>i)?"
                    r"|(?P<var>x[1-9])|(?P<unit>i)|(?P<op>[-+*^()]))")


class _Parser:
    """Recursive descent over ``expr := term (('+'|'-') term)*`` etc.

    Polynomials are dicts ``word -> coefficient``; multiplication concatenates
    words in left-to-right order.  Juxtaposition (``2x1``) also multiplies.
    """

    def __init__(self, text: str):
        self.text = text
        self.tokens = []
        pos = 0
        text = text.rstrip()
        while pos < len(text):
            mt = _TOKEN.match(text, pos)
            if not mt or mt.end() == pos:
                raise ConfigError(f"cannot parse polynomial near {text[pos:]!r}")
            if mt.group("num") is not None:
                val = float(mt.group("num"))
                self.tokens.append(("num", complex(0, val) if mt.group("imag") else complex(val)))
            elif mt.group("var"):
                self.tokens.append(("var", int(mt.group("var")[1:])))
            elif mt.group("unit"):
                self.tokens.append(("num", 1j))
            else:
                self.tokens.append(("op", mt.group("op")))
            pos = mt.end()
        self.i = 0
        self.dmax = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else (None, None)

    def take(self):
        tok = self.peek()
        self.i += 1
        return tok

    def parse(self):
        if not self.tokens:
            raise ConfigError("empty polynomial")
        poly = self.expr()
        if self.i != len(self.tokens):
            raise ConfigError(f"unexpected token {self.peek()[1]!r} in {self.text!r}")
        return poly, self.dmax

    def expr(self):
        out = self.term()
        while self.peek() in (("op", "+"), ("op", "-")):
            sign = 1 if self.take()[1] == "+" else -1
            out = _add(out, self.term(), sign)
        return out

    def term(self):
        out = self.unary()
        while True:
            kind, val = self.peek()
            if (kind, val) == ("op", "*"):
                self.take()
            elif not (kind in ("num", "var") or (kind, val) == ("op", "(")):
                return out
            out = _mul(out, self.unary())

    def unary(self):
        kind, val = self.peek()
        if (kind, val) == ("op", "-"):
            self.take()
            return _scale(self.unary(), -1)
        if (kind, val) == ("op", "+"):
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek() == ("op", "^"):
            self.take()
            kind, val = self.take()
            if kind != "num" or val.imag != 0 or val.real != int(val.real) or val.real < 0:
                raise ConfigError("exponent must be a non-negative integer")
            out = {(): 1 + 0j}
            for _ in range(int(val.real)):
                out = _mul(out, base)
            return out
        return base

    def atom(self):
        kind, val = self.take()
        if kind == "num":
            return {(): val}
        if kind == "var":
            self.dmax = max(self.dmax, val)
            return {(val,): 1 + 0j}
        if (kind, val) == ("op", "("):
            out = self.expr()
            if self.take() != ("op", ")"):
                raise ConfigError("missing closing parenthesis")
            return out
        raise ConfigError(f"unexpected token {val!r} in {self.text!r}")


def _add(p, q, sign=1):
    out = dict(p)
    for w, c in q.items():
        out[w] = out.get(w, 0) + sign * c
    return out


def _scale(p, s):
    return {w: s * c for w, c in p.items()}


def _mul(p, q):
    out: dict = {}
    for w1, c1 in p.items():
        for w2, c2 in q.items():
            out[w1 + w2] = out.get(w1 + w2, 0) + c1 * c2
    return out


# ---------------------------------------------------------------- pencils

@dataclass(frozen=True, eq=False)
class LinearPencil:
    a0: np.ndarray
    coeffs: np.ndarray
    kind: str = "bidiagonal"
    degree: int = 1
    mu_validated: bool = False

    @property
    def m(self) -> int:
        return self.a0.shape[0]

    @property
    def d(self) -> int:
        return self.coeffs.shape[0]

    def evaluate(self, lam, mu, mats: Sequence[np.ndarray]) -> np.ndarray:
        """``Lambda(lam, mu) (x) I_N - a0 (x) I_N - sum_k a_k (x) A_k``."""
        N = np.asarray(mats[0]).shape[0]
        eye = np.eye(N)
        out = np.kron(lambda_diag(lam, mu, self.m) - self.a0, eye)
        for a, mat in zip(self.coeffs, mats):
            out -= np.kron(a, mat)
        return out

    def corrupted(self, delta: float = 0.1, k: int = 0) -> "LinearPencil":
        """Copy with ``delta`` added to one entry of ``a_k`` (or ``a0`` for k = -1)."""
        a0 = self.a0.copy()
        co = self.coeffs.copy()
        target = a0 if k < 0 else co[k]
        i, j = np.unravel_index(np.argmax(np.abs(target)), target.shape)
        target[i, j] += delta
        return LinearPencil(a0, co, self.kind, self.degree, False)

    def is_hermitian(self, tol: float = 1e-14) -> bool:
        mats = [self.a0, *self.coeffs]
        return all(np.allclose(a, a.conj().T, rtol=0, atol=tol) for a in mats)

    def to_json(self) -> dict:
        from .jsonio import matrix_to_json
        return {"m": self.m, "kind": self.kind, "a0": matrix_to_json(self.a0),
                "coeffs": [matrix_to_json(a) for a in self.coeffs],
                "mu_validated": self.mu_validated}


class _Lin:
    """Matrix whose entries are affine in the generators: ``c0 + sum_k ck[k] x_k``."""

    def __init__(self, d: int, rows: int, cols: int):
        self.c0 = np.zeros((rows, cols), dtype=complex)
        self.ck = np.zeros((d, rows, cols), dtype=complex)

    @property
    def shape(self):
        return self.c0.shape

    def set_var(self, i, j, k, coef=1.0):
        self.ck[k - 1, i, j] += coef

    def adjoint(self) -> "_Lin":
        out = _Lin(self.ck.shape[0], self.shape[1], self.shape[0])
        out.c0 = self.c0.conj().T.copy()
        out.ck = np.conj(np.transpose(self.ck, (0, 2, 1))).copy()
        return out


def _block_diag_lin(blocks: list, d: int) -> _Lin:
    n = sum(b.shape[0] for b in blocks)
    out = _Lin(d, n, n)
    pos = 0
    for b in blocks:
        k = b.shape[0]
        out.c0[pos:pos + k, pos:pos + k] = b.c0
        out.ck[:, pos:pos + k, pos:pos + k] = b.ck
        pos += k
    return out


def _hstack_lin(rows: list, d: int) -> _Lin:
    n = sum(r.shape[1] for r in rows)
    out = _Lin(d, 1, n)
    pos = 0
    for r in rows:
        k = r.shape[1]
        out.c0[:, pos:pos + k] = r.c0
        out.ck[:, :, pos:pos + k] = r.ck
        pos += k
    return out


def _vstack_lin(cols: list, d: int) -> _Lin:
    n = sum(c.shape[0] for c in cols)
    out = _Lin(d, n, 1)
    pos = 0
    for c in cols:
        k = c.shape[0]
        out.c0[pos:pos + k] = c.c0
        out.ck[:, pos:pos + k] = c.ck
        pos += k
    return out


def _assemble(d, l11: _Lin, u: _Lin, v: _Lin, q: _Lin, kind: str, degree: int) -> LinearPencil:
    """Pencil with ``L11``, ``L12 = u``, ``L21 = v`` and ``1 - L22 = q``."""
    n = q.shape[0]
    m = 1 + n
    a0 = np.zeros((m, m), dtype=complex)
    co = np.zeros((d, m, m), dtype=complex)
    a0[0, 0] = l11.c0[0, 0]
    co[:, 0, 0] = l11.ck[:, 0, 0]
    if n:
        a0[0, 1:] = u.c0[0]
        co[:, 0, 1:] = u.ck[:, 0]
        a0[1:, 0] = v.c0[:, 0]
        co[:, 1:, 0] = v.ck[:, :, 0]
        a0[1:, 1:] = np.eye(n) - q.c0
        co[:, 1:, 1:] = -q.ck
    a0[np.abs(a0) < COEF_ATOL] = 0
    co[np.abs(co) < COEF_ATOL] = 0
    return LinearPencil(a0, co, kind, degree)


def _chain(d, coef, word):
    """Row ``u``, column ``v`` and ``q = 1 - T`` with ``u q^-1 v = coef * word``."""
    k = len(word)
    n = k - 1
    u = _Lin(d, 1, n)
    v = _Lin(d, n, 1)
    q = _Lin(d, n, n)
    q.c0[:] = np.eye(n)
    u.set_var(0, 0, word[0], coef)
    v.set_var(n - 1, 0, word[-1])
    for j in range(n - 1):
        # q = 1 - T with T[j, j+1] = x_{i_{j+2}}
        q.set_var(j, j + 1, word[j + 1], -1.0)
    return u, v, q


def _palindrome_q(d, coef: float, word) -> _Lin:
    """Hermitian affine ``q`` with ``(q^-1)_11 = coef * word`` for a palindromic word."""
    if len(word) == 0:
        q = _Lin(d, 1, 1)
        q.c0[0, 0] = 1.0 / coef
        return q
    if len(word) == 1:
        q = _Lin(d, 2, 2)
        q.c0[0, 1] = q.c0[1, 0] = 1.0
        q.set_var(1, 1, word[0], -coef)
        return q
    inner = _palindrome_q(d, coef, word[1:-1])
    n = inner.shape[0]
    q = _Lin(d, n + 2, n + 2)
    q.c0[0, 1] = q.c0[1, 0] = 1.0
    # [[0, 1, 0], [1, 0, B], [0, B^*, inner]] with B = [x_i, 0, ...]
    q.set_var(1, 2, word[0])
    q.set_var(2, 1, word[0])
    q.c0[2:, 2:] = inner.c0
    q.ck[:, 2:, 2:] = inner.ck
    return q


def _linearize_bidiagonal(p: NcPoly) -> LinearPencil:
    d = p.d
    l11 = _Lin(d, 1, 1)
    us, vs, qs = [], [], []
    for c, w in p.terms:
        if len(w) == 0:
            l11.c0[0, 0] += c
        elif len(w) == 1:
            l11.set_var(0, 0, w[0], c)
        else:
            u, v, q = _chain(d, c, w)
            us.append(u)
            vs.append(v)
            qs.append(q)
    q = _block_diag_lin(qs, d)
    u = _hstack_lin(us, d)
    v = _vstack_lin(vs, d)
    return _assemble(d, l11, u, v, q, "bidiagonal", p.degree)


def _linearize_hermitian(p: NcPoly) -> LinearPencil:
    d = p.d
    l11 = _Lin(d, 1, 1)
    us, qs = [], []
    seen = set()
    for c, w in p.terms:
        if w in seen:
            continue
        rev = w[::-1]
        seen.add(w)
        seen.add(rev)
        if len(w) == 0:
            l11.c0[0, 0] += c.real
        elif len(w) == 1:
            l11.set_var(0, 0, w[0], c.real)
        elif w == rev:
            # c w = x_i (c inner) x_i with (q^-1)_11 = c inner
            q = _palindrome_q(d, c.real, w[1:-1])
            u = _Lin(d, 1, q.shape[0])
            u.set_var(0, 0, w[0])
            us.append(u)
            qs.append(q)
        else:
            # c w + conj(c) w^*: u' = [u, v^*], q' = [[0, q^*], [q, 0]]
            u, v, q = _chain(d, c, w)
            n = q.shape[0]
            big = _Lin(d, 2 * n, 2 * n)
            qa = q.adjoint()
            big.c0[:n, n:] = qa.c0
            big.ck[:, :n, n:] = qa.ck
            big.c0[n:, :n] = q.c0
            big.ck[:, n:, :n] = q.ck
            us.append(_hstack_lin([u, v.adjoint()], d))
            qs.append(big)
    q = _block_diag_lin(qs, d)
    u = _hstack_lin(us, d)
    return _assemble(d, l11, u, u.adjoint(), q, "hermitian", p.degree)


def linearize(p: NcPoly, kind: str | None = None, validate_mu: bool = True) -> LinearPencil:
    """Linearization pencil of ``p``.

    ``kind`` defaults to ``hermitian`` for self-adjoint ``p`` and
    ``bidiagonal`` otherwise.  When ``validate_mu`` is set the rescaling
    identity is checked numerically and recorded in ``mu_validated``.
    """
    if p.is_zero:
        raise ZeroPolynomial("cannot linearize the zero polynomial")
    if kind is None:
        kind = "hermitian" if p.is_selfadjoint() else "bidiagonal"
    if kind == "hermitian":
        if not p.is_selfadjoint():
            raise ConfigError("hermitian pencils need a self-adjoint polynomial")
        pen = _linearize_hermitian(p)
    elif kind == "bidiagonal":
        pen = _linearize_bidiagonal(p)
    else:
        raise ConfigError(f"unknown pencil kind {kind!r}")
    if validate_mu:
        ok = check_mu_identity(p, pen) < 1e-8
        pen = LinearPencil(pen.a0, pen.coeffs, pen.kind, pen.degree, ok)
    return pen


def _random_hermitian(N: int, rng) -> np.ndarray:
    z = rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))
    return (z + z.conj().T) / (2.0 * math.sqrt(2.0 * N))


def _corner(pen: LinearPencil, lam, mu, mats):
    N = mats[0].shape[0]
    big = pen.evaluate(lam, mu, mats)
    rhs = np.zeros((big.shape[0], N), dtype=complex)
    rhs[:N] = np.eye(N)
    return np.linalg.solve(big, rhs)[:N]


def validate_pencil(p: NcPoly, pencil: LinearPencil, trials: int = 100, N: int = 6, seed=0) -> float:
    """Largest ``||(lam - p(A))^-1 - corner((Lambda(lam,1) (x) I - L(A))^-1)||`` over trials.

    ``A`` are random Hermitian ``N x N`` matrices and ``|Im lam| >= 1``.
    """
    if trials < 1 or N < 2:
        raise ValueError("need trials >= 1 and N >= 2")
    if pencil.d != p.d:
        raise ValueError("pencil and polynomial disagree on the number of generators")
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        mats = [_random_hermitian(N, rng) for _ in range(p.d)]
        lam = complex(rng.uniform(-3, 3), rng.choice([-1, 1]) * rng.uniform(1, 3))
        ref = np.linalg.inv(lam * np.eye(N) - p.evaluate(mats))
        worst = max(worst, op_norm(ref - _corner(pencil, lam, 1.0, mats)))
    return worst


def check_mu_identity(p: NcPoly, pencil: LinearPencil, trials: int = 8, N: int = 4, seed=12345) -> float:
    """Residual of ``corner((Lambda(lam, mu) - L)^-1) = mu^(g-1) (lam mu^(g-1) - p)^-1``."""
    rng = np.random.default_rng(seed)
    g = p.degree
    worst = 0.0
    for _ in range(trials):
        mats = [_random_hermitian(N, rng) for _ in range(p.d)]
        mu = complex(rng.uniform(1.5, 3.0) * np.exp(1j * rng.uniform(-0.5, 0.5)))
        lam = complex(rng.uniform(-2, 2), rng.choice([-1, 1]) * rng.uniform(1, 3))
        z = lam * mu ** (g - 1)
        ref = mu ** (g - 1) * np.linalg.inv(z * np.eye(N) - p.evaluate(mats))
        got = _corner(pencil, lam, mu, mats)
        worst = max(worst, op_norm(ref - got) / max(1.0, op_norm(ref)))
    return worst


# ---------------------------------------------------------------- evaluation

@dataclass(frozen=True)
class CauchyEvalConfig:
    """Evaluation settings for scalar Cauchy transforms of pencils.

    ``engine`` is ``fixed_point`` (semicircular limit) or ``series``
    (Neumann series of the free sum with scale ``n``).  ``R`` overrides the
    exterior radius; ``norm_bound`` overrides the operator norm estimate
    that fixes the certified domain.
    """

    engine: str = "fixed_point"
    tol: float = 1e-12
    R: float | None = None
    n: int = 1
    theta: float = 0.2
    sigma: float = 0.9
    c: float = 2.0
    gamma: float = 0.1
    Jmax: int = 96
    max_iter: int = 10_000
    norm_bound: float | None = None

    def __post_init__(self):
        if self.engine not in ("fixed_point", "series"):
            raise ConfigError(f"unknown engine {self.engine!r}")
        if self.R is not None and not self.R > 0:
            raise ConfigError("R must be positive")
        if self.n < 1:
            raise ConfigError("n must be a positive integer")


@dataclass(frozen=True)
class SeriesDomain:
    """Certified exterior region for pencil evaluation."""

    params: OmegaParams     # theta*, sigma, c*, kappa*
    mu0: float              # smallest admissible |mu|
    R: float                # exterior radius


def _pencil_model(pencil: LinearPencil, family: FreeFamilySpec) -> OperatorModel:
    return OperatorModel(pencil.a0, pencil.coeffs, family)


def _semicircular_spec(pencil: LinearPencil, family: FreeFamilySpec) -> SemicircularSpec:
    return SemicircularSpec(pencil.a0, CovarianceMap(pencil.coeffs, family.Sigma))


def series_domain(pencil: LinearPencil, family: FreeFamilySpec, cfg: CauchyEvalConfig) -> SeriesDomain:
    """``kappa* = theta* / N`` with ``N`` bounding both the limit and the free sum.

    ``mu0 = max(2 (1 + sum ||a_k||), 1.05 / kappa*)`` and
    ``R = mu0^(g-1) max(1/kappa*, mu0/c*)``, so that every ``|z| > R`` has a
    representation ``z = lam mu^(g-1)`` with ``Lambda(lam, mu)`` in the annulus.
    """
    p = OmegaParams(cfg.theta, cfg.sigma, cfg.c, 1.0)
    cc = CertifiedConstants.from_params(p, cfg.gamma)
    if cfg.norm_bound is not None:
        N = cfg.norm_bound
    else:
        N = max(_semicircular_spec(pencil, family).norm_bound() + op_norm(pencil.a0),
                model_norm_estimate(SumModel(_pencil_model(pencil, family), cfg.n)))
    kappa = cc.theta_star / N
    params = OmegaParams(cc.theta_star, cfg.sigma, cc.c_star, kappa)
    mu0 = max(2.0 * (1.0 + sum(op_norm(a) for a in pencil.coeffs)), 1.05 / kappa)
    g = max(pencil.degree, 1)
    R = mu0 ** (g - 1) * max(1.0 / kappa, mu0 / cc.c_star)
    if cfg.R is not None:
        R = max(R, cfg.R)
    return SeriesDomain(params, mu0, R)


def _corner_transform(pencil, family, b, cfg) -> complex:
    if cfg.engine == "fixed_point":
        rep = solve_cauchy(_semicircular_spec(pencil, family), b, tol=cfg.tol, max_iter=cfg.max_iter)
        return complex(rep.w[0, 0])
    model = SumModel(_pencil_model(pencil, family), cfg.n)
    G, _ = cauchy_series(model, b, tol=cfg.tol, Jmax=cfg.Jmax)
    return complex(G[0, 0])


def scalar_cauchy_from_pencil(pencil: LinearPencil, family: FreeFamilySpec, lam: complex,
                              cfg: CauchyEvalConfig = CauchyEvalConfig()) -> complex:
    """``tau[(lam - p)^-1]`` read off the (1,1) entry of the pencil's matrix transform.

    ``fixed_point`` evaluates the semicircular limit at ``Lambda(lam, 1)``;
    ``series`` evaluates the free sum ``S_n`` through the rescaled point
    ``Lambda(lam / mu^(g-1), mu)`` inside the certified annulus, which
    requires ``|lam| > R`` and a pencil that passed the rescaling check.
    """
    lam = complex(lam)
    if cfg.engine == "fixed_point":
        if cfg.R is not None and not abs(lam) > cfg.R:
            raise DomainError(f"|lambda| = {abs(lam):.6g} not beyond R = {cfg.R:.6g}")
        return _corner_transform(pencil, family, lambda_diag(lam, 1.0, pencil.m), cfg)
    dom = series_domain(pencil, family, cfg)
    if not abs(lam) > dom.R:
        raise DomainError(f"|lambda| = {abs(lam):.6g} not beyond R = {dom.R:.6g}")
    if pencil.m == 1:
        return _corner_transform(pencil, family, np.array([[lam]]), cfg)
    g = max(pencil.degree, 1)
    mu = max(abs(lam) ** (1.0 / g), dom.mu0)
    return mu_rescaled_eval(pencil, family, lam / mu ** (g - 1), mu, g, cfg, dom)


def mu_rescaled_eval(pencil: LinearPencil, family: FreeFamilySpec, lam: complex, mu: complex,
                     g: int, cfg: CauchyEvalConfig = CauchyEvalConfig(),
                     domain: SeriesDomain | None = None) -> complex:
    """``G_P(lam mu^(g-1))`` as ``pi(G(Lambda(lam, mu))) / mu^(g-1)``."""
    if pencil.m > 1 and not pencil.mu_validated:
        raise NotValidated("pencil failed the rescaling identity check")
    dom = series_domain(pencil, family, cfg) if domain is None else domain
    try:
        inside = annulus_contains(lam, mu, dom.params)
    except Exception as exc:
        raise DomainError(str(exc)) from exc
    if not inside:
        raise DomainError(f"(lambda, mu) = ({lam}, {mu}) outside the certified annulus")
    val = _corner_transform(pencil, family, lambda_diag(lam, mu, pencil.m), cfg)
    return val / complex(mu) ** (g - 1)
