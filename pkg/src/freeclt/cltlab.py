"""Berry-Esseen rate experiments for operator-valued free central limits.

For a centered model ``X`` and its free normalized sums ``S_n`` this module
measures ``||G_s(b) - G_{S_n}(b)||`` against the semicircular limit, the
defect ``Theta_n(b) = b G_n(b) - 1 - eta(G_n(b)) G_n(b)``, the subordination
point ``Lambda_n(b) = b - Theta_n(b) G_n(b)^-1``, and provides a random matrix
Monte Carlo oracle.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from .errors import ConfigError, FreeCLTError, InvalidSize, PreconditionFailed, Singular
from .freemoments import FreeFamilySpec
from .linpoly import (CauchyEvalConfig, LinearPencil, NcPoly, linearize, mu_rescaled_eval,
                      series_domain)
from .matlin import (CertifiedConstants, OmegaParams, as_cmatrix, in_omega, inverse, lambda_diag,
                     op_norm, random_omega_point, random_unitary)
from .opmodel import OperatorModel, SumModel, alpha, apply_eta, cauchy_series, model_norm_estimate
from .scsolver import SemicircularSpec, solve_cauchy

__all__ = [
    "GridPoint",
    "RateExperiment",
    "RateRow",
    "RateResult",
    "norm_estimates",
    "certified_params",
    "ray_grid",
    "lambda_grid",
    "random_grid",
    "build_grid",
    "run_rate",
    "theta_n",
    "lambda_n",
    "subordination_check",
    "poly_rate",
    "mc_estimate",
    "sample_family",
    "resolvent_identity_check",
    "fit_slope",
    "trend_ok",
]

SLOPE_MIN_N = 16
TREND_FACTOR = 1.2


@dataclass(frozen=True, eq=False)
class GridPoint:
    b_id: str
    b: np.ndarray


@dataclass(frozen=True)
class RateRow:
    n: int
    b_id: str
    norm_b: float
    diff: float
    scaled: float
    theta_norm: float
    subord_resid: float


@dataclass(frozen=True, eq=False)
class RateExperiment:
    model: OperatorModel
    n_list: tuple
    grid: tuple
    params: OmegaParams = field(default_factory=OmegaParams)
    constants: CertifiedConstants | None = None
    tol: float = 1e-12
    Jmax: int = 96
    seed: int = 0
    workers: int = 1


@dataclass(frozen=True)
class RateResult:
    rows: list
    slope: float
    slope_ci: float
    max_scaled: float
    failures: list

    def max_scaled_by_n(self) -> dict:
        out: dict = {}
        for r in self.rows:
            out[r.n] = max(out.get(r.n, 0.0), r.scaled)
        return dict(sorted(out.items()))

    def max_theta_by_n(self) -> dict:
        out: dict = {}
        for r in self.rows:
            out[r.n] = max(out.get(r.n, 0.0), r.theta_norm)
        return dict(sorted(out.items()))


# ---------------------------------------------------------------- domains

def norm_estimates(model: OperatorModel, n_list: Sequence[int]) -> dict:
    """Norm estimates of the limit, of ``S_n`` and of ``S_n^[i]`` for the given ``n``.

    ``S_n^[i]`` has the law of ``sqrt((n-1)/n) S_{n-1}``.  Every estimate is
    floored by ``||alpha||^(1/2)`` since ``||S_n||^2 >= ||E[S_n^* S_n]||``.
    """
    floor = math.sqrt(op_norm(alpha(model)))
    spec = SemicircularSpec.from_model(model)
    out = {"s": max(spec.norm_bound() + op_norm(model.a0), floor)}
    for n in sorted(set(int(k) for k in n_list)):
        out[f"S{n}"] = max(model_norm_estimate(SumModel(model, n)), floor)
        if n > 1:
            out[f"S{n}[i]"] = math.sqrt((n - 1) / n) * max(model_norm_estimate(SumModel(model, n - 1)), floor)
    return out


def certified_params(model: OperatorModel, n_list: Sequence[int], params: OmegaParams = OmegaParams(),
                     constants: CertifiedConstants | None = None):
    """``(Omega_n params, Omega* params)`` built from the largest norm estimate.

    ``kappa_n = theta / N`` and ``kappa* = theta* / N`` with ``c*`` for the
    starred domain.
    """
    cc = CertifiedConstants.from_params(params) if constants is None else constants
    N = max(norm_estimates(model, n_list).values())
    omega_n = OmegaParams(params.theta, params.sigma, params.c, params.theta / N)
    omega_star = OmegaParams(cc.theta_star, params.sigma, cc.c_star, cc.theta_star / N)
    return omega_n, omega_star


def ray_grid(m: int, p: OmegaParams, factors=(1.1, 1.5, 2.5), phases=8) -> list:
    """Points ``z I`` with ``|z| = f / kappa`` on ``phases`` equally spaced directions."""
    pts = []
    for f in factors:
        for j in range(phases):
            z = f / p.kappa * np.exp(2j * math.pi * j / phases)
            pts.append(GridPoint(f"ray:{f:g}:{j}", z * np.eye(m, dtype=complex)))
    return pts


def lambda_grid(m: int, p: OmegaParams, mu_factors=(1.2, 2.0), ratios=(0.7, 1.0, 1.4), phases=4) -> list:
    """Points ``Lambda(lam, mu)`` with ``|lam| = r |mu|`` inside the annulus."""
    pts = []
    for f in mu_factors:
        mu = f / p.kappa
        for r in ratios:
            for j in range(phases):
                lam = r * mu * np.exp(2j * math.pi * (j + 0.5) / phases)
                if annulus_ok(lam, mu, p):
                    pts.append(GridPoint(f"lam:{f:g}:{r:g}:{j}", lambda_diag(lam, mu, m)))
    return pts


def annulus_ok(lam, mu, p: OmegaParams) -> bool:
    from .matlin import annulus_contains
    try:
        return annulus_contains(lam, mu, p)
    except FreeCLTError:
        return False


def random_grid(m: int, p: OmegaParams, count: int = 8, seed=0) -> list:
    """Rejection-sampled random points of Omega."""
    rng = np.random.default_rng(seed)
    pts = []
    tries = 0
    while len(pts) < count:
        tries += 1
        if tries > 100 * count:
            raise RuntimeError("rejection sampling of Omega points failed")
        b = random_omega_point(m, p.kappa, p.c, rng, max_radius_factor=3.0)
        if in_omega(b, p):
            pts.append(GridPoint(f"rand:{len(pts)}", b))
    return pts


def build_grid(spec: Sequence[dict], m: int, p: OmegaParams, seed=0) -> list:
    """Grid from JSON-like descriptions ``{"kind": "ray"|"lambda"|"random"|"explicit", ...}``."""
    pts = []
    for i, item in enumerate(spec):
        kind = item.get("kind")
        if kind == "ray":
            pts += ray_grid(m, p, tuple(item.get("factors", (1.1, 1.5, 2.5))), int(item.get("phases", 8)))
        elif kind == "lambda":
            pts += lambda_grid(m, p, tuple(item.get("mu_factors", (1.2, 2.0))),
                               tuple(item.get("ratios", (0.7, 1.0, 1.4))), int(item.get("phases", 4)))
        elif kind == "random":
            pts += random_grid(m, p, int(item.get("count", 8)), seed=(seed, i))
        elif kind == "explicit":
            from .jsonio import matrix_from_json
            for j, b in enumerate(item["points"]):
                pts.append(GridPoint(f"pt:{i}:{j}", matrix_from_json(b)))
        else:
            raise ConfigError(f"unknown grid kind {kind!r}")
    bad = [g.b_id for g in pts if g.b.shape != (m, m) or not in_omega(g.b, p)]
    if bad:
        raise ConfigError(f"grid points outside the certified domain: {bad[:5]}")
    return pts


# ---------------------------------------------------------------- Theta_n and Lambda_n

def _gn(model, n, b, tol, Jmax):
    G, _ = cauchy_series(SumModel(model, n), b, tol=tol, Jmax=Jmax)
    return G


def theta_n(model: OperatorModel, n: int, b, tol: float = 1e-12, Jmax: int = 96, G=None) -> np.ndarray:
    """``Theta_n(b) = b G_n(b) - 1 - eta(G_n(b)) G_n(b)``."""
    b = as_cmatrix(b)
    G = _gn(model, n, b, tol, Jmax) if G is None else G
    eta = model.covariance_map()
    return (b - model.a0) @ G - np.eye(model.m) - apply_eta(eta, G) @ G


def lambda_n(model: OperatorModel, n: int, b, tol: float = 1e-12, Jmax: int = 96, G=None) -> np.ndarray:
    """``Lambda_n(b) = b - Theta_n(b) G_n(b)^-1``."""
    b = as_cmatrix(b)
    G = _gn(model, n, b, tol, Jmax) if G is None else G
    th = theta_n(model, n, b, tol, Jmax, G)
    return b - th @ inverse(G)


def subordination_check(model: OperatorModel, n: int, b, tol: float = 1e-12, Jmax: int = 96,
                        G=None) -> float:
    """``||G(Lambda_n(b)) - G_n(b)||`` with ``G`` the semicircular limit."""
    b = as_cmatrix(b)
    G = _gn(model, n, b, tol, Jmax) if G is None else G
    lam = lambda_n(model, n, b, tol, Jmax, G)
    rep = solve_cauchy(SemicircularSpec.from_model(model), lam, tol=tol)
    return op_norm(rep.w - G)


# ---------------------------------------------------------------- sweeps

def fit_slope(n_values, diffs, n_min: int = SLOPE_MIN_N):
    """Least-squares slope of ``log diff`` against ``log n`` over ``n >= n_min``.

    Returns ``(slope, ci)`` with ``ci = 1.96`` standard errors.
    """
    n_values = np.asarray(n_values, dtype=float)
    diffs = np.asarray(diffs, dtype=float)
    keep = (n_values >= n_min) & (diffs > 0) & np.isfinite(diffs)
    if keep.sum() < 2:
        return math.nan, math.nan
    if keep.sum() == 2:
        x, y = np.log(n_values[keep]), np.log(diffs[keep])
        return float((y[1] - y[0]) / (x[1] - x[0])), math.nan
    res = stats.linregress(np.log(n_values[keep]), np.log(diffs[keep]))
    return float(res.slope), float(1.96 * res.stderr)


def trend_ok(values_by_n: dict, factor: float = TREND_FACTOR) -> bool:
    """No increasing trend: last value at most ``factor`` times the max of the first three."""
    vals = [v for _, v in sorted(values_by_n.items())]
    if len(vals) < 4:
        return True
    return vals[-1] <= factor * max(vals[:3])


def _rate_task(args):
    model, n, gp, tol, Jmax = args
    b = gp.b
    spec = SemicircularSpec.from_model(model)
    try:
        Gn = _gn(model, n, b, tol, Jmax)
        Gs = solve_cauchy(spec, b, tol=tol).w
        diff = op_norm(Gs - Gn)
        th = op_norm(theta_n(model, n, b, tol, Jmax, Gn))
        sub = subordination_check(model, n, b, tol, Jmax, Gn)
    except FreeCLTError as exc:
        return None, f"n={n} {gp.b_id}: {type(exc).__name__}: {exc}"
    nb = op_norm(b)
    return RateRow(n, gp.b_id, nb, diff, math.sqrt(n) * diff / nb, th, sub), None


def _map(func, tasks, workers: int):
    if workers and workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(func, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    return [func(t) for t in tasks]


def run_rate(e: RateExperiment) -> RateResult:
    """Sweep ``(n, b)``; the slope is fitted to the median difference over the grid.

    Failures at individual points are collected in ``failures`` and do not
    stop the sweep.
    """
    tasks = [(e.model, int(n), gp, e.tol, e.Jmax) for n in e.n_list for gp in e.grid]
    out = _map(_rate_task, tasks, e.workers)
    rows = [r for r, _ in out if r is not None]
    failures = [f for _, f in out if f is not None]
    ns = sorted({r.n for r in rows})
    med = [float(np.median([r.diff for r in rows if r.n == n])) for n in ns]
    slope, ci = fit_slope(ns, med)
    max_scaled = max((r.scaled for r in rows), default=math.nan)
    return RateResult(rows, slope, ci, max_scaled, failures)


@dataclass(frozen=True)
class PolyRow:
    n: int
    z: complex
    diff: float
    scaled: float


def poly_rate(p: NcPoly, family: FreeFamilySpec, n_list: Sequence[int], z_grid=None,
              cfg: CauchyEvalConfig = CauchyEvalConfig(), pencil: LinearPencil | None = None):
    """``|G_P(z) - G_{P_n}(z)|`` on ``|z| > R`` through the rescaled pencil.

    Both transforms are read off ``Lambda(z / mu^(g-1), mu)``: the limit by the
    fixed-point solver, ``S_n`` by the series engine.  Returns
    ``(rows, slope, slope_ci, R)``; ``z_grid`` defaults to 8 points on ``|z| = 1.5 R``.
    """
    if pencil is None:
        pencil = linearize(p, "bidiagonal" if p.degree > 1 else None)
    if pencil.m > 1 and not pencil.mu_validated:
        pencil = linearize(p, "bidiagonal")
    model = OperatorModel(pencil.a0, pencil.coeffs, family)
    N = max(norm_estimates(model, n_list).values())
    base = CauchyEvalConfig(**{**cfg.__dict__, "norm_bound": N})
    dom = series_domain(pencil, family, base)
    if z_grid is None:
        z_grid = [1.5 * dom.R * np.exp(2j * math.pi * (j + 0.25) / 8) for j in range(8)]
    g = max(p.degree, 1)
    rows = []
    for z in z_grid:
        z = complex(z)
        if not abs(z) > dom.R:
            raise ConfigError(f"|z| = {abs(z):.6g} not beyond R = {dom.R:.6g}")
        mu = max(abs(z) ** (1.0 / g), dom.mu0)
        lam = z / mu ** (g - 1)
        lim = mu_rescaled_eval(pencil, family, lam, mu, g,
                               CauchyEvalConfig(**{**base.__dict__, "engine": "fixed_point"}), dom)
        for n in n_list:
            ser = mu_rescaled_eval(pencil, family, lam, mu, g,
                                   CauchyEvalConfig(**{**base.__dict__, "engine": "series", "n": int(n)}), dom)
            d = abs(ser - lim)
            rows.append(PolyRow(int(n), z, d, math.sqrt(n) * d))
    ns = sorted({r.n for r in rows})
    med = [float(np.median([r.diff for r in rows if r.n == n])) for n in ns]
    slope, ci = fit_slope(ns, med)
    return rows, slope, ci, dom.R


# ---------------------------------------------------------------- Monte Carlo oracle

def _gue(N: int, rng) -> np.ndarray:
    # E|H_ij|^2 = 1/N: spectrum fills [-2, 2]
    z = rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))
    return (z + z.conj().T) / (2.0 * math.sqrt(N))


def _law_matrix(law, N: int, rng) -> np.ndarray:
    if law.kind == "semicircular":
        return math.sqrt(law.params[0]) * _gue(N, rng)
    if law.kind == "bernoulli":
        atoms, weights = (1.0, -1.0), (0.5, 0.5)
    elif law.kind == "two_atom":
        atoms, weights = law.params
    else:
        raise ConfigError(f"no matrix model for {law.kind!r} laws")
    k = int(round(weights[0] * N))
    diag = np.array([atoms[0]] * k + [atoms[1]] * (N - k), dtype=float)
    u = random_unitary(N, rng)
    return (u * diag) @ u.conj().T


def sample_family(family: FreeFamilySpec, N: int, rng) -> list:
    """Matrices realizing ``x^(1..d)`` via independent unitarily invariant base models."""
    base = [_law_matrix(law, N, rng) for law in family.base]
    mix = np.asarray(family.mixing, dtype=float)
    return [sum(mix[k, r] * base[r] for r in range(len(base))) for k in range(family.d)]


def _copy_matrix(model: OperatorModel, N: int, rng) -> np.ndarray:
    """``sum_k a_k (x) A_k`` for one free copy, index order (m, N)."""
    mats = sample_family(model.family, N, rng)
    return sum(np.kron(a, x) for a, x in zip(model.coeffs, mats))


def _partial_trace(r: np.ndarray, m: int, N: int) -> np.ndarray:
    return np.einsum("aibi->ab", r.reshape(m, N, m, N)) / N


def _mc_sample(args):
    model, n, b, N, seq = args
    rng = np.random.default_rng(seq)
    m = model.m
    s = sum(_copy_matrix(model, N, rng) for _ in range(n)) / math.sqrt(n)
    big = np.kron(b - model.a0, np.eye(N)) - s
    return _partial_trace(np.linalg.inv(big), m, N)


def mc_estimate(model: OperatorModel, n: int, b, N: int = 500, samples: int = 20, seed=0,
                workers: int = 1):
    """Monte Carlo estimate of ``E[(b (x) 1 - S_n)^-1]`` with ``N x N`` matrix models.

    Returns ``(G, stderr)`` where ``stderr`` is the Frobenius norm of the
    entrywise standard errors.
    """
    if N < 50:
        raise InvalidSize(f"matrix size N = {N} below 50")
    if samples < 1:
        raise InvalidSize("need at least one sample")
    b = as_cmatrix(b)
    seqs = np.random.SeedSequence(seed).spawn(samples)
    vals = np.array(_map(_mc_sample, [(model, n, b, N, s) for s in seqs], workers))
    mean = vals.mean(axis=0)
    if samples > 1:
        err = float(np.linalg.norm(vals.std(axis=0, ddof=1)) / math.sqrt(samples))
    else:
        err = math.inf
    return mean, err


def resolvent_identity_check(model: OperatorModel, n: int, i: int, b, N: int = 20, seed=0):
    """Residuals of the two resolvent expansions of ``R_n`` around ``R_n^[i]``.

    With ``R = (b - S_n)^-1`` and ``R_i = (b - S_n^[i])^-1`` on a matrix-model
    sample,

        R = R_i + n^-1/2 R_i X_i R_i + n^-1 R X_i R_i X_i R_i,
        R = R_i + n^-1/2 R_i X_i R.

    Returns the relative residuals of both.
    """
    if not 1 <= i <= n:
        raise PreconditionFailed(f"index i = {i} outside 1..{n}")
    if N < 1:
        raise InvalidSize("N must be positive")
    b = as_cmatrix(b)
    rng = np.random.default_rng(seed)
    xs = [_copy_matrix(model, N, rng) for _ in range(n)]
    sq = math.sqrt(n)
    s = sum(xs) / sq
    xi = xs[i - 1]
    s_i = s - xi / sq
    bb = np.kron(b - model.a0, np.eye(N))
    try:
        r = inverse(bb - s)
        ri = inverse(bb - s_i)
    except Singular:
        raise
    scale = max(op_norm(r), 1e-300)
    res1 = r - (ri + ri @ xi @ ri / sq + r @ xi @ ri @ xi @ ri / n)
    res2 = r - (ri + ri @ xi @ r / sq)
    return op_norm(res1) / scale, op_norm(res2) / scale


def default_workers() -> int:
    return max(1, os.cpu_count() or 1)
