"""Acceptance suite: one test per criterion, each reporting a single pass/fail line."""

import itertools
import math
import time
from fractions import Fraction

import numpy as np
import pytest

from freeclt.cltlab import (RateExperiment, certified_params, default_workers, lambda_grid, lambda_n,
                            mc_estimate, random_grid, ray_grid, resolvent_identity_check, run_rate,
                            theta_n, trend_ok)
from freeclt.freemoments import (FreeFamilySpec, bernoulli, cumulants_from_moments, custom_moments,
                                 joint_moment, moments_from_cumulants, semicircular, two_atom)
from freeclt.linpoly import NcPoly, linearize, scalar_cauchy_from_pencil, validate_pencil
from freeclt.matlin import (OmegaParams, in_omega, inverse, neumann_inverse_bound,
                            op_norm, random_omega_point)
from freeclt.opmodel import OperatorModel, SumModel, cauchy_series, model_norm_estimate
from freeclt.scsolver import SemicircularSpec, certify_domain, solve_cauchy, uniqueness_probe
from freeclt.spectra import (Cdf, cdf_from_density, density_from_cauchy, kolmogorov, oracle_cdf,
                             oracle_density, pencil_evaluator)
from conftest import hermitian
from oracles import brute_joint_moment, brute_joint_moments_all_words, sc_square_cauchy

SWAP = np.array([[0.0, 1.0], [1.0, 0.0]])
RATE_NS = (4, 8, 16, 32, 64, 128, 256)


def semicircular_model(rng, m, d):
    fam = FreeFamilySpec.free([semicircular(float(v)) for v in rng.uniform(0.5, 2.0, d)])
    return OperatorModel.centered([hermitian(rng, m) / math.sqrt(m) for _ in range(d)], fam)


def certified_inputs(rng, count, m_max=4, d_max=2):
    """Random ``(model, spec, params, b)`` with ``b`` certified for the semicircular solver."""
    out = []
    while len(out) < count:
        model = semicircular_model(rng, int(rng.integers(1, m_max + 1)), int(rng.integers(1, d_max + 1)))
        spec = SemicircularSpec.from_model(model)
        p = spec.default_params()
        b = random_omega_point(model.m, p.kappa, p.c, rng)
        if certify_domain(spec, b, p, spec.alpha_norm()):
            out.append((model, spec, p, b))
    return out


# ---------------------------------------------------------------- 1

def test_criterion_01_scalar_semicircle(acceptance):
    spec = SemicircularSpec.scalar(1.0)
    b = np.array([[3.0]])
    solve_cauchy(spec, b)
    times = []
    for _ in range(50):
        t0 = time.perf_counter()
        rep = solve_cauchy(spec, b)
        times.append(time.perf_counter() - t0)
    err = abs(rep.w[0, 0] - (3 - math.sqrt(5)) / 2)
    best = min(times)
    ok = err < 1e-10 and best < 1e-3
    acceptance(1, ok, f"|w - (3-sqrt5)/2| = {err:.2e} (< 1e-10), runtime {best * 1e3:.3f} ms (< 1 ms)")
    assert ok


# ---------------------------------------------------------------- 2

def test_criterion_02_engine_cross_validation(acceptance):
    rng = np.random.default_rng(2)
    t0 = time.perf_counter()
    inputs = certified_inputs(rng, 200)
    worst = 0.0
    for model, spec, p, b in inputs:
        G, _ = cauchy_series(model, b)
        worst = max(worst, op_norm(solve_cauchy(spec, b, p=p).w - G))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-8 and elapsed < 30
    acceptance(2, ok, f"max |solver - series| = {worst:.2e} over {len(inputs)} points (< 1e-8), {elapsed:.1f} s (< 30 s)")
    assert ok


# ---------------------------------------------------------------- 3

def test_criterion_03_uniqueness(acceptance):
    rng = np.random.default_rng(3)
    inputs = certified_inputs(rng, 30)
    spreads = [uniqueness_probe(spec, b, starts=20, seed=k, p=p) for k, (_, spec, p, b) in enumerate(inputs)]
    worst = max(spreads)
    ok = worst < 1e-9
    acceptance(3, ok, f"max pairwise spread {worst:.2e} over {len(inputs)} certified inputs x 20 starts (< 1e-9)")
    assert ok


# ---------------------------------------------------------------- 4

def test_criterion_04_bound_suite(acceptance):
    rng = np.random.default_rng(4)
    p = OmegaParams()
    assert p.theta / (1 - p.theta) < p.sigma / p.c
    laws = [[bernoulli()], [two_atom()], [bernoulli(), two_atom()], [semicircular(), two_atom()]]
    models = [OperatorModel.centered([hermitian(rng, m) / m for _ in law], FreeFamilySpec.free(law))
              for m in (1, 2, 3) for law in laws]
    v_est0 = v_est = v_inv = v_neu = 0
    for k in range(1000):
        model = models[k % len(models)]
        N = model_norm_estimate(model)
        # ||b^-1|| < theta / N only
        c = random_omega_point(model.m, p.theta / N, 50.0, rng)
        G, _ = cauchy_series(model, c, Jmax=96)
        v_est0 += not op_norm(G) < p.theta / (1 - p.theta) / N
        # Omega: adds the condition-number bound
        b = random_omega_point(model.m, p.theta / N, p.c, rng)
        G, _ = cauchy_series(model, b, Jmax=96)
        v_est += not op_norm(G) < p.theta / (1 - p.theta) / N
        v_inv += not op_norm(inverse(G)) < op_norm(b) / (1 - p.sigma)
        # Neumann perturbation bound
        m = int(rng.integers(1, 7))
        x = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m)) + 2.5 * np.eye(m)
        s = float(rng.uniform(0.05, 0.95))
        e = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
        e *= rng.uniform(0, 1) * s / (op_norm(inverse(x)) * op_norm(e))
        try:
            v_neu += not op_norm(inverse(x + e)) <= neumann_inverse_bound(x, x + e, s) * (1 + 1e-12)
        except AssertionError:
            v_neu += 1
    ok = v_est0 == v_est == v_inv == v_neu == 0
    acceptance(4, ok, f"violations over 1000 inputs each: ||G|| image bound {v_est0}, ||G|| on Omega {v_est}, "
                      f"||G^-1|| {v_inv}, Neumann {v_neu}")
    assert ok


# ---------------------------------------------------------------- 5

def test_criterion_05_semicircular_stability(acceptance):
    rng = np.random.default_rng(5)
    models = [OperatorModel.centered([[[1.0]]], FreeFamilySpec.free([semicircular()])),
              semicircular_model(rng, 2, 2)]
    worst_diff = worst_theta = worst_shift = 0.0
    for model in models:
        _, star = certified_params(model, range(1, 65))
        grid = ray_grid(model.m, star, factors=(1.1, 2.0), phases=4) + random_grid(model.m, star, 4, seed=5)
        spec = SemicircularSpec.from_model(model)
        for gp in grid:
            Gs = solve_cauchy(spec, gp.b).w
            for n in range(1, 65):
                Gn, _ = cauchy_series(SumModel(model, n), gp.b, Jmax=96)
                worst_diff = max(worst_diff, op_norm(Gs - Gn))
                worst_theta = max(worst_theta, op_norm(theta_n(model, n, gp.b, G=Gn)))
                worst_shift = max(worst_shift, op_norm(lambda_n(model, n, gp.b, G=Gn) - gp.b))
    ok = max(worst_diff, worst_theta, worst_shift) < 1e-9
    acceptance(5, ok, f"n = 1..64: max ||G_s - G_Sn|| {worst_diff:.1e}, ||Theta_n|| {worst_theta:.1e}, "
                      f"||Lambda_n(b) - b|| {worst_shift:.1e} (< 1e-9)")
    assert ok


# ---------------------------------------------------------------- 6, 7, 8 share one sweep

def _rate_models():
    out = {}
    for name, law in (("bernoulli", bernoulli()), ("two_atom", two_atom())):
        fam = FreeFamilySpec.free([law])
        out[(name, 1)] = OperatorModel.centered([[[1.0]]], fam)
        out[(name, 2)] = OperatorModel.centered([SWAP], fam)
    return out


def _rate_grid(model):
    omega_n, star = certified_params(model, RATE_NS)
    grid = (ray_grid(model.m, star, factors=(1.1, 2.0), phases=4) + lambda_grid(model.m, star, phases=2)
            + random_grid(model.m, star, 4, seed=6))
    return omega_n, star, tuple(grid)


@pytest.fixture(scope="module")
def rate_sweeps():
    t0 = time.perf_counter()
    out = {}
    workers = min(default_workers(), 8)
    for key, model in _rate_models().items():
        omega_n, star, grid = _rate_grid(model)
        res = run_rate(RateExperiment(model, RATE_NS, grid, workers=workers))
        out[key] = (model, omega_n, star, grid, res)
    return out, time.perf_counter() - t0


def test_criterion_06_berry_esseen_consistency(acceptance, rate_sweeps):
    sweeps, elapsed = rate_sweeps
    parts = []
    ok = elapsed < 300
    for (name, m), (_, _, _, _, res) in sweeps.items():
        trend = trend_ok(res.max_scaled_by_n())
        lo, hi = (-1.15, -0.85) if name == "bernoulli" else (-1.1, -0.45)
        in_range = lo <= res.slope <= hi
        ok &= trend and in_range and not res.failures
        parts.append(f"{name} m={m}: slope {res.slope:.3f} in [{lo}, {hi}] {in_range}, trend ok {trend}")
    acceptance(6, ok, "; ".join(parts) + f"; {elapsed:.1f} s (< 300 s)")
    assert ok


def test_criterion_07_theta_decay(acceptance, rate_sweeps):
    sweeps, _ = rate_sweeps
    parts = []
    ok = True
    for (name, m), (_, _, _, _, res) in sweeps.items():
        scaled = {n: math.sqrt(n) * v for n, v in res.max_theta_by_n().items()}
        trend = trend_ok(scaled)
        ok &= trend
        parts.append(f"{name} m={m}: sqrt(n) sup||Theta_n|| {min(scaled.values()):.3g}..{max(scaled.values()):.3g} "
                     f"trend ok {trend}")
    acceptance(7, ok, "; ".join(parts))
    assert ok


def test_criterion_08_subordination(acceptance, rate_sweeps):
    sweeps, _ = rate_sweeps
    worst = 0.0
    outside = 0
    count = 0
    for (name, m), (model, omega_n, star, grid, res) in sweeps.items():
        worst = max([worst] + [r.subord_resid for r in res.rows if r.n >= 64])
        for n in (64, 128, 256):
            for gp in grid:
                count += 1
                outside += not in_omega(lambda_n(model, n, gp.b), omega_n)
    ok = worst < 1e-6 and outside == 0
    acceptance(8, ok, f"n >= 64: max ||G(Lambda_n(b)) - G_n(b)|| {worst:.1e} (< 1e-6), "
                      f"Lambda_n(b) outside Omega_n: {outside}/{count}")
    assert ok


# ---------------------------------------------------------------- 9

def test_criterion_09_linearization_contract(acceptance):
    polys = ["x1", "x1^2", "x1^3", "x1*x2 + x2*x1", "x1^2 + x2^2"]
    worst_pen = max(validate_pencil(NcPoly.parse(t), linearize(NcPoly.parse(t)), trials=100, N=6, seed=9)
                    for t in polys)
    fam = FreeFamilySpec.free([two_atom(), bernoulli()])
    model = OperatorModel.centered([SWAP, np.diag([1.0, -0.5])], fam)
    worst_res = 0.0
    for n, i in ((1, 1), (2, 1), (5, 3), (8, 8)):
        for b in (6 * np.eye(2) + 1j * np.eye(2), np.array([[5.0, 1.0], [0.0, -7.0 + 2j]])):
            worst_res = max(worst_res, *resolvent_identity_check(model, n, i, b, N=20, seed=n))
    ok = worst_pen < 1e-10 and worst_res < 1e-10
    acceptance(9, ok, f"max pencil residual {worst_pen:.1e} (5 polynomials, 100 trials, N=6), "
                      f"max resolvent identity residual {worst_res:.1e} (< 1e-10)")
    assert ok


# ---------------------------------------------------------------- 10

def test_criterion_10_polynomial_cauchy_oracle(acceptance):
    pen = linearize(NcPoly.parse("x1^2"))
    fam = FreeFamilySpec.free([semicircular()])
    g10 = scalar_cauchy_from_pencil(pen, fam, 10)
    ok_a = abs(g10 - 0.11270167) < 1e-8 and abs(g10 - sc_square_cauchy(10)) < 1e-8
    circle = np.exp(2j * math.pi * np.arange(12) / 12)
    asym = {}
    for R, tol in ((1e3, 1e-2), (1e4, 1e-4)):
        asym[R] = (max(abs(lam * scalar_cauchy_from_pencil(pen, fam, lam) - 1) for lam in R * circle), tol)
    ok_b = asym[1e3][0] < asym[1e3][1]
    ok_c = asym[1e4][0] < asym[1e4][1]
    ok = ok_a and ok_b and ok_c
    acceptance(10, ok, f"G(10) = {g10.real:.10f} (|err| {abs(g10 - 0.11270167):.1e}); "
                       f"max |lam G - 1| on |lam|=1e3: {asym[1e3][0]:.4e} (< 1e-2); "
                       f"on |lam|=1e4: {asym[1e4][0]:.6e} (< 1e-4)")
    assert ok


# ---------------------------------------------------------------- 11

def test_criterion_11_density_pipeline(acceptance):
    t0 = time.perf_counter()
    fam = FreeFamilySpec.free([semicircular()])
    x = np.linspace(-2.5, 2.5, 401)
    d = density_from_cauchy(pencil_evaluator(linearize(NcPoly.parse("x1")), fam), x)
    sup_sc = float(np.max(np.abs(d.values - oracle_density("semicircle", x))))
    ks = kolmogorov(cdf_from_density(d), Cdf(x, oracle_cdf("semicircle", x)))
    xs = np.linspace(-0.5, 4.5, 401)
    ds = density_from_cauchy(pencil_evaluator(linearize(NcPoly.parse("x1^2")), fam), xs)
    keep = xs >= 0.1
    sup_sq = float(np.max(np.abs(ds.values - oracle_density("sc_square", xs))[keep]))
    elapsed = time.perf_counter() - t0
    ok = sup_sc < 1e-2 and ks < 5e-3 and sup_sq < 2e-2 and elapsed < 120
    acceptance(11, ok, f"semicircle sup error {sup_sc:.2e} (< 1e-2), Kolmogorov {ks:.1e} (< 5e-3), "
                       f"sc_square sup error (x >= 0.1) {sup_sq:.2e} (< 2e-2), {elapsed:.1f} s (< 120 s)")
    assert ok


# ---------------------------------------------------------------- 12

def test_criterion_12_monte_carlo(acceptance):
    t0 = time.perf_counter()
    N, samples = 500, 20
    cases = [
        ("semicircular m=1 n=1", OperatorModel.centered([[[1.0]]], FreeFamilySpec.free([semicircular()])), 1,
         np.array([[3.0 + 1.0j]])),
        ("semicircular m=2 n=4", OperatorModel.centered([SWAP], FreeFamilySpec.free([semicircular()])), 4,
         np.array([[3.0 + 1.0j, 0.5], [0.0, -3.5 + 0.5j]])),
        ("bernoulli m=1 n=4", OperatorModel.centered([[[1.0]]], FreeFamilySpec.free([bernoulli()])), 4,
         np.array([[0.5 + 3.0j]])),
        ("bernoulli m=2 n=4", OperatorModel.centered([SWAP], FreeFamilySpec.free([bernoulli()])), 4,
         np.array([[3.0 + 1.0j, 0.5], [0.0, -3.5 + 0.5j]])),
    ]
    ok = True
    parts = []
    workers = min(default_workers(), 8)
    for name, model, n, b in cases:
        G, err = mc_estimate(model, n, b, N=N, samples=samples, seed=12, workers=workers)
        ref, _ = cauchy_series(SumModel(model, n), b, Jmax=96)
        dist = op_norm(G - ref)
        bound = 3 * err + 10 / N
        ok &= dist < bound
        parts.append(f"{name}: {dist:.1e} < {bound:.1e}")
    G1, e1 = mc_estimate(cases[2][1], 4, cases[2][3], N=N, samples=samples, seed=12, workers=1)
    G2, e2 = mc_estimate(cases[2][1], 4, cases[2][3], N=N, samples=samples, seed=12, workers=workers)
    same = np.array_equal(G1, G2) and e1 == e2
    elapsed = time.perf_counter() - t0
    ok &= same and elapsed < 180
    acceptance(12, ok, "; ".join(parts) + f"; seed-deterministic {same}; {elapsed:.1f} s (< 180 s)")
    assert ok


# ---------------------------------------------------------------- 13

def test_criterion_13_combinatorics(acceptance):
    rng = np.random.default_rng(13)
    # exact round trip at order 16
    seqs = [semicircular(Fraction(1)).moments(16, exact=True).values, bernoulli().moments(16, exact=True).values,
            two_atom().moments(16, exact=True).values]
    seqs += [tuple(Fraction(int(a), int(b)) for a, b in zip(rng.integers(-9, 10, 16), rng.integers(1, 12, 16)))
             for _ in range(10)]
    round_trip = all(moments_from_cumulants(cumulants_from_moments(list(s))).values == tuple(s) for s in seqs)

    # integer family: exact comparison for every word with j <= 8, d = 3
    riordan = custom_moments([0, 1, 1, 3, 6, 15, 36, 91])      # centered free Poisson
    mix = [[1, 0, 2], [0, 1, -1], [1, 1, 0]]
    int_fam = FreeFamilySpec.free([semicircular(Fraction(1)), bernoulli(), riordan], mixing=mix, exact=True)
    kap = [[int(v) for v in k] for k in int_fam.base_cumulants(8)]
    mismatches = checked = 0
    for j in range(1, 9):
        words, ref = brute_joint_moments_all_words(kap, mix, j, dtype=np.int64)
        for w, r in zip(words, ref):
            checked += 1
            mismatches += joint_moment(int_fam, tuple(w)) != int(r)

    # rational family with the skewed law: exact up to j = 6, floats to 1e-12 for j = 7, 8
    rat_mix = [[1, Fraction(1, 2), 0], [0, 1, -1], [2, Fraction(1, 3), 1]]
    rat_fam = FreeFamilySpec.free([two_atom(), bernoulli(), semicircular(Fraction(1, 2))], mixing=rat_mix, exact=True)
    rkap = rat_fam.base_cumulants(8)
    for j in range(1, 7):
        for w in itertools.product((1, 2, 3), repeat=j):
            checked += 1
            mismatches += joint_moment(rat_fam, w) != brute_joint_moment(rkap, rat_mix, w)
    flt_fam = FreeFamilySpec.free([two_atom(), bernoulli(), semicircular(0.5)],
                                  mixing=[[1, 0.5, 0], [0, 1, -1], [2, 1 / 3, 1]])
    for j in (7, 8):
        words, ref = brute_joint_moments_all_words(flt_fam.base_cumulants(8), flt_fam.mixing, j)
        for w, r in zip(words, ref):
            checked += 1
            mismatches += abs(joint_moment(flt_fam, tuple(w)) - r) > 1e-12 * max(1.0, abs(r))
    ok = round_trip and mismatches == 0
    acceptance(13, ok, f"exact round trip at order 16 on {len(seqs)} sequences: {round_trip}; "
                       f"joint moments vs NC(j) brute force: {mismatches} mismatches in {checked} words (j <= 8, d = 3)")
    assert ok
