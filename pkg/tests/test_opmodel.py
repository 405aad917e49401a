import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from freeclt.errors import ConfigError, DimensionMismatch, Divergent, OrderExceeded, Singular
from freeclt.freemoments import FreeFamilySpec, bernoulli, custom_moments, joint_moment, semicircular, two_atom
from freeclt.matlin import OmegaParams, in_omega, inverse, op_norm, random_omega_point
from freeclt.opmodel import (CovarianceMap, OperatorModel, SumModel, alpha, apply_eta, cauchy_series,
                             eta_bound, model_norm_estimate, resolvent_member)
from oracles import atomic_cauchy, bernoulli_cauchy, semicircle_cauchy, word_series_cauchy
from conftest import hermitian

SC = FreeFamilySpec.free([semicircular()])


def scalar(family, a=1.0):
    return OperatorModel.centered([[[a]]], family)


def test_eta_examples():
    assert eta_bound(CovarianceMap(np.array([[[1.0]]]), np.eye(1))) == 1.0
    assert eta_bound(CovarianceMap(np.array([[[2.0]]]), np.eye(1))) == 4.0
    zero = CovarianceMap(np.array([[[2.0]]]), np.zeros((1, 1)))
    assert eta_bound(zero) == 0.0
    assert np.all(apply_eta(zero, np.ones((1, 1))) == 0)
    with pytest.raises(DimensionMismatch):
        apply_eta(CovarianceMap(np.zeros((1, 2, 2)), np.eye(1)), np.eye(3))


def test_eta_linear_and_positive(rng):
    a = [hermitian(rng, 3) for _ in range(2)]
    eta = CovarianceMap(np.array(a), np.array([[1.0, 0.3], [0.3, 2.0]]))
    x, y = rng.standard_normal((2, 3, 3)) + 1j * rng.standard_normal((2, 3, 3))
    assert np.allclose(apply_eta(eta, 2 * x - 1j * y), 2 * apply_eta(eta, x) - 1j * apply_eta(eta, y))
    for _ in range(20):
        z = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        assert np.linalg.eigvalsh(apply_eta(eta, z @ z.conj().T)).min() > -1e-12


def test_alpha_examples(rng):
    assert np.allclose(alpha(scalar(SC)), [[1.0]])
    a = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    assert np.allclose(alpha(OperatorModel.centered([a], SC)), a.conj().T @ a)
    assert np.allclose(alpha(OperatorModel.centered([np.zeros((2, 2))], SC)), 0)


def test_series_scalar_semicircle():
    G, tail = cauchy_series(scalar(SC), [[3.0]], tol=1e-10, Jmax=200)
    assert abs(G[0, 0] - (3 - math.sqrt(5)) / 2) < 1e-10
    assert tail < 1e-10
    G, _ = cauchy_series(scalar(SC), [[100.0]])
    assert G[0, 0] == pytest.approx(0.01000100020, abs=1e-11)
    with pytest.raises(Singular):
        cauchy_series(scalar(SC), np.zeros((1, 1)))


def test_series_limits():
    with pytest.raises(Divergent):
        cauchy_series(scalar(SC), [[1.0]])
    with pytest.raises(OrderExceeded):
        cauchy_series(scalar(SC), [[3.0]], Jmax=8)
    with pytest.raises(OrderExceeded):
        cauchy_series(scalar(FreeFamilySpec.free([custom_moments([0.0, 1.0, 0.0, 2.0])])), [[50.0]], Jmax=16)


@pytest.mark.parametrize("z", [10.0, -7.0, 5j, 4.0 - 6.0j])
def test_series_scalar_closed_forms(z):
    ref = {
        "sc": semicircle_cauchy(z),
        "bern": bernoulli_cauchy(z),
        "skew": atomic_cauchy(z, (2.0, -0.5), (0.2, 0.8)),
    }
    for key, law in (("sc", semicircular()), ("bern", bernoulli()), ("skew", two_atom())):
        G, _ = cauchy_series(scalar(FreeFamilySpec.free([law])), [[z]], Jmax=96)
        assert abs(G[0, 0] - ref[key]) < 1e-11


def test_series_matches_word_enumeration(rng):
    fam = FreeFamilySpec.free([bernoulli(), two_atom()], mixing=[[1.0, 0.5], [0.0, 1.0]])
    a = [hermitian(rng, 2, 0.5), rng.standard_normal((2, 2)) * 0.5]
    model = OperatorModel.centered(a, fam)
    # far enough out that the truncated word sum is accurate to ~1e-14
    b = 25 * np.eye(2) + rng.standard_normal((2, 2))
    G, _ = cauchy_series(model, b, tol=1e-14, Jmax=40)
    ref = word_series_cauchy(a, lambda w: joint_moment(fam, w), b, J=10)
    assert op_norm(G - ref) < 1e-11


def test_constant_term_shifts_argument(rng):
    fam = FreeFamilySpec.free([two_atom()])
    a1 = hermitian(rng, 2)
    a0 = hermitian(rng, 2)
    b = 15 * np.eye(2) + 2j * np.eye(2)
    G0, _ = cauchy_series(OperatorModel(a0, [a1], fam), b, Jmax=96)
    G1, _ = cauchy_series(OperatorModel.centered([a1], fam), b - a0, Jmax=96)
    assert op_norm(G0 - G1) < 1e-12


def test_sum_model_n1_and_limit(rng):
    fam = FreeFamilySpec.free([two_atom()])
    model = OperatorModel.centered([hermitian(rng, 2)], fam)
    b = 12 * np.eye(2)
    G, _ = cauchy_series(model, b, Jmax=96)
    G1, _ = cauchy_series(SumModel(model, 1), b, Jmax=96)
    assert np.array_equal(G, G1)
    sc = OperatorModel.centered(model.coeffs, FreeFamilySpec.free([semicircular()]))
    Gs, _ = cauchy_series(sc, b, Jmax=96)
    diffs = [op_norm(cauchy_series(SumModel(model, n), b, Jmax=96)[0] - Gs) for n in (4, 16, 64)]
    assert diffs[0] > diffs[1] > diffs[2]


def _random_model(rng, m, d, law_kinds):
    fam = FreeFamilySpec.free(law_kinds)
    return OperatorModel.centered([hermitian(rng, m) / m for _ in range(d)], fam)


def test_mapping_and_inverse_bounds(rng):
    """For ||b^-1|| < theta/N: ||G|| < theta/(1-theta)/N; on Omega also ||G^-1|| < ||b||/(1-sigma)."""
    p = OmegaParams()
    assert p.theta / (1 - p.theta) < p.sigma / p.c
    violations = 0
    models = [_random_model(rng, m, d, laws) for m in (1, 2, 3) for d in (1, 2)
              for laws in ([bernoulli()] * d, [two_atom()] * d)]
    for k in range(300):
        model = models[k % len(models)]
        N = model_norm_estimate(model)
        kappa = p.theta / N
        b = random_omega_point(model.m, kappa, p.c, rng)
        assert in_omega(b, OmegaParams(kappa=kappa))
        G, _ = cauchy_series(model, b)
        violations += not op_norm(G) < p.theta / (1 - p.theta) / N
        violations += not op_norm(inverse(G)) < op_norm(b) / (1 - p.sigma)
    assert violations == 0


def test_resolvent_member():
    model = scalar(FreeFamilySpec.free([bernoulli()]), a=1 / 1.1)  # norm estimate 1
    assert model_norm_estimate(model) == pytest.approx(1.0)
    assert resolvent_member(model, 10 * np.eye(1)).status is True
    assert resolvent_member(model, 0.5 * np.eye(1)).status is None
    assert resolvent_member(model, np.zeros((1, 1))).certificate == "unknown"


def test_model_json_round_trip(rng):
    fam = FreeFamilySpec.free([bernoulli(), semicircular(2.0)])
    model = OperatorModel(hermitian(rng, 2), [hermitian(rng, 2), hermitian(rng, 2)], fam)
    back = OperatorModel.from_json(model.to_json())
    assert np.array_equal(back.a0, model.a0) and np.array_equal(back.coeffs, model.coeffs)
    with pytest.raises(ConfigError):
        OperatorModel.from_json({**model.to_json(), "bogus": 1})
    with pytest.raises(DimensionMismatch):
        OperatorModel.centered([np.eye(2)], fam)


@settings(max_examples=25, deadline=None)
@given(st.floats(6.0, 50.0), st.floats(0, 2 * math.pi))
def test_series_bernoulli_closed_form_property(r, phase):
    z = r * complex(math.cos(phase), math.sin(phase))
    G, _ = cauchy_series(scalar(FreeFamilySpec.free([bernoulli()])), [[z]], Jmax=96)
    assert abs(G[0, 0] - bernoulli_cauchy(z)) < 1e-11
