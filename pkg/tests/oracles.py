"""Independent reference computations used by the test suite.

Everything here is deliberately naive: partitions are enumerated explicitly
and Cauchy series are summed word by word.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np


def set_partitions(j: int):
    """All set partitions of ``range(j)`` via restricted growth strings."""
    if j == 0:
        yield []
        return

    def rgs(prefix, top):
        if len(prefix) == j:
            blocks: dict = {}
            for i, lab in enumerate(prefix):
                blocks.setdefault(lab, []).append(i)
            yield list(blocks.values())
            return
        for lab in range(top + 2):
            yield from rgs(prefix + [lab], max(top, lab))

    yield from rgs([0], 0)


def is_noncrossing(blocks) -> bool:
    """No ``a < b < c < d`` with ``a, c`` in one block and ``b, d`` in another."""
    label = {}
    for k, blk in enumerate(blocks):
        for i in blk:
            label[i] = k
    n = len(label)
    for a, b, c, d in itertools.combinations(range(n), 4):
        if label[a] == label[c] and label[b] == label[d] and label[a] != label[b]:
            return False
    return True


def nc_partitions(j: int) -> list:
    return [p for p in set_partitions(j) if is_noncrossing(p)]


def catalan(j: int) -> int:
    return math.comb(2 * j, j) // (j + 1)


def brute_moments(cumulants, j_max: int) -> list:
    """Scalar moments ``m_1..m_jmax`` as sums over NC(j) of cumulant products."""
    out = []
    for j in range(1, j_max + 1):
        tot = 0
        for p in nc_partitions(j):
            term = 1
            for blk in p:
                term *= cumulants[len(blk) - 1]
            tot += term
        out.append(tot)
    return out


def brute_joint_moment(base_cumulants, mixing, word) -> complex:
    """``tau(x_w1 ... x_wj)`` for ``x_k = sum_r C[k, r] y_r`` with free ``y_r``.

    ``base_cumulants[r][s - 1]`` is the order-s cumulant of ``y_r``; letters
    are 1-based.  Mixed cumulants of distinct ``y_r`` vanish, so each block
    picks a single base law.
    """
    w = [k - 1 for k in word]
    nb = len(base_cumulants)
    tot = 0
    for p in nc_partitions(len(w)):
        term = 1
        for blk in p:
            s = 0
            for r in range(nb):
                c = base_cumulants[r][len(blk) - 1]
                for i in blk:
                    c *= mixing[w[i]][r]
                s += c
            term *= s
            if term == 0:
                break
        tot += term
    return tot


def word_series_cauchy(coeffs, moment, b, J: int) -> np.ndarray:
    """``sum_{j <= J} sum_{|w| = j} tau(x_w) c a_w1 c a_w2 ... c`` with ``c = b^-1``.

    ``moment(word)`` returns the scalar joint moment of a 1-based word.
    """
    c = np.linalg.inv(np.asarray(b, dtype=complex))
    d = len(coeffs)
    G = c.copy()
    for j in range(1, J + 1):
        for word in itertools.product(range(1, d + 1), repeat=j):
            mom = moment(word)
            if mom == 0:
                continue
            prod = c
            for k in word:
                prod = prod @ coeffs[k - 1] @ c
            G = G + complex(mom) * prod
    return G


# ---- closed forms

def semicircle_cauchy(z, variance=1.0):
    """``(z - sqrt(z^2 - 4v)) / (2v)`` on the branch with ``G ~ 1/z``."""
    z = complex(z)
    r = 2.0 * math.sqrt(variance)
    root = np.sqrt(z - r) * np.sqrt(z + r)
    return (z - root) / (2.0 * variance)


def atomic_cauchy(z, atoms, weights):
    return sum(w / (complex(z) - a) for a, w in zip(atoms, weights))


def bernoulli_cauchy(z):
    z = complex(z)
    return z / (z * z - 1.0)


def sc_square_cauchy(z):
    """Cauchy transform of ``s^2`` (free Poisson, rate 1): ``(z - sqrt(z^2 - 4z)) / (2z)``."""
    z = complex(z)
    root = np.sqrt(z) * np.sqrt(z - 4.0)
    return (z - root) / (2.0 * z)


def semicircle_moments(j_max: int, variance=Fraction(1)):
    return [0 if j % 2 else catalan(j // 2) * variance ** (j // 2) for j in range(1, j_max + 1)]


_NC_CACHE: dict = {}


def nc_partitions_cached(j: int) -> list:
    if j not in _NC_CACHE:
        _NC_CACHE[j] = nc_partitions(j)
    return _NC_CACHE[j]


def brute_joint_moments_all_words(base_cumulants, mixing, j: int, dtype=float):
    """:func:`brute_joint_moment` for every word of length ``j`` at once.

    With ``dtype=np.int64`` and integer data the result is exact.  Returns
    ``(words, values)`` with ``words`` in lexicographic order.
    """
    mix = np.asarray(mixing, dtype=dtype)
    kap = np.asarray(base_cumulants, dtype=dtype)          # (n_base, order)
    d = mix.shape[0]
    words = np.array(list(itertools.product(range(d), repeat=j)), dtype=int).reshape(-1, j)
    coef = mix[words]                                       # (n_words, j, n_base)
    vals = np.zeros(len(words), dtype=dtype)
    for p in nc_partitions_cached(j):
        term = np.ones(len(words), dtype=dtype)
        for blk in p:
            prod = np.prod(coef[:, blk, :], axis=1)         # (n_words, n_base)
            term *= prod @ kap[:, len(blk) - 1]
        vals += term
    return words + 1, vals
