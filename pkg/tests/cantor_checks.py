"""Invariant checkers shared by the unit and acceptance suites."""

import numpy as np

from weakdep.cantor import sub_blocks
from weakdep.constants import gap_ratio_c0


def hull(s):
    p = s.pairs()
    return p[0][0], p[-1][1]


def check_blocks(b):
    A, ell, g, c0 = b.A, b.ell, b.gamma, b.c0
    iv = b.intervals
    n, d = b.n, b.d
    assert iv.shape == (2**ell, 2)
    assert np.all(iv[:, 1] - iv[:, 0] + 1 == n[ell])
    assert iv[0, 0] >= 1 and iv[-1, 1] <= A
    assert np.all(iv[1:, 0] > iv[:-1, 1])
    assert b.card == 2**ell * n[ell] == int((iv[:, 1] - iv[:, 0] + 1).sum())
    assert A / 2 <= b.card <= A
    assert n[ell] <= A * 2.0**-ell
    assert A - b.card == sum(2**j * d[j] for j in range(ell))
    for j in range(ell):
        assert d[j] % 2 == n[j] % 2
        assert n[j + 1] * 2 == n[j] - d[j]
        assert d[j] >= c0 * A * 2.0 ** (-min(ell, j / g) - 2) - 1e-9
    for k in range(1, ell + 1):
        for m in range(1, 2 ** (k - 1) + 1):
            left = hull(sub_blocks(b, k, 2 * m - 1))
            right = hull(sub_blocks(b, k, 2 * m))
            assert right[0] - left[1] - 1 == d[k - 1]
            assert left[1] - left[0] == right[1] - right[0]


def check_trace(tr, c0):
    A, ell = tr.A, tr.ell
    pieces = [p for s in tr.stages for p in s.indices.pairs()] + tr.remainder.pairs()
    pieces.sort()
    assert pieces[0][0] == 1 and pieces[-1][1] == A
    for (a, b), (c, _) in zip(pieces, pieces[1:]):
        assert c == b + 1
    assert sum(s.indices.card for s in tr.stages) + tr.remainder.card == A
    A_seq = tr.A_seq
    assert 1 <= tr.m_A <= ell
    assert A_seq[-1] <= A * 2.0**-ell
    for i, s in enumerate(tr.stages):
        assert A_seq[i + 1] == s.A_i - s.blocks.card
        assert A_seq[i + 1] >= c0 * s.A_i / 3 - 1e-9
        assert s.A_i * 2.0**-s.ell_i <= A * 2.0**-ell * (1 + 1e-9)
        assert s.A_i * 2.0 ** -(s.ell_i - 1) > A * 2.0**-ell
        check_blocks(s.blocks)


def random_admissible(rng, A_max=10**5):
    g = float(rng.choice([0.3, 0.5, 0.7]))
    c0 = gap_ratio_c0(g)
    ell = int(rng.integers(1, 6))
    lo = int(np.ceil(2**ell * max(1.0, 2.0 / c0)))
    return int(rng.integers(lo, A_max + 1)), ell, g, c0
