import math

import numpy as np
import pytest

from qmcts.grid import TorusGrid
from qmcts.potential import (build_cosine_potential, check_summability,
                             decay_sequences, evaluate, evaluate_batch)


def naive_sum(pot, xi, x):
    total = np.full_like(x, pot.offset)
    for j, (mode, c) in enumerate(zip(pot.modes, xi)):
        total = total + mode.strength * c * np.cos((j + 1) * x)
    return total


def test_evaluate_matches_naive_double_loop():
    pot = build_cosine_potential(alpha=2.5, m=6)
    g = TorusGrid(64)
    rng = np.random.default_rng(11)
    for _ in range(5):
        xi = rng.normal(size=6)
        got = evaluate(pot, xi, g)
        want = naive_sum(pot, xi, g.nodes)
        assert np.max(np.abs(got - want)) < 1e-14


def test_evaluate_batch_matches_scalar_path():
    pot = build_cosine_potential(alpha=4.5, m=4, offset=0.3)
    g = TorusGrid(32)
    xis = np.random.default_rng(2).normal(size=(7, 4))
    batch = evaluate_batch(pot, xis, g)
    for i in range(7):
        assert np.array_equal(batch[i], evaluate(pot, xis[i], g))


def test_cosine_strengths_and_norms():
    alpha = 2.25
    pot = build_cosine_potential(alpha=alpha, m=5)
    for j, mode in enumerate(pot.modes, start=1):
        assert mode.strength == pytest.approx(j ** (-alpha))
        assert mode.sup_norm == 1.0
        assert mode.deriv_sup_norm == j


def test_decay_sequence_uses_larger_sup():
    # |v_j|_inf = 1, |v_j'|_inf = j, so b_j = j^(-alpha) * j = j^(1-alpha)
    pot = build_cosine_potential(alpha=4.5, m=6)
    rep = decay_sequences(pot)
    want = np.array([j ** (1.0 - 4.5) for j in range(1, 7)])
    assert np.allclose(rep.b, want, rtol=1e-12)


def test_summability_analytic_tail():
    # sum j^(p(1-alpha)) converges iff p(alpha-1) > 1
    pot = build_cosine_potential(alpha=2.5, m=8)
    rep = decay_sequences(pot)
    assert check_summability(rep, p=1.0).satisfied
    assert not check_summability(rep, p=0.5).satisfied  # 0.5*1.5 = 0.75 < 1


def test_partial_sum_value():
    pot = build_cosine_potential(alpha=3.0, m=4)
    rep = decay_sequences(pot)
    res = check_summability(rep, p=1.0)
    want = math.fsum(j ** (-2.0) for j in range(1, 5))
    assert res.sum_b_p == pytest.approx(want, rel=1e-14)


def test_zero_modes_is_constant():
    pot = build_cosine_potential(alpha=3.0, m=0, offset=1.7)
    g = TorusGrid(16)
    assert np.array_equal(evaluate(pot, np.empty(0), g), np.full(16, 1.7))


def test_evaluate_rejects_wrong_xi_length():
    pot = build_cosine_potential(alpha=3.0, m=3)
    with pytest.raises(ValueError):
        evaluate(pot, [0.1, 0.2], TorusGrid(16))


def test_alpha_must_exceed_one():
    with pytest.raises(ValueError):
        build_cosine_potential(alpha=1.0, m=2)
