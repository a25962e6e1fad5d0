import math

import numpy as np
import pytest
import torch

from loss.tdrl import (L_SCORE_MAX, LScoreF, l_ce, l_score, l_score_grad, l_score_grad_from_dists, l_tdrl,
                       softmax)
from utils.exceptions import DomainError, ShapeError

UNIFORM = np.full((3, 10), 0.1)


def point_masses(g):
    dists = np.zeros((3, 10))
    dists[np.arange(3), list(g)] = 1.0
    return dists


@pytest.mark.parametrize('logprobs, expected', [
    ([0.0, 0.0, 0.0, 0.0], 0.0),
    ([math.log(1 / 15)] * 4, 4 * math.log(15)),
    ([math.log(0.5), 0.0, 0.0, 0.0], math.log(2)),
])
def test_l_ce(logprobs, expected):
    assert l_ce(logprobs) == pytest.approx(expected, abs=1e-12)


def test_l_ce_rejects_positive_log_probability():
    with pytest.raises(DomainError):
        l_ce([0.0, 0.1, 0.0, 0.0])


def test_l_score_point_mass_is_zero():
    assert l_score(point_masses((4, 2, 0)), (4, 2, 0))[0] == 0.0


def test_l_score_uniform_hand_sums():
    total, terms = l_score(UNIFORM, (4, 2, 0))
    assert total == pytest.approx(2.855, abs=1e-12)
    np.testing.assert_allclose(terms, [2.5, 0.31, 0.045], atol=1e-12)


def test_l_score_unit_distance_on_ones_place():
    dists = point_masses((4, 2, 0))
    dists[0] = 0.0
    dists[0, 5] = 1.0
    assert l_score(dists, (4, 2, 0))[0] == pytest.approx(1.0, abs=1e-12)


def test_l_score_rejects_unnormalized_distribution():
    dists = UNIFORM.copy()
    dists[1, 0] = 0.2
    with pytest.raises(DomainError, match='position 1'):
        l_score(dists, (4, 2, 0))


def test_l_score_rejects_wrong_shape():
    with pytest.raises(ShapeError):
        l_score(np.full((2, 10), 0.1), (4, 2, 0))


def test_l_score_bounds_on_random_distributions(rng):
    dists = rng.dirichlet(np.full(10, 0.3), size=(10000, 3))
    triples = rng.integers(0, 10, size=(10000, 3))
    for d, g in zip(dists, triples):
        total, terms = l_score(d, tuple(int(v) for v in g))
        assert 0.0 <= total <= L_SCORE_MAX
        for t, term in enumerate(terms):
            assert 0.0 <= term <= 9.0 * 10.0 ** -t + 1e-12


def test_moving_mass_closer_lowers_loss_by_the_distance_gap():
    g = (4, 2, 0)
    eps = 0.05
    for t, (a, b) in enumerate([(9, 6), (7, 3), (8, 1)]):
        before = l_score(UNIFORM, g)[0]
        moved = UNIFORM.copy()
        moved[t, a] -= eps
        moved[t, b] += eps
        gap = abs(a - g[t]) - abs(b - g[t])
        assert before - l_score(moved, g)[0] == pytest.approx(10.0 ** -t * eps * gap, abs=1e-12)


def test_each_place_weighs_ten_times_the_next(rng):
    dist = rng.dirichlet(np.ones(10))
    for t in range(2):
        upper = point_masses((3, 3, 3))
        lower = point_masses((3, 3, 3))
        upper[t] = dist
        lower[t + 1] = dist
        a = l_score(upper, (3, 3, 3))[0]
        b = l_score(lower, (3, 3, 3))[0]
        assert a == pytest.approx(10 * b, rel=1e-12)


def test_grad_uniform_logits_entry():
    grad = l_score_grad(np.zeros((3, 10)), (4, 2, 0))
    assert grad[0, 9] == pytest.approx(0.25, abs=1e-15)
    np.testing.assert_allclose(grad.sum(axis=1), 0.0, atol=1e-12)


def test_grad_vanishes_at_point_mass():
    logits = np.zeros((3, 10))
    logits[np.arange(3), [4, 2, 0]] = 60.0
    np.testing.assert_allclose(l_score_grad(logits, (4, 2, 0)), 0.0, atol=1e-20)


def _numeric_grad(logits, g, step=1e-5):
    grad = np.zeros_like(logits)
    for idx in np.ndindex(*logits.shape):
        plus, minus = logits.copy(), logits.copy()
        plus[idx] += step
        minus[idx] -= step
        grad[idx] = (l_score(softmax(plus), g)[0] - l_score(softmax(minus), g)[0]) / (2 * step)
    return grad


def test_grad_matches_central_differences(rng):
    for _ in range(100):
        logits = rng.normal(0.0, 2.0, size=(3, 10))
        g = tuple(int(v) for v in rng.integers(0, 10, size=3))
        analytic = l_score_grad(logits, g)
        np.testing.assert_allclose(analytic, _numeric_grad(logits, g), rtol=1e-5, atol=1e-9)
        np.testing.assert_allclose(analytic.sum(axis=1), 0.0, atol=1e-12)


def test_grad_from_dists_agrees_with_logit_form(rng):
    logits = rng.normal(size=(3, 10))
    np.testing.assert_allclose(l_score_grad_from_dists(softmax(logits), (1, 5, 9)),
                               l_score_grad(logits, (1, 5, 9)), atol=1e-15)


@pytest.mark.parametrize('pattern, dists, expected', [
    ([0.0] * 4, point_masses((4, 2, 0)), 0.0),
    ([0.0] * 4, UNIFORM, 2.855),
    ([math.log(1 / 15)] * 4, point_masses((4, 2, 0)), 4 * math.log(15)),
])
def test_l_tdrl(pattern, dists, expected):
    breakdown = l_tdrl(pattern, dists, (4, 2, 0))
    assert breakdown.l_tdrl == pytest.approx(expected, abs=1e-12)
    assert breakdown.l_tdrl == breakdown.l_ce + breakdown.l_score


def test_autograd_function_matches_numpy_loss(rng):
    logits = torch.tensor(rng.normal(size=(5, 3, 10)))
    digits = torch.tensor(rng.integers(0, 10, size=(5, 3)))
    values = LScoreF.apply(logits, digits)
    for i in range(5):
        g = tuple(digits[i].tolist())
        assert values[i].item() == pytest.approx(l_score(softmax(logits[i].numpy()), g)[0], abs=1e-12)


def test_autograd_function_passes_gradcheck(rng):
    logits = torch.tensor(rng.normal(size=(4, 3, 10)), requires_grad=True)
    digits = torch.tensor(rng.integers(0, 10, size=(4, 3)))
    assert torch.autograd.gradcheck(lambda z: LScoreF.apply(z, digits), (logits,))
