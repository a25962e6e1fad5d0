import numpy as np
import pytest

from alg.defvalue import V_D_MAX, dataset_samples, v_d_aggregate, v_d_single
from conftest import point_mass_scorer, zero_scorer
from datautil.score_codec import DigitTriple, triple_value
from datautil.util import ScoreDataset
from network.toy_scorer import ToyScorer
from utils.exceptions import DomainError


@pytest.mark.parametrize('probs, expected', [
    ((1, 1, 1), 1.11),
    ((0, 0, 0), 0.0),
    ((0.8, 0.5, 0.3), 0.853),
])
def test_v_d_single(probs, expected):
    assert v_d_single(probs) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize('probs', [(1.2, 0, 0), (0.5, -0.1, 0.5), (np.nan, 0, 0)])
def test_v_d_single_rejects_invalid_probability(probs):
    with pytest.raises(DomainError):
        v_d_single(probs)


def test_v_d_single_strictly_increases_in_each_position():
    base = [0.4, 0.4, 0.4]
    for t in range(3):
        raised = list(base)
        raised[t] = 0.41
        assert v_d_single(raised) > v_d_single(base)


def _samples(rng, n, feature_dim=4):
    return [(rng.uniform(-1, 1, feature_dim), DigitTriple(*(int(v) for v in rng.integers(0, 10, 3))))
            for _ in range(n)]


def test_uniform_model_scores_0111_for_any_prompt(rng):
    samples = _samples(rng, 5)
    for prompt in ('', 'Rate visual quality.', 'Focus on sharpness and artifacts.'):
        value = v_d_aggregate(samples, zero_scorer(), prompt)
        assert value.v == pytest.approx(0.111, abs=1e-12)
        assert value.n_samples == 5


def test_perfect_model_reaches_the_upper_bound():
    samples = [(np.full(4, 0.2), DigitTriple(4, 2, 0))]
    assert v_d_aggregate(samples, point_mass_scorer((4, 2, 0)), 'abc').v == pytest.approx(V_D_MAX, abs=1e-12)
    assert V_D_MAX == pytest.approx(1.11)


def test_aggregate_is_the_mean_of_single_values(rng):
    model = ToyScorer(4, 8, seed=1)
    samples = _samples(rng, 2)
    a = v_d_aggregate(samples[:1], model, 'Rate visual quality.').v
    b = v_d_aggregate(samples[1:], model, 'Rate visual quality.').v
    assert v_d_aggregate(samples, model, 'Rate visual quality.').v == pytest.approx((a + b) / 2, abs=1e-15)


def test_aggregate_is_order_invariant_and_bounded(rng):
    model = ToyScorer(4, 8, seed=2)
    samples = _samples(rng, 20)
    forward = v_d_aggregate(samples, model, 'Rate visual quality.').v
    backward = v_d_aggregate(samples[::-1], model, 'Rate visual quality.').v
    assert forward == pytest.approx(backward, abs=1e-15)
    assert 0.0 <= forward <= V_D_MAX


def test_aggregate_rejects_empty_sample_set():
    with pytest.raises(DomainError):
        v_d_aggregate([], zero_scorer(), 'abc')


def test_dataset_samples_follow_dataset_order(small_dataset):
    dataset = ScoreDataset(small_dataset.splits['train'][:5], 'visual')
    samples = dataset_samples(dataset)
    assert len(samples) == 5
    for i, (features, g) in enumerate(samples):
        np.testing.assert_array_equal(features, small_dataset.splits['train'][i].features)
        assert triple_value(g) == small_dataset.splits['train'][i].mos_visual
