import itertools

import numpy as np
import pytest

from datautil.score_codec import (DigitTriple, Score, format_prediction, parse_score, quantize,
                                  score_to_triple, triple_value)
from utils.exceptions import DomainError, ScoreParseError

ALL_TRIPLES = list(itertools.product(range(10), repeat=3))


@pytest.mark.parametrize('text, expected', [
    ('4.40', (4, 4, 0)),
    ('0.00', (0, 0, 0)),
    ('9.99', (9, 9, 9)),
    ('3.6', (3, 6, 0)),
])
def test_parse_score(text, expected):
    assert parse_score(text) == expected


@pytest.mark.parametrize('text, position', [
    ('', 0),
    ('-1.20', 0),
    ('12.30', 1),
    ('4,40', 1),
    ('4.', 2),
    ('4.a0', 2),
    ('4.4x', 3),
    ('4.401', 4),
])
def test_parse_score_names_the_offending_position(text, position):
    with pytest.raises(ScoreParseError) as info:
        parse_score(text)
    assert info.value.position == position
    assert 'position {}'.format(position) in str(info.value)


@pytest.mark.parametrize('dimension, triple, text', [
    ('visual', (4, 4, 0), 'visual score: 4.40'),
    ('editing', (0, 0, 0), 'editing score: 0.00'),
    ('preservation', (3, 6, 0), 'preservation score: 3.60'),
])
def test_format_prediction(dimension, triple, text):
    assert format_prediction(dimension, triple) == text


def test_format_prediction_rejects_unknown_dimension():
    with pytest.raises(DomainError):
        format_prediction('aesthetics', (4, 4, 0))


def test_format_then_parse_recovers_every_triple():
    for dimension in ('visual', 'editing', 'preservation'):
        prefix = '{} score: '.format(dimension)
        for triple in ALL_TRIPLES:
            text = format_prediction(dimension, triple)
            assert text.startswith(prefix)
            assert parse_score(text[len(prefix):]) == triple


@pytest.mark.parametrize('triple, value', [
    ((4, 4, 0), 4.40),
    ((0, 0, 1), 0.01),
    ((9, 9, 9), 9.99),
])
def test_triple_value(triple, value):
    assert triple_value(triple) == value


def test_triple_value_is_strictly_monotone_in_lexicographic_order():
    values = [triple_value(t) for t in ALL_TRIPLES]
    assert all(a < b for a, b in zip(values, values[1:]))


def test_quantized_rendering_stays_within_half_a_hundredth(rng):
    for v in rng.uniform(0.0, 9.995, size=5000):
        rendered = '{:.2f}'.format(quantize(v))
        assert abs(triple_value(parse_score(rendered)) - v) <= 0.005 + 1e-12


@pytest.mark.parametrize('value, expected', [
    (4.405, 4.41),
    (4.404999, 4.40),
    (0.125, 0.13),
    (2.675, 2.68),
])
def test_quantize_rounds_half_away_from_zero(value, expected):
    assert quantize(value) == expected


def test_score_to_triple_matches_quantized_digits():
    assert score_to_triple(3.896) == (3, 9, 0)
    assert score_to_triple(np.float64(1.0)) == (1, 0, 0)


def test_digit_triple_checks_range():
    assert DigitTriple.checked(np.int64(4), 2, 0) == (4, 2, 0)
    with pytest.raises(DomainError):
        DigitTriple.checked(10, 0, 0)
    with pytest.raises(DomainError):
        DigitTriple.checked(1.5, 0, 0)


def test_score_validates_value_and_dimension():
    score = Score(4.4, 'visual')
    assert score.triple == (4, 4, 0)
    with pytest.raises(DomainError):
        Score(4.405, 'visual')
    with pytest.raises(DomainError):
        Score(10.0, 'visual')
    with pytest.raises(DomainError):
        Score(4.4, 'overall')
