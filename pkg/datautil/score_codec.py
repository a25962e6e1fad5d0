"""Three-digit representation of MOS scores and the textual output pattern.

A score ``X.XX`` is carried as its (ones, tenths, hundredths) digits; the
loss and the definition value both operate on that decomposition.
"""

import numbers
from decimal import Decimal, ROUND_HALF_UP
from typing import NamedTuple, Tuple

from dataclasses import dataclass

from utils.exceptions import DomainError, ScoreParseError

DIMENSIONS = ('visual', 'editing', 'preservation')

# dataset field carrying each dimension's label
DIMENSION_FIELDS = {
    'visual': 'mos_visual',
    'editing': 'mos_edit',
    'preservation': 'mos_pres',
}

DEFAULT_SCORE_RANGE = (1.0, 5.0)

_DIGITS = '0123456789'


class DigitTriple(NamedTuple):
    d0: int
    d1: int
    d2: int

    @classmethod
    def checked(cls, d0, d1, d2):
        for digit in (d0, d1, d2):
            if not isinstance(digit, numbers.Integral) or isinstance(digit, bool) or not 0 <= digit <= 9:
                raise DomainError('digit out of range: {!r}'.format(digit))
        return cls(int(d0), int(d1), int(d2))

    @property
    def hundredths(self):
        return 100 * self.d0 + 10 * self.d1 + self.d2


@dataclass(frozen=True)
class Score:
    value: float
    dimension: str

    def __post_init__(self):
        check_dimension(self.dimension)
        scaled = round(self.value * 100)
        if abs(self.value * 100 - scaled) > 1e-6 or not 0 <= scaled <= 999:
            raise DomainError('score {!r} is not a two-decimal value in [0.00, 9.99]'.format(self.value))

    @property
    def triple(self):
        return triple_from_hundredths(round(self.value * 100))


def check_dimension(dimension):
    if dimension not in DIMENSIONS:
        raise DomainError('unknown dimension {!r}, expected one of {}'.format(dimension, DIMENSIONS))
    return dimension


def parse_score(text):
    """Parse ``X.XX`` or ``X.X`` into its digit triple.

    One-decimal inputs zero-pad the hundredths. Anything else raises
    ScoreParseError naming the first offending character position.
    """
    if len(text) == 0:
        raise ScoreParseError(text, 0, 'empty input')
    if text[0] not in _DIGITS:
        raise ScoreParseError(text, 0, 'expected integer digit, got {!r}'.format(text[0]))
    if len(text) < 2:
        raise ScoreParseError(text, 1, 'missing decimal point')
    if text[1] in _DIGITS:
        raise ScoreParseError(text, 1, 'multiple integer digits')
    if text[1] != '.':
        raise ScoreParseError(text, 1, 'expected decimal point, got {!r}'.format(text[1]))
    decimals = text[2:]
    if len(decimals) == 0:
        raise ScoreParseError(text, 2, 'missing decimals')
    for offset, ch in enumerate(decimals):
        if ch not in _DIGITS:
            raise ScoreParseError(text, 2 + offset, 'expected decimal digit, got {!r}'.format(ch))
    if len(decimals) > 2:
        raise ScoreParseError(text, 4, 'more than two decimals')
    d2 = int(decimals[1]) if len(decimals) == 2 else 0
    return DigitTriple(int(text[0]), int(decimals[0]), d2)


def format_prediction(dimension, triple):
    check_dimension(dimension)
    d0, d1, d2 = DigitTriple.checked(*triple)
    return '{} score: {}.{}{}'.format(dimension, d0, d1, d2)


def triple_value(triple):
    # exact for every two-decimal value: hundredths / 100 is correctly rounded
    return DigitTriple.checked(*triple).hundredths / 100


def triple_from_hundredths(hundredths):
    if not 0 <= hundredths <= 999:
        raise DomainError('{} hundredths outside [0, 999]'.format(hundredths))
    return DigitTriple(hundredths // 100, (hundredths // 10) % 10, hundredths % 10)


def quantize(value):
    """Round to two decimals, half away from zero."""
    return float(Decimal(repr(float(value))).quantize(Decimal('0.01'), rounding=ROUND_HALF_UP))


def score_to_triple(value):
    return triple_from_hundredths(int(round(quantize(value) * 100)))


def clamp(value, score_range: Tuple[float, float] = DEFAULT_SCORE_RANGE):
    lo, hi = score_range
    return min(max(value, lo), hi)


def check_score_range(score_range):
    lo, hi = score_range
    if not (0.0 <= lo < hi <= 9.99):
        raise DomainError('score range {} must satisfy 0.00 <= lo < hi <= 9.99'.format(score_range))
    return float(lo), float(hi)
