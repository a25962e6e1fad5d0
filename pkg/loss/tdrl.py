"""Token-decoupled distance regression loss.

``L_tdrl = L_ce + L_score``: cross-entropy keeps the non-numerical pattern
tokens in place, while digit positions pay the expected ordinal distance to
the ground-truth digit, weighted 1, 0.1, 0.01 from the ones place down.
"""

from dataclasses import dataclass, field
from typing import List

import numpy as np
import torch
import torch.nn.functional as F

from datautil.score_codec import DigitTriple
from network.toy_scorer import DIGIT_HEADS, PATTERN_HEADS, PATTERN_TARGETS, VOCAB, digit_logits
from utils.exceptions import DomainError, ShapeError

POSITION_WEIGHTS = np.array([1.0, 0.1, 0.01])
DIGITS = np.arange(10, dtype=np.float64)
NORMALIZATION_TOL = 1e-9
L_SCORE_MAX = 9.0 * POSITION_WEIGHTS.sum()


@dataclass
class TdrlBreakdown:
    l_ce: float
    l_score: float
    l_tdrl: float
    l_score_terms: List[float] = field(default_factory=list)

    def to_dict(self):
        return {'l_ce': self.l_ce, 'l_score': self.l_score, 'l_tdrl': self.l_tdrl,
                'l_score_terms': list(self.l_score_terms)}


def _check_dists(dists):
    dists = np.asarray(dists, dtype=np.float64)
    if dists.shape != (3, 10):
        raise ShapeError('expected 3 digit distributions of 10 probabilities, got shape {}'.format(dists.shape))
    for t in range(3):
        if not np.all(np.isfinite(dists[t])) or np.any(dists[t] < 0):
            raise DomainError('distribution at position {} has negative or non-finite entries'.format(t))
        total = dists[t].sum()
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise DomainError('distribution at position {} sums to {!r}, not 1'.format(t, total))
    return dists


def _distances(g):
    g = DigitTriple.checked(*g)
    return np.abs(DIGITS[None, :] - np.array(g, dtype=np.float64)[:, None])


def l_ce(pattern_logprobs):
    logprobs = np.asarray(pattern_logprobs, dtype=np.float64)
    if not np.all(np.isfinite(logprobs)):
        raise DomainError('pattern log-probabilities must be finite')
    if np.any(logprobs > 0):
        raise DomainError('log-probability {} > 0'.format(logprobs[logprobs > 0][0]))
    return float(-logprobs.sum())


def l_score(dists, g):
    """Expected distance loss; returns (total, per-position terms)."""
    dists = _check_dists(dists)
    terms = POSITION_WEIGHTS * (dists * _distances(g)).sum(axis=1)
    return float(terms.sum()), [float(v) for v in terms]


def _l_score_grad_from_probs(probs, distances):
    expected = (probs * distances).sum(axis=-1, keepdims=True)
    return POSITION_WEIGHTS[:, None] * probs * (distances - expected)


def softmax(logits):
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def l_score_grad(digit_logits_, g):
    """d L_score / d z for the (3, 10) digit logits."""
    logits = np.asarray(digit_logits_, dtype=np.float64)
    if logits.shape != (3, 10):
        raise ShapeError('expected (3, 10) digit logits, got {}'.format(logits.shape))
    return _l_score_grad_from_probs(softmax(logits), _distances(g))


def l_score_grad_from_dists(dists, g):
    return _l_score_grad_from_probs(_check_dists(dists), _distances(g))


def l_tdrl(pattern_logprobs, dists, g):
    ce = l_ce(pattern_logprobs)
    score, terms = l_score(dists, g)
    return TdrlBreakdown(l_ce=ce, l_score=score, l_tdrl=ce + score, l_score_terms=terms)


class LScoreF(torch.autograd.Function):
    """Per-sample L_score over (B, 3, 10) digit logits with the analytic gradient."""

    @staticmethod
    def forward(ctx, logits, digits):
        probs = torch.softmax(logits, dim=-1)
        ks = torch.arange(10, dtype=logits.dtype)
        distances = (ks.view(1, 1, 10) - digits.to(logits.dtype).unsqueeze(-1)).abs()
        weights = torch.as_tensor(POSITION_WEIGHTS, dtype=logits.dtype).view(1, 3)
        expected = (probs * distances).sum(dim=-1)
        ctx.save_for_backward(probs, distances, expected, weights)
        return (weights * expected).sum(dim=-1)

    @staticmethod
    def backward(ctx, grad_output):
        probs, distances, expected, weights = ctx.saved_tensors
        grad = weights.unsqueeze(-1) * probs * (distances - expected.unsqueeze(-1))
        return grad_output.view(-1, 1, 1) * grad, None


def _token_nll(logits, heads, targets):
    logp = F.log_softmax(logits[:, list(heads)], dim=-1)
    return -logp.gather(-1, targets.unsqueeze(-1)).squeeze(-1).sum(dim=-1)


def pattern_ce(logits):
    targets = torch.tensor(PATTERN_TARGETS, dtype=torch.long).expand(logits.shape[0], -1)
    return _token_nll(logits, PATTERN_HEADS, targets)


def digit_ce(logits, digits):
    return _token_nll(logits, DIGIT_HEADS, digits + VOCAB.digit_start)


def tdrl_objective(logits, digits, ce_includes_digits=False):
    """Per-sample loss terms for teacher-forced logits (B, 7, V).

    ``ce`` is always the pattern-token term and ``digit_ce`` the digit-token
    term, whichever of them the objective trains on.
    """
    ce = pattern_ce(logits)
    digits_ce = digit_ce(logits, digits)
    score = LScoreF.apply(digit_logits(logits), digits)
    objective = ce + score
    if ce_includes_digits:
        objective = objective + digits_ce
    else:
        digits_ce = digits_ce.detach()
    return {'ce': ce, 'digit_ce': digits_ce, 'score': score, 'objective': objective}


def ce_only_objective(logits, digits):
    """Distance-agnostic baseline: CE on every position, digits included."""
    ce = pattern_ce(logits)
    digits_ce = digit_ce(logits, digits)
    with torch.no_grad():
        score = LScoreF.apply(digit_logits(logits), digits)
    return {'ce': ce, 'digit_ce': digits_ce, 'score': score, 'objective': ce + digits_ce}
