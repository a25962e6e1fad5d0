"""Small autoregressive digit scorer standing in for the MLLM.

The model sees the prompt embedding, the sample's feature vector and
one-hot encodings of the digits preceding the predicted position, and emits
vocabulary logits for each position of the fixed output sequence
``<bos> score : D0 . D1 D2 <eos>``. Everything runs in float64.
"""

import json
from dataclasses import dataclass
from typing import Tuple

import numpy as np
import torch
import torch.nn as nn

from datautil.score_codec import (DEFAULT_SCORE_RANGE, DigitTriple, Score, check_dimension,
                                  clamp, quantize)
from network.common_network import SplitMix64, fan_in_bound
from network.prompt_embed import EMBED_DIM
from utils.exceptions import ConfigError, DomainError, ShapeError

CHECKPOINT_FORMAT = 'dsieqa-toy-scorer'
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class Vocabulary:
    tokens: Tuple[str, ...]
    digit_start: int

    @property
    def size(self):
        return len(self.tokens)

    @property
    def digit_stop(self):
        return self.digit_start + 10

    def digit_token(self, k):
        return self.digit_start + k

    def token_digit(self, token):
        if not self.digit_start <= token < self.digit_stop:
            raise DomainError('token {} is not a digit'.format(token))
        return token - self.digit_start


VOCAB = Vocabulary(
    tokens=('<bos>', 'score', ':', '.') + tuple(str(k) for k in range(10)) + ('<eos>',),
    digit_start=4)
BOS, WORD_SCORE, COLON, DOT, EOS = 0, 1, 2, 3, 14
VOCAB_SIZE = VOCAB.size


@dataclass(frozen=True)
class TargetTemplate:
    # None marks a digit slot
    sequence: Tuple = (BOS, WORD_SCORE, COLON, None, DOT, None, None, EOS)
    digit_positions: Tuple[int, int, int] = (3, 5, 6)

    @property
    def pattern_positions(self):
        return tuple(i for i, tok in enumerate(self.sequence) if tok is not None and i > 0)

    @property
    def predicted_positions(self):
        return tuple(range(1, len(self.sequence)))

    def head(self, position):
        return position - 1

    def context_digits(self, position):
        """Number of digits that precede a sequence position."""
        return sum(1 for p in self.digit_positions if p < position)

    def tokens_for(self, triple):
        digits = iter(VOCAB.digit_token(d) for d in triple)
        return tuple(next(digits) if tok is None else tok for tok in self.sequence)


TEMPLATE = TargetTemplate()
N_HEADS = len(TEMPLATE.predicted_positions)
DIGIT_HEADS = tuple(TEMPLATE.head(p) for p in TEMPLATE.digit_positions)
PATTERN_HEADS = tuple(TEMPLATE.head(p) for p in TEMPLATE.pattern_positions)
PATTERN_TARGETS = tuple(TEMPLATE.sequence[p] for p in TEMPLATE.pattern_positions)
HEAD_CONTEXT = tuple(TEMPLATE.context_digits(p) for p in TEMPLATE.predicted_positions)
PREFIX_SLOTS = 30


def prefix_onehot(digits, length):
    """(B, 3) digit tensor -> (B, 30) one-hots of the first ``length`` digits."""
    onehot = torch.zeros(digits.shape[0], PREFIX_SLOTS, dtype=torch.float64)
    for t in range(length):
        onehot[torch.arange(digits.shape[0]), 10 * t + digits[:, t]] = 1.0
    return onehot


class ToyScorer(nn.Module):
    def __init__(self, feature_dim=16, hidden_dim=32, embed_dim=EMBED_DIM, seed=0):
        super(ToyScorer, self).__init__()
        if min(feature_dim, hidden_dim, embed_dim) < 1:
            raise ConfigError('scorer dimensions must be positive')
        self.feature_dim = feature_dim
        self.hidden_dim = hidden_dim
        self.embed_dim = embed_dim
        self.seed = seed
        self.in_features = embed_dim + feature_dim + PREFIX_SLOTS
        self.trunk = nn.Linear(self.in_features, hidden_dim, dtype=torch.float64)
        self.head_weight = nn.Parameter(torch.zeros(N_HEADS, VOCAB_SIZE, hidden_dim, dtype=torch.float64))
        self.head_bias = nn.Parameter(torch.zeros(N_HEADS, VOCAB_SIZE, dtype=torch.float64))
        self.reset_parameters(seed)

    def reset_parameters(self, seed):
        rng = SplitMix64(seed)
        trunk_bound = fan_in_bound(self.in_features)
        head_bound = fan_in_bound(self.hidden_dim)
        values = [
            rng.uniform((self.hidden_dim, self.in_features), trunk_bound),
            rng.uniform((self.hidden_dim,), trunk_bound),
            rng.uniform((N_HEADS, VOCAB_SIZE, self.hidden_dim), head_bound),
            rng.uniform((N_HEADS, VOCAB_SIZE), head_bound),
        ]
        with torch.no_grad():
            for param, value in zip(self.ordered_parameters(), values):
                param.copy_(torch.from_numpy(value))

    def ordered_parameters(self):
        return [self.trunk.weight, self.trunk.bias, self.head_weight, self.head_bias]

    def _inputs(self, prompt, features, prefix):
        if features.ndim != 2 or features.shape[1] != self.feature_dim:
            raise ShapeError('features must be (batch, {}), got {}'.format(
                self.feature_dim, tuple(features.shape)))
        if prompt.shape != (self.embed_dim,):
            raise ShapeError('prompt embedding must have {} components, got {}'.format(
                self.embed_dim, tuple(prompt.shape)))
        batch = features.shape[0]
        return torch.cat([prompt.expand(batch, -1), features, prefix], dim=1)

    def hidden(self, prompt, features, prefix):
        return torch.tanh(self.trunk(self._inputs(prompt, features, prefix)))

    def forward(self, prompt, features, prefix):
        """Logits (B, 7, V) of every head from one shared prefix encoding."""
        h = self.hidden(prompt, features, prefix)
        return torch.einsum('pvh,bh->bpv', self.head_weight, h) + self.head_bias

    def teacher_forced_logits(self, prompt, features, digits):
        """Logits (B, 7, V) where each head sees the ground-truth digits before it."""
        h = torch.stack([self.hidden(prompt, features, prefix_onehot(digits, n)) for n in range(4)], dim=1)
        h = h[:, list(HEAD_CONTEXT)]
        return torch.einsum('pvh,bph->bpv', self.head_weight, h) + self.head_bias

    def digit_probs(self, prompt, features, digits):
        """Teacher-forced digit distributions (B, 3, 10), renormalised over digit tokens."""
        logits = self.teacher_forced_logits(prompt, features, digits)
        return torch.softmax(digit_logits(logits), dim=-1)

    def decode(self, prompt, features, mode='greedy', score_range=DEFAULT_SCORE_RANGE):
        """Decode (B,) score values; pattern positions come from the template."""
        if mode not in ('greedy', 'expected'):
            raise ConfigError('unknown decode mode {!r}'.format(mode))
        batch = features.shape[0]
        generated = torch.zeros(batch, 3, dtype=torch.long)
        expectations = torch.zeros(batch, 3, dtype=torch.float64)
        ks = torch.arange(10, dtype=torch.float64)
        with torch.no_grad():
            for t, head in enumerate(DIGIT_HEADS):
                logits = self.forward(prompt, features, prefix_onehot(generated, t))[:, head]
                digit_part = logits[:, VOCAB.digit_start:VOCAB.digit_stop]
                # torch.argmax returns the first maximum: ties go to the lowest digit
                generated[:, t] = torch.argmax(digit_part, dim=-1)
                expectations[:, t] = torch.softmax(digit_part, dim=-1) @ ks
        if mode == 'greedy':
            values = generated[:, 0] * 100 + generated[:, 1] * 10 + generated[:, 2]
            return values.numpy() / 100
        raw = expectations[:, 0] + expectations[:, 1] / 10 + expectations[:, 2] / 100
        return np.array([quantize(clamp(float(v), score_range)) for v in raw])


def digit_logits(logits):
    return logits[..., list(DIGIT_HEADS), VOCAB.digit_start:VOCAB.digit_stop]


def _as_tensor(values, ndim):
    tensor = torch.as_tensor(np.asarray(values, dtype=np.float64))
    while tensor.ndim < ndim:
        tensor = tensor.unsqueeze(0)
    return tensor


def _digits_tensor(triple):
    return torch.tensor([list(DigitTriple.checked(*triple))], dtype=torch.long)


def forward_logits(params, prompt, features, prefix=()):
    """Logits (7, V) for one sample given a (possibly empty) digit prefix."""
    prefix = tuple(prefix)
    if len(prefix) > 3:
        raise ShapeError('prefix holds at most 3 digits, got {}'.format(len(prefix)))
    padded = prefix + (0,) * (3 - len(prefix))
    onehot = prefix_onehot(_digits_tensor(padded), len(prefix))
    with torch.no_grad():
        logits = params(_as_tensor(prompt, 1), _as_tensor(features, 2), onehot)
    return logits[0].numpy()


def digit_distributions(params, prompt, features, g):
    """Three digit distributions (3, 10) conditioned on the ground-truth prefix."""
    with torch.no_grad():
        probs = params.digit_probs(_as_tensor(prompt, 1), _as_tensor(features, 2), _digits_tensor(g))
    return probs[0].numpy()


def decode_score(params, prompt, features, mode='greedy', dimension='visual',
                 score_range=DEFAULT_SCORE_RANGE):
    check_dimension(dimension)
    value = params.decode(_as_tensor(prompt, 1), _as_tensor(features, 2), mode, score_range)[0]
    return Score(float(value), dimension)


def save_checkpoint(params, path, definition='', dimension=None, extra=None):
    doc = {
        'format': CHECKPOINT_FORMAT,
        'version': CHECKPOINT_VERSION,
        'seed': params.seed,
        'embed_dim': params.embed_dim,
        'feature_dim': params.feature_dim,
        'hidden_dim': params.hidden_dim,
        'vocab_size': VOCAB_SIZE,
        'dimension': dimension,
        'definition': definition,
        'weights': {
            'W1': params.trunk.weight.detach().reshape(-1).tolist(),
            'b1': params.trunk.bias.detach().reshape(-1).tolist(),
            'W_out': params.head_weight.detach().reshape(-1).tolist(),
            'b_out': params.head_bias.detach().reshape(-1).tolist(),
        },
    }
    if extra:
        doc['extra'] = extra
    with open(path, 'w') as f:
        json.dump(doc, f, sort_keys=True)
        f.write('\n')


def load_checkpoint(path):
    """Return (ToyScorer, document metadata without weights)."""
    with open(path) as f:
        doc = json.load(f)
    if doc.get('format') != CHECKPOINT_FORMAT or doc.get('version') != CHECKPOINT_VERSION:
        raise ConfigError('{} is not a version {} {} checkpoint'.format(
            path, CHECKPOINT_VERSION, CHECKPOINT_FORMAT))
    if doc['vocab_size'] != VOCAB_SIZE:
        raise ShapeError('checkpoint vocabulary size {} != {}'.format(doc['vocab_size'], VOCAB_SIZE))
    model = ToyScorer(doc['feature_dim'], doc['hidden_dim'], doc['embed_dim'], doc['seed'])
    with torch.no_grad():
        for param, key in zip(model.ordered_parameters(), ('W1', 'b1', 'W_out', 'b_out')):
            flat = torch.tensor(doc['weights'][key], dtype=torch.float64)
            if flat.numel() != param.numel():
                raise ShapeError('checkpoint tensor {} has {} entries, expected {}'.format(
                    key, flat.numel(), param.numel()))
            param.copy_(flat.reshape(param.shape))
    meta = {k: v for k, v in doc.items() if k != 'weights'}
    return model, meta
