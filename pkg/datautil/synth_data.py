"""Deterministic surrogate for an image-editing quality dataset.

A shared feature vector (standing in for original image, edited image and
instruction) drives three per-dimension sigmoid heads. Out-of-distribution
records shift the features along a fixed unit direction, the way edits from
unseen editing models drift away from the training distribution.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np

from datautil.score_codec import (DEFAULT_SCORE_RANGE, DIMENSION_FIELDS, DIMENSIONS, check_score_range,
                                  clamp, quantize)
from utils.exceptions import ConfigError

SPLITS = ('train', 'val_in', 'val_out')
# split label stored on each record
SPLIT_KIND = {'train': 'in', 'val_in': 'in', 'val_out': 'out'}
_SPLIT_STREAM = {'train': 0, 'val_in': 1, 'val_out': 2}
_HEAD_STREAM = 1000
# latent logit scale: w.x has standard deviation ~HEAD_SCALE for in-distribution inputs
HEAD_SCALE = 1.5


@dataclass
class GeneratorSpec:
    seed: int = 0
    n_train: int = 2000
    n_val_in: int = 500
    n_val_out: int = 500
    feature_dim: int = 16
    noise_std: float = 0.15
    ood_shift: float = 0.5
    score_range: Tuple[float, float] = DEFAULT_SCORE_RANGE

    def validate(self):
        for name in ('n_train', 'n_val_in', 'n_val_out', 'feature_dim'):
            if getattr(self, name) < 1:
                raise ConfigError('{} must be >= 1, got {}'.format(name, getattr(self, name)))
        if self.noise_std < 0:
            raise ConfigError('noise_std must be >= 0, got {}'.format(self.noise_std))
        self.score_range = check_score_range(self.score_range)
        return self

    def size(self, split):
        return {'train': self.n_train, 'val_in': self.n_val_in, 'val_out': self.n_val_out}[split]


@dataclass
class SampleRecord:
    id: str
    features: List[float]
    mos_visual: float
    mos_edit: float
    mos_pres: float
    split: str

    def label(self, dimension):
        return getattr(self, DIMENSION_FIELDS[dimension])

    def to_dict(self):
        return {'id': self.id, 'features': self.features, 'mos_visual': self.mos_visual,
                'mos_edit': self.mos_edit, 'mos_pres': self.mos_pres, 'split': self.split}


@dataclass
class GeneratorHeads:
    weights: np.ndarray          # (3, F), one row per dimension
    biases: np.ndarray           # (3,)
    shift_direction: np.ndarray  # (F,), unit norm

    def latent(self, features, score_range):
        lo, hi = score_range
        z = np.asarray(features) @ self.weights.T + self.biases
        return lo + (hi - lo) / (1.0 + np.exp(-z))


@dataclass
class SyntheticDataset:
    spec: GeneratorSpec
    heads: GeneratorHeads
    splits: Dict[str, List[SampleRecord]] = field(default_factory=dict)


def _rng(seed, *stream):
    # counter-based per-record streams: records can be generated in any order
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=stream)))


def make_heads(spec):
    rng = _rng(spec.seed, _HEAD_STREAM)
    # uniform[-1, 1] inputs have variance 1/3 per coordinate
    weights = rng.normal(0.0, HEAD_SCALE * np.sqrt(3.0 / spec.feature_dim), size=(len(DIMENSIONS), spec.feature_dim))
    biases = rng.normal(0.0, 0.5, size=len(DIMENSIONS))
    direction = rng.normal(size=spec.feature_dim)
    return GeneratorHeads(weights, biases, direction / np.linalg.norm(direction))


def make_record(spec, heads, split, index):
    rng = _rng(spec.seed, _SPLIT_STREAM[split], index)
    x = rng.uniform(-1.0, 1.0, size=spec.feature_dim)
    if SPLIT_KIND[split] == 'out':
        x = x + spec.ood_shift * heads.shift_direction
    noise = rng.normal(0.0, 1.0, size=len(DIMENSIONS)) * spec.noise_std
    scores = [quantize(clamp(v, spec.score_range)) for v in heads.latent(x, spec.score_range) + noise]
    return SampleRecord(
        id='{}-{:06d}'.format(split, index),
        features=[float(v) for v in x],
        mos_visual=scores[0], mos_edit=scores[1], mos_pres=scores[2],
        split=SPLIT_KIND[split])


def generate(spec):
    spec.validate()
    heads = make_heads(spec)
    dataset = SyntheticDataset(spec=spec, heads=heads)
    for split in SPLITS:
        dataset.splits[split] = [make_record(spec, heads, split, i) for i in range(spec.size(split))]
    return dataset
