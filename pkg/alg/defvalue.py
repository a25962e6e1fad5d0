"""Definition value: how confidently the scorer, prompted with a metric
definition, reproduces the ground-truth digits under teacher forcing.

Per sample ``V = P(g0) + 0.1 P(g1 | g0) + 0.01 P(g2 | g0 g1)``; a
definition's value is the mean over a sample set, bounded by [0, 1.11].
"""

from dataclasses import dataclass

import numpy as np
import torch

from datautil.score_codec import DigitTriple
from loss.tdrl import POSITION_WEIGHTS
from network.prompt_embed import embed_prompt
from utils.exceptions import DomainError

V_D_MAX = float(POSITION_WEIGHTS.sum())


@dataclass(frozen=True)
class DefinitionValue:
    v: float
    n_samples: int


def v_d_single(gt_probs):
    probs = np.asarray(gt_probs, dtype=np.float64)
    if probs.shape != (3,):
        raise DomainError('expected 3 ground-truth probabilities, got shape {}'.format(probs.shape))
    if np.any(~np.isfinite(probs)) or np.any(probs < 0.0) or np.any(probs > 1.0):
        raise DomainError('ground-truth probabilities must lie in [0, 1], got {}'.format(probs.tolist()))
    return float(probs[0] + probs[1] * POSITION_WEIGHTS[1] + probs[2] * POSITION_WEIGHTS[2])


def per_sample_values(params, prompt, features, digits, batch_size=512):
    """Per-sample V_d (N,) for feature rows (N, F) and ground-truth digits (N, 3)."""
    values = []
    with torch.no_grad():
        for start in range(0, features.shape[0], batch_size):
            x = features[start:start + batch_size]
            g = digits[start:start + batch_size]
            probs = params.digit_probs(prompt, x, g)
            gt = probs.gather(-1, g.unsqueeze(-1)).squeeze(-1).numpy()
            values.extend(v_d_single(row) for row in gt)
    return np.array(values)


def v_d_aggregate(samples, params, prompt_text):
    """Mean V_d of ``prompt_text`` over ``(features, DigitTriple)`` samples."""
    if len(samples) == 0:
        raise DomainError('V_d needs at least one sample')
    features = torch.tensor(np.array([np.asarray(f, dtype=np.float64) for f, _ in samples]))
    digits = torch.tensor([list(DigitTriple.checked(*g)) for _, g in samples], dtype=torch.long)
    prompt = torch.from_numpy(embed_prompt(prompt_text, params.embed_dim))
    values = per_sample_values(params, prompt, features, digits)
    return DefinitionValue(v=float(np.mean(values)), n_samples=len(values))


def dataset_samples(dataset):
    """(features, DigitTriple) pairs of a ScoreDataset, in dataset order."""
    return [(dataset.x[i].numpy(), DigitTriple(*dataset.digits[i].tolist())) for i in range(len(dataset))]
