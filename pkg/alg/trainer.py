"""Seeded mini-batch training of the toy scorer, one dimension per instance."""

import sys
import time
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from tqdm import tqdm

from alg import alg, modelopera
from alg.algs.tdrl_scorer import NonFiniteLoss
from alg.opt import get_optimizer, get_scheduler
from datautil.getdataloader import get_dataloader
from datautil.score_codec import DEFAULT_SCORE_RANGE, check_dimension, check_score_range
from datautil.util import ScoreDataset
from utils.exceptions import ConfigError, ShapeError, TrainingDivergedError
from utils.util import print_row

LOSSES = ('tdrl', 'ce_only')


@dataclass
class TrainConfig:
    loss: str = 'tdrl'
    epochs: int = 30
    batch_size: int = 128
    lr: float = 1e-4
    warmup_ratio: float = 0.03
    seed: int = 0
    dimension: str = 'visual'
    hidden_dim: int = 32
    weight_decay: float = 0.0
    ce_includes_digits: bool = False
    score_range: Tuple[float, float] = DEFAULT_SCORE_RANGE
    decode: str = 'expected'

    def validate(self):
        if self.loss not in LOSSES:
            raise ConfigError('loss must be one of {}, got {!r}'.format(LOSSES, self.loss))
        if not 0.0 <= self.warmup_ratio < 0.5:
            raise ConfigError('warmup ratio must be in [0, 0.5), got {}'.format(self.warmup_ratio))
        if self.batch_size < 1:
            raise ConfigError('batch size must be >= 1, got {}'.format(self.batch_size))
        if not self.lr > 0:
            raise ConfigError('learning rate must be > 0, got {}'.format(self.lr))
        if self.epochs < 0:
            raise ConfigError('epochs must be >= 0, got {}'.format(self.epochs))
        if self.decode not in ('greedy', 'expected'):
            raise ConfigError('decode must be greedy or expected, got {!r}'.format(self.decode))
        check_dimension(self.dimension)
        self.score_range = check_score_range(self.score_range)
        return self


@dataclass
class TrainReport:
    loss: str
    dimension: str
    l_tdrl: List[float] = field(default_factory=list)
    l_ce: List[float] = field(default_factory=list)
    l_digit_ce: List[float] = field(default_factory=list)
    l_score: List[float] = field(default_factory=list)
    objective: List[float] = field(default_factory=list)
    heldout_mae: Optional[float] = None
    heldout_srcc: Optional[float] = None
    heldout_plcc: Optional[float] = None
    wall_clock_seconds: float = 0.0

    def to_dict(self):
        return asdict(self)


def train(records, config, definition, heldout=None, verbose=True):
    """Train one dimension's scorer.

    Returns ``(algorithm, report)``; ``algorithm.scorer`` holds the trained
    parameters and ``algorithm.prompt`` the definition embedding.
    """
    config.validate()
    if not records:
        raise ConfigError('training set is empty')
    start = time.time()
    dataset = ScoreDataset(records, config.dimension)
    algorithm = alg.get_algorithm_class(config.loss)(config, dataset.x.shape[1], definition)
    algorithm.train()
    loader = get_dataloader(dataset, config.batch_size, config.seed)
    total_steps = max(1, config.epochs * len(loader))
    opt = get_optimizer(algorithm, config)
    scheduler = get_scheduler(opt, total_steps, config)
    report = TrainReport(loss=config.loss, dimension=config.dimension)

    print_key = ['epoch', 'l_tdrl', 'l_ce', 'l_score', 'lr']
    if verbose:
        print_row(print_key, colwidth=12, file=sys.stderr)
    for epoch in tqdm(range(config.epochs), desc='{}/{}'.format(config.dimension, config.loss),
                      disable=not verbose, leave=False):
        ce_total, digit_ce_total, score_total, count, objectives = 0.0, 0.0, 0.0, 0, []
        for batch_index, minibatch in enumerate(loader):
            try:
                step_vals = algorithm.update(minibatch, opt)
            except NonFiniteLoss as e:
                raise TrainingDivergedError(epoch, batch_index, e.value)
            scheduler.step()
            ce_total += step_vals['ce_sum']
            digit_ce_total += step_vals['digit_ce_sum']
            score_total += step_vals['score_sum']
            count += step_vals['count']
            objectives.append(step_vals['objective'])
        l_ce, l_score = ce_total / count, score_total / count
        report.l_ce.append(l_ce)
        report.l_digit_ce.append(digit_ce_total / count)
        report.l_score.append(l_score)
        report.l_tdrl.append(l_ce + l_score)
        report.objective.append(float(np.mean(objectives)))
        if verbose:
            print_row([epoch, l_ce + l_score, l_ce, l_score, opt.param_groups[0]['lr']],
                      colwidth=12, file=sys.stderr)

    if heldout:
        metrics = modelopera.evaluate(algorithm, ScoreDataset(heldout, config.dimension), config.decode)
        report.heldout_mae = metrics['mae']
        report.heldout_srcc = metrics['srcc']
        report.heldout_plcc = metrics['plcc']
    report.wall_clock_seconds = time.time() - start
    return algorithm, report


def ensemble_average(predictions_a, predictions_b):
    a = np.asarray(predictions_a, dtype=np.float64)
    b = np.asarray(predictions_b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError('cannot average predictions of lengths {} and {}'.format(len(a), len(b)))
    return (a + b) / 2.0
