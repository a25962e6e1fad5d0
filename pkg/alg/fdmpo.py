"""Feedback-driven metric prompt optimization.

Each trial scores one metric definition by its V_d, appends it to the
history, and asks the optimization model for the next definition given the
whole history. The best definition is the argmax of V_d over all trials,
not the last one: the trajectory fluctuates.
"""

import csv
import json
import os
import sys
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Callable, List, Optional

from alg.defvalue import DefinitionValue, v_d_aggregate
from alg.optimizer_client import make_optimizer, propose_next
from utils.exceptions import ConfigError, DomainError, ProtocolError


@dataclass(frozen=True)
class TrialRecord:
    iteration: int
    definition: str
    v_d: DefinitionValue
    timestamp: datetime

    def to_json(self):
        return {'iter': self.iteration, 'definition': self.definition, 'v_d': self.v_d.v,
                'n_samples': self.v_d.n_samples,
                'ts': self.timestamp.isoformat(timespec='microseconds')}

    @classmethod
    def from_json(cls, row):
        return cls(iteration=row['iter'], definition=row['definition'],
                   v_d=DefinitionValue(v=row['v_d'], n_samples=row['n_samples']),
                   timestamp=datetime.fromisoformat(row['ts']))


class HistoryWriter(object):
    """Append-only JSON Lines history, synced after every record."""

    def __init__(self, path):
        self.path = path
        self.f = open(path, 'w') if path else None

    def append(self, record):
        if self.f is None:
            return
        self.f.write(json.dumps(record.to_json(), sort_keys=True) + '\n')
        self.f.flush()
        os.fsync(self.f.fileno())

    def close(self):
        if self.f is not None:
            self.f.close()
            self.f = None


def utc_now():
    return datetime.now(timezone.utc)


def select_best(history):
    """Maximum V_d over all trials; ties go to the earliest iteration."""
    if not history:
        raise DomainError('cannot select from an empty history')
    best = history[0]
    for record in history[1:]:
        if record.v_d.v > best.v_d.v:
            best = record
    return best


def check_history(history):
    for expected, record in enumerate(history):
        if record.iteration != expected:
            raise DomainError('history iteration {} found where {} was expected'.format(record.iteration, expected))
        if not record.definition.strip():
            raise DomainError('history iteration {} has an empty definition'.format(record.iteration))
    return history


def load_history(path):
    if not os.path.exists(path):
        raise ConfigError('history file not found: {}'.format(path))
    with open(path) as f:
        history = [TrialRecord.from_json(json.loads(line)) for line in f if line.strip()]
    return check_history(history)


def run_fdmpo(initial_definition, samples, params, endpoint, budget,
              evaluator: Optional[Callable[[str], DefinitionValue]] = None,
              history_path=None, optimizer=None, clock=utc_now,
              on_trial: Optional[Callable[[TrialRecord], None]] = None, verbose=True):
    """Run ``budget`` optimisation trials after scoring the initial definition.

    ``evaluator`` defaults to the mean V_d of ``samples`` under ``params``.
    The history file receives each record as soon as it is scored, so a
    failed run leaves a valid prefix behind.
    """
    if budget < 0:
        raise ConfigError('budget must be >= 0, got {}'.format(budget))
    if not initial_definition.strip():
        raise ConfigError('initial definition is empty')
    if evaluator is None:
        if not samples:
            raise DomainError('FDMPO needs a non-empty sample set')
        evaluator = lambda definition: v_d_aggregate(samples, params, definition)
    if budget > 0 and optimizer is None:
        optimizer = make_optimizer(endpoint)

    history: List[TrialRecord] = []
    writer = HistoryWriter(history_path)
    try:
        definition = initial_definition
        for iteration in range(budget + 1):
            if iteration > 0:
                definition = propose_next(history, endpoint, optimizer)
                if not definition.strip():
                    raise ProtocolError('optimizer proposed an empty definition')
            record = TrialRecord(iteration, definition, evaluator(definition), clock())
            history.append(record)
            writer.append(record)
            if verbose:
                print('[INFO] trial {:3d}  V_d={:.6f}  {}'.format(
                    iteration, record.v_d.v, _preview(definition)), file=sys.stderr)
            if on_trial is not None:
                on_trial(record)
    finally:
        writer.close()
    return select_best(history), history


def _preview(text, width=60):
    text = ' '.join(text.split())
    return text if len(text) <= width else text[:width - 3] + '...'


def write_trajectory(path, history, finals=None):
    """CSV ``iter,v_d`` (plus ``final`` when per-trial final scores were tracked)."""
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(['iter', 'v_d'] + (['final'] if finals is not None else []))
        for record in history:
            row = [record.iteration, repr(record.v_d.v)]
            if finals is not None:
                value = finals.get(record.iteration)
                row.append('' if value is None else repr(value))
            writer.writerow(row)
