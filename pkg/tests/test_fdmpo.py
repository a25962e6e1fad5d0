import csv
import json
from datetime import datetime, timedelta, timezone

import numpy as np
import pytest

from alg.defvalue import DefinitionValue
from alg.fdmpo import TrialRecord, load_history, run_fdmpo, select_best, write_trajectory
from alg.optimizer_client import MockOptimizer, OptimizerEndpoint, propose_next
from conftest import zero_scorer
from datautil.score_codec import DigitTriple
from utils.exceptions import ConfigError, DomainError

POOL = ['A: rate sharpness.', 'B: rate artifacts.', 'C: rate colour.']
PLANTED = dict(zip(POOL, (0.3, 0.7, 0.5)))


def planted(values):
    def evaluator(definition):
        return DefinitionValue(v=values[definition], n_samples=4)
    return evaluator


def fixed_clock():
    ticks = iter(range(1000))
    start = datetime(2024, 1, 1, tzinfo=timezone.utc)
    return lambda: start + timedelta(seconds=next(ticks))


def mock_endpoint(pool=POOL):
    return OptimizerEndpoint(kind='mock', pool=list(pool))


def record(iteration, definition, v):
    return TrialRecord(iteration, definition, DefinitionValue(v, 1), datetime(2024, 1, 1, tzinfo=timezone.utc))


def test_mock_proposes_first_untried_candidate():
    history = [record(0, POOL[0], 0.3)]
    assert propose_next(history, mock_endpoint()) == POOL[1]


def test_mock_cycles_once_the_pool_is_exhausted():
    optimizer = MockOptimizer(POOL)
    history = [record(i, d, 0.1) for i, d in enumerate(POOL)]
    assert optimizer.propose(history) == POOL[0]
    history.append(record(3, POOL[0], 0.1))
    assert optimizer.propose(history) == POOL[1]


def test_propose_next_requires_history():
    with pytest.raises(ConfigError):
        propose_next([], mock_endpoint())


def test_planted_argmax_is_selected():
    best, history = run_fdmpo(POOL[0], [], None, mock_endpoint(), 2, evaluator=planted(PLANTED),
                              verbose=False)
    assert best.definition == POOL[1]
    assert best.v_d.v == 0.7
    assert [r.iteration for r in history] == [0, 1, 2]
    assert all(best.v_d.v >= r.v_d.v for r in history)


def test_zero_budget_keeps_the_initial_definition():
    best, history = run_fdmpo(POOL[0], [], None, mock_endpoint(), 0, evaluator=planted(PLANTED),
                              verbose=False)
    assert len(history) == 1
    assert best.definition == POOL[0]


def test_ties_go_to_the_earliest_iteration():
    values = {POOL[0]: 0.4, POOL[1]: 0.6, POOL[2]: 0.6}
    best, _ = run_fdmpo(POOL[0], [], None, mock_endpoint(), 2, evaluator=planted(values), verbose=False)
    assert best.iteration == 1


def test_best_is_not_the_last_trial():
    values = {POOL[0]: 0.2, POOL[1]: 0.9, POOL[2]: 0.1}
    best, history = run_fdmpo(POOL[0], [], None, mock_endpoint(), 2, evaluator=planted(values), verbose=False)
    assert history[-1].definition == POOL[2]
    assert best.definition == POOL[1]


def test_history_file_replays_to_the_same_best(tmp_path):
    path = tmp_path / 'history.jsonl'
    best, history = run_fdmpo(POOL[0], [], None, mock_endpoint(), 2, evaluator=planted(PLANTED),
                              history_path=str(path), clock=fixed_clock(), verbose=False)
    rows = [json.loads(line) for line in path.read_text().splitlines()]
    assert [sorted(row) for row in rows] == [['definition', 'iter', 'n_samples', 'ts', 'v_d']] * 3
    replayed = load_history(str(path))
    assert replayed == history
    assert select_best(replayed) == best


def test_failed_trial_leaves_a_valid_prefix(tmp_path):
    path = tmp_path / 'history.jsonl'

    def evaluator(definition):
        if definition == POOL[2]:
            raise RuntimeError('scorer unavailable')
        return planted(PLANTED)(definition)

    with pytest.raises(RuntimeError):
        run_fdmpo(POOL[0], [], None, mock_endpoint(), 2, evaluator=evaluator, history_path=str(path),
                  verbose=False)
    prefix = load_history(str(path))
    assert [r.definition for r in prefix] == POOL[:2]


def test_mock_run_is_byte_reproducible(tmp_path):
    paths = [tmp_path / 'a.jsonl', tmp_path / 'b.jsonl']
    for path in paths:
        run_fdmpo(POOL[0], [], None, mock_endpoint(), 4, evaluator=planted(PLANTED),
                  history_path=str(path), clock=fixed_clock(), verbose=False)
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_default_evaluator_scores_with_the_feedback_model():
    samples = [(np.zeros(4), DigitTriple(4, 2, 0)), (np.ones(4), DigitTriple(1, 0, 0))]
    best, history = run_fdmpo(POOL[0], samples, zero_scorer(), mock_endpoint(), 1, verbose=False)
    assert [r.v_d.v for r in history] == pytest.approx([0.111, 0.111], abs=1e-12)
    assert history[0].v_d.n_samples == 2
    assert best.iteration == 0


def test_run_rejects_bad_arguments():
    with pytest.raises(ConfigError):
        run_fdmpo(POOL[0], [], None, mock_endpoint(), -1, evaluator=planted(PLANTED))
    with pytest.raises(DomainError):
        run_fdmpo(POOL[0], [], zero_scorer(), mock_endpoint(), 1)


def test_history_with_gaps_is_rejected(tmp_path):
    path = tmp_path / 'history.jsonl'
    rows = [record(0, POOL[0], 0.1).to_json(), record(2, POOL[1], 0.2).to_json()]
    path.write_text(''.join(json.dumps(row) + '\n' for row in rows))
    with pytest.raises(DomainError):
        load_history(str(path))


def test_trajectory_csv(tmp_path):
    history = [record(0, POOL[0], 0.25), record(1, POOL[1], 0.5)]
    path = tmp_path / 'trajectory.csv'
    write_trajectory(str(path), history, finals={0: 0.8})
    rows = list(csv.reader(path.open()))
    assert rows == [['iter', 'v_d', 'final'], ['0', '0.25', '0.8'], ['1', '0.5', '']]
