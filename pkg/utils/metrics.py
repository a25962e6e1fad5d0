"""SRCC / PLCC and the challenge-style final score.

For each split the per-dimension ``(SRCC + PLCC) / 2`` values are averaged
into ``S_in`` / ``S_out``; the final score weights them 0.7 / 0.3.
"""

import warnings
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np
from scipy import optimize, stats

from datautil.score_codec import DIMENSIONS
from utils.exceptions import DegenerateInputError, DomainError, ShapeError

SPLIT_KINDS = ('in', 'out')
IN_WEIGHT = 0.7
OUT_WEIGHT = 0.3
# pre-clamp overshoot tolerated as rounding noise
CLAMP_TOL = 1e-12


def _check_pair(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 1 or x.shape != y.shape:
        raise ShapeError('correlation inputs must be equal-length vectors, got {} and {}'.format(x.shape, y.shape))
    if len(x) < 2:
        raise ShapeError('correlation needs at least 2 points, got {}'.format(len(x)))
    for name, v in (('x', x), ('y', y)):
        if not np.all(np.isfinite(v)):
            raise DomainError('{} holds non-finite values'.format(name))
    for name, v in (('x', x), ('y', y)):
        if np.all(v == v[0]):
            raise DegenerateInputError('{} has zero variance'.format(name))
    return x, y


def _bounded(r):
    if abs(r) > 1.0 + CLAMP_TOL:
        raise ArithmeticError('correlation {} outside [-1, 1]'.format(r))
    return float(np.clip(r, -1.0, 1.0))


def plcc(x, y):
    x, y = _check_pair(x, y)
    return _bounded(stats.pearsonr(x, y)[0])


def srcc(x, y):
    x, y = _check_pair(x, y)
    # spearmanr ranks ties with their average rank
    return _bounded(stats.spearmanr(x, y)[0])


def _logistic(x, b1, b2, b3, b4):
    return (b1 - b2) / (1.0 + np.exp(-(x - b3) / np.abs(b4))) + b2


def logistic_map(pred, mos):
    """Monotone four-parameter logistic fit of predictions onto MOS.

    Falls back to the raw predictions when the fit does not converge.
    """
    pred = np.asarray(pred, dtype=np.float64)
    mos = np.asarray(mos, dtype=np.float64)
    p0 = [mos.max(), mos.min(), float(np.mean(pred)), float(np.std(pred)) or 1.0]
    try:
        with warnings.catch_warnings():
            warnings.simplefilter('ignore')
            params, _ = optimize.curve_fit(_logistic, pred, mos, p0=p0, maxfev=10000)
    except (RuntimeError, optimize.OptimizeWarning):
        return pred
    mapped = _logistic(pred, *params)
    return mapped if np.all(np.isfinite(mapped)) else pred


@dataclass
class CorrelationReport:
    # cells[split][dimension] = {'srcc': r, 'plcc': r}; None marks an undefined cell
    cells: Dict[str, Dict[str, Optional[Dict[str, float]]]] = field(default_factory=dict)
    s_in: Optional[float] = None
    s_out: Optional[float] = None
    final: Optional[float] = None

    @property
    def complete(self):
        return self.final is not None

    def undefined_cells(self):
        return [(split, dim) for split in SPLIT_KINDS for dim in DIMENSIONS
                if self.cells.get(split, {}).get(dim) is None]

    def to_dict(self):
        return {'cells': self.cells, 's_in': self.s_in, 's_out': self.s_out, 'final': self.final,
                'undefined': ['{}/{}'.format(s, d) for s, d in self.undefined_cells()]}

    def table_rows(self):
        rows = [['split', 'dimension', 'srcc', 'plcc', 'mean']]
        for split in SPLIT_KINDS:
            for dim in DIMENSIONS:
                cell = self.cells.get(split, {}).get(dim)
                if cell is None:
                    rows.append([split, dim, 'undefined', 'undefined', 'undefined'])
                else:
                    rows.append([split, dim, cell['srcc'], cell['plcc'], (cell['srcc'] + cell['plcc']) / 2])
        for name, value in (('S_in', self.s_in), ('S_out', self.s_out), ('final', self.final)):
            rows.append([name, '', '', '', 'undefined' if value is None else value])
        return rows


def split_score(cells):
    return sum((cells[d]['srcc'] + cells[d]['plcc']) / 2 for d in DIMENSIONS) / len(DIMENSIONS)


def final_score(cells):
    """Build the report from ``cells[split][dimension] = {'srcc', 'plcc'}``.

    Missing split/dimension entries raise ShapeError; entries explicitly set
    to None are undefined and leave the aggregates undefined.
    """
    for split in SPLIT_KINDS:
        if split not in cells:
            raise ShapeError('missing split {!r}'.format(split))
        for dim in DIMENSIONS:
            if dim not in cells[split]:
                raise ShapeError('missing dimension {!r} on split {!r}'.format(dim, split))
    report = CorrelationReport(cells={s: dict(cells[s]) for s in SPLIT_KINDS})
    if report.undefined_cells():
        return report
    report.s_in = split_score(cells['in'])
    report.s_out = split_score(cells['out'])
    report.final = IN_WEIGHT * report.s_in + OUT_WEIGHT * report.s_out
    return report


def correlation_cell(pred, mos, logistic_fit=False):
    """{'srcc', 'plcc'} for one split/dimension, or None when degenerate."""
    try:
        mapped = logistic_map(pred, mos) if logistic_fit else pred
        return {'srcc': srcc(pred, mos), 'plcc': plcc(mapped, mos)}
    except DegenerateInputError:
        return None
