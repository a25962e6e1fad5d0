import json
import os

import numpy as np
import torch

from datautil.score_codec import DIMENSION_FIELDS, check_dimension, score_to_triple
from datautil.synth_data import SPLITS, SampleRecord
from utils.exceptions import ConfigError

RECORD_FIELDS = ('id', 'features', 'mos_visual', 'mos_edit', 'mos_pres', 'split')


def split_path(data_dir, split):
    return os.path.join(data_dir, '{}.jsonl'.format(split))


def write_records(path, records):
    with open(path, 'w') as f:
        for record in records:
            f.write(json.dumps(record.to_dict()) + '\n')


def parse_json_line(path, lineno, line):
    try:
        return json.loads(line)
    except ValueError as e:
        raise ConfigError('{}:{}: {}'.format(path, lineno, e))


def read_records(path, dimension=None):
    """Read a JSON Lines split; ``dimension`` (one label or several) must be labelled on every row."""
    if not os.path.exists(path):
        raise ConfigError('dataset file not found: {}'.format(path))
    if dimension is None:
        required = ()
    elif isinstance(dimension, str):
        required = (dimension,)
    else:
        required = tuple(dimension)
    records = []
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            row = parse_json_line(path, lineno, line)
            if not isinstance(row, dict):
                raise ConfigError('{}:{}: expected a JSON object'.format(path, lineno))
            for dim in required:
                if row.get(DIMENSION_FIELDS[dim]) is None:
                    raise ConfigError('{}:{} has no {} labels ({})'.format(
                        path, lineno, dim, DIMENSION_FIELDS[dim]))
            missing = [k for k in ('id', 'features', 'split') if k not in row]
            if missing:
                raise ConfigError('{}:{} is missing fields {}'.format(path, lineno, missing))
            records.append(SampleRecord(**{k: row.get(k) for k in RECORD_FIELDS}))
    if not records:
        raise ConfigError('dataset file is empty: {}'.format(path))
    return records


def read_splits(data_dir, dimension=None, splits=SPLITS):
    return {split: read_records(split_path(data_dir, split), dimension) for split in splits}


def features_matrix(records):
    return torch.tensor(np.array([r.features for r in records], dtype=np.float64))


def digits_matrix(records, dimension):
    return torch.tensor([list(score_to_triple(r.label(dimension))) for r in records], dtype=torch.long)


def labels_vector(records, dimension):
    return np.array([r.label(dimension) for r in records], dtype=np.float64)


class ScoreDataset(object):
    """One dimension's view of a record list: (features, digits, index) items."""

    def __init__(self, records, dimension):
        self.dimension = check_dimension(dimension)
        self.records = records
        self.x = features_matrix(records)
        self.digits = digits_matrix(records, dimension)
        self.labels = labels_vector(records, dimension)

    def __getitem__(self, index):
        return self.x[index], self.digits[index], index

    def __len__(self):
        return len(self.x)


class subdataset(ScoreDataset):
    def __init__(self, dataset, indices):
        self.dimension = dataset.dimension
        self.records = [dataset.records[i] for i in indices]
        self.x = dataset.x[indices]
        self.digits = dataset.digits[indices]
        self.labels = dataset.labels[indices]
