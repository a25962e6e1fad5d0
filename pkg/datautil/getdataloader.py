import numpy as np
import torch
from torch.utils.data import DataLoader

from datautil.util import ScoreDataset, subdataset


def get_dataloader(dataset, batch_size, seed, shuffle=True):
    # single process + seeded generator keeps the epoch order reproducible
    generator = torch.Generator()
    generator.manual_seed(seed)
    return DataLoader(dataset=dataset, batch_size=batch_size, num_workers=0,
                      drop_last=False, shuffle=shuffle, generator=generator)


def get_score_dataloader(records, dimension, batch_size, seed):
    return get_dataloader(ScoreDataset(records, dimension), batch_size, seed)


def sample_subset(dataset, count, seed):
    """Fixed subset of ``count`` items chosen once by seed, kept in dataset order."""
    if count >= len(dataset):
        return dataset
    rng = np.random.default_rng(seed)
    indices = np.sort(rng.choice(len(dataset), size=count, replace=False))
    return subdataset(dataset, indices)
