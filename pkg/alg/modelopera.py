import numpy as np
import torch
from sklearn.metrics import mean_absolute_error

from utils.exceptions import DegenerateInputError
from utils.metrics import plcc, srcc


def predict(network, dataset, mode='expected', batch_size=512):
    network.eval()
    outputs = []
    with torch.no_grad():
        for start in range(0, len(dataset), batch_size):
            outputs.append(network.predict(dataset.x[start:start + batch_size], mode))
    network.train()
    return np.concatenate(outputs)


def regression_metrics(pred, labels):
    """MAE plus SRCC/PLCC; correlations are None for constant predictions."""
    metrics = {'mae': float(mean_absolute_error(labels, pred))}
    for name, fn in (('srcc', srcc), ('plcc', plcc)):
        try:
            metrics[name] = fn(pred, labels)
        except DegenerateInputError:
            metrics[name] = None
    return metrics


def evaluate(network, dataset, mode='expected'):
    return regression_metrics(predict(network, dataset, mode), dataset.labels)
