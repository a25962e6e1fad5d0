import math

import torch


def warmup_steps(total_steps, warmup_ratio):
    # round first: 0.07 * 100 is 7.000000000000001 in binary floating point
    return int(math.ceil(round(warmup_ratio * total_steps, 9)))


def lr_at(step, total_steps, config):
    """Linear warmup from 0 to ``config.lr``, then cosine decay to 0 on the last step."""
    base = config.lr
    # at least one step runs at a nonzero rate
    warmup = min(warmup_steps(total_steps, config.warmup_ratio), total_steps - 1)
    if step < warmup:
        return base * step / warmup
    span = total_steps - 1 - warmup
    progress = (step - warmup) / span if span > 0 else 0.0
    return base * 0.5 * (1.0 + math.cos(math.pi * progress))


def get_optimizer(alg, config):
    return torch.optim.AdamW(
        alg.parameters(), lr=config.lr, betas=(0.9, 0.999), eps=1e-8,
        weight_decay=config.weight_decay)


def get_scheduler(optimizer, total_steps, config):
    return torch.optim.lr_scheduler.LambdaLR(
        optimizer, lambda step: lr_at(min(step, total_steps - 1), total_steps, config) / config.lr)
