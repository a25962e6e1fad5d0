import math

import torch

from alg.algs.base import Algorithm
from loss.tdrl import ce_only_objective, tdrl_objective
from network.prompt_embed import embed_prompt
from network.toy_scorer import ToyScorer


class NonFiniteLoss(ArithmeticError):
    def __init__(self, value):
        self.value = value
        super(NonFiniteLoss, self).__init__('non-finite loss {}'.format(value))


class TdrlScorer(Algorithm):
    """Toy scorer trained with L_ce on pattern tokens plus L_score on digits."""

    def __init__(self, config, feature_dim, definition):
        super(TdrlScorer, self).__init__(config)
        self.config = config
        self.definition = definition
        self.scorer = ToyScorer(feature_dim, config.hidden_dim, seed=config.seed)
        self.register_buffer('prompt', torch.from_numpy(embed_prompt(definition)))

    def objective(self, logits, digits):
        return tdrl_objective(logits, digits, self.config.ce_includes_digits)

    def loss_terms(self, minibatch):
        x, digits = minibatch[0], minibatch[1]
        logits = self.scorer.teacher_forced_logits(self.prompt, x, digits)
        return self.objective(logits, digits)

    def update(self, minibatch, opt):
        terms = self.loss_terms(minibatch)
        loss = terms['objective'].mean()
        if not math.isfinite(loss.item()):
            raise NonFiniteLoss(loss.item())
        opt.zero_grad()
        loss.backward()
        opt.step()
        return {'objective': loss.item(),
                'ce_sum': terms['ce'].detach().sum().item(),
                'digit_ce_sum': terms['digit_ce'].detach().sum().item(),
                'score_sum': terms['score'].detach().sum().item(),
                'count': minibatch[1].shape[0]}

    def predict(self, x, mode='expected'):
        return self.scorer.decode(self.prompt, x, mode, self.config.score_range)


class CeOnlyScorer(TdrlScorer):
    """Distance-agnostic baseline: digits trained as ordinary classification tokens."""

    def objective(self, logits, digits):
        return ce_only_objective(logits, digits)
