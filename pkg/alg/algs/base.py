import torch


class Algorithm(torch.nn.Module):
    def __init__(self, config):
        super(Algorithm, self).__init__()

    def update(self, minibatch, opt):
        raise NotImplementedError

    def predict(self, x, mode):
        raise NotImplementedError
