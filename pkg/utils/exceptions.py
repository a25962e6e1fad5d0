"""Error types raised across dsieqa.

Each error also derives from the builtin a caller would naturally catch,
so ``except ValueError`` keeps working around the numeric contracts.
"""


class DsIeqaError(Exception):
    pass


class ScoreParseError(DsIeqaError, ValueError):
    def __init__(self, text, position, reason):
        self.text = text
        self.position = position
        super(ScoreParseError, self).__init__(
            "cannot parse score {!r}: {} at position {}".format(text, reason, position))


class ShapeError(DsIeqaError, ValueError):
    pass


class DomainError(DsIeqaError, ValueError):
    pass


class DegenerateInputError(DsIeqaError, ValueError):
    pass


class ConfigError(DsIeqaError, ValueError):
    pass


class TrainingDivergedError(DsIeqaError, RuntimeError):
    def __init__(self, epoch, batch_index, value):
        self.epoch = epoch
        self.batch_index = batch_index
        super(TrainingDivergedError, self).__init__(
            "non-finite loss {} at epoch {} batch {}".format(value, epoch, batch_index))


class EndpointError(DsIeqaError, RuntimeError):
    def __init__(self, message, status=None):
        self.status = status
        super(EndpointError, self).__init__(
            "{} (last status: {})".format(message, status))


class ProtocolError(DsIeqaError, RuntimeError):
    pass
