import math

import numpy as np

_MASK64 = (1 << 64) - 1


class SplitMix64(object):
    """64-bit splitmix generator; platform independent parameter streams."""

    def __init__(self, seed):
        self.state = int(seed) & _MASK64

    def next_u64(self):
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def next_unit(self):
        # 53 high bits -> [0, 1)
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform(self, shape, bound):
        count = int(np.prod(shape)) if len(shape) else 1
        values = np.fromiter(
            ((2.0 * self.next_unit() - 1.0) * bound for _ in range(count)),
            dtype=np.float64, count=count)
        return values.reshape(shape)


def fan_in_bound(fan_in):
    return 0.5 / math.sqrt(fan_in)
