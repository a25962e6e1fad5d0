import numpy as np

EMBED_DIM = 64

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


def fnv1a_64(data):
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


def char_trigrams(text):
    return [text[i:i + 3] for i in range(len(text) - 2)]


def embed_prompt(text, dim=EMBED_DIM):
    """Hash the character trigrams of a metric definition into ``dim`` buckets.

    Bucket counts are L2-normalised; text shorter than three characters has
    no trigrams and maps to the zero vector.
    """
    counts = np.zeros(dim, dtype=np.float64)
    for gram in char_trigrams(text):
        counts[fnv1a_64(gram.encode('utf-8')) % dim] += 1.0
    norm = np.linalg.norm(counts)
    if norm == 0.0:
        return counts
    return counts / norm
