"""Labelled seed derivation: every random stream comes from one root seed."""

import hashlib

import numpy as np


def _label_words(label) -> list[int]:
    digest = hashlib.sha256(repr(label).encode()).digest()
    return [int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4)]


def derive_seed(seed: int, *labels) -> np.random.SeedSequence:
    words = [int(seed) & 0xFFFFFFFF, (int(seed) >> 32) & 0xFFFFFFFF]
    for label in labels:
        words.extend(_label_words(label))
    return np.random.SeedSequence(words)


def derive_rng(seed: int, *labels) -> np.random.Generator:
    """Generator for the stream named by ``labels`` under the root ``seed``."""
    return np.random.default_rng(derive_seed(seed, *labels))
