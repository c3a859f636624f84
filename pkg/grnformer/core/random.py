"""Deterministic, order-independent random streams."""

from enum import IntEnum

import numpy as np

_SEED_MASK = (1 << 64) - 1


class Stream(IntEnum):
    """Independent random streams; each draw is keyed by (seed, stream, *keys)."""
    INIT_BACKBONE = 0
    INIT_DECODER = 1
    INIT_SAGE = 2
    INIT_FUSION = 3
    MASK = 4
    PERTURB_CELL = 5
    PERTURB_TYPE = 6
    SAMPLE_CELL = 7
    SAMPLE_TYPE = 8
    SAMPLE_TYPE_SHARED = 9
    SHUFFLE = 10
    RANDOM_GRN = 11
    FINETUNE_SHUFFLE = 12
    ANALYSIS = 13
    SYNTHETIC = 14


def stream(seed: int, kind: Stream, *keys: int) -> np.random.Generator:
    """Generator for one (seed, stream, keys) combination, independent of call order."""
    entropy = [seed & _SEED_MASK, int(kind)] + [int(k) & _SEED_MASK for k in keys]
    return np.random.default_rng(np.random.SeedSequence(entropy))


__all__ = ["Stream", "stream"]
