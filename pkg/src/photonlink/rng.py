"""Deterministic substream derivation for parallel Monte Carlo work.

Every stochastic routine in this package takes an explicit generator.
Substreams are derived from (seed, key path) through a counter-based
Philox generator, so results are bit-identical regardless of how sweep
points are distributed over workers.
"""
from __future__ import annotations

import numpy as np

__all__ = ["substream"]


def substream(seed: int, *key: int) -> np.random.Generator:
    """Return an independent Philox generator for (seed, key).

    The key is an arbitrary tuple of non-negative integers, typically
    (domain tag, grid point index, replica block index).
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))
