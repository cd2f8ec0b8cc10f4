"""Named random streams derived from a single master seed.

Every stochastic component of a simulation (the value generator, the
tie-breaker, each agent's internal randomness) draws from its own stream.
Streams are independent and addressable by name, so replacing one agent in a
counterfactual re-run leaves every other stream untouched.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["substream"]

_MASK = 0xFFFFFFFFFFFFFFFF


def _token(label) -> int:
    if isinstance(label, (int, np.integer)):
        return int(label) & _MASK
    digest = hashlib.sha256(str(label).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def substream(master_seed: int, *labels) -> np.random.Generator:
    """Return the generator for the stream named by ``labels``.

    The same (seed, labels) pair always yields an identical stream; distinct
    label paths yield independent streams.
    """
    entropy = [_token(master_seed)] + [_token(lab) for lab in labels]
    return np.random.default_rng(np.random.SeedSequence(entropy))
