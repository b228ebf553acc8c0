"""Deterministic seed derivation for labeled random streams.

Every stochastic step of a run (user sampling, LOS draws, failure draws,
association order) owns a named stream derived from the master seed, so the
streams stay independent of each other. Per-entity draws are keyed by stable
identifiers, which makes them subset-stable: removing a cell from the network
never shifts the draws of the remaining cells.

Labels may be ints, floats, bools, strings, or tuples of those; their repr
is hashed, which is unambiguous and stable across processes for these types.
"""
from __future__ import annotations

import hashlib

import numpy as np

_U64 = 2**64


def _digest(parts: tuple) -> bytes:
    return hashlib.blake2b(repr(parts).encode("utf-8"), digest_size=8).digest()


def derive_seed(*parts) -> int:
    """64-bit seed for the stream labeled by ``parts``."""
    return int.from_bytes(_digest(parts), "little")


def generator(*parts) -> np.random.Generator:
    """Fresh numpy generator for the stream labeled by ``parts``."""
    return np.random.default_rng(derive_seed(*parts))


def uniform_hash(*parts) -> float:
    """Uniform draw in [0, 1) fully determined by the labels.

    Unlike a sequential generator the value depends only on the labels, not on
    how many draws happened before, so results are evaluation-order
    independent.
    """
    return int.from_bytes(_digest(parts), "little") / _U64
