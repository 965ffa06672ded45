"""Derive independent, reproducible generators from a single integer seed."""

import zlib

import numpy as np


def derive_rng(seed, label):
    """Return a generator for ``label`` derived from ``seed``.

    Streams for different labels are statistically independent, and the same
    ``(seed, label)`` pair always yields the same stream.
    """
    key = zlib.crc32(label.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(key,)))
