"""Deterministic derivation of per-task random streams.

Every random stream used by a check is derived from a master seed and a
tuple of labels (check name, n, replica index, ...).  The derivation hashes
the canonical text ``"master|label1|label2|..."`` with BLAKE2b and uses the
first 16 bytes as the entropy of a :class:`numpy.random.SeedSequence`, so
results depend only on the labels and never on scheduling order.
"""

import hashlib

import numpy as np


def derive_seed(master_seed, *labels):
    """Return a 128-bit integer seed for ``(master_seed, *labels)``."""
    text = "|".join([str(int(master_seed))] + [_canonical(x) for x in labels])
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=16).digest()
    return int.from_bytes(digest, "big")


def make_rng(seed, *labels):
    """A PCG64 generator for ``seed``; extra labels derive a sub-stream."""
    if labels:
        seed = derive_seed(seed, *labels)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))


def _canonical(label):
    if isinstance(label, (tuple, list)):
        return "(" + ",".join(_canonical(x) for x in label) + ")"
    if isinstance(label, (bool, np.bool_)):
        return "true" if label else "false"
    if isinstance(label, (int, np.integer)):
        return str(int(label))
    if isinstance(label, (float, np.floating)):
        return repr(float(label))
    return str(label)
