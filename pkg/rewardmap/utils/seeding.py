import hashlib

import numpy as np


def derive_seed(*parts) -> int:
    """
    Stable 63-bit seed from any sequence of hashable parts.

    Python's hash() is salted per process, so seeds are derived from a
    SHA-256 digest of the parts' repr instead.
    """
    digest = hashlib.sha256(repr(parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") & ((1 << 63) - 1)


def make_rng(*parts) -> np.random.Generator:
    return np.random.default_rng(derive_seed(*parts))
