"""Named random sub-streams derived from one master seed.

``derive_seed(master, purpose, *index)`` hashes its arguments, so the seed
of e.g. pool member 3 at depth 2 does not depend on how many other streams
were drawn before it or in which order.
"""

import hashlib

import numpy as np


def derive_seed(master: int, purpose: str, *index: int) -> int:
    key = ":".join([str(int(master)), purpose, *(str(int(i)) for i in index)])
    digest = hashlib.blake2b(key.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little") >> 1


def derive_rng(master: int, purpose: str, *index: int) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master, purpose, *index))
