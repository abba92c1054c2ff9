"""Deterministic seed derivation.

Every randomized operation in the package takes a seed derived from
(master_seed, label path) through :func:`derive_seed`, never from a shared
sequential RNG. This makes each repeat / tree / resample a pure function of
its indices, so parallel execution order cannot change any result.
"""

import hashlib
import struct

_MASK64 = 0xFFFFFFFFFFFFFFFF


def derive_seed(master_seed, labels):
    """Derive a stable 64-bit unsigned seed for a labeled substream.

    Construction (stable across releases): BLAKE2b with an 8-byte digest,
    fed the master seed as 8 little-endian bytes (reduced mod 2**64), then
    for each ``(name, index)`` pair in ``labels``: the UTF-8 bytes of the
    name preceded by their 4-byte length, followed by the index as 8
    little-endian bytes (reduced mod 2**64). The digest is read as a
    little-endian unsigned integer.

    Collisions between distinct label paths are not impossible, merely
    astronomically unlikely; the guarantee is stability, not injectivity.
    """
    h = hashlib.blake2b(digest_size=8)
    h.update(struct.pack("<Q", master_seed & _MASK64))
    for name, index in labels:
        raw = name.encode("utf-8")
        h.update(struct.pack("<I", len(raw)))
        h.update(raw)
        h.update(struct.pack("<Q", index & _MASK64))
    return int.from_bytes(h.digest(), "little")
