"""Independent reference for the character n-gram feature-hash embedder.

Prints vectors as hex-encoded float32 so C++ tests can freeze them bit-exactly.
"""
import struct
import sys

import numpy as np

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
MASK = (1 << 64) - 1


def fnv1a64(data: bytes) -> int:
    h = FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * FNV_PRIME) & MASK
    return h


def hash_embed(text: str, dim: int) -> np.ndarray:
    acc = [0] * dim
    if text:
        padded = "^" + text + "$"
        for n in (3, 4, 5):
            for s in range(0, len(padded) - n + 1):
                h = fnv1a64(padded[s:s + n].encode("utf-8"))
                acc[h % dim] += -1 if (h >> 63) & 1 else 1
    norm = float(np.sqrt(sum(float(a) * float(a) for a in acc)))
    if norm == 0.0:
        return np.zeros(dim, dtype=np.float32)
    return np.array([a / norm for a in acc], dtype=np.float64).astype(np.float32)


if __name__ == "__main__":
    dim = int(sys.argv[1])
    for text in sys.argv[2:]:
        v = hash_embed(text, dim)
        print(text, "".join(struct.pack("<f", x).hex() for x in v))
