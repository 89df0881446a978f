"""Keccak-256 (the pre-NIST variant used by Ethereum for selectors/topics).

hashlib's sha3_256 uses the final FIPS-202 padding (0x06) and produces
different digests, so it cannot substitute.  This is a direct Keccak-f[1600]
sponge with rate 1088 and the original 0x01 multi-rate padding; it is only
used for 4-byte function selectors and event topics, so speed is irrelevant.
Verified against the published empty-string/"abc" digests and the well-known
ERC-20 selector/topic values (see tests).
"""

from __future__ import annotations

_MASK = (1 << 64) - 1

_ROUND_CONSTANTS = (
    0x0000000000000001, 0x0000000000008082, 0x800000000000808A,
    0x8000000080008000, 0x000000000000808B, 0x0000000080000001,
    0x8000000080008081, 0x8000000000008009, 0x000000000000008A,
    0x0000000000000088, 0x0000000080008009, 0x000000008000000A,
    0x000000008000808B, 0x800000000000008B, 0x8000000000008089,
    0x8000000000008003, 0x8000000000008002, 0x8000000000000080,
    0x000000000000800A, 0x800000008000000A, 0x8000000080008081,
    0x8000000000008080, 0x0000000080000001, 0x8000000080008008,
)

# Rotation offsets for lane (x, y), x = column, y = row.
_ROTATIONS = (
    (0, 36, 3, 41, 18),
    (1, 44, 10, 45, 2),
    (62, 6, 43, 15, 61),
    (28, 55, 25, 21, 56),
    (27, 20, 39, 8, 14),
)


def _rotl(value: int, shift: int) -> int:
    shift %= 64
    return ((value << shift) | (value >> (64 - shift))) & _MASK


def _keccak_f(state: list[list[int]]) -> None:
    for rc in _ROUND_CONSTANTS:
        # theta
        c = [state[x][0] ^ state[x][1] ^ state[x][2] ^ state[x][3] ^ state[x][4]
             for x in range(5)]
        d = [c[(x - 1) % 5] ^ _rotl(c[(x + 1) % 5], 1) for x in range(5)]
        for x in range(5):
            for y in range(5):
                state[x][y] ^= d[x]
        # rho + pi
        b = [[0] * 5 for _ in range(5)]
        for x in range(5):
            for y in range(5):
                b[y][(2 * x + 3 * y) % 5] = _rotl(state[x][y], _ROTATIONS[x][y])
        # chi
        for x in range(5):
            for y in range(5):
                state[x][y] = b[x][y] ^ ((~b[(x + 1) % 5][y]) & b[(x + 2) % 5][y])
        # iota
        state[0][0] ^= rc


def keccak256(data: bytes) -> bytes:
    """Return the 32-byte Keccak-256 digest of ``data``."""
    rate = 136  # bytes; capacity 512 bits
    state = [[0] * 5 for _ in range(5)]

    # Multi-rate padding: 0x01 ... 0x80 (both in one byte for an exact fit).
    pad_len = rate - (len(data) % rate)
    padded = bytearray(data)
    padded.extend(b"\x00" * pad_len)
    padded[len(data)] ^= 0x01
    padded[-1] ^= 0x80

    for block_start in range(0, len(padded), rate):
        block = padded[block_start:block_start + rate]
        for i in range(rate // 8):
            lane = int.from_bytes(block[8 * i:8 * i + 8], "little")
            state[i % 5][i // 5] ^= lane
        _keccak_f(state)

    out = bytearray()
    for i in range(4):  # 32 bytes = 4 lanes of the rate portion
        out.extend(state[i % 5][i // 5].to_bytes(8, "little"))
    return bytes(out)


def selector(signature: str) -> bytes:
    """4-byte EVM call selector for a canonical method signature."""
    return keccak256(signature.encode("ascii"))[:4]


def event_topic(signature: str) -> bytes:
    """32-byte topic0 for a canonical event signature."""
    return keccak256(signature.encode("ascii"))
