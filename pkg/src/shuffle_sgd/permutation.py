"""Deterministic random permutations and the seed-derivation scheme.

Every stochastic experiment in this package draws from an explicitly
specified PRNG so that results are bit-reproducible across platforms and
across implementations in other languages.  The generator is xoshiro256**
seeded through a splitmix64 cascade; both are documented here byte-exactly.

splitmix64 (used only for seeding):

    state := (state + 0x9E3779B97F4A7C15) mod 2^64
    z := state
    z := ((z XOR (z >> 30)) * 0xBF58476D1CE4E5B9) mod 2^64
    z := ((z XOR (z >> 27)) * 0x94D049BB133111EB) mod 2^64
    output := z XOR (z >> 31)

xoshiro256** (state s0..s3, all 64-bit):

    result := rotl64(s1 * 5, 7) * 9
    t := s1 << 17
    s2 ^= s0; s3 ^= s1; s1 ^= s2; s0 ^= s3; s2 ^= t
    s3 := rotl64(s3, 45)

Stream derivation from a lineage (base_seed, sweep_index, repeat_index):

    x := base_seed
         XOR ((sweep_index  + 1) * 0xBF58476D1CE4E5B9  mod 2^64)
         XOR ((repeat_index + 1) * 0x94D049BB133111EB  mod 2^64)
    s0..s3 := first four splitmix64 outputs starting from state x
    (if all four are zero, s0 := 0x9E3779B97F4A7C15)

Bounded integers use rejection sampling, so permutations are exactly
uniform: draw 64-bit u until u < floor(2^64 / bound) * bound, return
u mod bound.  A bound of 1 returns 0 without consuming a draw.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numpy.typing import NDArray

Permutation = NDArray[np.int64]
SignSequence = NDArray[np.int64]

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


class Lineage(NamedTuple):
    """Identity of a stream: identical lineage gives identical output."""

    base_seed: int
    sweep_index: int
    repeat_index: int


def _splitmix64(state: int) -> tuple[int, int]:
    """One splitmix64 step: returns (new_state, output)."""
    state = (state + _GOLDEN) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return state, z ^ (z >> 31)


def splitmix64_sequence(seed: int, count: int) -> list[int]:
    """First ``count`` splitmix64 outputs from ``seed`` (the seeding PRNG)."""
    state = seed & _MASK64
    out = []
    for _ in range(count):
        state, value = _splitmix64(state)
        out.append(value)
    return out


def _derive_state_words(base_seed: int, sweep_index: int, repeat_index: int) -> list[int]:
    x = base_seed & _MASK64
    x ^= ((sweep_index + 1) * _MIX1) & _MASK64
    x ^= ((repeat_index + 1) * _MIX2) & _MASK64
    words = []
    for _ in range(4):
        x, out = _splitmix64(x)
        words.append(out)
    if all(w == 0 for w in words):
        words[0] = _GOLDEN
    return words


def _rotl64(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK64


@dataclass
class RngStream:
    """xoshiro256** stream tied to a lineage.

    State words are plain Python integers; arithmetic is exact 64-bit
    wraparound.  Streams are single-owner: never share one between
    concurrent workers -- derive one per (sweep_index, repeat_index).
    """

    s0: int
    s1: int
    s2: int
    s3: int
    lineage: Lineage

    @property
    def state(self) -> tuple[int, int, int, int]:
        return (self.s0, self.s1, self.s2, self.s3)

    def next_u64(self) -> int:
        """Next raw 64-bit output."""
        result = (_rotl64((self.s1 * 5) & _MASK64, 7) * 9) & _MASK64
        t = (self.s1 << 17) & _MASK64
        self.s2 ^= self.s0
        self.s3 ^= self.s1
        self.s1 ^= self.s2
        self.s0 ^= self.s3
        self.s2 ^= t
        self.s3 = _rotl64(self.s3, 45)
        return result

    def randbelow(self, bound: int) -> int:
        """Uniform integer in [0, bound) by rejection (no modulo bias).

        bound = 1 returns 0 without consuming a draw, so that an n = 1
        with-replacement run consumes exactly as much stream as an n = 1
        shuffled run (zero draws per step).
        """
        if bound < 1:
            raise ValueError(f"bound must be >= 1, got {bound}")
        if bound == 1:
            return 0
        limit = ((1 << 64) // bound) * bound
        while True:
            u = self.next_u64()
            if u < limit:
                return u % bound

    def uniform(self, lo: float, hi: float) -> float:
        """Uniform double in [lo, hi): (u64 >> 11) * 2^-53 scaled affinely."""
        r = (self.next_u64() >> 11) * 2.0**-53
        return lo + r * (hi - lo)


def derive_stream(base_seed: int, sweep_index: int, repeat_index: int) -> RngStream:
    """Expand a lineage into a ready-to-use stream (scheme in module docstring)."""
    words = _derive_state_words(base_seed, sweep_index, repeat_index)
    return RngStream(*words, lineage=Lineage(base_seed, sweep_index, repeat_index))


def shuffle(stream: RngStream, n: int) -> Permutation:
    """Uniform random permutation of 1..n via Fisher-Yates, from index n down to 2."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    order = np.arange(1, n + 1, dtype=np.int64)
    for i in range(n, 1, -1):
        j = stream.randbelow(i)
        order[i - 1], order[j] = order[j], order[i - 1]
    return order


def sign_labels(perm: Permutation, n: int) -> SignSequence:
    """Kind labels of a permutation: +1 where the entry is <= n/2, else -1.

    Works elementwise on any integer array of entries in 1..n, so a batch
    of permutations (m, n) maps to a batch of sign sequences.
    """
    if n % 2 != 0:
        raise ValueError(f"n must be even, got {n}")
    perm = np.asarray(perm)
    return np.where(perm <= n // 2, 1, -1).astype(np.int64)


def swap(perm: Permutation, a: int, b: int) -> Permutation:
    """Copy of perm with entries at 1-based positions a and b exchanged."""
    size = len(perm)
    if not (1 <= a <= size and 1 <= b <= size):
        raise ValueError(f"positions must be in 1..{size}, got ({a}, {b})")
    out = perm.copy()
    out[a - 1], out[b - 1] = out[b - 1], out[a - 1]
    return out


class BatchRng:
    """m independent xoshiro256** streams stepped in lockstep.

    Lane r is bit-identical to the scalar RngStream with the same lineage;
    the vectorized update uses uint64 wraparound arithmetic, which is the
    same modulo-2^64 algebra as the scalar path.
    """

    def __init__(self, states: NDArray[np.uint64]):
        if states.ndim != 2 or states.shape[1] != 4:
            raise ValueError("states must have shape (m, 4)")
        self.s = states.copy()

    @classmethod
    def from_lineages(cls, base_seed: int, sweep_index: int, repeat_indices: range) -> "BatchRng":
        words = [_derive_state_words(base_seed, sweep_index, r) for r in repeat_indices]
        return cls(np.array(words, dtype=np.uint64))

    def __len__(self) -> int:
        return self.s.shape[0]

    def next_u64(self) -> NDArray[np.uint64]:
        s = self.s
        result = _rotl64_arr(s[:, 1] * np.uint64(5), 7) * np.uint64(9)
        t = s[:, 1] << np.uint64(17)
        s[:, 2] ^= s[:, 0]
        s[:, 3] ^= s[:, 1]
        s[:, 1] ^= s[:, 2]
        s[:, 0] ^= s[:, 3]
        s[:, 2] ^= t
        s[:, 3] = _rotl64_arr(s[:, 3], 45)
        return result

    def randbelow(self, bound: int) -> NDArray[np.int64]:
        """Per-lane uniform integers in [0, bound), lane-wise rejection.

        Each lane consumes exactly the draws its own rejections require,
        matching the scalar randbelow stream-for-stream.
        """
        if bound < 1:
            raise ValueError(f"bound must be >= 1, got {bound}")
        m = len(self)
        if bound == 1:
            return np.zeros(m, dtype=np.int64)
        limit = ((1 << 64) // bound) * bound
        u = self.next_u64()
        if limit < (1 << 64):
            pending = u >= np.uint64(limit)
            while pending.any():
                redraw = self._next_u64_masked(pending)
                u = np.where(pending, redraw, u)
                pending = u >= np.uint64(limit)
        return (u % np.uint64(bound)).astype(np.int64)

    def _next_u64_masked(self, mask: NDArray[np.bool_]) -> NDArray[np.uint64]:
        """Advance only the masked lanes; other lanes keep their state."""
        s = self.s
        result = _rotl64_arr(s[:, 1] * np.uint64(5), 7) * np.uint64(9)
        t = s[:, 1] << np.uint64(17)
        new = s.copy()
        new[:, 2] ^= new[:, 0]
        new[:, 3] ^= new[:, 1]
        new[:, 1] ^= new[:, 2]
        new[:, 0] ^= new[:, 3]
        new[:, 2] ^= t
        new[:, 3] = _rotl64_arr(new[:, 3], 45)
        self.s = np.where(mask[:, None], new, s)
        return result


def _rotl64_arr(x: NDArray[np.uint64], k: int) -> NDArray[np.uint64]:
    return (x << np.uint64(k)) | (x >> np.uint64(64 - k))


def batch_shuffle(batch: BatchRng, n: int) -> NDArray[np.int64]:
    """One permutation of 1..n per lane, Fisher-Yates in lockstep.

    Row r equals shuffle() on the scalar stream with lane r's lineage.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    m = len(batch)
    order = np.tile(np.arange(1, n + 1, dtype=np.int64), (m, 1))
    rows = np.arange(m)
    for i in range(n, 1, -1):
        j = batch.randbelow(i)
        a = order[rows, i - 1]
        b = order[rows, j]
        order[rows, j] = a
        order[rows, i - 1] = b
    return order
