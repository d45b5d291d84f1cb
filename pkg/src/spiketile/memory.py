"""On-chip buffer model: capacities, residency, and word-granular access counts.

Two tiers: global buffers (3072 x 128b SRAM each) and small per-array local
buffers (96 x 128b, except the doubled 96 x 256b X buffers). Every transfer
moves whole words; bits are rounded up at the narrower port.
"""
from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass, field

from .errors import CapacityError

GLB_DEPTH_WORDS = 3072
GLB_WORD_BITS = 128
LOCAL_DEPTH_WORDS = 96
LOCAL_WORD_BITS = 128
X_BUF_DEPTH_WORDS = 192   # two 96-word macros
X_BUF_WORD_BITS = 256

# residency policies
STATIC = "static"      # region preallocated for the run, rewritten in place
REPLACE = "replace"    # each load replaces the previous chunk
CHUNK_LRU = "chunk-lru"  # keyed chunks with least-recently-used eviction


@dataclass(frozen=True)
class BufferSpec:
    """Geometry and tier of one SRAM buffer."""

    name: str
    depth_words: int
    word_bits: int
    tier: str  # "top" or "bottom"

    def __post_init__(self):
        if self.depth_words < 1 or self.word_bits < 1:
            raise ValueError(f"buffer {self.name}: depth and word size must be >= 1")
        if self.tier not in ("top", "bottom"):
            raise ValueError(f"buffer {self.name}: tier must be 'top' or 'bottom'")

    @property
    def capacity_bits(self) -> int:
        return self.depth_words * self.word_bits


def words_for_bits(bits: int, word_bits: int) -> int:
    if bits < 0:
        raise ValueError("negative bit count")
    return math.ceil(bits / word_bits)


def transfer_words(bits: int, src: BufferSpec, dst: BufferSpec) -> int:
    """Words moved for a transfer of the given payload; the narrower port
    fixes the word granularity."""
    return words_for_bits(bits, min(src.word_bits, dst.word_bits))


@dataclass
class BufferTally:
    read_words: int = 0
    write_words: int = 0
    read_events: int = 0
    write_events: int = 0


class AccessCounters:
    """Monotone per-buffer tallies of words moved and transfer events."""

    def __init__(self, names: list[str]):
        self.tallies: dict[str, BufferTally] = {n: BufferTally() for n in names}

    def read(self, name: str, words: int):
        if words < 0:
            raise ValueError("negative word count")
        t = self.tallies[name]
        t.read_words += words
        t.read_events += 1

    def write(self, name: str, words: int):
        if words < 0:
            raise ValueError("negative word count")
        t = self.tallies[name]
        t.write_words += words
        t.write_events += 1

    @property
    def total_words(self) -> int:
        return sum(t.read_words + t.write_words for t in self.tallies.values())

    @property
    def total_events(self) -> int:
        return sum(t.read_events + t.write_events for t in self.tallies.values())


class Buffer:
    """One buffer instance with a residency policy for capacity enforcement."""

    def __init__(self, spec: BufferSpec, policy: str = REPLACE):
        self.spec = spec
        self.policy = policy
        self.resident_words = 0
        self._chunks: OrderedDict[tuple, int] = OrderedDict()
        self.max_chunks: int | None = None

    def reserve_region(self, words: int):
        """Ensure a static region of at least this size fits (input tensors,
        weight images, output). Regions freed between layers reuse space, so
        the resident figure tracks the largest simultaneous footprint."""
        if words > self.spec.depth_words:
            raise CapacityError(self.spec.name, words, self.spec.depth_words)
        self.resident_words = max(self.resident_words, words)

    def receive(self, words: int, chunk_key: tuple | None = None):
        if self.policy == STATIC:
            return  # rewrites a preallocated region
        if self.policy == REPLACE:
            if words > self.spec.depth_words:
                raise CapacityError(self.spec.name, words, self.spec.depth_words)
            self.resident_words = words
            return
        # CHUNK_LRU
        if words > self.spec.depth_words:
            raise CapacityError(self.spec.name, words, self.spec.depth_words)
        while self._chunks and (
                (self.max_chunks is not None and len(self._chunks) >= self.max_chunks)
                or self.resident_words + words > self.spec.depth_words):
            _, evicted = self._chunks.popitem(last=False)
            self.resident_words -= evicted
        if self.resident_words + words > self.spec.depth_words:
            raise CapacityError(self.spec.name, self.resident_words + words,
                                self.spec.depth_words)
        self._chunks[chunk_key] = words
        self.resident_words += words

    def touch(self, chunk_key: tuple) -> bool:
        """LRU hit check; returns True and refreshes recency when resident."""
        if chunk_key in self._chunks:
            self._chunks.move_to_end(chunk_key)
            return True
        return False


def transfer(src: Buffer, dst: Buffer, words: int, counters: AccessCounters,
             chunk_key: tuple | None = None):
    """Move words from src to dst: src is read, dst is written, one event each.

    The destination must be able to hold the words under its residency policy.
    """
    dst.receive(words, chunk_key)
    counters.read(src.spec.name, words)
    counters.write(dst.spec.name, words)


class MemoryHierarchy:
    """The buffer set for one workload plus its shared access counters."""

    def __init__(self, buffers: list[Buffer]):
        self.buffers: dict[str, Buffer] = {b.spec.name: b for b in buffers}
        self.counters = AccessCounters(list(self.buffers))

    def __getitem__(self, name: str) -> Buffer:
        return self.buffers[name]

    def transfer(self, src: str, dst: str, words: int, chunk_key: tuple | None = None):
        transfer(self.buffers[src], self.buffers[dst], words, self.counters, chunk_key)

    def transfer_bits(self, src: str, dst: str, bits: int,
                      chunk_key: tuple | None = None) -> int:
        words = transfer_words(bits, self.buffers[src].spec, self.buffers[dst].spec)
        self.transfer(src, dst, words, chunk_key)
        return words

    def read_bits(self, name: str, bits: int) -> int:
        """Counted read with no buffer destination (feeds the spike generators)."""
        words = words_for_bits(bits, self.buffers[name].spec.word_bits)
        self.counters.read(name, words)
        return words

    def write_bits(self, name: str, bits: int) -> int:
        """Counted write with no buffer source (spike generator write-through)."""
        words = words_for_bits(bits, self.buffers[name].spec.word_bits)
        self.counters.write(name, words)
        return words

    @classmethod
    def for_mlp(cls) -> "MemoryHierarchy":
        return cls([
            Buffer(BufferSpec("act_glb0", GLB_DEPTH_WORDS, GLB_WORD_BITS, "top"), STATIC),
            Buffer(BufferSpec("act_glb1", GLB_DEPTH_WORDS, GLB_WORD_BITS, "top"), STATIC),
            Buffer(BufferSpec("w_glb", GLB_DEPTH_WORDS, GLB_WORD_BITS, "top"), STATIC),
            Buffer(BufferSpec("s_buf", LOCAL_DEPTH_WORDS, LOCAL_WORD_BITS, "bottom"), REPLACE),
            Buffer(BufferSpec("w_buf", LOCAL_DEPTH_WORDS, LOCAL_WORD_BITS, "bottom"), CHUNK_LRU),
        ])

    @classmethod
    def for_attention(cls) -> "MemoryHierarchy":
        return cls([
            Buffer(BufferSpec("act_glb0", GLB_DEPTH_WORDS, GLB_WORD_BITS, "top"), STATIC),
            Buffer(BufferSpec("act_glb1", GLB_DEPTH_WORDS, GLB_WORD_BITS, "top"), STATIC),
            Buffer(BufferSpec("x_glb", GLB_DEPTH_WORDS, GLB_WORD_BITS, "top"), STATIC),
            Buffer(BufferSpec("q_buf", LOCAL_DEPTH_WORDS, LOCAL_WORD_BITS, "bottom"), REPLACE),
            Buffer(BufferSpec("kv_buf", LOCAL_DEPTH_WORDS, LOCAL_WORD_BITS, "bottom"), REPLACE),
            Buffer(BufferSpec("x_buf", X_BUF_DEPTH_WORDS, X_BUF_WORD_BITS, "bottom"), REPLACE),
        ])
