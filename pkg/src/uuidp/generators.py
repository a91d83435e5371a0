"""The five uncoordinated ID-generation algorithms.

Every generator emits distinct integers from ``[0, m)`` one at a time.  All
randomness comes from a single :class:`~uuidp.rng.SplitMix64` stream (or any
object with a ``below(n)`` method), so a ``(kind, m, seed)`` triple fully
determines the emitted sequence.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Protocol

from .errors import Exhausted, InvalidParameter
from .rng import SplitMix64


class RandomSource(Protocol):
    def below(self, n: int) -> int: ...


# ---------------------------------------------------------------------------
# Algorithm kinds
# ---------------------------------------------------------------------------

_NAMES = ("random", "cluster", "bins", "clusterstar", "binsstar")
_ALIASES = {
    "random": "random",
    "cluster": "cluster",
    "bins": "bins",
    "clusterstar": "clusterstar",
    "cluster*": "clusterstar",
    "binsstar": "binsstar",
    "bins*": "binsstar",
}


@dataclass(frozen=True)
class AlgorithmKind:
    """Which algorithm to run.

    ``k`` is the bin size of ``bins``; ``chunks`` optionally overrides the
    chunk count of ``binsstar`` (default: derived from ``m``).
    """

    name: str
    k: int | None = None
    chunks: int | None = None

    def __post_init__(self):
        if self.name not in _NAMES:
            raise InvalidParameter(f"unknown algorithm {self.name!r}")
        if self.name == "bins":
            if self.k is None or self.k < 1:
                raise InvalidParameter("bins needs a bin size k >= 1")
        elif self.k is not None:
            raise InvalidParameter(f"{self.name} takes no bin size")
        if self.chunks is not None and (self.name != "binsstar" or self.chunks < 1):
            raise InvalidParameter("chunks is a positive binsstar-only parameter")

    @classmethod
    def parse(cls, text: str) -> AlgorithmKind:
        """Parse ``random``, ``cluster``, ``bins:3`` / ``bins(3)``,
        ``clusterstar`` / ``cluster*``, ``binsstar`` / ``bins*`` / ``binsstar:C=4``."""
        s = text.strip().lower()
        m = re.fullmatch(r"([a-z*]+)\s*(?:[:(]\s*(?:(c)\s*=\s*)?(\d+)\s*\)?)?", s)
        if not m or m.group(1) not in _ALIASES:
            raise InvalidParameter(f"cannot parse algorithm {text!r}")
        name = _ALIASES[m.group(1)]
        arg = int(m.group(3)) if m.group(3) else None
        if name == "bins":
            return cls("bins", k=arg)
        if name == "binsstar":
            return cls("binsstar", chunks=arg)
        if arg is not None:
            raise InvalidParameter(f"{name} takes no argument")
        return cls(name)

    def __str__(self) -> str:
        if self.name == "bins":
            return f"bins:{self.k}"
        if self.name == "binsstar" and self.chunks is not None:
            return f"binsstar:C={self.chunks}"
        return self.name


RANDOM = AlgorithmKind("random")
CLUSTER = AlgorithmKind("cluster")
CLUSTER_STAR = AlgorithmKind("clusterstar")
BINS_STAR = AlgorithmKind("binsstar")


def Bins(k: int) -> AlgorithmKind:
    return AlgorithmKind("bins", k=k)


# ---------------------------------------------------------------------------
# BINS* geometry
# ---------------------------------------------------------------------------


def default_chunk_count(m: int) -> int:
    """``ceil(log2 m - log2 log2 m)``, at least 1."""
    if m < 2:
        raise InvalidParameter("binsstar needs m >= 2")
    lg = math.log2(m)
    return max(1, math.ceil(lg - math.log2(lg)))


@dataclass(frozen=True)
class ChunkGeometry:
    """Partition of ``[0, C * 2**(C-1))`` into ``C`` chunks of dyadic bins.

    Chunk ``i`` (1-based) starts at ``(i-1) * 2**(C-1)`` and holds
    ``2**(C-i)`` bins of ``2**(i-1)`` IDs each.
    """

    C: int

    def __post_init__(self):
        if self.C < 1:
            raise InvalidParameter("chunk count must be >= 1")

    @classmethod
    @lru_cache(maxsize=256)
    def for_universe(cls, m: int, chunks: int | None = None) -> ChunkGeometry:
        geom = cls(default_chunk_count(m) if chunks is None else chunks)
        if geom.span > m:
            raise InvalidParameter(f"{geom.C} chunks of {geom.chunk_size} IDs exceed m={m}")
        return geom

    @property
    def chunk_size(self) -> int:
        return 1 << (self.C - 1)

    @property
    def span(self) -> int:
        return self.C * self.chunk_size

    @property
    def capacity(self) -> int:
        return (1 << self.C) - 1

    def bin_size(self, i: int) -> int:
        return 1 << (i - 1)

    def bin_count(self, i: int) -> int:
        return 1 << (self.C - i)

    def chunk_start(self, i: int) -> int:
        return (i - 1) * self.chunk_size

    def bin_ids(self, i: int, b: int) -> range:
        lo = self.chunk_start(i) + b * self.bin_size(i)
        return range(lo, lo + self.bin_size(i))


# ---------------------------------------------------------------------------
# Capacity
# ---------------------------------------------------------------------------


@lru_cache(maxsize=1024)
def capacity(kind: AlgorithmKind, m: int) -> int:
    """Number of IDs an instance is guaranteed to be able to emit.

    For ``clusterstar`` this is the fragmentation-safe bound
    ``floor(m / (2 log2 m))``; an instance may in fact emit more, until no
    run of the next size fits.
    """
    if m < 1:
        raise InvalidParameter("m must be >= 1")
    if kind.name in ("random", "cluster"):
        return m
    if kind.name == "bins":
        if kind.k > m:
            raise InvalidParameter(f"bin size {kind.k} exceeds m={m}")
        return m
    if kind.name == "clusterstar":
        if m < 2:
            raise InvalidParameter("clusterstar needs m >= 2")
        return int(m // (2 * math.log2(m)))
    return ChunkGeometry.for_universe(m, kind.chunks).capacity


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------


class _LazyShuffle:
    """Incremental Fisher-Yates over ``range(size)``; O(drawn) memory."""

    __slots__ = ("size", "drawn", "_swaps")

    def __init__(self, size: int):
        self.size = size
        self.drawn = 0
        self._swaps: dict[int, int] = {}

    def draw(self, rng: RandomSource) -> int:
        t = self.drawn
        j = t + rng.below(self.size - t)
        swaps = self._swaps
        value = swaps.get(j, j)
        swaps[j] = swaps.pop(t, t)
        self.drawn = t + 1
        return value


class IdGenerator:
    """One instance of an ID-generation algorithm."""

    kind: AlgorithmKind

    def __init__(self, m: int, rng: RandomSource):
        self.m = m
        self.rng = rng
        self.emitted_count = 0

    @property
    def capacity(self) -> int:
        return capacity(self.kind, self.m)

    def next_id(self) -> int:
        raise NotImplementedError

    def take(self, count: int) -> list[int]:
        return [self.next_id() for _ in range(count)]

    def take_runs(self, count: int) -> list[tuple[int, int]]:
        """Emit ``count`` IDs and return them as ``(start, length)`` runs of
        consecutive integers that do not wrap past ``m``.

        Consumes randomness exactly as ``count`` calls of :meth:`next_id` would.
        """
        return [(self.next_id(), 1) for _ in range(count)]

    def __repr__(self) -> str:
        return f"<{type(self).__name__} m={self.m} emitted={self.emitted_count}>"


class RandomGenerator(IdGenerator):
    kind = RANDOM

    def __init__(self, m, rng):
        super().__init__(m, rng)
        self._perm = _LazyShuffle(m)

    def next_id(self) -> int:
        if self.emitted_count >= self.m:
            raise Exhausted("all m IDs emitted")
        self.emitted_count += 1
        return self._perm.draw(self.rng)


class ClusterGenerator(IdGenerator):
    kind = CLUSTER

    def __init__(self, m, rng):
        super().__init__(m, rng)
        self.start: int | None = None

    def next_id(self) -> int:
        t = self.emitted_count
        if t >= self.m:
            raise Exhausted("all m IDs emitted")
        if self.start is None:
            self.start = self.rng.below(self.m)
        self.emitted_count = t + 1
        return (self.start + t) % self.m

    def take_runs(self, count):
        t = self.emitted_count
        if t + count > self.m:
            raise Exhausted("all m IDs emitted")
        if count == 0:
            return []
        if self.start is None:
            self.start = self.rng.below(self.m)
        self.emitted_count = t + count
        return _split((self.start + t) % self.m, count, self.m)


def _split(start: int, length: int, m: int) -> list[tuple[int, int]]:
    if start + length <= m:
        return [(start, length)]
    return [(start, m - start), (0, start + length - m)]


class BinsGenerator(IdGenerator):
    def __init__(self, m, rng, k):
        super().__init__(m, rng)
        if not 1 <= k <= m:
            raise InvalidParameter(f"bin size must satisfy 1 <= k <= m, got k={k}, m={m}")
        self.kind = Bins(k)
        self.k = k
        self.bin_count = m // k
        self.bins: list[int] = []
        self._perm = _LazyShuffle(self.bin_count)

    def next_id(self) -> int:
        t = self.emitted_count
        if t >= self.m:
            raise Exhausted("all m IDs emitted")
        self.emitted_count = t + 1
        block, offset = divmod(t, self.k)
        if block >= self.bin_count:
            return t  # leftover IDs follow all bins, in increasing order
        if offset == 0:
            self.bins.append(self._perm.draw(self.rng))
        return self.bins[block] * self.k + offset

    def take_runs(self, count):
        if self.emitted_count + count > self.m:
            raise Exhausted("all m IDs emitted")
        out = []
        k = self.k
        while count:
            t = self.emitted_count
            block, offset = divmod(t, k)
            if block >= self.bin_count:
                out.append((t, count))
                self.emitted_count = t + count
                break
            if offset == 0:
                self.bins.append(self._perm.draw(self.rng))
            step = min(k - offset, count)
            out.append((self.bins[block] * k + offset, step))
            self.emitted_count = t + step
            count -= step
        return out


class ClusterStarGenerator(IdGenerator):
    kind = CLUSTER_STAR

    def __init__(self, m, rng):
        super().__init__(m, rng)
        self.runs: list[tuple[int, int]] = []
        self._offset = 0

    @property
    def next_run_length(self) -> int:
        return 1 << len(self.runs)

    def free_gaps(self, r: int) -> list[tuple[int, int]]:
        """Maximal intervals ``(start, length)`` of valid run starts for a run of
        length ``r``, as non-wrapping intervals of ``[0, m)`` in increasing order."""
        m = self.m
        if r > m:
            return []
        blocked = []
        for a, length in self.runs:
            span = length + r - 1
            if span >= m:
                return []
            s = (a - (r - 1)) % m
            if s + span <= m:
                blocked.append((s, s + span))
            else:
                blocked.append((s, m))
                blocked.append((0, s + span - m))
        blocked.sort()
        gaps = []
        cursor = 0
        for lo, hi in blocked:
            if lo > cursor:
                gaps.append((cursor, lo - cursor))
            cursor = max(cursor, hi)
        if cursor < m:
            gaps.append((cursor, m - cursor))
        return gaps

    def _open_run(self) -> None:
        r = self.next_run_length
        gaps = self.free_gaps(r)
        total = sum(length for _, length in gaps)
        if total == 0:
            raise Exhausted(f"no room for a run of length {r}")
        idx = self.rng.below(total)
        for lo, length in gaps:
            if idx < length:
                start = lo + idx
                break
            idx -= length
        self.runs.append((start, r))
        self._offset = 0

    def next_id(self) -> int:
        if not self.runs or self._offset == self.runs[-1][1]:
            self._open_run()
        start, _ = self.runs[-1]
        value = (start + self._offset) % self.m
        self._offset += 1
        self.emitted_count += 1
        return value

    def take_runs(self, count):
        out = []
        while count:
            if not self.runs or self._offset == self.runs[-1][1]:
                self._open_run()
            start, length = self.runs[-1]
            step = min(length - self._offset, count)
            out.extend(_split((start + self._offset) % self.m, step, self.m))
            self._offset += step
            self.emitted_count += step
            count -= step
        return out


class BinsStarGenerator(IdGenerator):
    def __init__(self, m, rng, geometry: ChunkGeometry):
        super().__init__(m, rng)
        if geometry.span > m:
            raise InvalidParameter("geometry does not fit into the universe")
        self.kind = AlgorithmKind("binsstar", chunks=geometry.C)
        self.geometry = geometry
        self.bins: list[int] = []  # chosen bin index per reached chunk

    @property
    def capacity(self) -> int:
        return self.geometry.capacity

    def next_id(self) -> int:
        t = self.emitted_count + 1  # 1-indexed request number
        geo = self.geometry
        if t > geo.capacity:
            raise Exhausted("the bin of the last chunk is full")
        chunk = t.bit_length()
        size = 1 << (chunk - 1)
        if t == size:
            self.bins.append(self.rng.below(geo.bin_count(chunk)))
        self.emitted_count = t
        return geo.chunk_start(chunk) + self.bins[chunk - 1] * size + (t - size)

    def take_runs(self, count):
        geo = self.geometry
        if self.emitted_count + count > geo.capacity:
            raise Exhausted("the bin of the last chunk is full")
        out = []
        while count:
            t = self.emitted_count + 1
            chunk = t.bit_length()
            size = 1 << (chunk - 1)
            if t == size:
                self.bins.append(self.rng.below(geo.bin_count(chunk)))
            step = min(2 * size - t, count)
            out.append((geo.chunk_start(chunk) + self.bins[chunk - 1] * size + (t - size), step))
            self.emitted_count += step
            count -= step
        return out


def generator_from_source(kind: AlgorithmKind, m: int, rng: RandomSource) -> IdGenerator:
    """Build a generator drawing from an arbitrary ``below(n)`` source."""
    if m < 1:
        raise InvalidParameter("m must be >= 1")
    if kind.name == "random":
        return RandomGenerator(m, rng)
    if kind.name == "cluster":
        return ClusterGenerator(m, rng)
    if kind.name == "bins":
        return BinsGenerator(m, rng, kind.k)
    if kind.name == "clusterstar":
        if m < 2:
            raise InvalidParameter("clusterstar needs m >= 2")
        return ClusterStarGenerator(m, rng)
    return BinsStarGenerator(m, rng, ChunkGeometry.for_universe(m, kind.chunks))


def create(kind: AlgorithmKind, m: int, seed: int) -> IdGenerator:
    """A fresh instance of ``kind`` over ``[0, m)`` seeded with ``seed``."""
    return generator_from_source(kind, m, SplitMix64(seed))


def valid_starts(g: ClusterStarGenerator, r: int) -> set[int]:
    """Starts ``x`` whose run ``x, ..., x+r-1 (mod m)`` misses all opened runs of ``g``."""
    if not isinstance(g, ClusterStarGenerator):
        raise InvalidParameter("valid_starts needs a clusterstar instance")
    return {x for lo, length in g.free_gaps(r) for x in range(lo, lo + length)}
