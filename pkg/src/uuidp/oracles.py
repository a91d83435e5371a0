"""Exact collision probabilities as :class:`fractions.Fraction` values.

Closed forms come first; :func:`brute_force_collision` is the independent
check that drives the real generator code through every internal random
choice.
"""

from __future__ import annotations

import itertools
import math
from collections import defaultdict
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

from .errors import BudgetExceeded, Exhausted, InvalidParameter
from .generators import AlgorithmKind, ChunkGeometry, generator_from_source
from .profiles import as_profile

ENUMERATION_BUDGET = 10**7

ZERO = Fraction(0)
ONE = Fraction(1)


def _check_profile(profile, m: int):
    prof = as_profile(profile)
    if m < 1:
        raise InvalidParameter("m must be >= 1")
    return prof


def cluster_pairwise(d_i: int, d_j: int, m: int) -> Fraction:
    """Collision probability of two CLUSTER instances: ``(d_i + d_j - 1) / m``."""
    if d_i < 1 or d_j < 1:
        raise InvalidParameter("demands must be >= 1")
    if d_i + d_j - 1 > m:
        raise InvalidParameter("d_i + d_j - 1 exceeds m; the probability is clamped to 1")
    return Fraction(d_i + d_j - 1, m)


def cluster_exact(profile: Sequence[int], m: int) -> Fraction:
    """Probability that arcs ``[x_i, x_i + d_i)`` with uniform starts overlap.

    Enumerates start tuples; the first start is pinned to 0 by rotation
    symmetry, which divides the work by ``m`` without changing the result.
    """
    prof = _check_profile(profile, m)
    n = len(prof)
    if m**n > ENUMERATION_BUDGET:
        raise BudgetExceeded(f"m**n = {m**n} exceeds {ENUMERATION_BUDGET}")
    if n == 1:
        return ZERO
    if any(d > m for d in prof):
        return ONE
    good = 0
    for rest in itertools.product(range(m), repeat=n - 1):
        starts = (0, *rest)
        if all(
            (starts[j] - starts[i]) % m >= prof[i] and (starts[i] - starts[j]) % m >= prof[j]
            for i in range(n)
            for j in range(i + 1, n)
        ):
            good += 1
    return 1 - Fraction(good, m ** (n - 1))


def disjoint_subsets_exact(universe: int, sizes: Sequence[int]) -> Fraction:
    """Probability that independent uniform subsets of the given sizes are not
    pairwise disjoint."""
    if any(b < 1 for b in sizes):
        raise InvalidParameter("subset sizes must be >= 1")
    if sum(sizes) > universe:
        return ONE
    p_disjoint = ONE
    used = 0
    for b in sizes:
        p_disjoint *= Fraction(math.comb(universe - used, b), math.comb(universe, b))
        used += b
    return 1 - p_disjoint


def random_exact(profile: Sequence[int], m: int) -> Fraction:
    """RANDOM: the first ``d_i`` IDs of an instance form a uniform ``d_i``-subset."""
    prof = _check_profile(profile, m)
    if any(d > m for d in prof):
        raise InvalidParameter("demand exceeds the universe")
    return disjoint_subsets_exact(m, prof)


def bins_exact(profile: Sequence[int], k: int, m: int) -> Fraction:
    """BINS(k): collision iff two instances share a bin."""
    prof = _check_profile(profile, m)
    if not 1 <= k <= m:
        raise InvalidParameter("need 1 <= k <= m")
    if len(prof) == 1:
        return ZERO
    bins = m // k
    if any(d > bins * k for d in prof):
        return ONE  # that instance holds every bin
    return disjoint_subsets_exact(bins, [-(-d // k) for d in prof])


def p_star_uniform(n: int, h: int, m: int) -> Fraction:
    """Optimal collision probability for the uniform profile ``(h,) * n``."""
    if n < 2 or h < 1:
        raise InvalidParameter("need n >= 2 and h >= 1")
    if h > m:
        return ONE
    return bins_exact((h,) * n, h, m)


def p_star_two_construction(i: int, j: int, m: int) -> Fraction:
    """Collision probability on ``(i, j)`` of BINS(i) run on ``m - (j - i)`` IDs,
    with the last ``j - i`` requests served from reserved IDs."""
    if not 1 <= i <= j or 2 * j > m:
        raise InvalidParameter("need 1 <= i <= j <= m/2")
    return Fraction(1, (m - j + i) // i)


def balls_success_prob(p: Sequence, n: int) -> Fraction:
    """Probability that ``n`` balls thrown with bin probabilities ``p`` land in
    distinct bins: ``n! * e_n(p)``.

    Floats are read through their shortest decimal repr, so ``0.6`` is ``3/5``.
    """
    probs = [x if isinstance(x, Fraction) else Fraction(repr(x)) if isinstance(x, float) else Fraction(x) for x in p]
    ell = len(probs)
    if not 1 <= n <= ell <= 10:
        raise InvalidParameter("need n <= len(p) <= 10")
    if any(x < 0 for x in probs) or sum(probs) != 1:
        raise InvalidParameter("p must be a probability vector")
    # e[r] = r-th elementary symmetric polynomial of the entries seen so far
    e = [ONE] + [ZERO] * n
    for x in probs:
        for r in range(n, 0, -1):
            e[r] += e[r - 1] * x
    return math.factorial(n) * e[n]


def bins_star_exact(profile: Sequence[int], geometry: ChunkGeometry, m: int | None = None) -> Fraction:
    """BINS*: collision iff two instances pick the same bin in some chunk.

    Instance ``i`` reaches chunks ``1 .. bit_length(d_i)``; chunks are
    independent birthday problems.
    """
    prof = as_profile(profile)
    if m is not None and geometry.span > m:
        raise InvalidParameter("geometry does not fit into the universe")
    if any(d > geometry.capacity for d in prof):
        raise InvalidParameter(f"demands must stay below 2**C = {geometry.capacity + 1}")
    reach = [d.bit_length() for d in prof]
    p_ok = ONE
    for c in range(1, geometry.C + 1):
        users = sum(1 for r in reach if r >= c)
        bins = geometry.bin_count(c)
        for t in range(users):
            p_ok *= Fraction(bins - t, bins) if t < bins else ZERO
    return 1 - p_ok


# ---------------------------------------------------------------------------
# CLUSTER*: enumerate runs directly from the definition
# ---------------------------------------------------------------------------


def _run(x: int, r: int, m: int) -> frozenset:
    return frozenset((x + t) % m for t in range(r))


@lru_cache(maxsize=None)
def _cluster_star_sets(d: int, m: int) -> dict:
    """Distribution of the set of the first ``d`` IDs of one CLUSTER* instance."""
    if m ** (d.bit_length()) > ENUMERATION_BUDGET:
        raise BudgetExceeded(f"{d.bit_length()} run placements over m={m} exceed the enumeration budget")
    out: dict[frozenset, Fraction] = defaultdict(Fraction)

    def grow(opened: frozenset, emitted: frozenset, r: int, weight: Fraction):
        remaining = d - len(emitted)
        if remaining == 0:
            out[emitted] += weight
            return
        starts = [x for x in range(m) if not (_run(x, r, m) & opened)]
        if not starts:
            raise Exhausted(f"no room for a run of length {r} (m={m}, d={d})")
        w = weight / len(starts)
        for x in starts:
            run = _run(x, r, m)
            taken = frozenset((x + t) % m for t in range(min(r, remaining)))
            grow(opened | run, emitted | taken, 2 * r, w)

    grow(frozenset(), frozenset(), 1, ONE)
    return dict(out)


def cluster_star_exact(profile: Sequence[int], m: int) -> Fraction:
    """Exact CLUSTER* collision probability by enumerating run placements.

    Raises :class:`Exhausted` when some branch has no valid start.
    """
    prof = _check_profile(profile, m)
    if len(prof) == 1:
        return ZERO
    # fold instances in one by one, keeping the distribution of the union
    unions: dict[frozenset, Fraction] = {frozenset(): ONE}
    for d in prof:
        dist = _cluster_star_sets(d, m)
        if len(unions) * len(dist) > ENUMERATION_BUDGET:
            raise BudgetExceeded("joint run placements exceed the enumeration budget")
        nxt: dict[frozenset, Fraction] = defaultdict(Fraction)
        for u, wu in unions.items():
            for s, ws in dist.items():
                if not (u & s):
                    nxt[u | s] += wu * ws
        unions = nxt
    return 1 - sum(unions.values(), ZERO)


# ---------------------------------------------------------------------------
# Brute force through the generator code
# ---------------------------------------------------------------------------


class _Replay:
    """``below(n)`` source that replays a fixed prefix of choices, then answers 0,
    recording every arity it is asked for."""

    def __init__(self, prefix):
        self.prefix = prefix
        self.arities: list[int] = []

    def below(self, n: int) -> int:
        t = len(self.arities)
        self.arities.append(n)
        return self.prefix[t] if t < len(self.prefix) else 0


def _choice_tree_bound(kind: AlgorithmKind, m: int, d: int) -> int:
    """Upper bound on the number of leaves of one instance's choice tree."""
    if kind.name == "random":
        return math.perm(m, min(d, m))
    if kind.name == "cluster":
        return m
    if kind.name == "bins":
        bins = m // kind.k
        return math.perm(bins, min(bins, -(-d // kind.k)))
    if kind.name == "clusterstar":
        return m ** d.bit_length()
    geo = ChunkGeometry.for_universe(m, kind.chunks)
    return math.prod(geo.bin_count(c) for c in range(1, min(d, geo.capacity).bit_length() + 1))


@lru_cache(maxsize=None)
def emitted_set_distribution(kind: AlgorithmKind, m: int, d: int) -> dict:
    """Exact law of the set of the first ``d`` IDs of one instance, obtained by
    running the generator on every sequence of internal random choices.

    Sets are encoded as bitmasks.
    """
    if _choice_tree_bound(kind, m, d) > ENUMERATION_BUDGET:
        raise BudgetExceeded("per-instance choice tree too large")
    out: dict[int, Fraction] = defaultdict(Fraction)
    branches = 0
    stack = [()]
    while stack:
        prefix = stack.pop()
        src = _Replay(prefix)
        gen = generator_from_source(kind, m, src)
        mask = 0
        for _ in range(d):
            mask |= 1 << gen.next_id()
        if len(src.arities) > len(prefix):
            arity = src.arities[len(prefix)]
            stack.extend(prefix + (c,) for c in range(arity))
            continue
        branches += 1
        if branches > ENUMERATION_BUDGET:
            raise BudgetExceeded("per-instance choice tree too large")
        weight = Fraction(1)
        for a in src.arities:
            weight /= a
        out[mask] += weight
    return dict(out)


def brute_force_collision(kind: AlgorithmKind, profile: Sequence[int], m: int) -> Fraction:
    """Exact collision probability by weighted enumeration of every instance's
    internal random choices (instances are independent, so their laws multiply)."""
    prof = _check_profile(profile, m)
    if len(prof) == 1:
        return ZERO
    dists = [list(emitted_set_distribution(kind, m, d).items()) for d in prof]
    if math.prod(len(x) for x in dists) > ENUMERATION_BUDGET:
        raise BudgetExceeded("joint outcome space exceeds the enumeration budget")

    def no_collision(level: int, used: int) -> Fraction:
        if level == len(dists):
            return ONE
        total = ZERO
        for mask, w in dists[level]:
            if not mask & used:
                total += w * no_collision(level + 1, used | mask)
        return total

    return 1 - no_collision(0, 0)
