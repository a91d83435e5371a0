"""Demand profiles: norms, dyadic rounding, rank distributions, samplers."""

from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Iterator, Sequence

from .errors import BudgetExceeded, InvalidParameter
from .rng import SplitMix64

DEFAULT_EPSILON = Fraction(1, 4)

Profile = tuple[int, ...]


def as_profile(entries: Iterable[int]) -> Profile:
    prof = tuple(int(x) for x in entries)
    if not prof:
        raise InvalidParameter("a demand profile needs at least one entry")
    if any(x < 1 for x in prof):
        raise InvalidParameter(f"profile entries must be >= 1: {prof}")
    return prof


def parse_profile(text: str) -> Profile:
    """``"9,5,4,42"`` -> ``(9, 5, 4, 42)``."""
    try:
        return as_profile(int(x) for x in text.strip().strip("()").split(",") if x.strip())
    except ValueError as exc:
        raise InvalidParameter(f"bad profile {text!r}: {exc}") from None


def format_profile(profile: Sequence[int]) -> str:
    return ",".join(str(x) for x in profile)


def l1_norm(profile: Sequence[int]) -> int:
    return sum(profile)


def l2_norm_sq(profile: Sequence[int]) -> int:
    return sum(x * x for x in profile)


def _floor_pow2(x: int) -> int:
    return 1 << (x.bit_length() - 1)


def round_profile(profile: Sequence[int]) -> Profile:
    """Round every entry down to a power of two, then cut a unique maximum
    down to the second-largest entry.

    >>> round_profile((9, 5, 4, 42))
    (8, 4, 4, 8)
    """
    prof = as_profile(profile)
    if len(prof) < 2:
        raise InvalidParameter("rounding needs a non-trivial profile (n >= 2)")
    rounded = [_floor_pow2(x) for x in prof]
    top = max(rounded)
    if rounded.count(top) == 1:
        second = max(x for x in rounded if x != top)
        rounded[rounded.index(top)] = second
    return tuple(rounded)


def is_rounded(profile: Sequence[int]) -> bool:
    if len(profile) < 2 or any(x < 1 or x & (x - 1) for x in profile):
        return False
    return profile.count(max(profile)) >= 2


def rank_distribution(rounded: Sequence[int]) -> tuple[int, ...]:
    """Counts ``(s_1, ..., s_k)`` where ``s_i`` is the multiplicity of ``2**(i-1)``."""
    if not is_rounded(tuple(rounded)):
        raise InvalidParameter(f"{tuple(rounded)} is not a rounded profile")
    k = max(rounded).bit_length()
    counts = [0] * k
    for x in rounded:
        counts[x.bit_length() - 1] += 1
    return tuple(counts)


# ---------------------------------------------------------------------------
# Samplers
# ---------------------------------------------------------------------------


def sample_composition(n: int, d: int, seed: int) -> Profile:
    """Uniform composition of ``d`` into ``n`` positive parts (stars and bars)."""
    if not 2 <= n <= d:
        raise InvalidParameter(f"need 2 <= n <= d, got n={n}, d={d}")
    rng = SplitMix64(seed)
    # n-1 distinct cut points from {1, ..., d-1}, Floyd's algorithm
    cuts: set[int] = set()
    for j in range(d - n + 1, d):
        t = 1 + rng.below(j)
        cuts.add(j if t in cuts else t)
    bounds = [0, *sorted(cuts), d]
    return tuple(b - a for a, b in zip(bounds, bounds[1:]))


def phi_weights(m: int) -> tuple[int, dict[tuple[int, int], Fraction]]:
    """Exact probabilities of the hard two-instance distribution.

    Returns ``(k, probs)`` where ``probs[(i, j)] = 2**-max(i,j) / W`` for
    ``0 <= i, j <= k = floor(log2(m) / 2)``.
    """
    if m < 4:
        raise InvalidParameter("the phi distribution needs m >= 4")
    k = (m.bit_length() - 1) // 2  # floor(log2(m) / 2)
    raw = {(i, j): Fraction(1, 1 << max(i, j)) for i in range(k + 1) for j in range(k + 1)}
    total = sum(raw.values())
    return k, {key: w / total for key, w in raw.items()}


def phi_normalizer(m: int) -> Fraction:
    if m < 4:
        raise InvalidParameter("the phi distribution needs m >= 4")
    k = (m.bit_length() - 1) // 2
    return sum((Fraction(1, 1 << max(i, j)) for i in range(k + 1) for j in range(k + 1)), Fraction(0))


def sample_phi(m: int, seed: int) -> Profile:
    """Draw ``(2**i, 2**j)`` with probability proportional to ``2**-max(i, j)``."""
    k, probs = phi_weights(m)
    # Integer weights 2**(k - max(i, j)) keep the draw exact.
    keys = sorted(probs)
    weights = [1 << (k - max(i, j)) for i, j in keys]
    r = SplitMix64(seed).below(sum(weights))
    for (i, j), w in zip(keys, weights):
        if r < w:
            return (1 << i, 1 << j)
        r -= w
    raise AssertionError("unreachable")


# ---------------------------------------------------------------------------
# epsilon-good profiles
# ---------------------------------------------------------------------------


def epsilon_good(profile: Sequence[int], d: int, n: int, eps) -> bool:
    """True iff at least ``eps*n`` entries exceed ``eps*d/n``."""
    eps = Fraction(eps)
    threshold = eps * d / n
    large = sum(1 for x in profile if x > threshold)
    return large >= eps * n


def compositions(d: int, n: int) -> Iterator[Profile]:
    """All compositions of ``d`` into ``n`` positive parts, lexicographically."""
    if n == 1:
        if d >= 1:
            yield (d,)
        return
    for first in range(1, d - n + 2):
        for rest in compositions(d - first, n - 1):
            yield (first, *rest)


EPS_BAD_MAX_N = 12
EPS_BAD_MAX_D = 40


def epsilon_bad_fraction(n: int, d: int, eps=DEFAULT_EPSILON) -> Fraction:
    """Exact fraction of epsilon-bad profiles among all compositions of ``d`` into ``n`` parts.

    Counts by dynamic programming over (parts placed, sum, large entries) rather
    than listing the ``C(d-1, n-1)`` compositions one by one.
    """
    if n > EPS_BAD_MAX_N or d > EPS_BAD_MAX_D:
        raise BudgetExceeded(f"enumeration budget is n <= {EPS_BAD_MAX_N}, d <= {EPS_BAD_MAX_D}")
    if not 1 <= n <= d:
        raise InvalidParameter(f"need 1 <= n <= d, got n={n}, d={d}")
    eps = Fraction(eps)
    if not 0 < eps <= Fraction(1, 2):
        raise InvalidParameter("epsilon must lie in (0, 1/2]")
    threshold = eps * d / n
    need = math.ceil(eps * n)  # good iff #large >= eps*n

    @lru_cache(maxsize=None)
    def bad_count(parts: int, remaining: int, large: int) -> int:
        # number of ways to finish with `parts` more entries summing to `remaining`
        # such that the final number of large entries stays below `need`
        if large >= need:
            return 0
        if parts == 0:
            return 1 if remaining == 0 else 0
        total = 0
        for x in range(1, remaining - parts + 2):
            total += bad_count(parts - 1, remaining - x, large + (x > threshold))
        return total

    bad = bad_count(n, d, 0)
    return Fraction(bad, math.comb(d - 1, n - 1))
