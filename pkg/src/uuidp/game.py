"""The ID-generation game between ``n`` generator instances and an adversary.

An adversary is a description object whose :meth:`strategy` method returns a
fresh generator-based coroutine for one game::

    def strategy(self, rng, m):
        obs = yield ActivateNew()       # engine answers with an Observation
        obs = yield RequestExisting(0)
        yield Stop()                    # or simply return

The engine owns the generator instances and the global collision check;
adversaries only ever see :class:`Observation` values.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Generator, Iterable, Sequence

from .errors import CapacityExceeded, InvalidParameter, InvalidSequence
from .generators import (
    AlgorithmKind,
    ChunkGeometry,
    capacity,
    create,
)
from .profiles import Profile, as_profile, format_profile, parse_profile
from .rng import SplitMix64, mix64

# ---------------------------------------------------------------------------
# Protocol types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ActivateNew:
    pass


@dataclass(frozen=True)
class RequestExisting:
    j: int


@dataclass(frozen=True)
class Stop:
    pass


Action = ActivateNew | RequestExisting | Stop


@dataclass(frozen=True)
class Observation:
    """What the adversary learns after one request.

    ``collided`` is the game-wide collision flag after this step (monotone);
    ``duplicate`` tells whether this particular ID had been emitted before.
    """

    instance: int
    id: int
    collided: bool
    duplicate: bool = False


@dataclass
class Transcript:
    steps: list[tuple[Action, Observation]] = field(default_factory=list)
    profile: Profile | tuple = ()
    collision_step: int | None = None

    @property
    def collided(self) -> bool:
        return self.collision_step is not None

    @property
    def actions(self) -> list[Action]:
        return [a for a, _ in self.steps]

    @property
    def ids(self) -> list[int]:
        return [o.id for _, o in self.steps]


Strategy = Generator[Action, Observation, None]


# ---------------------------------------------------------------------------
# Engine
# ---------------------------------------------------------------------------

# Stream index reserved for adversary-side randomness (instances use 0, 1, ...).
_ADVERSARY_STREAM = (1 << 63) - 1


def play_game(kind: AlgorithmKind, m: int, adversary, seed: int) -> Transcript:
    """Play one game; instance ``j`` is seeded with ``mix64(seed, j)``."""
    cap = capacity(kind, m)
    strategy = adversary.strategy(SplitMix64(mix64(seed, _ADVERSARY_STREAM)), m)
    instances = []
    counts: list[int] = []
    seen: set[int] = set()
    transcript = Transcript()
    steps = transcript.steps
    collided = False
    try:
        action = next(strategy)
        while not isinstance(action, Stop):
            if isinstance(action, ActivateNew):
                j = len(instances)
                instances.append(create(kind, m, mix64(seed, j)))
                counts.append(0)
            elif isinstance(action, RequestExisting):
                j = action.j
                if not 0 <= j < len(instances):
                    raise InvalidParameter(f"instance {j} has not been activated")
            else:
                raise InvalidParameter(f"unknown action {action!r}")
            if counts[j] >= cap:
                raise CapacityExceeded(
                    f"instance {j} asked for ID #{counts[j] + 1}, capacity is {cap}"
                )
            value = instances[j].next_id()
            counts[j] += 1
            duplicate = value in seen
            if duplicate and not collided:
                collided = True
                transcript.collision_step = len(steps)
            seen.add(value)
            obs = Observation(j, value, collided, duplicate)
            steps.append((action, obs))
            action = strategy.send(obs)
    except StopIteration:
        pass
    finally:
        strategy.close()
    transcript.profile = tuple(counts)
    return transcript


def replay(kind: AlgorithmKind, m: int, actions: Sequence[Action], seed: int) -> Transcript:
    return play_game(kind, m, Scripted.from_actions(actions), seed)


# ---------------------------------------------------------------------------
# Adversaries
# ---------------------------------------------------------------------------

SEQUENTIAL = "sequential"
ROUND_ROBIN = "roundrobin"


@dataclass(frozen=True)
class Oblivious:
    """Serves a fixed demand profile without looking at the IDs."""

    profile: Profile
    order: str = SEQUENTIAL

    def __post_init__(self):
        object.__setattr__(self, "profile", as_profile(self.profile))
        if self.order not in (SEQUENTIAL, ROUND_ROBIN):
            raise InvalidParameter(f"unknown order {self.order!r}")

    def actions(self) -> list[Action]:
        prof = self.profile
        out: list[Action] = []
        if self.order == SEQUENTIAL:
            for j, dj in enumerate(prof):
                out.append(ActivateNew())
                out.extend(RequestExisting(j) for _ in range(dj - 1))
        else:
            for r in range(max(prof)):
                for j, dj in enumerate(prof):
                    if r < dj:
                        out.append(ActivateNew() if r == 0 else RequestExisting(j))
        return out

    def strategy(self, rng, m: int) -> Strategy:
        for action in self.actions():
            yield action
        yield Stop()

    def __str__(self) -> str:
        suffix = "" if self.order == SEQUENTIAL else f"@{self.order}"
        return f"oblivious:{format_profile(self.profile)}{suffix}"


def circular_distance(a: int, b: int, m: int) -> int:
    return min((b - a) % m, (a - b) % m)


def cluster_killer_policy(first_ids: Sequence[int], m: int, n: int, d: int) -> tuple[int, int]:
    """Target instance and extra request count for the attack on CLUSTER.

    Picks the circularly closest pair of first IDs (ties: lowest index pair) and
    returns the instance whose ID reaches the other by walking forward, i.e. the
    "smaller" one modulo ``m``.
    """
    if len(first_ids) != n or n < 2:
        raise InvalidParameter("need exactly n >= 2 first IDs")
    best = None
    for i in range(n):
        for j in range(i + 1, n):
            a, b = first_ids[i], first_ids[j]
            fwd, back = (b - a) % m, (a - b) % m
            dist = min(fwd, back)
            if best is None or dist < best[0]:
                best = (dist, i if fwd <= back else j)
    return best[1], d - n


@dataclass(frozen=True)
class ClusterKiller:
    """Asks every instance for one ID, then hammers the instance just behind
    the closest pair with all remaining ``d - n`` requests.

    ``mode="roundrobin"`` instead alternates the remaining requests between the
    two instances of the closest pair, starting with the one behind.
    """

    n: int
    d: int
    mode: str = "single"

    def __post_init__(self):
        if self.n < 2 or self.d < 2 * self.n:
            raise InvalidParameter("cluster killer needs n >= 2 and d >= 2n")
        if self.mode not in ("single", ROUND_ROBIN):
            raise InvalidParameter(f"unknown killer mode {self.mode!r}")

    def strategy(self, rng, m: int) -> Strategy:
        first = []
        for _ in range(self.n):
            obs = yield ActivateNew()
            first.append(obs.id)
        target, extra = cluster_killer_policy(first, m, self.n, self.d)
        if self.mode == "single":
            for _ in range(extra):
                yield RequestExisting(target)
        else:
            other = _pair_partner(first, m, target)
            for t in range(extra):
                yield RequestExisting(target if t % 2 == 0 else other)
        yield Stop()

    def __str__(self) -> str:
        suffix = "" if self.mode == "single" else f",mode={self.mode}"
        return f"killer:n={self.n},d={self.d}{suffix}"


def _pair_partner(first: Sequence[int], m: int, target: int) -> int:
    best = None
    for j, x in enumerate(first):
        if j != target:
            dist = circular_distance(first[target], x, m)
            if best is None or dist < best[0]:
                best = (dist, j)
    return best[1]


def validate_sequence(seq: Sequence[Sequence[int]]) -> list[Profile]:
    """Check the one-step transition rule and return the sequence as tuples."""
    profiles = [tuple(int(x) for x in p) for p in seq]
    if not profiles or profiles[0] != ():
        raise InvalidSequence("a demand sequence starts with the empty profile")
    for t, (prev, cur) in enumerate(zip(profiles, profiles[1:]), start=1):
        if _transition(prev, cur) is None:
            raise InvalidSequence(f"step {t}: {prev} -> {cur} is neither an append of 1 nor an increment")
    return profiles


def _transition(prev: Profile, cur: Profile) -> Action | None:
    if len(cur) == len(prev) + 1 and cur[:-1] == prev and cur[-1] == 1:
        return ActivateNew()
    if len(cur) == len(prev):
        diff = [j for j, (a, b) in enumerate(zip(prev, cur)) if a != b]
        if len(diff) == 1 and cur[diff[0]] == prev[diff[0]] + 1:
            return RequestExisting(diff[0])
    return None


def semi_adaptive_step(seq: Sequence[Profile], index: int, collided: bool) -> Action:
    """Next action of the follower currently at ``seq[index]``."""
    if collided or index + 1 >= len(seq):
        return Stop()
    action = _transition(tuple(seq[index]), tuple(seq[index + 1]))
    if action is None:
        raise InvalidSequence(f"step {index + 1} violates the transition rule")
    return action


@dataclass(frozen=True)
class SemiAdaptiveFollower:
    """Follows a demand sequence until the first collision, then stops.

    Only downward-closed profile sets are supported, so stopping right away
    is always a legal final profile.
    """

    sequence: tuple[Profile, ...]

    def __post_init__(self):
        object.__setattr__(self, "sequence", tuple(validate_sequence(self.sequence)))

    @classmethod
    def from_file(cls, path: str | Path) -> SemiAdaptiveFollower:
        """One profile per line (``3,2``); ``()`` or ``-`` is the empty profile,
        ``#`` starts a comment.  A missing leading empty profile is implied."""
        seq: list[Profile] = []
        for raw in Path(path).read_text().splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            seq.append(() if line in ("()", "-") else parse_profile(line))
        if not seq or seq[0] != ():
            seq.insert(0, ())
        return cls(tuple(seq))

    def strategy(self, rng, m: int) -> Strategy:
        collided = False
        for index in range(len(self.sequence)):
            action = semi_adaptive_step(self.sequence, index, collided)
            if isinstance(action, Stop):
                break
            obs = yield action
            collided = obs.collided
        yield Stop()

    def __str__(self) -> str:
        return f"fol:{len(self.sequence) - 1}steps"


Policy = Callable[[tuple[Observation, ...]], Action]


@dataclass(frozen=True)
class Scripted:
    """Adversary defined by a decision function of the observation history."""

    policy: Policy
    name: str = "scripted"

    @classmethod
    def from_actions(cls, actions: Iterable[Action], name: str = "fixed") -> Scripted:
        fixed = tuple(actions)

        def policy(history):
            return fixed[len(history)] if len(history) < len(fixed) else Stop()

        return cls(policy, name)

    def strategy(self, rng, m: int) -> Strategy:
        history: list[Observation] = []
        while True:
            action = self.policy(tuple(history))
            if isinstance(action, Stop):
                break
            history.append((yield action))
        yield Stop()

    def __str__(self) -> str:
        return self.name


# ---------------------------------------------------------------------------
# Observation-blind variants
# ---------------------------------------------------------------------------


class _BinShadow:
    """Stand-in IDs for an adversary that must not see the real ones.

    Bin identities are drawn uniformly without replacement across the whole
    game (per chunk for BINS*), which is the law of the real bin sequence
    conditioned on no collision.
    """

    def __init__(self, kind: AlgorithmKind, m: int, rng: SplitMix64):
        from .generators import _LazyShuffle

        self.m = m
        self.rng = rng
        self.counts: dict[int, int] = {}
        self.bins: dict[int, list[int]] = {}
        if kind.name in ("bins", "random"):
            k = 1 if kind.name == "random" else kind.k
            self.k = k
            self.geometry = None
            self.pools = {0: _LazyShuffle(m // k)}
        elif kind.name == "binsstar":
            self.geometry = ChunkGeometry.for_universe(m, kind.chunks)
            self.pools = {c: _LazyShuffle(self.geometry.bin_count(c)) for c in range(1, self.geometry.C + 1)}
        else:
            raise InvalidParameter(
                f"blind variants are defined for bin-symmetric algorithms, not {kind}"
            )

    def _fresh_bin(self, pool_key: int) -> int:
        pool = self.pools[pool_key]
        if pool.drawn < pool.size:
            return pool.draw(self.rng)
        return self.rng.below(pool.size)  # every bin is taken; a collision already happened

    def next_id(self, instance: int) -> int:
        t = self.counts.get(instance, 0)
        self.counts[instance] = t + 1
        chosen = self.bins.setdefault(instance, [])
        if self.geometry is None:
            block, offset = divmod(t, self.k)
            if block >= self.m // self.k:
                return t
            if offset == 0:
                chosen.append(self._fresh_bin(0))
            return chosen[block] * self.k + offset
        geo = self.geometry
        req = t + 1
        chunk = req.bit_length()
        size = 1 << (chunk - 1)
        if req == size:
            chosen.append(self._fresh_bin(chunk))
        return geo.chunk_start(chunk) + chosen[chunk - 1] * size + (req - size)


@dataclass(frozen=True)
class BlindVariant:
    """Runs ``inner`` on shadow IDs plus the real collision flags only."""

    inner: object
    kind: AlgorithmKind
    m: int

    def strategy(self, rng, m: int) -> Strategy:
        shadow = _BinShadow(self.kind, self.m, SplitMix64(rng.next_u64()))
        inner = self.inner.strategy(SplitMix64(rng.next_u64()), m)
        try:
            action = next(inner)
            while not isinstance(action, Stop):
                real = yield action
                fake = Observation(real.instance, shadow.next_id(real.instance), real.collided)
                action = inner.send(fake)
        except StopIteration:
            pass
        finally:
            inner.close()
        yield Stop()

    def __str__(self) -> str:
        return f"blind({self.inner})"


def blind_variant(adversary, kind: AlgorithmKind, m: int) -> BlindVariant:
    """Variant of ``adversary`` that only learns the collision flag after each step."""
    _BinShadow(kind, m, SplitMix64(0))  # validates kind
    return BlindVariant(adversary, kind, m)


# ---------------------------------------------------------------------------
# CLI spec parsing
# ---------------------------------------------------------------------------


def parse_adversary(text: str):
    """``oblivious:3,2[@roundrobin]``, ``killer:n=8,d=64[,mode=roundrobin]``, ``fol:<file>``."""
    head, _, rest = text.strip().partition(":")
    head = head.lower()
    if head == "oblivious":
        prof, _, order = rest.partition("@")
        return Oblivious(parse_profile(prof), order or SEQUENTIAL)
    if head == "killer":
        params = {}
        for part in rest.split(","):
            key, eq, value = part.partition("=")
            if not eq:
                raise InvalidParameter(f"bad killer parameter {part!r}")
            params[key.strip().lower()] = value.strip()
        try:
            return ClusterKiller(int(params["n"]), int(params["d"]), params.get("mode", "single"))
        except KeyError as exc:
            raise InvalidParameter(f"killer spec needs {exc.args[0]}=") from None
    if head == "fol":
        return SemiAdaptiveFollower.from_file(rest)
    raise InvalidParameter(f"unknown adversary {text!r}")
