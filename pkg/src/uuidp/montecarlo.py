"""Seeded Monte-Carlo estimates of collision and inclusion probabilities."""

from __future__ import annotations

import math
import multiprocessing as mp
import os
from dataclasses import dataclass
from statistics import NormalDist
from typing import Sequence

import numpy as np

from .errors import InvalidParameter
from .game import Oblivious, play_game
from .generators import AlgorithmKind, capacity, create
from .rng import mix64

Z95 = NormalDist().inv_cdf(0.975)
Z999 = NormalDist().inv_cdf(0.9995)  # 3.29: two-sided 99.9%
MAX_UNCLAMPED_P = 0.2


def wilson_interval(successes: int, trials: int, z: float = Z95) -> tuple[float, float]:
    if trials <= 0:
        raise InvalidParameter("trials must be positive")
    p = successes / trials
    z2 = z * z
    denom = 1 + z2 / trials
    centre = (p + z2 / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z2 / (4 * trials * trials)) / denom
    lo = 0.0 if successes == 0 else max(0.0, centre - half)
    hi = 1.0 if successes == trials else min(1.0, centre + half)
    return lo, hi


@dataclass(frozen=True)
class Estimate:
    successes: int
    trials: int
    master_seed: int

    @property
    def p_hat(self) -> float:
        return self.successes / self.trials

    @property
    def ci(self) -> tuple[float, float]:
        return wilson_interval(self.successes, self.trials)

    @property
    def ci_low(self) -> float:
        return min(self.ci[0], self.p_hat)

    @property
    def ci_high(self) -> float:
        return max(self.ci[1], self.p_hat)

    def interval(self, z: float) -> tuple[float, float]:
        return wilson_interval(self.successes, self.trials, z)

    def covers(self, p: float, z: float = Z95) -> bool:
        lo, hi = self.interval(z)
        return lo <= p <= hi

    def overlaps(self, other: Estimate) -> bool:
        return self.ci_low <= other.ci_high and other.ci_low <= self.ci_high


# ---------------------------------------------------------------------------
# Trial execution
# ---------------------------------------------------------------------------

_JOB = None  # (kind, m, adversary, master_seed, engine) shared with forked workers


def oblivious_collided(kind: AlgorithmKind, m: int, profile, seed: int) -> bool:
    """Collision flag of ``play_game(kind, m, Oblivious(profile), seed)``,
    computed from whole runs of consecutive IDs instead of single requests.

    Instance ``j`` is seeded exactly as in the game, and each instance draws
    from its own stream, so the emitted sets (hence the flag) are identical.
    """
    cap = capacity(kind, m)
    if max(profile) > cap:
        play_game(kind, m, Oblivious(profile), seed)  # raises CapacityExceeded
    runs = []
    for j, d in enumerate(profile):
        runs.extend(create(kind, m, mix64(seed, j)).take_runs(d))
    runs.sort()
    reach = -1
    for start, length in runs:
        if start < reach:
            return True
        reach = max(reach, start + length)
    return False


def _count_collisions(lo: int, hi: int) -> int:
    kind, m, adversary, master_seed, engine = _JOB
    hits = 0
    if engine == "runs":
        profile = adversary.profile
        for t in range(lo, hi):
            hits += oblivious_collided(kind, m, profile, mix64(master_seed, t))
        return hits
    for t in range(lo, hi):
        if play_game(kind, m, adversary, mix64(master_seed, t)).collided:
            hits += 1
    return hits


def _shards(trials: int, workers: int) -> list[tuple[int, int]]:
    step = -(-trials // workers)
    return [(lo, min(trials, lo + step)) for lo in range(0, trials, step)]


def estimate_collision(
    kind: AlgorithmKind,
    m: int,
    adversary,
    trials: int,
    master_seed: int,
    workers: int | None = 1,
    engine: str = "auto",
) -> Estimate:
    """Fraction of ``trials`` games that end with a collision.

    Trial ``t`` is seeded with ``mix64(master_seed, t)``; the result does not
    depend on ``workers`` (``None`` means one per CPU).  ``engine="auto"``
    evaluates oblivious adversaries run-by-run (same result as the full game,
    much faster); ``engine="game"`` always steps through :func:`play_game`.
    """
    global _JOB
    if trials < 1:
        raise InvalidParameter("trials must be >= 1")
    workers = (os.cpu_count() or 1) if workers is None else max(1, workers)
    if engine not in ("auto", "game"):
        raise InvalidParameter(f"unknown engine {engine!r}")
    fast = engine == "auto" and isinstance(adversary, Oblivious)
    _JOB = (kind, m, adversary, master_seed, "runs" if fast else "game")
    try:
        if workers == 1 or trials < 2 * workers or "fork" not in mp.get_all_start_methods():
            hits = _count_collisions(0, trials)
        else:
            with mp.get_context("fork").Pool(workers) as pool:
                hits = sum(pool.starmap(_count_collisions, _shards(trials, workers)))
    finally:
        _JOB = None
    return Estimate(hits, trials, master_seed)


def estimate_inclusion(kind: AlgorithmKind, m: int, prefix: int, trials: int, master_seed: int) -> np.ndarray:
    """Empirical ``Pr[c in first `prefix` IDs]`` for every ``c in [0, m)``."""
    if trials < 1:
        raise InvalidParameter("trials must be >= 1")
    if not 0 <= prefix <= capacity(kind, m):
        raise InvalidParameter(f"prefix length {prefix} exceeds the capacity")
    hits = np.zeros(m, dtype=np.int64)
    for t in range(trials):
        g = create(kind, m, mix64(master_seed, t))
        for _ in range(prefix):
            hits[g.next_id()] += 1
    return hits / trials


# ---------------------------------------------------------------------------
# Scaling fits
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScalingFit:
    slope: float
    intercept: float
    band_low: float
    band_high: float
    points: int

    @property
    def band_ratio(self) -> float:
        return self.band_high / self.band_low


def fit_scaling(points: Sequence[tuple[float, float]], model: str = "power", trials=None) -> ScalingFit:
    """Least-squares slope of ``log p_hat`` against ``log predictor`` plus the
    empirical band ``[min, max]`` of ``p_hat / predictor``.

    With ``trials`` (one count, or one per point) each point is weighted by the
    inverse standard deviation of ``log p_hat``, ``sqrt(N p / (1 - p))``, so
    points resting on a handful of collisions do not dominate the slope.
    Only the power-law model is supported; clamped points (``p_hat > 0.2``)
    and points with ``p_hat == 0`` are refused.
    """
    if model != "power":
        raise InvalidParameter(f"unknown model {model!r}")
    if len(points) < 4:
        raise InvalidParameter("a scaling fit needs at least 4 points")
    x = np.array([float(a) for a, _ in points])
    y = np.array([float(b) for _, b in points])
    if np.any(y > MAX_UNCLAMPED_P):
        raise InvalidParameter("points with p_hat > 0.2 are in the clamped regime")
    if np.any(y <= 0) or np.any(x <= 0):
        raise InvalidParameter("log-log fit needs positive predictors and estimates")
    w = None
    if trials is not None:
        w = np.sqrt(np.broadcast_to(np.asarray(trials, dtype=float), y.shape) * y / (1 - y))
    slope, intercept = np.polyfit(np.log(x), np.log(y), 1, w=w)
    ratios = y / x
    return ScalingFit(float(slope), float(intercept), float(ratios.min()), float(ratios.max()), len(points))
