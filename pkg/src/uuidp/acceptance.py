"""Named verification runs A1-A9.

Each criterion returns a :class:`CriterionResult` with the measured values,
so the CLI and the test-suite report the same numbers.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

from .errors import Exhausted
from .game import (
    ActivateNew,
    ClusterKiller,
    Oblivious,
    RequestExisting,
    Scripted,
    Stop,
    blind_variant,
)
from .generators import (
    BINS_STAR,
    CLUSTER,
    CLUSTER_STAR,
    RANDOM,
    Bins,
    ChunkGeometry,
    capacity,
)
from .montecarlo import Z999, estimate_collision, fit_scaling
from .oracles import (
    balls_success_prob,
    bins_exact,
    bins_star_exact,
    brute_force_collision,
    cluster_exact,
    cluster_pairwise,
    cluster_star_exact,
    p_star_two_construction,
    random_exact,
)
from .profiles import epsilon_bad_fraction, round_profile

DEFAULT_TRIALS = 100_000

SLOPE_RANGE = (0.9, 1.1)
MAX_BAND_RATIO = 4.0
COMPETITIVE_K = 8  # A8: ratio p_hat / p_two <= COMPETITIVE_K * log2(m)
MIN_CLUSTER_ADVANTAGE = 8
GRID_STEP = Fraction(1, 20)
EPS_TREND = Fraction(1, 4)


@dataclass
class CriterionResult:
    name: str
    passed: bool
    summary: str
    details: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{self.name} {status} ({self.seconds:.1f}s): {self.summary}"


def _fmt(x: float) -> str:
    return f"{x:.4g}"


# ---------------------------------------------------------------------------
# A1: closed forms against brute force
# ---------------------------------------------------------------------------


def _a1_cases():
    for m in range(1, 9):
        for n in (1, 2, 3):
            for prof in itertools.product(range(1, 5), repeat=n):
                if max(prof) > m:
                    continue
                yield "random", m, prof, RANDOM, lambda p, m: random_exact(p, m)
                yield "cluster", m, prof, CLUSTER, lambda p, m: cluster_exact(p, m)
                yield "bins:1", m, prof, Bins(1), lambda p, m: bins_exact(p, 1, m)
                if m >= 2:
                    yield "bins:2", m, prof, Bins(2), lambda p, m: bins_exact(p, 2, m)
                    if max(prof) <= capacity(BINS_STAR, m):
                        yield "binsstar", m, prof, BINS_STAR, lambda p, m: bins_star_exact(
                            p, ChunkGeometry.for_universe(m), m
                        )
                    yield "clusterstar", m, prof, CLUSTER_STAR, lambda p, m: cluster_star_exact(p, m)


def criterion_a1(seed: int | None = None, trials: int | None = None) -> CriterionResult:
    checked = skipped = 0
    mismatches = []
    per_kind: dict[str, int] = {}
    for label, m, prof, kind, oracle in _a1_cases():
        try:
            closed = oracle(prof, m)
            brute = brute_force_collision(kind, prof, m)
        except Exhausted:
            skipped += 1  # some run of CLUSTER* cannot be placed
            continue
        checked += 1
        per_kind[label] = per_kind.get(label, 0) + 1
        if closed != brute:
            mismatches.append((label, m, prof, str(closed), str(brute)))
    summary = f"{checked} exact comparisons, {len(mismatches)} mismatches, {skipped} infeasible clusterstar cases skipped"
    return CriterionResult("A1", not mismatches, summary, {"per_kind": per_kind, "mismatches": mismatches[:10]})


# ---------------------------------------------------------------------------
# A2, A3: scaling laws of CLUSTER and RANDOM
# ---------------------------------------------------------------------------


def _scaling_check(name: str, points, extra_ok: bool = True, extra: str = "") -> CriterionResult:
    rows = [(pred, est.p_hat) for pred, est in points]
    details = {"points": [(pred, est.successes, est.trials) for pred, est in points]}
    zeros = [pred for pred, p in rows if p == 0]
    if zeros:
        summary = f"{len(zeros)} grid point(s) observed no collision (predictor {', '.join(_fmt(z) for z in zeros)}); slope undefined"
        return CriterionResult(name, False, summary + extra, details)
    fit = fit_scaling(rows, trials=[est.trials for _, est in points])
    unweighted = fit_scaling(rows).slope
    details.update(slope=fit.slope, unweighted_slope=unweighted, band=(fit.band_low, fit.band_high))
    ok_slope = SLOPE_RANGE[0] <= fit.slope <= SLOPE_RANGE[1]
    ok_band = fit.band_ratio <= MAX_BAND_RATIO
    summary = (
        f"weighted slope {fit.slope:.3f} (need {SLOPE_RANGE[0]}..{SLOPE_RANGE[1]}; unweighted {unweighted:.3f}), "
        f"band [{_fmt(fit.band_low)}, {_fmt(fit.band_high)}] ratio {fit.band_ratio:.2f} (need <= {MAX_BAND_RATIO})"
    )
    return CriterionResult(name, ok_slope and ok_band and extra_ok, summary + extra, details)


def criterion_a2(seed: int, trials: int = DEFAULT_TRIALS) -> CriterionResult:
    m = 1 << 20
    points = []
    for n in (2, 4, 8, 16):
        d = 4 * n
        est = estimate_collision(CLUSTER, m, Oblivious((4,) * n), trials, seed)
        points.append((n * d / m, est))
    return _scaling_check("A2", points)


def criterion_a3(seed: int, trials: int = DEFAULT_TRIALS) -> CriterionResult:
    m = 1 << 20
    points = []
    for d in (16, 32, 64, 128):
        prof = (d // 2, d // 2)
        est = estimate_collision(RANDOM, m, Oblivious(prof), trials, seed)
        points.append(((d * d - sum(x * x for x in prof)) / m, est))
    exact = random_exact((2, 2), 4)
    return _scaling_check("A3", points, exact == Fraction(5, 6), f"; random_exact((2,2),4) = {exact}")


# ---------------------------------------------------------------------------
# A4, A5: adaptive attacks
# ---------------------------------------------------------------------------

ADAPTIVE_GRID = (4, 8, 16)


def criterion_a4(seed: int, trials: int = DEFAULT_TRIALS) -> CriterionResult:
    m = 1 << 20
    rows = []
    ok = True
    for n in ADAPTIVE_GRID:
        d = 4 * n
        adaptive = estimate_collision(CLUSTER, m, ClusterKiller(n, d), trials, seed)
        # the oblivious adversary serving the killer's final profile shape
        oblivious = estimate_collision(CLUSTER, m, Oblivious((d - n + 1,) + (1,) * (n - 1)), trials, seed)
        envelope = n * (n - 1) * (d - n) / (8 * m)
        ratio = adaptive.p_hat / oblivious.p_hat if oblivious.p_hat else math.inf
        ok &= adaptive.p_hat >= envelope
        rows.append((n, adaptive.p_hat, envelope, oblivious.p_hat, ratio))
    ratios = [r[-1] for r in rows]
    increasing = all(a < b for a, b in zip(ratios, ratios[1:])) and all(math.isfinite(r) for r in ratios)
    summary = "; ".join(
        f"n={n}: p_adapt {_fmt(pa)} >= {_fmt(env)}, p_obl {_fmt(po)}, ratio {_fmt(r)}" for n, pa, env, po, r in rows
    )
    return CriterionResult("A4", ok and increasing, summary + f"; ratios increasing: {increasing}", {"rows": rows})


def criterion_a5(seed: int, trials: int = DEFAULT_TRIALS) -> CriterionResult:
    m = 1 << 20
    variants = ("single", "roundrobin")
    ests = {}
    for n in ADAPTIVE_GRID:
        for mode in variants:
            ests[n, mode] = estimate_collision(CLUSTER_STAR, m, ClusterKiller(n, 4 * n, mode), trials, seed)

    def predictor(n):
        d = 4 * n
        return n * d / m * math.log2(1 + d / n)

    n0 = ADAPTIVE_GRID[0]
    # K: 95% upper confidence bound of the ratio at the smallest grid point
    K = max(ests[n0, mode].ci_high for mode in variants) / predictor(n0)
    ok = True
    parts = [f"K = {K:.4g} from n={n0}"]
    for n in ADAPTIVE_GRID[1:]:
        for mode in variants:
            p = ests[n, mode].p_hat
            bound = K * predictor(n)
            ok &= p <= bound
            parts.append(f"n={n} {mode}: {_fmt(p)} <= {_fmt(bound)}")
    details = {f"{n}/{mode}": (e.successes, e.trials) for (n, mode), e in ests.items()}
    details["K"] = K
    return CriterionResult("A5", ok, "; ".join(parts), details)


# ---------------------------------------------------------------------------
# A6: rounding invariance of BINS*
# ---------------------------------------------------------------------------


def criterion_a6(seed: int, trials: int = DEFAULT_TRIALS) -> CriterionResult:
    geo = ChunkGeometry(3)
    checked, bad = 0, []
    for n in (2, 3):
        for prof in itertools.product(range(1, 1 << geo.C), repeat=n):
            rounded = round_profile(prof)
            checked += 1
            if bins_star_exact(prof, geo) != bins_star_exact(rounded, geo):
                bad.append(prof)
    m = 1 << 16
    big_geo = ChunkGeometry.for_universe(m)
    original, rounded = (9, 5, 4, 42), round_profile((9, 5, 4, 42))
    e_orig = estimate_collision(BINS_STAR, m, Oblivious(original), trials, seed)
    e_round = estimate_collision(BINS_STAR, m, Oblivious(rounded), trials, seed + 1)
    exact = bins_star_exact(original, big_geo, m)
    overlap = e_orig.overlaps(e_round)
    summary = (
        f"{checked} profiles at C=3, {len(bad)} mismatches; m=2^16: p_hat{original} = {_fmt(e_orig.p_hat)}, "
        f"p_hat{rounded} = {_fmt(e_round.p_hat)}, CIs overlap: {overlap} (exact {_fmt(float(exact))})"
    )
    return CriterionResult("A6", not bad and overlap, summary, {"mismatches": bad[:10]})


# ---------------------------------------------------------------------------
# A7: observation symmetry of BINS(k)
# ---------------------------------------------------------------------------

A7_STEPS = 40
A7_MAX_INSTANCES = 6


def bin_parity_policy(history) -> object:
    """Adaptive script that branches on the bin index (ID // 4) it just saw."""
    if not history:
        return ActivateNew()
    if len(history) >= A7_STEPS:
        return Stop()
    last = history[-1]
    active = 1 + max(o.instance for o in history)
    if (last.id // 4) % 2 == 0:
        return ActivateNew() if active < A7_MAX_INSTANCES else RequestExisting(0)
    return RequestExisting(last.instance)


def criterion_a7(seed: int, trials: int = DEFAULT_TRIALS) -> CriterionResult:
    m, kind = 1 << 12, Bins(4)
    adversary = Scripted(bin_parity_policy, "bin-parity")
    original = estimate_collision(kind, m, adversary, trials, seed)
    blind = estimate_collision(kind, m, blind_variant(adversary, kind, m), trials, seed + 1)
    ok = original.overlaps(blind)
    summary = (
        f"original {_fmt(original.p_hat)} [{_fmt(original.ci_low)}, {_fmt(original.ci_high)}], "
        f"blind {_fmt(blind.p_hat)} [{_fmt(blind.ci_low)}, {_fmt(blind.ci_high)}], overlap: {ok}"
    )
    return CriterionResult("A7", ok, summary)


# ---------------------------------------------------------------------------
# A8: competitive gap on two-instance profiles
# ---------------------------------------------------------------------------


def criterion_a8(seed: int, trials: int = DEFAULT_TRIALS) -> CriterionResult:
    m = 1 << 16
    log_m = math.log2(m)
    geo = ChunkGeometry.for_universe(m)
    worst = 0.0
    ok = True
    ratios = {}
    uncovered = []
    for i in range(9):
        for j in range(i, 9):
            prof = (1 << i, 1 << j)
            est = estimate_collision(BINS_STAR, m, Oblivious(prof), trials, seed)
            p2 = float(p_star_two_construction(1 << i, 1 << j, m))
            ratio = est.p_hat / p2
            ratios[prof] = ratio
            worst = max(worst, ratio)
            ok &= ratio <= COMPETITIVE_K * log_m
            if not est.covers(float(bins_star_exact(prof, geo, m)), Z999):
                uncovered.append(prof)
    skew = (1, 1 << 8)
    p2 = p_star_two_construction(*skew, m)
    cluster_est = estimate_collision(CLUSTER, m, Oblivious(skew), trials, seed)
    cluster_ratio_exact = cluster_pairwise(*skew, m) / p2
    bins_ratio_exact = bins_star_exact(skew, geo, m) / p2
    advantage = cluster_ratio_exact / bins_ratio_exact
    if not cluster_est.covers(float(cluster_pairwise(*skew, m)), Z999):
        uncovered.append(("cluster", skew))
    advantage_mc = (cluster_est.p_hat / float(p2)) / ratios[skew] if ratios[skew] else math.inf
    passed = ok and advantage >= MIN_CLUSTER_ADVANTAGE and not uncovered
    summary = (
        f"max BINS* ratio {_fmt(worst)} = {worst / log_m:.3f} log2 m (need <= {COMPETITIVE_K} log2 m); "
        f"CLUSTER/BINS* ratio at {skew}: exact {advantage} (need >= {MIN_CLUSTER_ADVANTAGE}), "
        f"Monte-Carlo {_fmt(advantage_mc)}; estimates outside 99.9% CI of exact: {len(uncovered)}"
    )
    return CriterionResult("A8", passed, summary, {"ratios": ratios, "uncovered": uncovered})


# ---------------------------------------------------------------------------
# A9: uniform maximality and the epsilon-bad trend
# ---------------------------------------------------------------------------


def simplex_grid(ell: int, step: Fraction = GRID_STEP):
    units = int(1 / step)
    for cuts in itertools.combinations(range(units + ell - 1), ell - 1):
        bounds = (-1, *cuts, units + ell - 1)
        yield tuple((b - a - 1) * step for a, b in zip(bounds, bounds[1:]))


def balls_maximality() -> tuple[bool, list]:
    rows = []
    ok = True
    for ell in (2, 3, 4):
        uniform = (Fraction(1, ell),) * ell
        for n in range(2, ell + 1):
            best_val = balls_success_prob(uniform, n)
            grid_max, argmax = Fraction(-1), None
            strictly_below = True
            for p in simplex_grid(ell):
                v = balls_success_prob(p, n)
                if v > grid_max:
                    grid_max, argmax = v, p
                if p != uniform and v >= best_val:
                    strictly_below = False
            near = max(abs(a - b) for a, b in zip(argmax, uniform)) <= GRID_STEP
            ok &= strictly_below and near
            rows.append((ell, n, str(best_val), tuple(str(x) for x in argmax), strictly_below, near))
    return ok, rows


def epsilon_trend() -> tuple[bool, dict]:
    fractions = {n: epsilon_bad_fraction(n, 32, EPS_TREND) for n in (4, 6, 8)}
    values = list(fractions.values())
    return all(a >= b for a, b in zip(values, values[1:])), fractions


def criterion_a9(seed: int | None = None, trials: int | None = None) -> CriterionResult:
    ok_balls, rows = balls_maximality()
    ok_trend, fractions = epsilon_trend()
    trend = ", ".join(f"n={n}: {f}" for n, f in fractions.items())
    summary = (
        f"balls-into-bins maximum at uniform for all {len(rows)} (l, n) cases: {ok_balls}; "
        f"epsilon-bad fraction (d=32, eps=1/4) {trend}; non-increasing: {ok_trend}"
    )
    return CriterionResult("A9", ok_balls and ok_trend, summary, {"balls": rows, "trend": fractions})


CRITERIA: dict[str, Callable[..., CriterionResult]] = {
    "A1": criterion_a1,
    "A2": criterion_a2,
    "A3": criterion_a3,
    "A4": criterion_a4,
    "A5": criterion_a5,
    "A6": criterion_a6,
    "A7": criterion_a7,
    "A8": criterion_a8,
    "A9": criterion_a9,
}


def run_criterion(name: str, seed: int, trials: int = DEFAULT_TRIALS) -> CriterionResult:
    start = time.perf_counter()
    result = CRITERIA[name](seed, trials)
    result.seconds = time.perf_counter() - start
    return result
