import math

import numpy as np
import pytest

from uuidp.errors import CapacityExceeded, InvalidParameter
from uuidp.game import ClusterKiller, Oblivious, play_game
from uuidp.generators import BINS_STAR, CLUSTER, CLUSTER_STAR, RANDOM, Bins
from uuidp.montecarlo import (
    Z999,
    Estimate,
    estimate_collision,
    estimate_inclusion,
    fit_scaling,
    oblivious_collided,
    wilson_interval,
)
from uuidp.oracles import cluster_pairwise, random_exact
from uuidp.rng import SplitMix64, mix64


def test_wilson_known_values():
    lo, hi = wilson_interval(0, 10)
    assert lo == 0 and hi == pytest.approx(0.2775, abs=1e-4)
    lo, hi = wilson_interval(50, 100)
    assert lo == pytest.approx(0.4038, abs=1e-4) and hi == pytest.approx(0.5962, abs=1e-4)


def test_wilson_calibration():
    # 95% intervals cover the true p in at least 93% of 1000 repetitions
    rng = np.random.default_rng(2024)
    for p, n in ((0.3, 200), (0.05, 500), (0.001, 20_000)):
        hits = rng.binomial(n, p, size=1000)
        covered = sum(lo <= p <= hi for lo, hi in (wilson_interval(int(k), n) for k in hits))
        assert covered >= 930


def test_estimate_fields():
    e = Estimate(3, 100, 7)
    assert e.p_hat == 0.03 and e.ci_low <= e.p_hat <= e.ci_high
    assert e.trials * e.p_hat == pytest.approx(3)


def test_cluster_example_within_ci():
    e = estimate_collision(CLUSTER, 20, Oblivious((3, 2)), 100_000, 11)
    assert e.covers(float(cluster_pairwise(3, 2, 20)), Z999)


def test_random_example_within_ci():
    e = estimate_collision(RANDOM, 4, Oblivious((2, 2)), 100_000, 12)
    assert e.covers(float(random_exact((2, 2), 4)), Z999)


@pytest.mark.parametrize("kind", [RANDOM, CLUSTER, Bins(3), CLUSTER_STAR, BINS_STAR], ids=str)
def test_single_instance_estimate_is_zero(kind):
    e = estimate_collision(kind, 64, Oblivious((5,)), 500, 1)
    assert e.p_hat == 0 and e.ci_low == 0


def test_trials_must_be_positive():
    with pytest.raises(InvalidParameter):
        estimate_collision(CLUSTER, 20, Oblivious((3, 2)), 0, 1)


def test_capacity_propagates():
    with pytest.raises(CapacityExceeded):
        estimate_collision(BINS_STAR, 32, Oblivious((8, 1)), 10, 1)


def test_worker_count_does_not_change_result():
    adv = Oblivious((6, 5, 4))
    one = estimate_collision(CLUSTER, 128, adv, 3000, 99, workers=1)
    three = estimate_collision(CLUSTER, 128, adv, 3000, 99, workers=3)
    assert one == three
    killer = ClusterKiller(3, 9)
    assert estimate_collision(CLUSTER, 256, killer, 2000, 5, workers=1) == estimate_collision(
        CLUSTER, 256, killer, 2000, 5, workers=4
    )


@pytest.mark.parametrize("kind", [RANDOM, CLUSTER, Bins(4), CLUSTER_STAR, BINS_STAR], ids=str)
def test_fast_path_equals_game(kind):
    m, prof = 256, (3, 7, 2)
    for t in range(400):
        seed = mix64(3, t)
        assert oblivious_collided(kind, m, prof, seed) == play_game(kind, m, Oblivious(prof), seed).collided
    fast = estimate_collision(kind, m, Oblivious(prof), 2000, 8)
    slow = estimate_collision(kind, m, Oblivious(prof), 2000, 8, engine="game")
    assert fast == slow


def test_fast_path_wraparound():
    # small universe: cluster arcs wrap past m - 1
    for t in range(2000):
        seed = mix64(4, t)
        assert oblivious_collided(CLUSTER, 10, (4, 3), seed) == play_game(CLUSTER, 10, Oblivious((4, 3)), seed).collided


def test_inclusion_random_and_cluster():
    for kind in (RANDOM, CLUSTER):
        q = estimate_inclusion(kind, 16, 4, 20_000, 3)
        assert q.shape == (16,)
        assert q.sum() == pytest.approx(4)
        sd = math.sqrt(0.25 * 0.75 / 20_000)
        assert np.all(np.abs(q - 0.25) < 5 * sd)


def test_inclusion_rows_sum_to_prefix():
    for kind in (Bins(4), BINS_STAR, CLUSTER_STAR):
        q = estimate_inclusion(kind, 64, 3, 2000, 6)
        assert q.sum() == pytest.approx(3)


def test_inclusion_rejects_long_prefix():
    with pytest.raises(InvalidParameter):
        estimate_inclusion(BINS_STAR, 32, 8, 10, 1)


def test_fit_scaling_exact_power_law():
    xs = [1e-4, 2e-4, 4e-4, 8e-4]
    fit = fit_scaling([(x, 0.5 * x) for x in xs])
    assert fit.slope == pytest.approx(1.0) and fit.band_ratio == pytest.approx(1.0)
    flat = fit_scaling([(x, 0.01) for x in xs])
    assert flat.slope == pytest.approx(0.0, abs=1e-12)
    weighted = fit_scaling([(x, 0.5 * x) for x in xs], trials=10**5)
    assert weighted.slope == pytest.approx(1.0)


def test_fit_scaling_weights_favour_precise_points():
    pts = [(1e-4, 5e-6), (2e-4, 1e-4), (4e-4, 2e-4), (8e-4, 4e-4)]
    plain = fit_scaling(pts).slope
    weighted = fit_scaling(pts, trials=[10**5] * 4).slope
    assert abs(weighted - 1) < abs(plain - 1)


@pytest.mark.parametrize(
    "points",
    [
        [(1e-3, 0.3), (2e-3, 0.1), (3e-3, 0.1), (4e-3, 0.1)],
        [(1e-3, 0.0), (2e-3, 0.1), (3e-3, 0.1), (4e-3, 0.1)],
        [(1e-3, 0.01), (2e-3, 0.02), (3e-3, 0.03)],
    ],
)
def test_fit_scaling_refuses(points):
    with pytest.raises(InvalidParameter):
        fit_scaling(points)


def test_seed_streams_are_distinct():
    seeds = {mix64(1, t) for t in range(10_000)}
    assert len(seeds) == 10_000
    assert SplitMix64(mix64(1, 0)).next_u64() != SplitMix64(mix64(1, 1)).next_u64()
