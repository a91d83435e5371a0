import itertools
import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uuidp.errors import BudgetExceeded, Exhausted, InvalidParameter
from uuidp.game import Oblivious
from uuidp.generators import BINS_STAR, CLUSTER, CLUSTER_STAR, RANDOM, Bins, ChunkGeometry
from uuidp.montecarlo import Z999, estimate_collision
from uuidp.oracles import (
    balls_success_prob,
    bins_exact,
    bins_star_exact,
    brute_force_collision,
    cluster_exact,
    cluster_pairwise,
    cluster_star_exact,
    disjoint_subsets_exact,
    emitted_set_distribution,
    p_star_two_construction,
    p_star_uniform,
    random_exact,
)
from uuidp.profiles import round_profile

F = Fraction


@pytest.mark.parametrize("args, p", [((3, 2, 20), F(1, 5)), ((1, 1, 9), F(1, 9)), ((4, 4, 8), F(7, 8))])
def test_cluster_pairwise(args, p):
    assert cluster_pairwise(*args) == p


def test_cluster_exact_examples():
    assert cluster_exact((4, 4), 8) == F(7, 8)
    assert cluster_exact((1, 1, 1), 3) == F(7, 9)
    assert all(cluster_exact((m, 1), m) == 1 for m in range(1, 8))
    assert cluster_exact((5,), 20) == 0


def test_disjoint_subsets_examples():
    assert disjoint_subsets_exact(4, (2, 2)) == F(5, 6)
    assert disjoint_subsets_exact(6, (1, 1)) == F(1, 6)
    assert disjoint_subsets_exact(7, (7, 1)) == 1


def test_random_exact_examples():
    assert random_exact((2, 2), 4) == F(5, 6)
    assert random_exact((1, 1), 13) == F(1, 13)
    assert random_exact((1, 1, 1), 3) == F(7, 9)


def test_bins_exact_examples():
    assert bins_exact((3, 3), 3, 20) == F(1, 6)
    assert bins_exact((4, 2), 3, 20) == F(1, 3)
    ell = 20 // 4
    birthday = 1 - F(math.perm(ell, 3), ell**3)
    assert bins_exact((4, 4, 4), 4, 20) == birthday


def test_p_star_examples():
    assert p_star_uniform(2, 1, 50) == F(1, 50)
    assert p_star_uniform(2, 3, 20) == F(1, 6)
    assert p_star_uniform(3, 1, 3) == F(7, 9)
    assert p_star_two_construction(2, 4, 20) == F(1, 9)
    assert p_star_two_construction(3, 3, 20) == p_star_uniform(2, 3, 20)
    assert p_star_two_construction(1, 1, 40) == F(1, 40)


def test_balls_examples():
    assert balls_success_prob((F(1, 2), F(1, 2)), 2) == F(1, 2)
    assert balls_success_prob((0.6, 0.4), 2) == F(12, 25)
    assert balls_success_prob((F(1, 3),) * 3, 2) == F(2, 3)
    with pytest.raises(InvalidParameter):
        balls_success_prob((0.5, 0.4), 2)


def test_bins_star_examples():
    for C in (1, 2, 3, 5):
        geo = ChunkGeometry(C)
        assert bins_star_exact((1, 1), geo) == F(1, 2 ** (C - 1))
    geo = ChunkGeometry(4)
    assert bins_star_exact((1, 2), geo) == bins_star_exact((1, 1), geo)
    assert bins_star_exact((9, 5, 4, 42), ChunkGeometry(12)) == bins_star_exact((8, 4, 4, 8), ChunkGeometry(12))


def test_brute_force_examples():
    assert brute_force_collision(CLUSTER, (4, 4), 8) == F(7, 8)
    assert brute_force_collision(RANDOM, (2, 2), 4) == F(5, 6)
    for kind in (RANDOM, CLUSTER, Bins(2), CLUSTER_STAR, BINS_STAR):
        assert brute_force_collision(kind, (3,), 8) == 0


@pytest.mark.parametrize("kind", [RANDOM, CLUSTER, Bins(3), CLUSTER_STAR, BINS_STAR], ids=str)
def test_emitted_set_law_is_a_distribution(kind):
    for d in (1, 2, 3):
        law = emitted_set_distribution(kind, 9, d)
        assert sum(law.values()) == 1
        assert all(bin(mask).count("1") == d for mask in law)


def test_budget_guards():
    with pytest.raises(BudgetExceeded):
        cluster_exact((2, 2, 2, 2, 2), 100)
    with pytest.raises(BudgetExceeded):
        brute_force_collision(RANDOM, (6, 6), 40)
    with pytest.raises(BudgetExceeded):
        cluster_star_exact((3, 5), 4000)


def test_cluster_star_exhausted():
    with pytest.raises(Exhausted):
        cluster_star_exact((4, 1), 4)


# --- cross-validation against brute force, beyond the A1 grid ------------------------


@pytest.mark.parametrize(
    "kind, oracle",
    [
        (RANDOM, lambda p, m: random_exact(p, m)),
        (CLUSTER, lambda p, m: cluster_exact(p, m)),
        (Bins(3), lambda p, m: bins_exact(p, 3, m)),
        (BINS_STAR, lambda p, m: bins_star_exact(p, ChunkGeometry.for_universe(m), m)),
    ],
    ids=["random", "cluster", "bins3", "binsstar"],
)
@pytest.mark.parametrize("prof, m", [((5, 2), 12), ((3, 3), 10), ((2, 1, 1, 1), 9), ((5, 1), 10)])
def test_closed_forms_match_brute_force(kind, oracle, prof, m):
    if kind == BINS_STAR and max(prof) > ChunkGeometry.for_universe(m).capacity:
        pytest.skip("demand above BINS* capacity")
    assert oracle(prof, m) == brute_force_collision(kind, prof, m)


@pytest.mark.parametrize("prof, m", [((3, 2), 16), ((1, 4), 20), ((2, 2, 1), 18)])
def test_cluster_star_two_enumerations_agree(prof, m):
    assert cluster_star_exact(prof, m) == brute_force_collision(CLUSTER_STAR, prof, m)


def test_cluster_star_exact_matches_simulation():
    p = cluster_star_exact((2, 3), 32)
    est = estimate_collision(CLUSTER_STAR, 32, Oblivious((2, 3)), 40_000, 13)
    assert est.covers(float(p), Z999)


# --- symmetry and monotonicity -----------------------------------------------------------


small = st.lists(st.integers(1, 4), min_size=2, max_size=3).map(tuple)


@settings(max_examples=60, deadline=None)
@given(prof=small, m=st.integers(4, 12), data=st.data())
def test_permutation_symmetry(prof, m, data):
    perm = tuple(data.draw(st.permutations(prof)))
    geo = ChunkGeometry(3)
    assert random_exact(prof, m) == random_exact(perm, m)
    assert cluster_exact(prof, m) == cluster_exact(perm, m)
    assert bins_exact(prof, 2, m) == bins_exact(perm, 2, m)
    assert bins_star_exact(prof, geo) == bins_star_exact(perm, geo)


@settings(max_examples=60, deadline=None)
@given(prof=small, m=st.integers(5, 12), j=st.integers(0, 2))
def test_monotone_in_each_demand(prof, m, j):
    j %= len(prof)
    bigger = prof[:j] + (prof[j] + 1,) + prof[j + 1 :]
    geo = ChunkGeometry(3)
    assert random_exact(bigger, m) >= random_exact(prof, m)
    assert cluster_exact(bigger, m) >= cluster_exact(prof, m)
    assert bins_exact(bigger, 2, m) >= bins_exact(prof, 2, m)
    assert bins_star_exact(bigger, geo) >= bins_star_exact(prof, geo)


@given(st.lists(st.integers(1, 6), min_size=2, max_size=5).map(tuple), st.integers(6, 100))
def test_monotone_in_universe(prof, u):
    assert disjoint_subsets_exact(u + 1, prof) <= disjoint_subsets_exact(u, prof)


def test_two_subset_band():
    # P[two uniform subsets of sizes s1, s2 of [u] meet] is within [1 - 1/e, 4] of min(1, s1 s2 / u)
    lo, hi = 1.0, 0.0
    for u in (16, 64, 256):
        for s1, s2 in itertools.product((1, 2, 4, 8), repeat=2):
            p = disjoint_subsets_exact(u, (s1, s2))
            r = float(p) / min(1.0, s1 * s2 / u)
            lo, hi = min(lo, r), max(hi, r)
    assert 1 - math.exp(-1) <= lo and hi <= 4


def test_rounding_invariance_exact_c4():
    geo = ChunkGeometry(4)
    for prof in itertools.product(range(1, 16), repeat=2):
        assert bins_star_exact(prof, geo) == bins_star_exact(round_profile(prof), geo)


def test_balls_uniform_is_best_on_grid():
    uniform = balls_success_prob((F(1, 4),) * 4, 3)
    for a, b, c in itertools.product(range(0, 11), repeat=3):
        if a + b + c <= 10:
            p = (F(a, 10), F(b, 10), F(c, 10), 1 - F(a + b + c, 10))
            assert balls_success_prob(p, 3) <= uniform
