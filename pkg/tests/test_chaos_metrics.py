import math
import random
from collections import deque
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from chaos_sentinel.chaos_metrics import (
    PhasePoint,
    de_distance,
    distance,
    distance_exact,
    ds_distance,
    ds_fraction,
    divergence_step,
    reachability_check,
    sensitivity_experiment,
)
from chaos_sentinel.ci_core import BitState, vectorial_negation


def test_de_distance_examples():
    a = BitState.from_bits([0, 1, 1, 0])
    b = BitState.from_bits([1, 1, 0, 0])
    assert de_distance(a, b) == 2
    assert de_distance(a, a) == 0
    assert de_distance(a, vectorial_negation(a)) == 4
    with pytest.raises(ValueError):
        de_distance(a, BitState(0, 3))


def test_ds_distance_examples():
    assert ds_distance([1, 2, 3], [1, 2, 3], 4) == 0.0
    assert ds_fraction([2, 1, 3], [2, 2, 3], 4) == Fraction(9, 400)
    assert ds_distance([2, 1, 3], [2, 2, 3], 4) == pytest.approx(0.0225)
    with pytest.raises(ValueError):
        ds_fraction([0, 1], [0], 4)


@st.composite
def prefixes(draw, min_L=2, max_L=9, K=16):
    L = draw(st.integers(min_L, max_L))
    s1 = draw(st.lists(st.integers(0, L - 1), min_size=K, max_size=K))
    share = draw(st.integers(0, K))
    s2 = s1[:share] + draw(st.lists(st.integers(0, L - 1), min_size=K - share, max_size=K - share))
    return L, s1, s2


@given(prefixes())
def test_ds_small_iff_prefix_equal(args):
    L, s1, s2 = args
    ds = ds_fraction(s1, s2, L)
    for k in range(1, 13):
        assert (ds < Fraction(1, 10**k)) == (s1[:k] == s2[:k])


@given(prefixes(max_L=64))
def test_ds_below_one_implication(args):
    # the "agree => small" direction holds for every L
    L, s1, s2 = args
    ds = ds_fraction(s1, s2, L)
    assert ds < 1
    for k in range(1, 13):
        if s1[:k] == s2[:k]:
            assert ds < Fraction(1, 10**k)


def test_prefix_equivalence_breaks_above_nine_cells():
    # one unit at the first term weighs 9 / (10 L) < 1 / 10 when L > 9
    assert ds_fraction([0, 0], [1, 0], 10) < Fraction(1, 10)


@given(prefixes(max_L=16), st.integers(0, 2**16 - 1), st.integers(0, 2**16 - 1))
def test_floor_of_distance_is_hamming(args, a, b):
    L, s1, s2 = args
    p = PhasePoint(tuple(s1), BitState(a % (1 << L), L))
    q = PhasePoint(tuple(s2), BitState(b % (1 << L), L))
    assert math.floor(distance(p, q)) == de_distance(p.state, q.state)
    assert math.floor(distance_exact(p, q)) == de_distance(p.state, q.state)


@given(st.integers(2, 12), st.randoms(use_true_random=False))
def test_metric_axioms(L, rnd):
    def pt():
        return PhasePoint(tuple(rnd.randrange(L) for _ in range(10)), BitState(rnd.getrandbits(L), L))

    a, b, c = pt(), pt(), pt()
    assert distance_exact(a, a) == 0
    assert distance_exact(a, b) == distance_exact(b, a)
    assert (distance_exact(a, b) == 0) == (a == b)
    assert distance_exact(a, c) <= distance_exact(a, b) + distance_exact(b, c)


def test_sensitivity_single_flip_example():
    e = BitState(0, 3)
    p1 = PhasePoint((0, 2, 2), e)
    p2 = PhasePoint((1, 2, 2), e)
    assert divergence_step(p1, p2) == 1
    assert de_distance(e.flip(0), e.flip(1)) == 2
    assert divergence_step(p1, PhasePoint((0, 2, 2), e)) is None


def test_sensitivity_experiment_l3():
    rep = sensitivity_experiment(3, 500, seed=4)
    assert rep.statistics["min_divergence_step"] == rep.statistics["max_divergence_step"] == 1
    assert rep.statistics["min_de_after_one_step"] == 2
    assert '"experiment": "sensitivity"' in rep.to_json()


def _bfs_min_flips(L, x, y):
    seen = {x: 0}
    q = deque([x])
    while q:
        u = q.popleft()
        if u == y:
            return seen[u]
        for j in range(L):
            v = u ^ (1 << j)
            if v not in seen:
                seen[v] = seen[u] + 1
                q.append(v)
    return None


def test_reachability_l3_against_bfs():
    rep = reachability_check(3)
    assert rep.statistics == {"pairs": 64, "failures": 0, "max_prefix_length": 3}
    longest = max(_bfs_min_flips(3, x, y) for x in range(8) for y in range(8))
    assert longest == 3


@pytest.mark.parametrize("L", [1, 2, 4, 6])
def test_reachability_small_lengths(L):
    rep = reachability_check(L)
    assert rep.statistics["failures"] == 0
    assert rep.statistics["max_prefix_length"] == L


def test_reaching_strategy_edges():
    from chaos_sentinel.chaos_metrics import reaching_strategy

    x = BitState.from_bits([1, 0, 1, 1])
    assert reaching_strategy(x, x) == []
    assert len(reaching_strategy(x, vectorial_negation(x))) == 4


def test_phase_point_validation():
    with pytest.raises(ValueError):
        PhasePoint((), BitState(0, 2))
    with pytest.raises(ValueError):
        PhasePoint((2,), BitState(0, 2))


def test_reachability_refuses_large_l():
    with pytest.raises(ValueError):
        reachability_check(9)
    with pytest.raises(ValueError):
        sensitivity_experiment(1, 10)


def test_random_pairs_floor_property_frozen_seed():
    rng = random.Random(77)
    for _ in range(2000):
        L = rng.randint(2, 16)
        s = tuple(rng.randrange(L) for _ in range(20))
        t = tuple(rng.randrange(L) for _ in range(20))
        p, q = PhasePoint(s, BitState(rng.getrandbits(L), L)), PhasePoint(t, BitState(rng.getrandbits(L), L))
        assert math.floor(distance(p, q)) == de_distance(p.state, q.state)
