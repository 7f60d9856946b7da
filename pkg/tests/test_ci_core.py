import pytest
from hypothesis import given
from hypothesis import strategies as st

from chaos_sentinel.ci_core import (
    BitState,
    StrategyStream,
    ci_iterate,
    ci_step,
    f_map,
    gf_step,
    vectorial_negation,
)


@st.composite
def state_and_strategy(draw, max_len=12, max_terms=40):
    L = draw(st.integers(1, max_len))
    x = BitState(draw(st.integers(0, (1 << L) - 1)), L)
    strat = draw(st.lists(st.integers(0, L - 1), max_size=max_terms))
    return x, strat


def test_bitstate_is_lsb_first():
    x = BitState.from_bits([1, 0, 1])
    assert x.as_integer() == 5
    assert x.bits == (1, 0, 1)
    assert x[0] == 1 and x[1] == 0
    assert BitState.from_integer(6, 3).bits == (0, 1, 1)


def test_bitstate_rejects_bad_values():
    with pytest.raises(ValueError):
        BitState(8, 3)
    with pytest.raises(ValueError):
        BitState(0, 0)
    with pytest.raises(IndexError):
        BitState(0, 3).flip(3)


@pytest.mark.parametrize("bits,expected", [((0, 0, 0), (1, 1, 1)), ((1, 0, 1), (0, 1, 0))])
def test_vectorial_negation(bits, expected):
    assert vectorial_negation(BitState.from_bits(bits)).bits == expected


@given(state_and_strategy())
def test_negation_is_an_involution(xs):
    x, _ = xs
    assert vectorial_negation(vectorial_negation(x)) == x


@pytest.mark.parametrize("bits,s,expected", [((0, 0, 0), 0, (1, 0, 0)), ((1, 1, 0), 2, (1, 1, 1))])
def test_ci_step_flips_selected_cell(bits, s, expected):
    assert ci_step(BitState.from_bits(bits), s).bits == expected


@given(state_and_strategy())
def test_ci_step_twice_restores(xs):
    x, strat = xs
    for s in strat:
        assert ci_step(ci_step(x, s), s) == x


def test_ci_step_rejects_out_of_range_index():
    with pytest.raises(IndexError):
        ci_step(BitState(0, 3), 3)


def test_ci_step_with_custom_update_function():
    const_zero = lambda x: BitState.zeros(x.length)  # noqa: E731
    assert ci_step(BitState.from_bits([1, 1, 1]), 1, const_zero).bits == (1, 0, 1)


def test_ci_iterate_zero_steps():
    x = BitState.from_bits([1, 0, 1])
    assert ci_iterate(x, [2, 1], vectorial_negation, 0) == x


def test_ci_iterate_three_step_oracle():
    # bit0, bit1, bit0
    assert ci_iterate(BitState(0, 2), StrategyStream([0, 1, 0, 1, 1], 2), vectorial_negation, 3).bits == (0, 1)


@given(state_and_strategy())
def test_ci_iterate_parity_oracle(xs):
    x, strat = xs
    y = ci_iterate(x, strat, vectorial_negation, len(strat))
    for j in range(x.length):
        assert y[j] == x[j] ^ (strat.count(j) % 2)


@given(state_and_strategy())
def test_f_map_matches_ci_step(xs):
    x, strat = xs
    for k in strat:
        assert f_map(k, x) == ci_step(x, k)


def test_gf_step_example():
    s, e = gf_step(StrategyStream([1, 0, 0, 1], 2), BitState(0, 2))
    assert e.bits == (0, 1)
    assert s.first() == 0
    assert s.prefix(3) == [0, 0, 1]


def test_gf_cycle_twice_is_identity():
    L = 5
    e0 = BitState.from_bits([1, 0, 0, 1, 1])
    s = StrategyStream(list(range(L)) * 2, L)
    e = e0
    for _ in range(2 * L):
        s, e = gf_step(s, e)
    assert e == e0


@given(state_and_strategy(), st.integers(0, 4095))
def test_gf_shift_ignores_state(xs, other):
    x, strat = xs
    if not strat:
        return
    y = BitState(other % (1 << x.length), x.length)
    s1, _ = gf_step(StrategyStream(strat, x.length), x)
    s2, _ = gf_step(StrategyStream(strat, x.length), y)
    assert s1.prefix(len(strat) - 1) == s2.prefix(len(strat) - 1) == strat[1:]


def test_strategy_stream_bounds():
    s = StrategyStream([0, 1], 2)
    assert s.next() == 0 and s.next() == 1
    with pytest.raises(IndexError):
        s.next()
    with pytest.raises((IndexError, ValueError)):
        StrategyStream([2], 2).first()
