import random

import numpy as np
import pytest

from chaos_sentinel.primitives import (
    HASH_IV,
    BaseGenerator,
    CiGenerator,
    SecretKey,
    base_next,
    ci_hash,
    ci_prng_next_bits,
    draw_strategy_index,
    expand_key,
    xorshift_mix,
)
from chaos_sentinel.stats import chi_square_uniform, serial_correlation

# x = 1 -> 8193 -> 8257 -> 1082269761, times the xorshift64* multiplier mod 2^64
BASE_NEXT_OF_ONE = 0xBAFACF624F01C45D


def test_base_next_hand_value():
    g = BaseGenerator(1)
    assert base_next(g) == BASE_NEXT_OF_ONE
    assert g.state == 1082269761


def test_base_generator_never_reaches_zero():
    g = BaseGenerator(0x8000000000000000)
    for _ in range(10_000):
        g.next()
        assert g.state != 0
    with pytest.raises(ValueError):
        BaseGenerator(0)


def test_base_generator_serial_correlation():
    g = BaseGenerator(12345)
    vals = np.array([g.next() >> 11 for _ in range(100_000)], dtype=float)
    assert abs(serial_correlation(vals)) < 0.01


def test_expand_key_deterministic_and_tagged():
    key = SecretKey.from_seed(5)
    x1, y1, s1 = expand_key(key, 3, 0)
    x2, y2, s2 = expand_key(key, 3, 0)
    assert (x1.state, y1.state, s1) == (x2.state, y2.state, s2)
    x3, y3, s3 = expand_key(key, 3, 1)
    assert x3.state != x1.state and y3.state != y1.state and s3 != s1


def test_expand_key_seed_bits_balanced():
    rng = random.Random(1)
    ones = np.zeros((2, 64))
    n = 10_000
    for _ in range(n):
        key = SecretKey(rng.getrandbits(128))
        for i, node in enumerate((0, 1)):
            seed = expand_key(key, node)[0].state
            ones[i] += [(seed >> b) & 1 for b in range(64)]
    freq = ones / n
    # 10^4 keys: binomial sd 0.005, so the band is +-2 sd per bit; check the
    # bulk of the bits and a looser bound for the extremes
    assert np.mean((freq >= 0.49) & (freq <= 0.51)) > 0.9
    assert freq.min() > 0.48 and freq.max() < 0.52


def test_distinct_seeds_give_distinct_keys():
    keys = {SecretKey.from_seed(s).key for s in range(1000)}
    assert len(keys) == 1000
    assert "redacted" in repr(SecretKey.from_seed(1))
    with pytest.raises(ValueError):
        SecretKey(1 << 128)


def test_ci_generator_determinism():
    key = SecretKey.from_seed(8)
    a, b = CiGenerator.from_key(key, 2), CiGenerator.from_key(key, 2)
    assert ci_prng_next_bits(a, 500) == ci_prng_next_bits(b, 500)
    with pytest.raises(ValueError):
        ci_prng_next_bits(a, 0)


def test_ci_generator_ones_fraction():
    g = CiGenerator.from_key(SecretKey.from_seed(21), 0)
    words = [g.next_word() for _ in range(1_000_000 // 64)]
    ones = sum(w.bit_count() for w in words)
    assert 0.499 <= ones / (64 * len(words)) <= 0.501


def test_ci_generator_byte_chi_square():
    g = CiGenerator.from_key(SecretKey.from_seed(22), 0)
    counts = np.bincount([g.next_int(8) for _ in range(100_000)], minlength=256)
    assert chi_square_uniform(counts).p_value > 0.01


def test_next_int_buffering_is_lsb_first():
    key = SecretKey.from_seed(3)
    a, b = CiGenerator.from_key(key, 0), CiGenerator.from_key(key, 0)
    w = a.next_word()
    assert [b.next_int(8) for _ in range(8)] == [(w >> (8 * i)) & 0xFF for i in range(8)]


def test_reseed_is_deterministic_and_clears_buffer():
    key = SecretKey.from_seed(4)
    a, b, c = (CiGenerator.from_key(key, 0) for _ in range(3))
    for g in (a, b, c):
        g.next_int(3)
    a.reseed(99, 7)
    b.reseed(99, 7)
    assert a._nbuf == 0
    out = a.next_int(64)
    assert out == b.next_int(64)
    assert out != c.next_int(64)
    d = CiGenerator.from_key(key, 0)
    d.next_int(3)
    d.reseed(99, 8)
    assert d.next_int(64) != out


def test_strategy_index_l1_and_power_of_two():
    g = CiGenerator.from_key(SecretKey.from_seed(6), 0)
    assert all(draw_strategy_index(g, 1) == 0 for _ in range(100))

    class Counting:
        def __init__(self, inner):
            self.inner, self.calls = inner, 0

        def next_int(self, n):
            self.calls += 1
            return self.inner.next_int(n)

    c = Counting(g)
    for _ in range(1000):
        assert 0 <= draw_strategy_index(c, 8) < 8
    assert c.calls == 1000


def test_strategy_index_uniform_for_seven():
    g = CiGenerator.from_key(SecretKey.from_seed(7), 0)
    draws = np.array([draw_strategy_index(g, 7) for _ in range(700_000)])
    freq = np.bincount(draws, minlength=7) / draws.size
    assert np.all(np.abs(freq - 1 / 7) <= 0.005)
    assert chi_square_uniform(np.bincount(draws, minlength=7)).p_value > 0.01


def test_strategy_index_gives_up_on_a_stuck_generator():
    class Stuck:
        def next_int(self, n):
            return (1 << n) - 1

    with pytest.raises(RuntimeError):
        draw_strategy_index(Stuck(), 5)


def test_hash_empty_message_is_iv_finalization():
    assert ci_hash(b"") == xorshift_mix(xorshift_mix(HASH_IV ^ 0))


def test_hash_determinism_and_length_sensitivity():
    assert ci_hash(b"sentinel") == ci_hash(b"sentinel")
    assert ci_hash(b"\x00") != ci_hash(b"\x00\x00")


def test_hash_avalanche_small_sample():
    rng = random.Random(3)
    dists = []
    for _ in range(2000):
        m = bytearray(rng.randbytes(rng.randint(1, 32)))
        h0 = ci_hash(bytes(m))
        p = rng.randrange(len(m) * 8)
        m[p // 8] ^= 1 << (p % 8)
        dists.append((h0 ^ ci_hash(bytes(m))).bit_count())
    assert abs(np.mean(dists) - 32) <= 1.5
