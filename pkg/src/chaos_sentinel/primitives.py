"""Randomness and digest services built on chaotic iterations.

Reference constructions with fixed constants. They are gated on statistical
behaviour (uniformity, avalanche, determinism) and make no cryptographic claim.
"""

from __future__ import annotations

import secrets
from dataclasses import dataclass

from .ci_core import BitState, ci_step, vectorial_negation

MASK64 = (1 << 64) - 1
XORSHIFT_MULT = 0x2545F4914F6CDD1D
GOLDEN = 0x9E3779B97F4A7C15
NONZERO_FALLBACK = 0x853C49E6748FEA9B
HASH_IV = 0x6A09E667F3BCC908
CI_WIDTH = 64


def splitmix64(x: int) -> int:
    """SplitMix64 finalizer (one increment + avalanche)."""
    z = (x + GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def xorshift_mix(x: int) -> int:
    """The xorshift-multiply round used both by the base generator and the hash."""
    x ^= (x << 13) & MASK64
    x ^= x >> 7
    x ^= (x << 17) & MASK64
    return (x * XORSHIFT_MULT) & MASK64


def _nonzero(x: int) -> int:
    return x if x else NONZERO_FALLBACK


@dataclass(frozen=True)
class SecretKey:
    key: int

    def __post_init__(self):
        if not 0 <= self.key < (1 << 128):
            raise ValueError("secret key must be a 128-bit value")

    @classmethod
    def generate(cls) -> "SecretKey":
        return cls(secrets.randbits(128))

    @classmethod
    def from_seed(cls, seed: int) -> "SecretKey":
        """Deterministic key for reproducible experiments."""
        hi = splitmix64(seed & MASK64)
        lo = splitmix64(hi ^ 0xA0761D6478BD642F ^ (seed >> 64))
        return cls((hi << 64) | lo)

    def __repr__(self) -> str:
        return "SecretKey(<redacted>)"


class BaseGenerator:
    """xorshift64* on a nonzero 64-bit state."""

    __slots__ = ("state",)

    def __init__(self, state: int):
        state &= MASK64
        if state == 0:
            raise ValueError("BaseGenerator state must be nonzero")
        self.state = state

    def next(self) -> int:
        x = self.state
        x ^= (x << 13) & MASK64
        x ^= x >> 7
        x ^= (x << 17) & MASK64
        self.state = x
        return (x * XORSHIFT_MULT) & MASK64

    def seed(self, state: int) -> None:
        self.state = _nonzero(state & MASK64)


def base_next(g: BaseGenerator) -> int:
    return g.next()


def expand_key(key: SecretKey, node_id: int, domain_tag: int = 0, length: int = CI_WIDTH):
    """Derive (X generator, Y generator, initial state) for one node and purpose."""
    lo = key.key & MASK64
    hi = key.key >> 64
    # absorb the two key halves one after the other
    root = splitmix64(splitmix64(lo ^ (node_id & MASK64) ^ ((domain_tag & 0xFF) << 56)) ^ hi)
    x_seed = _nonzero(splitmix64(root))
    y_seed = _nonzero(splitmix64(root ^ 0xD1B54A32D192ED03))
    state_bits = splitmix64(root ^ 0x8CB92BA72F3D8DD7)
    if length > 64:
        state_bits |= splitmix64(state_bits) << 64
    state = BitState(state_bits & ((1 << length) - 1), length)
    return BaseGenerator(x_seed), BaseGenerator(y_seed), state


class CiGenerator:
    """CI(X,Y) generator: X drives the strategy, Y picks how many iterations
    separate two published states.

    Each published word is the CI state XOR-ed with the last strategy draw.
    Publishing the bare state fails byte-level uniformity (consecutive words
    differ in at most three cells).
    """

    __slots__ = ("x_gen", "y_gen", "internal", "_buf", "_nbuf")

    def __init__(self, x_gen: BaseGenerator, y_gen: BaseGenerator, internal: BitState):
        if internal.length != CI_WIDTH:
            raise ValueError(f"internal state must be {CI_WIDTH} bits")
        self.x_gen = x_gen
        self.y_gen = y_gen
        self.internal = internal
        self._buf = 0
        self._nbuf = 0

    @classmethod
    def from_key(cls, key: SecretKey, node_id: int, domain_tag: int = 0) -> "CiGenerator":
        return cls(*expand_key(key, node_id, domain_tag))

    def next_word(self) -> int:
        k = 1 + self.y_gen.next() % 3
        state = self.internal
        x = 0
        for _ in range(k):
            x = self.x_gen.next()
            state = ci_step(state, x % CI_WIDTH, vectorial_negation)
        self.internal = state
        return state.value ^ x

    def next_int(self, n_bits: int) -> int:
        """Next ``n_bits`` of the output stream as an integer, LSB first."""
        while self._nbuf < n_bits:
            self._buf |= self.next_word() << self._nbuf
            self._nbuf += CI_WIDTH
        out = self._buf & ((1 << n_bits) - 1)
        self._buf >>= n_bits
        self._nbuf -= n_bits
        return out

    def next_bits(self, n_bits: int) -> list[int]:
        v = self.next_int(n_bits)
        return [(v >> j) & 1 for j in range(n_bits)]

    def reseed(self, digest: int, tick: int) -> None:
        """Reseed both base generators from a digest and a time stamp.

        The CI state is kept, the pending output bits are discarded.
        """
        seed = splitmix64((digest ^ splitmix64(tick & MASK64)) & MASK64)
        self.x_gen.seed(seed)
        self.y_gen.seed(splitmix64(seed ^ GOLDEN))
        self._buf = 0
        self._nbuf = 0


def ci_prng_next_bits(g: CiGenerator, n_bits: int) -> list[int]:
    if n_bits < 1:
        raise ValueError("n_bits must be >= 1")
    return g.next_bits(n_bits)


MAX_REDRAWS = 10_000


def draw_strategy_index(g: CiGenerator, L: int) -> int:
    """Exactly uniform cell index in [0, L) by rejection sampling."""
    if L < 1:
        raise ValueError("L must be >= 1")
    if L == 1:
        return 0
    width = (L - 1).bit_length()
    for _ in range(MAX_REDRAWS):
        v = g.next_int(width)
        if v < L:
            return v
    raise RuntimeError("strategy index rejection loop did not terminate; generator is broken")


def ci_hash(message: bytes) -> int:
    """64-bit CI digest: each message bit selects a cell to negate."""
    state = HASH_IV
    i = 0
    for byte in message:
        for j in range(8):
            b = (byte >> j) & 1
            state ^= 1 << ((i * 7 + b * 31) % 64)
            i += 1
        state = xorshift_mix(state)
    state ^= (len(message) * 8) & MASK64
    return xorshift_mix(xorshift_mix(state))
