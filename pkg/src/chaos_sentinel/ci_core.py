"""Chaotic iterations on fixed-length Boolean vectors.

Cells are indexed from 0. Bit ``j`` of a :class:`BitState` is the ``j``-th
least-significant bit of its integer encoding, so ``(0, 1, 1)`` encodes 6.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Sequence


@dataclass(frozen=True)
class BitState:
    """Immutable Boolean vector backed by an integer."""

    value: int
    length: int

    def __post_init__(self):
        if self.length < 1:
            raise ValueError(f"BitState length must be >= 1, got {self.length}")
        if not 0 <= self.value < (1 << self.length):
            raise ValueError(f"value {self.value} does not fit in {self.length} bits")

    @classmethod
    def from_integer(cls, i: int, length: int) -> "BitState":
        return cls(i, length)

    @classmethod
    def from_bits(cls, bits: Iterable[int | bool]) -> "BitState":
        value = 0
        n = 0
        for j, b in enumerate(bits):
            if b:
                value |= 1 << j
            n = j + 1
        return cls(value, n)

    @classmethod
    def zeros(cls, length: int) -> "BitState":
        return cls(0, length)

    def as_integer(self) -> int:
        return self.value

    @property
    def bits(self) -> tuple[int, ...]:
        return tuple((self.value >> j) & 1 for j in range(self.length))

    def __len__(self) -> int:
        return self.length

    def __getitem__(self, j: int) -> int:
        if not 0 <= j < self.length:
            raise IndexError(f"cell {j} out of range for length {self.length}")
        return (self.value >> j) & 1

    def flip(self, j: int) -> "BitState":
        if not 0 <= j < self.length:
            raise IndexError(f"cell {j} out of range for length {self.length}")
        return BitState(self.value ^ (1 << j), self.length)

    def xor_mask(self, mask: int) -> "BitState":
        return BitState(self.value ^ mask, self.length)

    def __repr__(self) -> str:
        return f"BitState({''.join(map(str, self.bits))})"


UpdateFunction = Callable[[BitState], BitState]


def vectorial_negation(x: BitState) -> BitState:
    """Componentwise complement, the update function f0."""
    return BitState(x.value ^ ((1 << x.length) - 1), x.length)


class StrategyStream:
    """Single-consumer cursor over a (possibly infinite) sequence of cell indices.

    ``term(k)`` peeks ahead without consuming; ``shift()`` drops the first
    term in place, so ``term(k)`` after a shift equals ``term(k + 1)`` before.
    """

    def __init__(self, source: Iterable[int], length: int):
        if length < 1:
            raise ValueError("strategy cell count must be >= 1")
        self.length = length
        self._source: Iterator[int] = iter(source)
        self._ahead: deque[int] = deque()

    @classmethod
    def from_sequence(cls, seq: Sequence[int], length: int) -> "StrategyStream":
        return cls(list(seq), length)

    def _fill(self, k: int) -> None:
        while len(self._ahead) <= k:
            try:
                s = next(self._source)
            except StopIteration:
                raise IndexError("strategy exhausted") from None
            if not 0 <= s < self.length:
                raise IndexError(f"strategy term {s} out of range [0, {self.length})")
            self._ahead.append(s)

    def term(self, k: int = 0) -> int:
        self._fill(k)
        return self._ahead[k]

    def first(self) -> int:
        return self.term(0)

    def shift(self) -> "StrategyStream":
        self._fill(0)
        self._ahead.popleft()
        return self

    def next(self) -> int:
        s = self.first()
        self._ahead.popleft()
        return s

    def prefix(self, k: int) -> list[int]:
        return [self.term(i) for i in range(k)]

    def __iter__(self):
        return self

    def __next__(self) -> int:
        try:
            return self.next()
        except IndexError as exc:
            if "exhausted" in str(exc):
                raise StopIteration from None
            raise


def ci_step(x: BitState, s: int, f: UpdateFunction = vectorial_negation) -> BitState:
    """Iterate only cell ``s`` of ``x`` with ``f``."""
    if not 0 <= s < x.length:
        raise IndexError(f"strategy index {s} out of range for length {x.length}")
    if f is vectorial_negation:
        return x.flip(s)
    fs = f(x)[s]
    if fs == x[s]:
        return x
    return x.flip(s)


def ci_iterate(x0: BitState, strategy: StrategyStream | Iterable[int], f: UpdateFunction = vectorial_negation,
               n: int = 0) -> BitState:
    if n < 0:
        raise ValueError("iteration count must be >= 0")
    if not isinstance(strategy, StrategyStream):
        strategy = StrategyStream(strategy, x0.length)
    x = x0
    for _ in range(n):
        x = ci_step(x, strategy.next(), f)
    return x


def f_map(k: int, e: BitState, f: UpdateFunction = vectorial_negation) -> BitState:
    """F_f(k, E), evaluated cell by cell from its Boolean-sum form.

    Kept independent of :func:`ci_step` on purpose; the two are cross-checked.
    """
    if not 0 <= k < e.length:
        raise IndexError(f"strategy index {k} out of range for length {e.length}")
    fe = f(e).bits
    out = []
    for j, ej in enumerate(e.bits):
        delta = 0 if j == k else 1
        out.append((ej & delta) | (fe[k] & (1 - delta)))
    return BitState.from_bits(out)


def gf_step(s: StrategyStream, e: BitState, f: UpdateFunction = vectorial_negation) -> tuple[StrategyStream, BitState]:
    """One application of G_f: returns (shifted strategy, F_f(first term, e)).

    The stream is advanced in place and returned.
    """
    e_next = f_map(s.first(), e, f)
    return s.shift(), e_next
