"""Phase-space distance and desk-scale chaos experiments for G_{f0}."""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .ci_core import BitState, StrategyStream, gf_step, vectorial_negation

K_MAX = 64


@dataclass(frozen=True)
class PhasePoint:
    """A point (S, E) with the strategy truncated to a finite prefix."""

    strategy_prefix: tuple[int, ...]
    state: BitState

    def __post_init__(self):
        if len(self.strategy_prefix) < 1:
            raise ValueError("strategy prefix must hold at least one term")
        L = self.state.length
        if any(not 0 <= s < L for s in self.strategy_prefix):
            raise ValueError(f"strategy indices must lie in [0, {L})")


def de_distance(e1: BitState, e2: BitState) -> int:
    if e1.length != e2.length:
        raise ValueError(f"length mismatch: {e1.length} vs {e2.length}")
    return (e1.value ^ e2.value).bit_count()


def ds_fraction(s1: Sequence[int], s2: Sequence[int], L: int) -> Fraction:
    """Exact value of the strategy distance over equal-length prefixes."""
    if len(s1) != len(s2):
        raise ValueError(f"prefix length mismatch: {len(s1)} vs {len(s2)}")
    if L < 2:
        raise ValueError("strategy distance is degenerate for L < 2")
    K = len(s1)
    # sum_k |d_k| / 10^k  ==  (sum_k |d_k| * 10^(K-k)) / 10^K
    num = 0
    for a, b in zip(s1, s2):
        num = num * 10 + abs(a - b)
    return Fraction(9 * num, L * 10**K)


def ds_distance(s1: Sequence[int], s2: Sequence[int], L: int) -> float:
    return float(ds_fraction(s1, s2, L))


def distance(p1: PhasePoint, p2: PhasePoint) -> float:
    L = p1.state.length
    return de_distance(p1.state, p2.state) + ds_distance(p1.strategy_prefix, p2.strategy_prefix, L)


def distance_exact(p1: PhasePoint, p2: PhasePoint) -> Fraction:
    L = p1.state.length
    return de_distance(p1.state, p2.state) + ds_fraction(p1.strategy_prefix, p2.strategy_prefix, L)


@dataclass
class ExperimentReport:
    experiment: str
    L: int
    trials: int
    statistics: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(
            {"experiment": self.experiment, "L": self.L, "trials": self.trials, "statistics": self.statistics},
            sort_keys=True,
        )


def divergence_step(p1: PhasePoint, p2: PhasePoint, max_steps: int | None = None) -> int | None:
    """First n >= 1 at which the iterated states differ, or None within the prefix."""
    L = p1.state.length
    steps = max_steps or len(p1.strategy_prefix)
    s1 = StrategyStream(p1.strategy_prefix, L)
    s2 = StrategyStream(p2.strategy_prefix, L)
    e1, e2 = p1.state, p2.state
    for n in range(1, steps + 1):
        s1, e1 = gf_step(s1, e1, vectorial_negation)
        s2, e2 = gf_step(s2, e2, vectorial_negation)
        if de_distance(e1, e2) >= 1:
            return n
    return None


def sensitivity_experiment(L: int, trials: int, seed: int = 0, prefix_len: int = 8) -> ExperimentReport:
    """Equal states, strategies differing in the first term: how fast do orbits split?"""
    if not 2 <= L <= 16:
        raise ValueError("sensitivity experiment runs for 2 <= L <= 16")
    rng = random.Random(seed)
    steps = []
    de_after_one = []
    for _ in range(trials):
        state = BitState(rng.getrandbits(L), L)
        tail = [rng.randrange(L) for _ in range(prefix_len - 1)]
        a = rng.randrange(L)
        b = rng.choice([i for i in range(L) if i != a])
        p1 = PhasePoint((a, *tail), state)
        p2 = PhasePoint((b, *tail), state)
        steps.append(divergence_step(p1, p2))
        de_after_one.append(de_distance(state.flip(a), state.flip(b)))
    return ExperimentReport(
        "sensitivity",
        L,
        trials,
        {
            "min_divergence_step": min(steps),
            "max_divergence_step": max(steps),
            "min_de_after_one_step": min(de_after_one),
            "max_de_after_one_step": max(de_after_one),
        },
    )


def reaching_strategy(x: BitState, y: BitState) -> list[int]:
    """Flip the differing cells in ascending order."""
    diff = x.value ^ y.value
    return [j for j in range(x.length) if (diff >> j) & 1]


def reachability_check(L: int) -> ExperimentReport:
    if not 1 <= L <= 8:
        raise ValueError("reachability check is exhaustive and limited to L <= 8")
    max_len = 0
    failures = 0
    for xi in range(1 << L):
        x = BitState(xi, L)
        for yi in range(1 << L):
            y = BitState(yi, L)
            strat = reaching_strategy(x, y)
            e = x
            s = StrategyStream(strat, L)
            for _ in strat:
                s, e = gf_step(s, e)
            if e != y:
                failures += 1
            max_len = max(max_len, len(strat))
    return ExperimentReport(
        "reachability",
        L,
        (1 << L) ** 2,
        {"pairs": (1 << L) ** 2, "failures": failures, "max_prefix_length": max_len},
    )
