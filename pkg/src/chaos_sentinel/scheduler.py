"""Node lifecycle and the network-wide sleep/wake protocol.

Time advances on a grid of ``T0`` ticks. Listening time ``e`` is counted in
ticks, so an order adds ``r = T / T0`` ticks. Orders emitted during tick ``j``
are absorbed at the start of tick ``j + 1``.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

from .ci_core import BitState, ci_step, vectorial_negation
from .primitives import (
    BaseGenerator,
    CiGenerator,
    SecretKey,
    ci_hash,
    draw_strategy_index,
    expand_key,
    splitmix64,
)

TAG_NODE_PRNG = 0
TAG_NODE_STATE = 1
TAG_ACTIVATION = 2
TAG_POLICY = 3


class Policy(str, Enum):
    CHAOTIC = "chaotic"
    UNIFORM_RANDOM = "uniform_random"
    PERIODIC = "periodic"

    @classmethod
    def parse(cls, name: "str | Policy") -> "Policy":
        if isinstance(name, Policy):
            return name
        aliases = {"random": cls.UNIFORM_RANDOM, "rand": cls.UNIFORM_RANDOM}
        if name in aliases:
            return aliases[name]
        return cls(name)


class StrategyMode(str, Enum):
    # N generator bits form an integer S whose set bits are the cells negated.
    SUBSET = "subset"
    # One uniformly drawn cell is negated per tick.
    INDEX = "index"


@dataclass
class NodeRuntime:
    id: int
    N: int
    state: BitState
    generator: CiGenerator
    r: int
    battery: int
    e: int = 0
    pending: int = 0
    alive: bool = True
    just_activated: bool = False
    captures: int = 0

    def __post_init__(self):
        if self.state.length != self.N:
            raise ValueError("node state length must equal N")
        if not 0 <= self.id < (1 << self.N):
            raise ValueError(f"node id {self.id} outside [0, 2^{self.N})")

    @property
    def active(self) -> bool:
        return self.e > 0


@dataclass
class NodeTickResult:
    target: int | None
    flips: tuple[int, ...]
    reset: bool
    died: bool


@dataclass
class ScheduleTick:
    tick: int
    active_ids: list[int]
    orders: list[tuple[int, int]]
    dropped: int = 0
    resets: list[int] = field(default_factory=list)
    deaths: list[int] = field(default_factory=list)
    detections: list[dict] = field(default_factory=list)
    battery_summary: dict = field(default_factory=dict)
    # per-node negated cells; secret material, never serialized
    flips: dict[int, tuple[int, ...]] = field(default_factory=dict, repr=False)

    def to_record(self) -> dict:
        return {
            "tick": self.tick,
            "active_ids": self.active_ids,
            "orders": [list(o) for o in self.orders],
            "detections": self.detections,
            "battery_summary": self.battery_summary,
        }


def default_sensed(node_id: int, tick: int) -> int:
    return splitmix64(splitmix64(tick) ^ node_id)


def select_next(policy: Policy, node: NodeRuntime, policy_gen: BaseGenerator | None = None) -> int:
    if policy is Policy.CHAOTIC:
        return node.state.as_integer()
    if policy is Policy.UNIFORM_RANDOM:
        if policy_gen is None:
            raise ValueError("uniform_random policy needs a generator")
        return policy_gen.next() >> (64 - node.N)
    if policy is Policy.PERIODIC:
        return (node.id + 1) % (1 << node.N)
    raise ValueError(f"unknown policy {policy!r}")


def deliver_order(node: NodeRuntime) -> bool:
    """Queue one wake-up order; returns False when the node is dead (order dropped)."""
    if not node.alive:
        return False
    node.pending += 1
    return True


def absorb_orders(node: NodeRuntime) -> None:
    if node.pending == 0 or not node.alive:
        node.pending = 0
        return
    if node.e == 0:
        node.e = node.pending * node.r
        node.just_activated = True
    else:
        node.e += node.pending * node.r
    node.pending = 0


def _capture_phase(node: NodeRuntime, sensed, tick: int, mode: StrategyMode, capture_cost: int):
    """Capture half of a listening tick. Returns (flips, reset, finished, died)."""
    reset = False
    if node.just_activated:
        reading = sensed() if callable(sensed) else sensed
        node.generator.reseed(ci_hash(int(reading).to_bytes(8, "little")), tick)
        node.state = BitState.from_integer(node.id, node.N)
        node.just_activated = False
        reset = True

    if mode is StrategyMode.INDEX:
        s = draw_strategy_index(node.generator, node.N)
        node.state = ci_step(node.state, s, vectorial_negation)
        flips = (s,)
    else:
        mask = node.generator.next_int(node.N)
        flips = tuple(j for j in range(node.N) if (mask >> j) & 1)
        node.state = node.state.xor_mask(mask)

    node.battery = max(0, node.battery - capture_cost)
    node.captures += 1
    node.e -= 1
    died = node.battery == 0
    if died:
        node.alive = False
        node.e = 0
        node.pending = 0
    return flips, reset, node.e == 0 and not died, died


def node_tick(node: NodeRuntime, sensed, tick: int, policy: Policy = Policy.CHAOTIC,
              policy_gen: BaseGenerator | None = None, mode: StrategyMode = StrategyMode.SUBSET,
              capture_cost: int = 1) -> NodeTickResult:
    """One listening tick of an active node; ``sensed`` is an int or a thunk."""
    if not node.alive or node.e <= 0:
        raise ValueError(f"node {node.id} is not active")
    flips, reset, finished, died = _capture_phase(node, sensed, tick, mode, capture_cost)
    target = select_next(policy, node, policy_gen) if finished else None
    return NodeTickResult(target, flips, reset, died)


class Network:
    """All nodes of one WVSN plus the policy used for next-node selection."""

    def __init__(self, nodes: list[NodeRuntime], policy: Policy = Policy.CHAOTIC,
                 policy_gen: BaseGenerator | None = None, mode: StrategyMode = StrategyMode.SUBSET,
                 capture_cost: int = 1):
        self.nodes = nodes
        self.N = nodes[0].N
        self.size = len(nodes)
        self.policy = Policy.parse(policy)
        self.policy_gen = policy_gen
        self.mode = StrategyMode(mode)
        self.capture_cost = capture_cost
        self.dropped_total = 0
        self._active = {n.id for n in nodes if n.alive and n.e > 0}
        self._pending = {n.id for n in nodes if n.pending > 0}
        self._bsum = sum(n.battery for n in nodes)
        self._bsq = sum(n.battery * n.battery for n in nodes)
        self._alive = sum(1 for n in nodes if n.alive)

    @property
    def active_ids(self) -> list[int]:
        return sorted(self._active)

    @property
    def idle(self) -> bool:
        return not self._active and not self._pending

    @property
    def alive_count(self) -> int:
        return self._alive

    def battery_summary(self) -> dict:
        n = self.size
        mean = self._bsum / n
        var = max(0.0, self._bsq / n - mean * mean)
        return {"mean": mean, "std": math.sqrt(var), "alive": self._alive}

    def batteries(self) -> list[int]:
        return [n.battery for n in self.nodes]

    def global_state(self) -> BitState:
        v = 0
        for k, node in enumerate(self.nodes):
            v |= node.state.value << (k * self.N)
        return BitState(v, self.N * self.size)

    def observable(self) -> int:
        """Concatenation of each node's next-node choice, node k at bits [kN, (k+1)N)."""
        v = 0
        for k, node in enumerate(self.nodes):
            v |= select_next(self.policy, node, self.policy_gen) << (k * self.N)
        return v


def initialize_network(key: SecretKey, N: int, activation_fraction: float = 0.5, *, r: int = 4,
                       battery: int = 100, policy: Policy | str = Policy.CHAOTIC,
                       mode: StrategyMode | str = StrategyMode.SUBSET, capture_cost: int = 1,
                       initial_state: str = "key") -> Network:
    """Create the 2^N nodes and wake an initial subset.

    ``initial_state="key"`` sets each node's state from its secret parameter;
    ``"id"`` uses the binary decomposition of the node id instead.
    """
    if not 1 <= N <= 16:
        raise ValueError(f"N must be in [1, 16], got {N}")
    if not 0.0 <= activation_fraction <= 1.0:
        raise ValueError("activation_fraction must be a probability")
    if r < 1:
        raise ValueError("r = T / T0 must be a positive integer")
    if initial_state not in ("key", "id"):
        raise ValueError("initial_state must be 'key' or 'id'")
    act = expand_key(key, 0, TAG_ACTIVATION)[0]
    nodes = []
    for i in range(1 << N):
        gen = CiGenerator.from_key(key, i, TAG_NODE_PRNG)
        if initial_state == "key":
            state = expand_key(key, i, TAG_NODE_STATE, length=N)[2]
        else:
            state = BitState.from_integer(i, N)
        node = NodeRuntime(i, N, state, gen, r, battery)
        u = (act.next() >> 11) / float(1 << 53)
        if u < activation_fraction:
            node.e = r
        nodes.append(node)
    policy_gen = expand_key(key, 0, TAG_POLICY)[0]
    return Network(nodes, Policy.parse(policy), policy_gen, StrategyMode(mode), capture_cost)


SensedFn = Callable[[int, int], int]


def network_tick(net: Network, tick: int, sensed_fn: SensedFn | None = None, workers: int = 1) -> ScheduleTick:
    """Advance the whole network by one T0 tick with simultaneous-update semantics."""
    sensed_fn = sensed_fn or default_sensed
    for i in sorted(net._pending):
        node = net.nodes[i]
        absorb_orders(node)
        if node.e > 0:
            net._active.add(i)
    net._pending.clear()

    active = sorted(net._active)
    before = {i: net.nodes[i].battery for i in active}

    def run(i: int):
        node = net.nodes[i]
        return i, _capture_phase(node, lambda: sensed_fn(i, tick), tick, net.mode, net.capture_cost)

    if workers > 1 and len(active) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, active))
    else:
        results = [run(i) for i in active]

    rec = ScheduleTick(tick=tick, active_ids=active, orders=[])
    finished = []
    for i, (flips, reset, done, died) in results:
        node = net.nodes[i]
        rec.flips[i] = flips
        if reset:
            rec.resets.append(i)
        b0 = before[i]
        net._bsum += node.battery - b0
        net._bsq += node.battery * node.battery - b0 * b0
        if died:
            rec.deaths.append(i)
            net._alive -= 1
        if node.e == 0:
            net._active.discard(i)
        if done:
            finished.append(i)

    # selection after the barrier, in id order, so shared policy state is
    # consumed identically whatever the worker count
    for i in finished:
        target = select_next(net.policy, net.nodes[i], net.policy_gen)
        rec.orders.append((i, target))
    for _, target in rec.orders:
        if deliver_order(net.nodes[target]):
            net._pending.add(target)
        else:
            rec.dropped += 1
    net.dropped_total += rec.dropped
    rec.battery_summary = net.battery_summary()
    return rec


class GlobalCI:
    """The whole network viewed as one chaotic iteration on N * 2^N cells.

    Node k owns cells [kN, (k+1)N). A tick's global strategy is the set of
    ``p + kN`` over the cells ``p`` each active node negated.
    """

    def __init__(self, state: BitState, N: int):
        self.state = state
        self.N = N

    @classmethod
    def from_network(cls, net: Network) -> "GlobalCI":
        return cls(net.global_state(), net.N)

    @staticmethod
    def strategy(rec: ScheduleTick, N: int) -> list[int]:
        return sorted(p + k * N for k, ps in rec.flips.items() for p in ps)

    def apply(self, rec: ScheduleTick) -> BitState:
        N = self.N
        x = self.state
        for k in rec.resets:
            seg = ((1 << N) - 1) << (k * N)
            x = BitState((x.value & ~seg) | (k << (k * N)), x.length)
        for s in self.strategy(rec, N):
            x = ci_step(x, s, vectorial_negation)
        self.state = x
        return x


@dataclass
class RunTrace:
    ticks: list[ScheduleTick] = field(default_factory=list)
    config: dict = field(default_factory=dict)
    idle_terminated: bool = False
    end_tick: int = 0

    def orders(self, start: int = 0, stop: int | None = None) -> list[tuple[int, int]]:
        out = []
        for rec in self.ticks:
            if rec.tick < start or (stop is not None and rec.tick >= stop):
                continue
            out.extend(rec.orders)
        return out

    def to_ndjson(self) -> str:
        return "".join(json.dumps(r.to_record(), sort_keys=True, separators=(",", ":")) + "\n" for r in self.ticks)


def run_network(net: Network, ticks: int, sensed_fn: SensedFn | None = None, stop_when_idle: bool = True,
                workers: int = 1) -> RunTrace:
    trace = RunTrace()
    for j in range(1, ticks + 1):
        if stop_when_idle and net.idle:
            trace.idle_terminated = True
            break
        trace.ticks.append(network_tick(net, j, sensed_fn, workers))
        trace.end_tick = j
    return trace
