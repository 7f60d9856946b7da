"""Physical-world model: deployment, directional sensing, intruders, energy
and the stealth-time / activity / energy metrics."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .adversary import AttackOutcome, ObservedModel, blind_path, plan_adaptive_step, predicted_activity
from .geometry import SensorPose, deploy_poses, in_sector
from .primitives import SecretKey, splitmix64
from .scheduler import Network, Policy, RunTrace, StrategyMode, initialize_network, network_tick

MOBILITIES = ("scan_line", "random_walk", "shortest_path", "adaptive")
SNAPSHOT_PERIOD = 10.0
STEALTH_WINDOW = 20


@dataclass
class FieldConfig:
    """Run parameters; defaults are the published simulation set-up."""

    width: float = 75.0
    height: float = 75.0
    N: int = 7
    aov: float = 36.0
    sensing_range: float = 25.0
    t0: float = 5.0
    t_active: float = 20.0
    battery_init: int = 100
    capture_cost: int = 1
    intruder_speed: float = 5.0
    first_intrusion_time: float = 10.0
    activation_fraction: float = 0.5
    key_seed: int = 1
    sim_seed: int = 1
    policy: str = "chaotic"
    mobility: str = "scan_line"
    strategy_mode: str = "subset"
    tick_cap: int = 200_000

    def __post_init__(self):
        self.policy = Policy.parse(self.policy).value
        self.strategy_mode = StrategyMode(self.strategy_mode).value
        self.validate()

    @property
    def r(self) -> int:
        return int(round(self.t_active / self.t0))

    def validate(self) -> None:
        if self.t0 <= 0 or self.t_active <= 0:
            raise ValueError("t0 and t_active must be positive")
        ratio = self.t_active / self.t0
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise ValueError(f"t_active / t0 = {ratio} must be a positive integer")
        if not 0 < self.aov <= 360:
            raise ValueError("aov must lie in (0, 360]")
        if self.sensing_range <= 0:
            raise ValueError("sensing_range must be positive")
        if self.width < 0 or self.height < 0:
            raise ValueError("field dimensions must be non-negative")
        if not 1 <= self.N <= 16:
            raise ValueError("N must lie in [1, 16]")
        if self.mobility not in MOBILITIES:
            raise ValueError(f"mobility must be one of {MOBILITIES}")
        if self.battery_init < 1 or self.capture_cost < 1:
            raise ValueError("battery_init and capture_cost must be >= 1")
        if self.intruder_speed < 0:
            raise ValueError("intruder_speed must be >= 0")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["version"] = __version__
        return d

    def replace(self, **kw) -> "FieldConfig":
        return dataclasses.replace(self, **kw)


@dataclass
class Intruder:
    position: tuple[float, float]
    entry_time: float
    mobility: str = "scan_line"
    detected: bool = False
    target: tuple[float, float] | None = None
    path: object = None  # waypoint iterator for blind paths


@dataclass
class MetricsSeries:
    snapshot_time: list[float] = field(default_factory=list)
    active_pct: list[float] = field(default_factory=list)
    energy_mean: list[float] = field(default_factory=list)
    energy_std: list[float] = field(default_factory=list)
    stealth_time: list[float] = field(default_factory=list)  # detection instants
    stealth_value: list[float] = field(default_factory=list)
    active_per_tick: list[int] = field(default_factory=list)
    t0: float = 5.0
    lifetime: float = 0.0
    end_time: float = 0.0
    idle_terminated: bool = False
    dropped_orders: int = 0
    outcomes: list[AttackOutcome] = field(default_factory=list)

    @property
    def stealth_running_mean(self) -> list[float]:
        out, s = [], 0.0
        for i, v in enumerate(self.stealth_value, 1):
            s += v
            out.append(s / i)
        return out

    @property
    def stealth_window_mean(self) -> list[float]:
        v = self.stealth_value
        out = []
        for i in range(len(v)):
            w = v[max(0, i - STEALTH_WINDOW + 1): i + 1]
            out.append(sum(w) / len(w))
        return out

    @property
    def mean_stealth(self) -> float:
        return float(np.mean(self.stealth_value)) if self.stealth_value else math.nan

    def time_to_half_active(self) -> float:
        """First tick time at which the active count is at most half the initial one."""
        if not self.active_per_tick:
            return 0.0
        a0 = self.active_per_tick[0]
        for j, a in enumerate(self.active_per_tick, 1):
            if a <= 0.5 * a0:
                return j * self.t0
        return len(self.active_per_tick) * self.t0


def deploy(config: FieldConfig, sim_seed: int | None = None) -> list[SensorPose]:
    seed = config.sim_seed if sim_seed is None else sim_seed
    rng = _streams(seed)["deploy"]
    return deploy_poses(1 << config.N, config.width, config.height, rng)


def _streams(sim_seed: int) -> dict[str, np.random.Generator]:
    ss = np.random.SeedSequence(sim_seed)
    d, i, n = ss.spawn(3)
    return {"deploy": np.random.default_rng(d), "intruder": np.random.default_rng(i),
            "noise": np.random.default_rng(n)}


def sensor_reading(noise: int, tick: int, node_id: int, presence: bool) -> int:
    return splitmix64(noise ^ splitmix64(tick) ^ (node_id << 1) ^ int(presence))


def _spawn(config: FieldConfig, rng: np.random.Generator, now: float, mobility: str | None = None) -> Intruder:
    mobility = mobility or config.mobility
    w, h = config.width, config.height
    if mobility == "adaptive":
        pos = (0.0, float(rng.uniform(0, h)))
        return Intruder(pos, now, mobility, target=(w, pos[1]))
    pos = (float(rng.uniform(0, w)), float(rng.uniform(0, h)))
    intr = Intruder(pos, now, mobility)
    if mobility in ("random_walk", "shortest_path"):
        intr.target = (float(rng.uniform(0, w)), float(rng.uniform(0, h)))
        intr.path = blind_path(mobility, pos, intr.target, config.intruder_speed, dt=config.t0,
                               bounds=(w, h), rng=rng)
    return intr


def intruder_step(intruder: Intruder, dt: float, config: FieldConfig, rng: np.random.Generator | None = None) -> bool:
    """Move ``intruder`` by ``dt`` seconds in place. Returns True when it reached its target.

    A scan-line intruder leaving through the right edge re-enters at a random
    height on the left edge; its stealth clock keeps running.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if intruder.mobility == "scan_line":
        x, y = intruder.position
        x += config.intruder_speed * dt
        if x > config.width:
            rng = rng if rng is not None else np.random.default_rng(0)
            x, y = 0.0, float(rng.uniform(0, config.height))
        intruder.position = (x, y)
        return False
    if intruder.mobility in ("random_walk", "shortest_path"):
        try:
            t, pos = next(intruder.path)
        except StopIteration:
            return True
        intruder.position = pos
        return pos == intruder.target or math.hypot(pos[0] - intruder.target[0], pos[1] - intruder.target[1]) <= 1.0
    raise ValueError(f"intruder_step does not move {intruder.mobility!r} intruders")


def detection_check(net: Network, poses: list[SensorPose], intruder: Intruder, active_ids, config: FieldConfig) -> bool:
    """True iff some alive node that captured this tick sees the intruder."""
    for i in active_ids:
        if in_sector(poses[i], intruder.position, config.aov, config.sensing_range):
            return True
    return False


def run_simulation(config: FieldConfig, observer: ObservedModel | None = None,
                   keep_trace: bool = True) -> tuple[RunTrace, MetricsSeries]:
    """Tick the scheduler and the world on the T0 grid until every battery is
    empty, the network is idle, or the tick cap is hit."""
    if config.mobility == "adaptive" and observer is None:
        raise ValueError("adaptive intruders need a trained ObservedModel")
    streams = _streams(config.sim_seed)
    poses = deploy_poses(1 << config.N, config.width, config.height, streams["deploy"])
    irng = streams["intruder"]
    noise = int(streams["noise"].integers(0, 2**63))
    net = initialize_network(SecretKey.from_seed(config.key_seed), config.N, config.activation_fraction,
                             r=config.r, battery=config.battery_init, policy=config.policy,
                             mode=config.strategy_mode, capture_cost=config.capture_cost)
    trace = RunTrace(config=config.to_dict())
    m = MetricsSeries(t0=config.t0)
    size = net.size
    intruder: Intruder | None = None
    next_snapshot = 0.0
    last_active_time = 0.0
    last_rec = None

    def snapshot(t: float, active: int) -> None:
        s = net.battery_summary()
        m.snapshot_time.append(t)
        m.active_pct.append(100.0 * active / size)
        m.energy_mean.append(s["mean"])
        m.energy_std.append(s["std"])

    snapshot(0.0, len(net.active_ids))
    next_snapshot += SNAPSHOT_PERIOD

    j = 0
    while j < config.tick_cap:
        if net.alive_count == 0:
            break
        if net.idle:
            m.idle_terminated = True
            trace.idle_terminated = True
            break
        j += 1
        t = j * config.t0

        # intruder position at this capture instant
        if intruder is None and t >= config.first_intrusion_time:
            intruder = _spawn(config, irng, t)
        elif intruder is not None:
            if intruder.mobility == "adaptive":
                act = predicted_activity(observer, last_rec.active_ids if last_rec else [],
                                         last_rec.orders if last_rec else [], size)
                intruder.position = plan_adaptive_step(intruder.position, config.intruder_speed * config.t0,
                                                       poses, act, config.aov, config.sensing_range,
                                                       (config.width, config.height))
            else:
                reached = intruder_step(intruder, config.t0, config, irng)
                if reached:
                    m.outcomes.append(AttackOutcome(intruder.mobility, t - intruder.entry_time, True))
                    intruder = _spawn(config, irng, t)

        def sensed(node_id: int, tick: int, _t=t) -> int:
            present = intruder is not None and in_sector(poses[node_id], intruder.position, config.aov,
                                                         config.sensing_range)
            return sensor_reading(noise, tick, node_id, present)

        rec = network_tick(net, j, sensed)
        m.active_per_tick.append(len(rec.active_ids))
        if rec.active_ids:
            last_active_time = t

        if intruder is not None and detection_check(net, poses, intruder, rec.active_ids, config):
            stealth = t - intruder.entry_time
            m.stealth_time.append(t)
            m.stealth_value.append(stealth)
            rec.detections.append({"time": t, "stealth": stealth, "position": list(intruder.position)})
            m.outcomes.append(AttackOutcome(intruder.mobility, stealth, False))
            intruder = _spawn(config, irng, t)
        elif intruder is not None and intruder.mobility == "adaptive" and intruder.position[0] >= config.width:
            m.outcomes.append(AttackOutcome("adaptive", t - intruder.entry_time, True))
            intruder = _spawn(config, irng, t)

        while t >= next_snapshot:
            snapshot(next_snapshot, len(rec.active_ids))
            next_snapshot += SNAPSHOT_PERIOD
        if keep_trace:
            trace.ticks.append(rec)
        last_rec = rec

    trace.end_tick = j
    m.end_time = j * config.t0
    m.lifetime = last_active_time
    m.dropped_orders = net.dropped_total
    return trace, m


def run_seeds(config: FieldConfig, run_index: int) -> FieldConfig:
    """Config of the ``run_index``-th repetition; policies share seeds per index."""
    return config.replace(key_seed=config.key_seed + run_index, sim_seed=config.sim_seed + run_index)


def run_many(config: FieldConfig, runs: int, keep_trace: bool = False, observer: ObservedModel | None = None,
             processes: int = 1) -> list[tuple[RunTrace, MetricsSeries]]:
    cfgs = [run_seeds(config, i) for i in range(runs)]
    if processes > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=processes) as pool:
            return list(pool.map(_run_one, cfgs, [keep_trace] * runs, [observer] * runs))
    return [run_simulation(c, observer, keep_trace) for c in cfgs]


def _run_one(cfg, keep_trace, observer):
    return run_simulation(cfg, observer, keep_trace)


def aggregate(series: list[MetricsSeries]) -> dict[str, np.ndarray]:
    """Mean and standard deviation across runs on the common 10 s grid.

    Runs that ended early count as 0 % active with frozen batteries; stealth
    curves are forward-filled and excluded after a run ends.
    """
    n = max(len(s.snapshot_time) for s in series)
    grid = np.arange(n) * SNAPSHOT_PERIOD
    R = len(series)
    act = np.zeros((R, n))
    emean = np.zeros((R, n))
    estd = np.zeros((R, n))
    smean = np.full((R, n), np.nan)
    swin = np.full((R, n), np.nan)
    for r, s in enumerate(series):
        k = len(s.snapshot_time)
        act[r, :k] = s.active_pct
        emean[r, :k] = s.energy_mean
        emean[r, k:] = s.energy_mean[-1]
        estd[r, :k] = s.energy_std
        estd[r, k:] = s.energy_std[-1]
        if s.stealth_time:
            idx = np.searchsorted(np.asarray(s.stealth_time), grid[:k], side="right") - 1
            ok = idx >= 0
            rm = np.asarray(s.stealth_running_mean)
            wm = np.asarray(s.stealth_window_mean)
            smean[r, :k][ok] = rm[idx[ok]]
            swin[r, :k][ok] = wm[idx[ok]]

    def nanstats(a):
        with np.errstate(all="ignore"):
            cnt = np.sum(~np.isnan(a), axis=0)
            mean = np.where(cnt > 0, np.nansum(a, axis=0) / np.maximum(cnt, 1), np.nan)
            dev = np.where(np.isnan(a), 0.0, a - mean)
            std = np.where(cnt > 0, np.sqrt((dev ** 2).sum(axis=0) / np.maximum(cnt, 1)), np.nan)
        return mean, std

    out = {"time": grid}
    for name, arr in (("active_pct", act), ("energy_mean", emean), ("energy_std", estd)):
        out[name + "_mean"] = arr.mean(axis=0)
        out[name + "_std"] = arr.std(axis=0)
    for name, arr in (("stealth", smean), ("stealth_window", swin)):
        mu, sd = nanstats(arr)
        out[name + "_mean"] = mu
        out[name + "_std"] = sd
    return out
