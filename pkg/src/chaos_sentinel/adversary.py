"""Desk-testable threat models: blind paths, an observing predictor, and the
chosen-key uniformity experiment."""

from __future__ import annotations

import json
import math
import random
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .geometry import SensorPose, in_sector
from .primitives import SecretKey
from .scheduler import Policy, RunTrace, StrategyMode, initialize_network, network_tick
from .stats import SIGNIFICANCE, chi_square_uniform
from scipy import stats as _st

ARRIVAL_RADIUS = 1.0


@dataclass
class AttackOutcome:
    attack_kind: str
    stealth_time: float
    reached_target: bool
    predictor_accuracy: float | None = None

    def __post_init__(self):
        if self.predictor_accuracy is not None and not 0.0 <= self.predictor_accuracy <= 1.0:
            raise ValueError("accuracy must lie in [0, 1]")


def _reflect(v: float, hi: float) -> float:
    if hi <= 0:
        return 0.0
    period = 2 * hi
    v = v % period
    return period - v if v > hi else v


def blind_path(kind: str, start: tuple[float, float], target: tuple[float, float], speed: float, *,
               dt: float = 1.0, bounds: tuple[float, float] = (75.0, 75.0),
               rng: np.random.Generator | None = None, max_steps: int | None = None
               ) -> Iterator[tuple[float, tuple[float, float]]]:
    """Yield ``(time, position)`` waypoints every ``dt`` until the target is reached.

    The last waypoint is the target itself, stamped with the exact arrival time.
    """
    if kind not in ("random_walk", "shortest_path"):
        raise ValueError(f"unknown blind path kind {kind!r}")
    x, y = start
    tx, ty = target
    t = 0.0
    dist = math.hypot(tx - x, ty - y)
    if dist <= (ARRIVAL_RADIUS if kind == "random_walk" else 0.0):
        yield 0.0, (tx, ty)
        return
    step = speed * dt
    rng = rng if rng is not None else np.random.default_rng(0)
    n = 0
    while max_steps is None or n < max_steps:
        n += 1
        dist = math.hypot(tx - x, ty - y)
        if step > 0 and dist <= step:
            yield t + dist / speed, (tx, ty)
            return
        if kind == "shortest_path":
            if step > 0:
                x += (tx - x) / dist * step
                y += (ty - y) / dist * step
        else:
            theta = rng.uniform(0.0, 2 * math.pi)
            x = _reflect(x + step * math.cos(theta), bounds[0])
            y = _reflect(y + step * math.sin(theta), bounds[1])
        t += dt
        if kind == "random_walk" and math.hypot(tx - x, ty - y) <= ARRIVAL_RADIUS:
            yield t, (x, y)
            return
        yield t, (x, y)


@dataclass
class ObservedModel:
    """First-order model: sender id -> empirical distribution of wake targets."""

    transitions: dict[int, Counter] = field(default_factory=lambda: defaultdict(Counter))
    marginal: Counter = field(default_factory=Counter)
    window: int = 0

    def distribution(self, sender: int) -> dict[int, float]:
        c = self.transitions.get(sender) or self.marginal
        total = sum(c.values())
        return {k: v / total for k, v in sorted(c.items())} if total else {}

    def predict(self, sender: int) -> int | None:
        c = self.transitions.get(sender)
        if not c:
            c = self.marginal
        if not c:
            return None
        # deterministic tie-break: highest count, then smallest id
        return min(c.items(), key=lambda kv: (-kv[1], kv[0]))[0]

    def max_probability(self, sender: int) -> float:
        d = self.distribution(sender)
        return max(d.values()) if d else 0.0


def train_predictor(trace: RunTrace, window: int) -> ObservedModel:
    """Tabulate the orders seen during ticks [1, window]."""
    if window <= 0:
        raise ValueError("training window must be positive")
    if trace.ticks and window > trace.ticks[-1].tick:
        raise ValueError("training window longer than the trace")
    model = ObservedModel(window=window)
    for sender, target in trace.orders(stop=window + 1):
        model.transitions[sender][target] += 1
        model.marginal[target] += 1
    if not model.marginal:
        raise ValueError("no wake-up orders inside the training window")
    model.transitions = dict(model.transitions)
    return model


def prediction_hits(model: ObservedModel, holdout: RunTrace | Sequence[tuple[int, int]], start: int = 0) -> tuple[int, int]:
    events = holdout.orders(start=start) if isinstance(holdout, RunTrace) else list(holdout)
    hits = sum(1 for s, t in events if model.predict(s) == t)
    return hits, len(events)


def predict_accuracy(model: ObservedModel, holdout: RunTrace | Sequence[tuple[int, int]], start: int | None = None) -> float:
    """Top-1 accuracy over holdout orders; for a trace, ticks after the training window."""
    if start is None:
        start = model.window + 1
    hits, n = prediction_hits(model, holdout, start)
    if n == 0:
        raise ValueError("holdout contains no wake-up orders")
    return hits / n


# -- chosen key attack ------------------------------------------------------

@dataclass
class UniformityReport:
    experiment: str
    params: dict
    statistic: float
    dof: int
    p_value: float
    verdict: str

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "params": self.params,
            "statistic": self.statistic,
            "dof": self.dof,
            "p_value": self.p_value,
            "verdict": self.verdict,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def collect_observables(N: int, keys: int, horizons: Sequence[int], policy: Policy | str = Policy.CHAOTIC,
                        key_seed: int = 0, mode: StrategyMode | str = StrategyMode.SUBSET) -> dict[int, np.ndarray]:
    """Global observable X^h for ``keys`` uniform secret keys at each horizon h.

    Every node starts awake with a listening time covering the largest
    horizon, so the run is a pure global chaotic iteration from the
    key-derived initial state.
    """
    horizons = sorted(set(horizons))
    hmax = max(horizons)
    rng = random.Random(key_seed)
    out = {h: np.empty(keys, dtype=np.int64) for h in horizons}
    for n in range(keys):
        key = SecretKey(rng.getrandbits(128))
        net = initialize_network(key, N, 1.0, r=max(hmax, 1), policy=policy, mode=mode)
        if 0 in out:
            out[0][n] = net.observable()
        for j in range(1, hmax + 1):
            network_tick(net, j)
            if j in out:
                out[j][n] = net.observable()
    return out


def _exhaustive_report(obs: np.ndarray, n_bits: int, params: dict, alpha: float) -> UniformityReport:
    counts = np.bincount(obs, minlength=1 << n_bits)
    res = chi_square_uniform(counts)
    return UniformityReport("cka", params, res.statistic, res.dof, res.p_value,
                            "pass" if res.p_value > alpha else "fail")


def _marginal_report(obs: np.ndarray, n_bits: int, params: dict, alpha: float) -> UniformityReport:
    n = obs.size
    bits = ((obs[:, None] >> np.arange(n_bits)) & 1).astype(float)
    ones = bits.sum(axis=0)
    z2 = ((2 * ones - n) ** 2 / n).sum()
    p_bits = float(_st.chi2.sf(z2, n_bits))
    centred = bits - bits.mean(axis=0)
    sd = centred.std(axis=0)
    sd[sd == 0] = np.inf
    corr = (centred.T @ centred) / n / np.outer(sd, sd)
    iu = np.triu_indices(n_bits, 1)
    max_corr = float(np.abs(corr[iu]).max()) if iu[0].size else 0.0
    # Bonferroni bound on pairwise correlations, normal approximation
    npairs = max(1, iu[0].size)
    corr_bound = float(_st.norm.isf(alpha / (2 * npairs)) / math.sqrt(n))
    params = dict(params, max_abs_pair_correlation=max_corr, correlation_bound=corr_bound)
    ok = p_bits > alpha and max_corr <= corr_bound
    return UniformityReport("cka", params, float(z2), n_bits, p_bits, "pass" if ok else "fail")


def cka_experiment(N: int, keys: int, horizons: Sequence[int] = (1, 2, 4, 8), policy: Policy | str = Policy.CHAOTIC,
                   key_seed: int = 0, mode: str | None = None, alpha: float = SIGNIFICANCE,
                   strategy_mode: StrategyMode | str = StrategyMode.SUBSET) -> list[UniformityReport]:
    """Is the observable global state distributed independently of the key?

    ``mode`` is ``"exhaustive"`` (chi-square over every global state, needs
    N * 2^N <= 8) or ``"marginal"`` (per-bit frequencies and pairwise
    correlations). Defaults to exhaustive when it is feasible.
    """
    n_bits = N * (1 << N)
    if mode is None:
        mode = "exhaustive" if n_bits <= 8 else "marginal"
    if mode == "exhaustive":
        if n_bits > 8:
            raise ValueError("exhaustive mode needs N * 2^N <= 8 (N <= 2)")
        cells = 1 << n_bits
        if keys < 5 * cells:
            raise ValueError(f"{keys} keys give fewer than 5 expected per cell; use at least {5 * cells}")
    elif mode != "marginal":
        raise ValueError(f"unknown mode {mode!r}")
    policy = Policy.parse(policy)
    obs = collect_observables(N, keys, horizons, policy, key_seed, strategy_mode)
    reports = []
    for h in sorted(obs):
        params = {"N": N, "keys": keys, "horizon": h, "policy": policy.value, "mode": mode,
                  "alpha": alpha, "key_seed": key_seed}
        if mode == "exhaustive":
            reports.append(_exhaustive_report(obs[h], n_bits, params, alpha))
        else:
            reports.append(_marginal_report(obs[h], n_bits, params, alpha))
    return reports


# -- adaptive intruder -------------------------------------------------------

def predicted_activity(model: ObservedModel, active_ids: Sequence[int], orders: Sequence[tuple[int, int]],
                       size: int) -> np.ndarray:
    """Probability that each node is awake next tick, as the observer sees it."""
    p = np.zeros(size)
    senders = {s for s, _ in orders}
    for i in active_ids:
        if i not in senders:
            p[i] = 1.0
    for s in senders:
        for k, q in model.distribution(s).items():
            p[k] = min(1.0, p[k] + q)
    return p


def plan_adaptive_step(position: tuple[float, float], reach: float, poses: Sequence[SensorPose],
                       activity: np.ndarray, aov: float, sensing_range: float, bounds: tuple[float, float],
                       grid: float = 5.0) -> tuple[float, float]:
    """Pick the reachable grid point with the lowest predicted coverage,
    preferring progress to the right."""
    x0, y0 = position
    w, h = bounds
    cand = []
    nx = int(math.floor(reach / grid))
    for i in range(-nx, nx + 1):
        for j in range(-nx, nx + 1):
            dx, dy = i * grid, j * grid
            if dx * dx + dy * dy > reach * reach + 1e-9:
                continue
            x = min(max(x0 + dx, 0.0), w)
            y = min(max(y0 + dy, 0.0), h)
            cand.append((x, y))
    if not cand:
        cand = [(min(x0 + reach, w), y0)]
    hot = [k for k in np.flatnonzero(activity)]

    def score(pt):
        cover = sum(activity[k] for k in hot if in_sector(poses[k], pt, aov, sensing_range))
        return (round(cover, 12), -pt[0], abs(pt[1] - y0))

    return min(cand, key=score)
