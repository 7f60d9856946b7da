"""Property and oracle checks behind ``chaos-sentinel verify`` and the acceptance tests."""

from __future__ import annotations

import filecmp
import math
import random
import tempfile
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .adversary import cka_experiment, predict_accuracy, prediction_hits, train_predictor
from .chaos_metrics import PhasePoint, de_distance, distance, distance_exact, ds_fraction
from .ci_core import BitState
from .field_sim import FieldConfig, MetricsSeries, aggregate, run_many
from .primitives import SecretKey, ci_hash
from .scheduler import GlobalCI, Policy, initialize_network, network_tick, run_network
from .stats import binomial_p_value, chi_square_uniform


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    values: dict = field(default_factory=dict)

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


# (tick, active ids, orders, resets, global state) for key seed 2026, N=2, r=2,
# activation 0.5, subset strategies, chaotic selection, default sensed values
SMALL_ORACLE = dict(key_seed=2026, N=2, r=2, ticks=10)
SMALL_ORACLE_TRACE = (
    (1, (0, 1, 2, 3), (), (), 106),
    (2, (0, 1, 2, 3), ((0, 3), (1, 1), (2, 0), (3, 3)), (), 199),
    (3, (0, 1, 3), (), (0, 1, 3), 4),
    (4, (0, 1, 3), ((0, 1), (1, 2)), (), 9),
    (5, (1, 2, 3), (), (1, 2), 33),
    (6, (1, 2, 3), ((1, 3), (2, 3), (3, 2)), (), 189),
    (7, (2, 3), (), (2, 3), 77),
    (8, (2, 3), ((2, 2),), (), 109),
    (9, (2, 3), (), (2,), 141),
    (10, (2, 3), ((2, 2), (3, 3)), (), 237),
)


# -- criteria 1-3: default field preset, chaotic vs uniform random ---------

@dataclass
class PolicyComparison:
    series: dict[str, list[MetricsSeries]]
    aggregates: dict[str, dict]
    elapsed: float


def compare_policies(config: FieldConfig | None = None, runs: int = 10, processes: int = 1) -> PolicyComparison:
    config = config or FieldConfig()
    t = time.perf_counter()
    series = {}
    for pol in ("chaotic", "uniform_random"):
        series[pol] = [m for _, m in run_many(config.replace(policy=pol), runs, processes=processes)]
    elapsed = time.perf_counter() - t
    return PolicyComparison(series, {p: aggregate(s) for p, s in series.items()}, elapsed)


def _ratio(a: float, b: float) -> float:
    return a / b if b else math.inf


def check_policy_parity(cmp: PolicyComparison, tolerance: float = 0.15, max_seconds: float = 300.0) -> CheckResult:
    c = float(np.mean([m.mean_stealth for m in cmp.series["chaotic"]]))
    r = float(np.mean([m.mean_stealth for m in cmp.series["uniform_random"]]))
    ratio = _ratio(c, r)
    ok = abs(ratio - 1) <= tolerance and cmp.elapsed < max_seconds
    return CheckResult("C1 policy parity (stealth time)", ok,
                       f"chaotic {c:.1f}s vs random {r:.1f}s, ratio {ratio:.3f} (tol ±{tolerance:.0%}), "
                       f"runtime {cmp.elapsed:.1f}s (< {max_seconds:.0f}s)",
                       {"chaotic": c, "random": r, "ratio": ratio, "elapsed": cmp.elapsed})


def tail_blocks_non_increasing(curve, fraction: float = 0.2, blocks: int = 4) -> bool:
    """Mean of each consecutive block over the final ``fraction`` never rises."""
    curve = np.asarray(curve, dtype=float)
    n = len(curve)
    tail = curve[n - max(blocks, int(math.ceil(fraction * n))):]
    means = [b.mean() for b in np.array_split(tail, blocks)]
    return all(means[i + 1] <= means[i] + 1e-12 for i in range(len(means) - 1))


def check_lifetime_parity(cmp: PolicyComparison, tolerance: float = 0.10) -> CheckResult:
    half = {p: float(np.mean([m.time_to_half_active() for m in s])) for p, s in cmp.series.items()}
    life = {p: float(np.mean([m.lifetime for m in s])) for p, s in cmp.series.items()}
    rh = _ratio(half["chaotic"], half["uniform_random"])
    rl = _ratio(life["chaotic"], life["uniform_random"])
    mono = {p: tail_blocks_non_increasing(a["active_pct_mean"]) for p, a in cmp.aggregates.items()}
    ok = abs(rh - 1) <= tolerance and abs(rl - 1) <= tolerance and all(mono.values())
    return CheckResult("C2 lifetime parity", ok,
                       f"time-to-half ratio {rh:.3f}, lifetime ratio {rl:.3f} (tol ±{tolerance:.0%}); "
                       f"tail monotone {mono}",
                       {"half": half, "lifetime": life, "half_ratio": rh, "life_ratio": rl, "monotone": mono})


def check_energy_dispersion(cmp: PolicyComparison, min_fraction: float = 0.60) -> CheckResult:
    c = cmp.aggregates["chaotic"]["energy_std_mean"]
    r = cmp.aggregates["uniform_random"]["energy_std_mean"]
    n = min(len(c), len(r))
    frac = float(np.mean(c[:n] <= r[:n]))
    return CheckResult("C3 energy dispersion", frac >= min_fraction,
                       f"chaotic std <= random std at {frac:.1%} of {n} snapshots (need >= {min_fraction:.0%})",
                       {"fraction": frac, "snapshots": n})


# -- criterion 4: chosen key attack -----------------------------------------

def check_cka(keys: int = 100_000, horizons=(1, 2, 4, 8), alpha: float = 0.01, negative_p: float = 1e-6,
              max_seconds: float = 60.0, key_seed: int = 0) -> CheckResult:
    t = time.perf_counter()
    chaotic = cka_experiment(2, keys, horizons, Policy.CHAOTIC, key_seed=key_seed, mode="exhaustive", alpha=alpha)
    periodic = cka_experiment(2, keys, horizons, Policy.PERIODIC, key_seed=key_seed, mode="exhaustive", alpha=alpha)
    elapsed = time.perf_counter() - t
    pc = {r.params["horizon"]: r.p_value for r in chaotic}
    pp = {r.params["horizon"]: r.p_value for r in periodic}
    ok = all(p > alpha for p in pc.values()) and all(p < negative_p for p in pp.values()) and elapsed < max_seconds
    return CheckResult("C4 CKA uniformity", ok,
                       "chaotic p " + ", ".join(f"h{h}={p:.3g}" for h, p in pc.items())
                       + f" (> {alpha}); periodic max p {max(pp.values()):.3g} (< {negative_p:g}); "
                       f"runtime {elapsed:.1f}s (< {max_seconds:.0f}s)",
                       {"chaotic": pc, "periodic": pp, "elapsed": elapsed})


# -- criterion 5: coverage --------------------------------------------------

def chaotic_selections(count: int, N: int = 7, ticks_per_key: int = 40, key_seed: int = 5) -> np.ndarray:
    """Wake targets chosen by chaotic nodes, pooled over fresh uniform keys."""
    rng = random.Random(key_seed)
    out: list[int] = []
    while len(out) < count:
        net = initialize_network(SecretKey(rng.getrandbits(128)), N, 0.5, battery=10**9)
        for j in range(1, ticks_per_key + 1):
            out.extend(t for _, t in network_tick(net, j).orders)
    return np.asarray(out[:count])


def check_coverage(count: int = 100_000, alpha: float = 0.01) -> CheckResult:
    sel = chaotic_selections(count)
    res = chi_square_uniform(np.bincount(sel, minlength=128))
    return CheckResult("C5 coverage uniformity", res.p_value > alpha,
                       f"{count} selections, chi2={res.statistic:.1f} dof={res.dof} p={res.p_value:.3g} (> {alpha})",
                       {"p_value": res.p_value, "statistic": res.statistic})


# -- criterion 6: avalanche -------------------------------------------------

def avalanche_trials(trials: int = 10_000, seed: int = 11, max_len: int = 64):
    rng = random.Random(seed)
    dist = np.empty(trials)
    per_bit = np.zeros(64)
    for n in range(trials):
        msg = bytearray(rng.randbytes(rng.randint(1, max_len)))
        d0 = ci_hash(bytes(msg))
        pos = rng.randrange(len(msg) * 8)
        msg[pos // 8] ^= 1 << (pos % 8)
        x = d0 ^ ci_hash(bytes(msg))
        dist[n] = x.bit_count()
        per_bit += [(x >> k) & 1 for k in range(64)]
    return dist, per_bit / trials


def check_avalanche(trials: int = 10_000, mean_tol: float = 1.5, bit_lo: float = 0.45, bit_hi: float = 0.55) -> CheckResult:
    dist, per_bit = avalanche_trials(trials)
    mean = float(dist.mean())
    ok = abs(mean - 32) <= mean_tol and per_bit.min() >= bit_lo and per_bit.max() <= bit_hi
    return CheckResult("C6 avalanche", ok,
                       f"mean distance {mean:.2f} (32 ± {mean_tol}); per-bit flip rate "
                       f"[{per_bit.min():.3f}, {per_bit.max():.3f}] within [{bit_lo}, {bit_hi}]",
                       {"mean": mean, "bit_min": float(per_bit.min()), "bit_max": float(per_bit.max())})


# -- criterion 7: observer --------------------------------------------------

def observer_run(policy, window: int = 2000, holdout_events: int = 10_000, N: int = 7, key_seed: int = 3):
    """Train on ticks [1, window], then extend the run until ``holdout_events`` orders follow it."""
    net = initialize_network(SecretKey.from_seed(key_seed), N, 0.5, battery=10**9, policy=policy)
    trace = run_network(net, window, stop_when_idle=False)
    model = train_predictor(trace, window)
    hits = n = 0
    j = window
    while n < holdout_events:
        j += 1
        rec = network_tick(net, j)
        h, k = prediction_hits(model, rec.orders)
        hits += h
        n += k
    return model, hits, n


def check_observer(bound_slack: float = 0.02, holdout_events: int = 10_000, alpha: float = 0.01) -> CheckResult:
    _, hc, nc = observer_run(Policy.CHAOTIC, holdout_events=holdout_events)
    _, hp, np_ = observer_run(Policy.PERIODIC, holdout_events=holdout_events)
    acc_c, acc_p = hc / nc, hp / np_
    chance = 1 / 128
    p_chance = binomial_p_value(hc, nc, chance)
    ok = acc_c <= chance + bound_slack and acc_p == 1.0
    return CheckResult("C7 unpredictability", ok,
                       f"chaotic top-1 {acc_c:.4f} over {nc} events (<= {chance + bound_slack:.4f}; "
                       f"vs chance p={p_chance:.3g}); periodic {acc_p:.3f} over {np_} events (== 1.0)",
                       {"chaotic": acc_c, "periodic": acc_p, "events": nc, "p_vs_chance": p_chance})


# -- criterion 8: metric ----------------------------------------------------

def check_metric(pairs: int = 10_000, triples: int = 10_000, max_k: int = 12, seed: int = 8,
                 K: int = 64) -> CheckResult:
    rng = random.Random(seed)

    def point(L, base=None, share=0):
        if base is None:
            s = [rng.randrange(L) for _ in range(K)]
        else:
            s = list(base[:share]) + [rng.randrange(L) for _ in range(K - share)]
        return PhasePoint(tuple(s), BitState(rng.getrandbits(L), L))

    floor_bad = 0
    for _ in range(pairs):
        L = rng.randint(2, 16)
        p = point(L)
        q = point(L, p.strategy_prefix, rng.randint(0, K))
        if math.floor(distance(p, q)) != de_distance(p.state, q.state):
            floor_bad += 1

    # the prefix equivalence needs every single-unit difference to weigh at
    # least 10^-k, i.e. 9 / L >= 1
    prefix_bad = 0
    for _ in range(pairs):
        L = rng.randint(2, 9)
        p = point(L)
        q = point(L, p.strategy_prefix, rng.randint(0, max_k + 1))
        ds = ds_fraction(p.strategy_prefix, q.strategy_prefix, L)
        for k in range(1, max_k + 1):
            equal = p.strategy_prefix[:k] == q.strategy_prefix[:k]
            if (ds < Fraction(1, 10**k)) != equal:
                prefix_bad += 1

    axiom_bad = 0
    for _ in range(triples):
        L = rng.randint(2, 16)
        a = point(L)
        b = point(L, a.strategy_prefix, rng.randint(0, K))
        c = point(L, b.strategy_prefix, rng.randint(0, K))
        dab, dba = distance_exact(a, b), distance_exact(b, a)
        dbc, dac = distance_exact(b, c), distance_exact(a, c)
        if dab != dba or dab < 0 or distance_exact(a, a) != 0:
            axiom_bad += 1
        if (dab == 0) != (a == b):
            axiom_bad += 1
        if dac > dab + dbc:
            axiom_bad += 1
    ok = floor_bad == prefix_bad == axiom_bad == 0
    return CheckResult("C8 metric properties", ok,
                       f"floor violations {floor_bad}/{pairs}, prefix violations {prefix_bad} "
                       f"(k <= {max_k}, L <= 9), axiom violations {axiom_bad}/{triples}",
                       {"floor": floor_bad, "prefix": prefix_bad, "axioms": axiom_bad})


# -- criterion 9: small instance --------------------------------------------

def small_instance_trace():
    cfg = SMALL_ORACLE
    net = initialize_network(SecretKey.from_seed(cfg["key_seed"]), cfg["N"], 0.5, r=cfg["r"])
    glob = GlobalCI.from_network(net)
    rows, lockstep_ok = [], True
    for j in range(1, cfg["ticks"] + 1):
        rec = network_tick(net, j)
        if glob.apply(rec) != net.global_state():
            lockstep_ok = False
        rows.append((j, tuple(rec.active_ids), tuple(rec.orders), tuple(rec.resets), net.global_state().value))
    return tuple(rows), lockstep_ok


def check_small_instance(expected=SMALL_ORACLE_TRACE) -> CheckResult:
    rows, lockstep = small_instance_trace()
    mismatch = [r[0] for r, e in zip(rows, expected) if r != e]
    ok = rows == tuple(expected) and lockstep
    return CheckResult("C9 small-instance oracle", ok,
                       f"{len(rows)} ticks, mismatching ticks {mismatch or 'none'}, global-CI lockstep "
                       f"{'agrees' if lockstep else 'DISAGREES'}",
                       {"mismatch": mismatch, "lockstep": lockstep})


# -- criterion 10: determinism ----------------------------------------------

def check_determinism(args=("run", "--runs", "1", "--key-seed", "42", "--sim-seed", "42", "--no-plots")) -> CheckResult:
    from .cli import main

    with tempfile.TemporaryDirectory() as tmp:
        a, b = Path(tmp) / "a", Path(tmp) / "b"
        main([*args, "--out", str(a)])
        main([*args, "--out", str(b)])
        files = sorted(p.relative_to(a) for p in a.rglob("*") if p.suffix in (".csv", ".ndjson"))
        other = sorted(p.relative_to(b) for p in b.rglob("*") if p.suffix in (".csv", ".ndjson"))
        same = files == other and all(filecmp.cmp(a / f, b / f, shallow=False) for f in files)
    return CheckResult("C10 determinism", same and bool(files),
                       f"{len(files)} CSV/NDJSON files compared byte for byte: {'identical' if same else 'DIFFER'}",
                       {"files": len(files)})


def run_all(quick: bool = False, processes: int = 1) -> list[CheckResult]:
    """Every check at acceptance size, or at reduced sample sizes with ``quick``.

    Quick sizes keep the tolerances but lose statistical power, so a quick
    pass is a smoke test only.
    """
    n = 2_000 if quick else 10_000
    results = [
        check_metric(pairs=n, triples=n),
        check_avalanche(trials=n),
        check_small_instance(),
        check_coverage(count=20_000 if quick else 100_000),
        check_observer(holdout_events=n),
        check_cka(keys=5_000 if quick else 100_000),
    ]
    cmp = compare_policies(runs=10, processes=processes)
    results += [check_policy_parity(cmp), check_lifetime_parity(cmp), check_energy_dispersion(cmp)]
    results.append(check_determinism())
    return results
