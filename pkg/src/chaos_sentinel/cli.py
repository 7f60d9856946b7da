"""Command line front end: ``run``, ``verify`` and ``dump-bits``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .adversary import cka_experiment, prediction_hits, train_predictor
from .field_sim import FieldConfig, aggregate, run_many
from .primitives import CiGenerator, SecretKey
from .report import atomic_write, plot_comparison, write_aggregate, write_json, write_run_series
from .scheduler import Policy
from .stats import binomial_p_value

log = logging.getLogger("chaos_sentinel")

OUT_ENV = "CHAOS_SENTINEL_OUT"
PRESETS = {
    "paper": {},
    # a quick desk-sized variant: 16 nodes on a smaller field with short batteries
    "small": {"N": 4, "width": 40.0, "height": 40.0, "battery_init": 40},
}
ATTACK_MOBILITY = {"scanline": "scan_line", "random": "random_walk", "shortest": "shortest_path"}
CONFIG_FIELDS = {f.name for f in dataclasses.fields(FieldConfig)}


class UsageError(Exception):
    pass


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="chaos-sentinel", description=__doc__)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate the field and write CSV/NDJSON results")
    r.add_argument("--preset", choices=sorted(PRESETS), default="paper")
    r.add_argument("--config", type=Path, help="flat JSON document of FieldConfig fields (plus runs, policies)")
    r.add_argument("--policy", action="append", choices=["chaotic", "random", "uniform_random", "periodic"],
                   help="repeat to compare several policies (default: chaotic and random)")
    r.add_argument("--runs", type=int)
    r.add_argument("--key-seed", type=int)
    r.add_argument("--sim-seed", type=int)
    r.add_argument("--seed", type=int, help="sets both --key-seed and --sim-seed")
    r.add_argument("--out", type=Path, default=Path("results"))
    r.add_argument("--attack", choices=["none", "scanline", "random", "shortest", "observer", "cka"], default="none")
    r.add_argument("--nodes-exp", type=int, dest="N", metavar="N")
    r.add_argument("--sensing-range", type=float)
    r.add_argument("--t0", type=float)
    r.add_argument("--t-active", type=float)
    r.add_argument("--strategy-mode", choices=["subset", "index"])
    r.add_argument("--tick-cap", type=int)
    r.add_argument("--keys", type=int, default=100_000, help="secret keys drawn by --attack cka")
    r.add_argument("--no-plots", action="store_true")
    r.add_argument("--processes", type=int, default=1)

    v = sub.add_parser("verify", help="run the property and oracle checks")
    v.add_argument("--quick", action="store_true", help="smaller samples; a smoke test, not a verdict")
    v.add_argument("--processes", type=int, default=1)

    d = sub.add_parser("dump-bits", help="raw generator output on standard output")
    g = d.add_mutually_exclusive_group()
    g.add_argument("--key-seed", type=int, default=0)
    g.add_argument("--key", help="128-bit key as hex")
    d.add_argument("--count", type=int, default=1 << 20, help="number of bytes")
    d.add_argument("--node", type=int, default=0)
    return p


def resolve_config(args) -> tuple[FieldConfig, int, list[str]]:
    """Preset, then config file, then flags."""
    values = dict(PRESETS[args.preset])
    runs, policies = 10, ["chaotic", "uniform_random"]
    if args.config is not None:
        try:
            doc = json.loads(args.config.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(doc, dict):
            raise UsageError("config must be a flat JSON object")
        doc.pop("version", None)
        runs = doc.pop("runs", runs)
        policies = doc.pop("policies", policies)
        unknown = set(doc) - CONFIG_FIELDS
        if unknown:
            raise UsageError(f"unknown config fields: {sorted(unknown)}")
        values.update(doc)
    if args.seed is not None:
        values["key_seed"] = values["sim_seed"] = args.seed
    for name in ("key_seed", "sim_seed", "N", "sensing_range", "t0", "t_active", "strategy_mode", "tick_cap"):
        v = getattr(args, name)
        if v is not None:
            values[name] = v
    if args.attack in ATTACK_MOBILITY:
        values["mobility"] = ATTACK_MOBILITY[args.attack]
    if args.runs is not None:
        runs = args.runs
    if args.policy:
        policies = args.policy
    if runs < 1:
        raise UsageError("--runs must be >= 1")
    try:
        policies = list(dict.fromkeys(Policy.parse(p).value for p in policies))
        config = FieldConfig(**values)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid configuration: {exc}") from exc
    return config, runs, policies


def _check_writable(out: Path) -> None:
    try:
        out.mkdir(parents=True, exist_ok=True)
        with tempfile.NamedTemporaryFile(dir=out):
            pass
    except OSError as exc:
        raise OSError(f"output directory {out} is not writable: {exc}") from exc


def _attack_blind(results: dict, kind: str) -> dict:
    out = {}
    for policy, pairs in results.items():
        outcomes = [o for _, m in pairs for o in m.outcomes]
        caught = [o.stealth_time for o in outcomes if not o.reached_target]
        out[policy] = {
            "attempts": len(outcomes),
            "detected": len(caught),
            "reached_target": len(outcomes) - len(caught),
            "mean_time_to_detection_s": float(np.mean(caught)) if caught else None,
        }
    return {"experiment": f"blind_{kind}", "results": out}


def _attack_observer(results: dict) -> dict:
    """Train on the first half of the first run's trace, score the second half."""
    out = {}
    for policy, pairs in results.items():
        trace = pairs[0][0]
        window = max(1, trace.end_tick // 2)
        model = train_predictor(trace, window)
        hits, n = prediction_hits(model, trace, start=window + 1)
        chance = 1 / (1 << trace.config["N"])
        out[policy] = {
            "training_ticks": window,
            "holdout_events": n,
            "accuracy": hits / n if n else None,
            "chance": chance,
            "p_vs_chance": binomial_p_value(hits, n, chance) if n else None,
        }
    return {"experiment": "observer", "results": out}


def _attack_cka(policies: list[str], N: int, keys: int) -> list[dict]:
    reports = []
    for policy in policies:
        reports += [r.to_dict() for r in cka_experiment(N, keys, (1, 2, 4, 8), policy)]
    return reports


def cmd_run(args) -> int:
    config, runs, policies = resolve_config(args)
    out = Path(os.environ.get(OUT_ENV) or args.out)
    _check_writable(out)
    results, aggregates, summary = {}, {}, {"config": config.to_dict(), "runs": runs, "policies": {}}
    for policy in policies:
        cfg = config.replace(policy=policy)
        log.info("running %d x %s", runs, policy)
        pairs = run_many(cfg, runs, keep_trace=True, processes=args.processes)
        results[policy] = pairs
        pdir = out / policy
        for i, (trace, m) in enumerate(pairs):
            stem = f"run_{i:02d}"
            write_run_series(pdir, stem, m, trace.config)
            atomic_write(pdir / f"{stem}.ndjson", trace.to_ndjson())
        agg = aggregate([m for _, m in pairs])
        aggregates[policy] = agg
        write_aggregate(pdir, agg, cfg.to_dict())
        ms = [m for _, m in pairs]
        summary["policies"][policy] = {
            "mean_stealth_s": float(np.mean([m.mean_stealth for m in ms])),
            "mean_lifetime_s": float(np.mean([m.lifetime for m in ms])),
            "mean_time_to_half_active_s": float(np.mean([m.time_to_half_active() for m in ms])),
            "idle_terminated_runs": sum(m.idle_terminated for m in ms),
            "dropped_orders": sum(m.dropped_orders for m in ms),
        }
    write_json(out / "summary.json", summary)

    if args.attack in ATTACK_MOBILITY:
        write_json(out / f"attack_{args.attack}.json", _attack_blind(results, args.attack))
    elif args.attack == "observer":
        write_json(out / "attack_observer.json", _attack_observer(results))
    elif args.attack == "cka":
        N = args.N if args.N is not None else 2
        try:
            reports = _attack_cka(policies, N, args.keys)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        write_json(out / "attack_cka.json", reports)

    if not args.no_plots:
        plot_comparison(out, aggregates)

    for policy, s in summary["policies"].items():
        print(f"{policy:15s} stealth {s['mean_stealth_s']:8.1f} s  lifetime {s['mean_lifetime_s']:9.1f} s  "
              f"half-active {s['mean_time_to_half_active_s']:7.1f} s")
    print(f"results in {out}")
    return 0


def cmd_verify(args) -> int:
    from .verification import run_all

    results = run_all(quick=args.quick, processes=args.processes)
    for r in results:
        print(r.line())
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 0 if failed == 0 else 1


def cmd_dump_bits(args) -> int:
    if args.count < 0:
        raise UsageError("--count must be >= 0")
    try:
        key = SecretKey(int(args.key, 16)) if args.key else SecretKey.from_seed(args.key_seed)
    except ValueError as exc:
        raise UsageError(f"invalid key: {exc}") from exc
    gen = CiGenerator.from_key(key, args.node)
    sink = sys.stdout.buffer
    left = args.count
    chunk = 1 << 16
    while left > 0:
        n = min(chunk, left)
        words = (n + 7) // 8
        data = b"".join(gen.next_word().to_bytes(8, "little") for _ in range(words))
        sink.write(data[:n])
        left -= n
    sink.flush()
    return 0


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    handlers = {"run": cmd_run, "verify": cmd_verify, "dump-bits": cmd_dump_bits}
    try:
        return handlers[args.command](args)
    except UsageError as exc:
        print(f"chaos-sentinel: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"chaos-sentinel: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
