"""Command-line harness: scenarios, the Monte Carlo experiment and trace replay."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from pathlib import Path
from typing import Iterator, List, Optional

from .config import PlannerConfig
from .montecarlo import BUCKETS, MC_EGO_SPEED, run_monte_carlo
from .sim.episode import run_episode
from .sim.scenario import ScenarioError, builtin_scenarios, load_scenario

OUTPUT_ENV = "DGAP_OUTPUT_DIR"
log = logging.getLogger("dgap")


def output_dir(explicit: Optional[str] = None) -> Path:
    return Path(explicit or os.environ.get(OUTPUT_ENV) or "dgap_output")


def _config(path: Optional[str]) -> PlannerConfig:
    return PlannerConfig.from_file(path) if path else PlannerConfig()


def _resolve_scenario(ref: str):
    table = builtin_scenarios()
    if not Path(ref).exists() and ref in table:
        return load_scenario(table[ref])
    return load_scenario(ref)


def cmd_run_scenario(args) -> int:
    try:
        scenario = _resolve_scenario(args.file)
        cfg = _config(args.config)
    except (ScenarioError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.social_weight is not None:
        cfg = cfg.replace(social_weight=args.social_weight)
    result = run_episode(scenario, cfg, seed=args.seed)
    paths = result.write(output_dir(args.out))
    idle = result.idle_intervals()
    print(result.outcome)
    log.info("collisions=%d time=%.2f idle_intervals=%d summary=%s", result.collisions, result.time,
             len(idle), paths["summary"])
    return 0


def cmd_monte_carlo(args) -> int:
    try:
        cfg = _config(args.config)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.trials < 1:
        print("error: --trials must be at least 1", file=sys.stderr)
        return 2
    result = run_monte_carlo(args.trials, args.seed, cfg)
    paths = result.write(output_dir(args.out))
    print(json.dumps({k: result.tally[k] for k in BUCKETS}))
    log.info("fractions=%s log=%s", result.fractions(), paths["log"])
    return 0


def _read_jsonl(path: Path) -> List[dict]:
    if not path.exists():
        return []
    return [json.loads(line) for line in path.read_text().splitlines() if line.strip()]


def replay_records(trace_path) -> Iterator[dict]:
    """Frame-indexed geometry for a scenario trace (CSV) or a Monte Carlo trial log (JSONL)."""
    path = Path(trace_path)
    if not path.exists():
        raise FileNotFoundError(path)
    if path.suffix == ".jsonl":
        for rec in _read_jsonl(path):
            yield _trial_geometry(rec)
        return
    plans = _read_jsonl(path.with_name(path.name.replace("_trace.csv", "_plans.jsonl")))
    k = -1
    with path.open(newline="") as fh:
        for frame, row in enumerate(csv.DictReader(fh)):
            t = float(row["t"])
            while k + 1 < len(plans) and plans[k + 1]["t"] <= t + 1e-9:
                k += 1
            plan = plans[k] if k >= 0 else None
            yield {"frame": frame, "row": row, "plan_index": k,
                   "gaps": plan["gaps"] if plan else [], "tubes": plan["tubes"] if plan else [],
                   "trajectory": plan["trajectory"] if plan else None}


def _trial_geometry(rec: dict) -> dict:
    s = rec["sample"]
    out = {"trial": rec["trial"], "outcome": rec["outcome"],
           "gap": [[s["r_r"] * math.cos(s["beta_r"]), s["r_r"] * math.sin(s["beta_r"])],
                   [s["r_l"] * math.cos(s["beta_l"]), s["r_l"] * math.sin(s["beta_l"])]],
           "rollout": None}
    if rec.get("t_intercept") is not None:
        t, h = rec["t_intercept"], rec["heading"]
        out["rollout"] = [[0.0, 0.0], [MC_EGO_SPEED * t * math.cos(h), MC_EGO_SPEED * t * math.sin(h)]]
    return out


def cmd_replay(args) -> int:
    try:
        records = list(replay_records(args.trace))
    except FileNotFoundError:
        print(f"error: trace not found: {args.trace}", file=sys.stderr)
        return 2
    except (json.JSONDecodeError, KeyError, ValueError) as exc:
        print(f"error: unreadable trace: {exc}", file=sys.stderr)
        return 2
    sink = open(args.dump, "w") if args.dump else sys.stdout
    try:
        for rec in records:
            sink.write(json.dumps(rec) + "\n")
    except BrokenPipeError:
        # downstream reader closed early (e.g. piped into head)
        sys.stderr.close()
    finally:
        if args.dump:
            sink.close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dgap", description="Dynamic gap planner harness")
    p.add_argument("--config", help="YAML/JSON file overriding planner defaults")
    p.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or ./dgap_output)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    rs = sub.add_parser("run-scenario", help="run one scenario episode")
    rs.add_argument("file", help="scenario YAML path or built-in name")
    rs.add_argument("--seed", type=int, default=0)
    rs.add_argument("--social-weight", type=float, default=None)
    rs.set_defaults(func=cmd_run_scenario)

    mc = sub.add_parser("monte-carlo", help="randomized single-gap passage trials")
    mc.add_argument("--trials", type=int, default=10_000)
    mc.add_argument("--seed", type=int, default=0)
    mc.set_defaults(func=cmd_monte_carlo)

    rp = sub.add_parser("replay", help="dump per-frame geometry from a trace or trial log")
    rp.add_argument("trace")
    rp.add_argument("-o", "--output", dest="dump", help="write the dump here instead of stdout")
    rp.set_defaults(func=cmd_replay)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    return args.func(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
