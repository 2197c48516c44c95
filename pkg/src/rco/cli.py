"""Scenario runner CLI: run episodes, sweep the plan-step limit, replay logs.

Config precedence is flags > config file > defaults. With the scripted
backend and a fixed seed every output byte is reproducible: results carry no
wall-clock timestamps and floats are written with fixed precision in a fixed
row order.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import sys
from importlib import resources
from pathlib import Path
from typing import Any, Optional, Sequence

from . import metrics
from .backend import Backend, HttpBackend, ScriptedBackend
from .runner import EpisodeOutcome, Mode, Overrides, run_episode
from .simenv import Scenario

EXIT_OK = 0
EXIT_CONFIG = 2


class ConfigError(Exception):
    pass


def bundled_scenario_dir() -> Path:
    return Path(str(resources.files("rco").joinpath("scenarios")))


def discover_scenarios(paths: Sequence[str]) -> list[Path]:
    found: list[Path] = []
    for raw in paths:
        p = Path(raw)
        if p.is_dir():
            found.extend(sorted(p.glob("*.json")))
        elif p.is_file():
            found.append(p)
        else:
            raise ConfigError(f"scenario path does not exist: {raw}")
    if not found:
        raise ConfigError(f"no scenario files found under {list(paths)}")
    return found


def build_backend(kind: str, scripted_table: Optional[str]) -> Backend:
    if kind == "scripted":
        if scripted_table:
            if not Path(scripted_table).is_file():
                raise ConfigError(f"scripted table does not exist: {scripted_table}")
            return ScriptedBackend.from_file(scripted_table)
        return ScriptedBackend.bundled()
    if kind == "http":
        try:
            return HttpBackend.from_env()
        except ValueError as exc:
            raise ConfigError(f"http backend misconfigured (set RCO_BACKEND_URL): {exc}") from exc
    raise ConfigError(f"unknown backend kind: {kind}")


_OVERRIDE_KEYS = (
    "n_max",
    "history_len",
    "wait_cap",
    "replan_budget",
    "shift_threshold",
    "hazard_ratio_threshold",
    "delta_throttle",
    "delta_brake",
    "penalties",
)


def _load_config_file(path: Optional[str]) -> dict[str, Any]:
    if not path:
        return {}
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file does not exist: {path}")
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from exc
    unknown = set(data) - set(_OVERRIDE_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return data


def _merge_overrides(args: argparse.Namespace) -> Overrides:
    merged = _load_config_file(getattr(args, "config", None))
    for key in _OVERRIDE_KEYS:
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            merged[key] = flag_value
    try:
        overrides = Overrides(**merged)
        overrides.orchestrator_config("probe", 0.1)  # validate ranges eagerly
        overrides.penalty_table()
        return overrides
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid override values: {exc}") from exc


def _run_one(task: tuple[str, str, str, Optional[str], Overrides]) -> EpisodeOutcome:
    scenario_path, mode, backend_kind, scripted_table, overrides = task
    scenario = Scenario.load(scenario_path)
    backend = build_backend(backend_kind, scripted_table)
    return run_episode(scenario, Mode(mode), backend, overrides)


def _execute(
    scenario_paths: Sequence[Path],
    mode: str,
    backend_kind: str,
    scripted_table: Optional[str],
    overrides: Overrides,
    jobs: int,
) -> list[EpisodeOutcome]:
    tasks = [(str(p), mode, backend_kind, scripted_table, overrides) for p in scenario_paths]
    if jobs <= 1 or len(tasks) <= 1:
        return [_run_one(t) for t in tasks]
    with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_one, tasks))  # input order preserved


def _write_outputs(
    outcomes: list[EpisodeOutcome], out_dir: Path, run_config: dict[str, Any]
) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    for outcome in outcomes:
        stem = f"{outcome.result.scenario}__{outcome.result.mode}"
        (out_dir / f"{stem}.result.json").write_text(
            json.dumps(outcome.result.to_json(), sort_keys=True, indent=2) + "\n",
            encoding="utf-8",
        )
        with open(out_dir / f"{stem}.decisions.jsonl", "w", encoding="utf-8") as fh:
            for record in outcome.records:
                fh.write(json.dumps(record, sort_keys=True, separators=(",", ":")) + "\n")
    summary = metrics.Summary(tuple(o.result for o in outcomes))
    (out_dir / "summary.csv").write_text(summary.to_csv(), encoding="utf-8")
    payload = {"run_config": run_config, **summary.to_json()}
    (out_dir / "summary.json").write_text(
        json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def cmd_run(args: argparse.Namespace) -> int:
    scenario_paths = discover_scenarios(args.scenarios)
    overrides = _merge_overrides(args)
    build_backend(args.backend, args.scripted_table)  # validate early
    outcomes = _execute(
        scenario_paths, args.mode, args.backend, args.scripted_table, overrides, args.jobs
    )
    run_config = {
        "mode": args.mode,
        "backend": args.backend,
        "seed": args.seed,
        "overrides": _overrides_dict(overrides),
    }
    _write_outputs(outcomes, Path(args.out), run_config)
    for o in outcomes:
        r = o.result
        print(
            f"{r.scenario} [{r.mode}]: RC={r.rc:.2f} IS={r.is_score:.3f} "
            f"DS={r.ds:.2f} AS={r.as_speed:.2f}"
        )
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    scenario_paths = discover_scenarios(args.scenarios)
    overrides = _merge_overrides(args)
    try:
        limits = [int(x) for x in args.limits.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad --limits: {exc}") from exc
    if not limits:
        raise ConfigError("--limits must name at least one step limit")

    baseline = _execute(
        scenario_paths, Mode.BASELINE.value, args.backend, args.scripted_table, overrides, args.jobs
    )
    base_agg = metrics.Summary(tuple(o.result for o in baseline)).aggregate()

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = ["n_max,rc,is,ds,delta_rc,delta_is,delta_ds"]
    for limit in limits:
        limited = Overrides(**{**_overrides_dict(overrides), "n_max": limit})
        outcomes = _execute(
            scenario_paths, Mode.RCO.value, args.backend, args.scripted_table, limited, args.jobs
        )
        agg = metrics.Summary(tuple(o.result for o in outcomes)).aggregate()
        lines.append(
            f"{limit},{agg['rc']:.6f},{agg['is_score']:.6f},{agg['ds']:.6f},"
            f"{agg['rc'] - base_agg['rc']:.6f},"
            f"{agg['is_score'] - base_agg['is_score']:.6f},"
            f"{agg['ds'] - base_agg['ds']:.6f}"
        )
        print(lines[-1])
    (out_dir / "sweep.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return EXIT_OK


def _overrides_dict(o: Overrides) -> dict[str, Any]:
    return {k: getattr(o, k) for k in _OVERRIDE_KEYS if getattr(o, k) is not None}


def cmd_replay(args: argparse.Namespace) -> int:
    path = Path(args.log)
    if not path.is_file():
        raise ConfigError(f"decision log does not exist: {args.log}")
    for line in path.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        act = rec["action"]
        if not rec.get("active"):
            print(
                f"tick {rec['tick']:>5}  base agent        "
                f"throttle={act['throttle']:.2f} brake={act['brake']:.2f} steer={act['steer']:+.2f}"
            )
            continue
        extra = ""
        if rec.get("triggered_constraints"):
            extra = "  constraints=" + "+".join(rec["triggered_constraints"])
        if rec.get("planning_events"):
            extra += f"  plans={rec['planning_events']}"
        print(
            f"tick {rec['tick']:>5}  {rec['source']:<10} {rec['classification'] or '':<32}"
            f"throttle={act['throttle']:.2f} brake={act['brake']:.2f} "
            f"steer={act['steer']:+.2f}{extra}"
        )
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rco",
        description="Run driving scenarios with or without the risk-averse control override.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument(
            "--scenarios",
            nargs="+",
            default=[str(bundled_scenario_dir())],
            help="scenario JSON files or directories (default: bundled library)",
        )
        p.add_argument("--backend", choices=["scripted", "http"], default="scripted")
        p.add_argument("--scripted-table", default=None, help="override scripted response table")
        p.add_argument("--seed", type=int, default=0, help="recorded in outputs")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("--config", default=None, help="JSON config file with override keys")
        p.add_argument("--n-max", dest="n_max", type=int, default=None)
        p.add_argument("--history-len", dest="history_len", type=int, default=None)
        p.add_argument("--wait-cap", dest="wait_cap", type=int, default=None)
        p.add_argument("--replan-budget", dest="replan_budget", type=int, default=None)
        p.add_argument("--shift-threshold", dest="shift_threshold", type=float, default=None)
        p.add_argument(
            "--hazard-ratio-threshold", dest="hazard_ratio_threshold", type=float, default=None
        )
        p.add_argument("--delta-throttle", dest="delta_throttle", type=float, default=None)
        p.add_argument("--delta-brake", dest="delta_brake", type=float, default=None)

    p_run = sub.add_parser("run", help="run scenarios in one mode and write results")
    add_common(p_run)
    p_run.add_argument(
        "--mode", choices=[m.value for m in Mode], default=Mode.RCO.value
    )
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="sweep the plan-step limit")
    add_common(p_sweep)
    p_sweep.add_argument("--limits", default="1,3,5,8", help="comma-separated step limits")
    p_sweep.set_defaults(func=cmd_sweep)

    p_replay = sub.add_parser("replay", help="render a decision log as a readable trace")
    p_replay.add_argument("--log", required=True)
    p_replay.set_defaults(func=cmd_replay)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
