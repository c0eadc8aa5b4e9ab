"""Command-line front end.

Subcommands: simulate, sweep-injection, dse grid, dse guided,
replay-canonical, validate-config. Exit codes: 0 success, 2 configuration
error, 3 runtime error. All commands are deterministic given their inputs.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

from .apps import build_canonical_graph
from .dse import (CandidateKind, GridSpec, grid_search, guided_search,
                  write_grid_csv, write_guided_trace, write_pareto_csv,
                  area_model)
from .kernel import run as kernel_run, run_single_job
from .metrics import export, summarize
from .oracle import build_scheduler_table, oracle_optimal_table, OracleLimitError
from .resources import ConfigError, load_soc_config, parse_soc_config
from .scheduling import (BUILTIN_SCHEDULERS, SchedulingError, TableScheduler,
                         load_tables, met_schedule, etf_schedule)
from .workload import load_workload, parse_workload

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

GOVERNORS_HELP = "performance, powersave, ondemand, or fixed:<index>"


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _resolve_scheduler(selector: str, soc, templates):
    """Turn a --scheduler selector into (callable, name)."""
    if selector in BUILTIN_SCHEDULERS:
        return BUILTIN_SCHEDULERS[selector], selector
    if selector.startswith("table:"):
        path = selector.split(":", 1)[1]
        tables = load_tables(path)
        scheduler = TableScheduler(tables)
        scheduler.validate_against(templates, {pe.pe_id for pe in soc.pes})
        return scheduler, "table"
    if selector == "oracle":
        tables = {}
        for name, template in templates.items():
            table, _, _ = build_scheduler_table(template, soc)
            tables[name] = table
        return TableScheduler(tables), "oracle"
    raise CliError(f"unknown scheduler {selector!r}; use met, etf, oracle, "
                   f"or table:<path>", EXIT_CONFIG)


def _templates_for(workload):
    from .apps import build_benchmark

    return {name: build_benchmark(name) for name, _ in workload.mixture}


def _cmd_simulate(args) -> int:
    soc = load_soc_config(args.soc)
    workload = load_workload(args.workload)
    if args.seed is not None:
        workload = replace(workload, seed=args.seed)
    templates = _templates_for(workload)
    scheduler, name = _resolve_scheduler(args.scheduler, soc, templates)
    ledger = kernel_run(soc, workload, scheduler, scheduler_name=name,
                        governor_override=args.governor,
                        templates=templates, collect_events=args.trace)
    ledger.area_mm2 = area_model(soc)
    out = Path(args.out)
    export(ledger, args.format, out)
    if args.trace:
        with (out / "events.csv").open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["time_us", "event", "job", "task", "pe", "opp"])
            for t_ns, event, job, task, pe, opp in ledger.trace_events:
                writer.writerow([f"{t_ns / 1000:.3f}", event, job, task, pe, opp])
    print(f"simulated {ledger.jobs_completed}/{ledger.jobs_injected} jobs "
          f"in {ledger.sim_end_ns / 1000.0:.1f} us of virtual time")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    soc = load_soc_config(args.soc)
    workload = load_workload(args.workload)
    rates = [float(r) for r in args.rates.split(",")]
    if any(r <= 0 for r in rates) or rates != sorted(rates):
        raise CliError("rates must be positive and ascending", EXIT_CONFIG)
    schedulers = args.schedulers.split(",")
    templates = _templates_for(workload)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for selector in schedulers:
        scheduler, name = _resolve_scheduler(selector, soc, templates)
        for rate in rates:
            spec = replace(workload, rate_jobs_per_ms=rate)
            ledger = kernel_run(soc, spec, scheduler, scheduler_name=name,
                                governor_override=args.governor,
                                templates=dict(templates))
            summary = summarize(ledger)
            rows.append((rate, name, summary["avg_job_execution_us"]))
    path = out / "sweep.csv"
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rate_jobs_per_ms", "scheduler", "avg_latency_us"])
        for rate, name, latency in rows:
            writer.writerow([rate, name,
                             "" if latency is None else f"{latency:.3f}"])
    print(f"wrote {path}")
    return EXIT_OK


def _load_grid_spec(path: Path) -> GridSpec:
    raw = json.loads(path.read_text())
    base = parse_soc_config(raw["base_soc"], source=f"{path}:base_soc") \
        if isinstance(raw["base_soc"], dict) \
        else load_soc_config(Path(path).parent / raw["base_soc"])
    workload = parse_workload(raw["workload"], source=f"{path}:workload")
    prototypes = {}
    for name, pe_raw in raw.get("prototypes", {}).items():
        proto_soc = parse_soc_config(
            {"pes": [pe_raw], "noc": {"bandwidth_bytes_per_us": 1,
                                      "load_latency_us": [[0, 0], [1, 0]],
                                      "link_capacity": 1},
             "dram": {"window_us": 1, "table": [[0, 0], [1, 0]]},
             "uncore_area_mm2": 0.0, "dtpm_epoch_us": 20000.0},
            source=f"{path}:prototypes.{name}")
        prototypes[name] = proto_soc.pes[0]
    return GridSpec(base=base, cells=tuple(raw["cells"]), workload=workload,
                    prototypes=prototypes,
                    scheduler=raw.get("scheduler", "etf"),
                    packing_factor=float(raw.get("packing_factor", 1.0)))


def _cmd_dse_grid(args) -> int:
    spec = _load_grid_spec(Path(args.spec))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    results = grid_search(spec, governor=args.governor,
                          parallel=not args.serial)
    write_grid_csv(results, out / "grid_results.csv")
    write_pareto_csv(results, out / "pareto.csv")
    failures = [r for r in results if r.error]
    print(f"grid complete: {len(results) - len(failures)}/{len(results)} cells ok")
    for r in failures:
        print(f"  cell {r.label} failed: {r.error}", file=sys.stderr)
    return EXIT_OK


def _cmd_dse_guided(args) -> int:
    base = load_soc_config(args.base)
    raw = json.loads(Path(args.candidates).read_text())
    workload = parse_workload(raw["workload"], source=f"{args.candidates}:workload")
    candidates = []
    for name, pe_raw in raw["candidates"].items():
        proto_soc = parse_soc_config(
            {"pes": [pe_raw], "noc": {"bandwidth_bytes_per_us": 1,
                                      "load_latency_us": [[0, 0], [1, 0]],
                                      "link_capacity": 1},
             "dram": {"window_us": 1, "table": [[0, 0], [1, 0]]},
             "uncore_area_mm2": 0.0, "dtpm_epoch_us": 20000.0},
            source=f"{args.candidates}:candidates.{name}")
        candidates.append(CandidateKind(name=name, prototype=proto_soc.pes[0]))
    thresholds = tuple(raw.get("thresholds", (0.6, 0.3)))
    freeze = tuple(raw.get("freeze_thresholds", (0.15, 0.15)))
    budget = int(raw.get("budget", 10))
    result = guided_search(base, candidates, workload,
                           scheduler=raw.get("scheduler", "etf"),
                           thresholds=thresholds, freeze_thresholds=freeze,
                           budget=budget,
                           governor=raw.get("governor", "performance"))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_guided_trace(result, out / "guided_trace.json")
    counts = result.counts()
    print(f"guided search {'converged' if result.converged else 'hit budget'}; "
          f"final accelerator counts: {counts}")
    return EXIT_OK


def _cmd_replay_canonical(args) -> int:
    template, _ = build_canonical_graph()
    soc = load_soc_config(_data_path("canonical_soc.json"))
    if args.scheduler == "met":
        scheduler, name = met_schedule, "met"
    elif args.scheduler == "etf":
        scheduler, name = etf_schedule, "etf"
    elif args.scheduler == "oracle-table":
        table, _ = oracle_optimal_table(template, soc)
        scheduler, name = TableScheduler({template.name: table}), "oracle-table"
    else:
        raise CliError("scheduler must be met, etf, or oracle-table", EXIT_CONFIG)
    makespan, ledger = run_single_job(soc, template, scheduler,
                                      scheduler_name=name)
    print(f"# canonical schedule under {name}")
    print("task,pe,start_us,end_us")
    for g in sorted(ledger.gantt, key=lambda g: (g.start_ns, g.task_id)):
        print(f"{g.task_id},{g.pe_id},{g.start_ns / 1000:.3f},{g.end_ns / 1000:.3f}")
    print(f"# makespan_us: {makespan / 1000:.3f}")
    return EXIT_OK


def _cmd_validate(args) -> int:
    soc = load_soc_config(args.soc)
    print(f"soc config ok: {len(soc.pes)} PEs, "
          f"area {area_model(soc):.2f} mm2")
    if args.workload:
        workload = load_workload(args.workload)
        print(f"workload ok: rate {workload.rate_jobs_per_ms} jobs/ms, "
              f"{'jobs=' + str(workload.jobs) if workload.jobs is not None else 'duration'}")
    return EXIT_OK


def _data_path(name: str) -> Path:
    from importlib import resources as importlib_resources

    return Path(str(importlib_resources.files("dssim.data").joinpath(name)))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dssim",
        description="Discrete-event simulator for heterogeneous SoCs with "
                    "pluggable schedulers, DVFS governors, and design space "
                    "exploration.")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one simulation")
    sim.add_argument("--soc", required=True, help="SoC config JSON")
    sim.add_argument("--workload", required=True, help="workload JSON")
    sim.add_argument("--scheduler", default="etf",
                     help="met, etf, oracle, or table:<path>")
    sim.add_argument("--governor", default=None, help=GOVERNORS_HELP)
    sim.add_argument("--seed", type=int, default=None,
                     help="override the workload seed")
    sim.add_argument("--out", default="out", help="output directory")
    sim.add_argument("--format", choices=("csv", "json"), default="csv")
    sim.add_argument("--trace", action="store_true",
                     help="collect a per-event trace")
    sim.set_defaults(func=_cmd_simulate)

    sweep = sub.add_parser("sweep-injection",
                           help="latency vs injection rate per scheduler")
    sweep.add_argument("--soc", required=True)
    sweep.add_argument("--workload", required=True)
    sweep.add_argument("--rates", required=True,
                       help="comma-separated jobs/ms, ascending")
    sweep.add_argument("--schedulers", default="met,etf",
                       help="comma-separated scheduler selectors")
    sweep.add_argument("--governor", default=None, help=GOVERNORS_HELP)
    sweep.add_argument("--out", default="out")
    sweep.set_defaults(func=_cmd_sweep)

    dse = sub.add_parser("dse", help="design space exploration")
    dse_sub = dse.add_subparsers(dest="dse_command", required=True)
    grid = dse_sub.add_parser("grid", help="grid sweep over SoC configurations")
    grid.add_argument("--spec", required=True, help="grid spec JSON")
    grid.add_argument("--out", default="out")
    grid.add_argument("--governor", default="performance", help=GOVERNORS_HELP)
    grid.add_argument("--serial", action="store_true",
                      help="disable parallel cells")
    grid.set_defaults(func=_cmd_dse_grid)
    guided = dse_sub.add_parser("guided",
                                help="guided accelerator-count search")
    guided.add_argument("--base", required=True, help="starting SoC config")
    guided.add_argument("--candidates", required=True,
                        help="study JSON: candidates, workload, thresholds")
    guided.add_argument("--out", default="out")
    guided.set_defaults(func=_cmd_dse_guided)

    replay = sub.add_parser("replay-canonical",
                            help="print the canonical-graph schedule")
    replay.add_argument("--scheduler", default="met",
                        help="met, etf, or oracle-table")
    replay.set_defaults(func=_cmd_replay_canonical)

    validate = sub.add_parser("validate-config", help="check config files")
    validate.add_argument("--soc", required=True)
    validate.add_argument("--workload", default=None)
    validate.set_defaults(func=_cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (ConfigError, SchedulingError, OracleLimitError, FileNotFoundError,
            json.JSONDecodeError, KeyError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # runtime failures
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
