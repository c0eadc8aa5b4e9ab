"""Metrics collection and reporting.

The kernel owns one MetricsLedger per run and appends to it; everything else
here is pure post-processing: summary statistics, Pareto frontiers,
histograms, and byte-stable CSV/JSON exports.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

SCHEMA_VERSION = 1


@dataclass
class GanttRecord:
    job_id: int
    task_id: int
    pe_id: int
    start_ns: int
    end_ns: int
    opp_index: int


@dataclass
class PeUsage:
    busy_ns: int = 0
    busy_when_ready: int = 0
    ready_observations: int = 0
    dynamic_j: float = 0.0
    static_j: float = 0.0
    util_samples: list = field(default_factory=list)   # (epoch_end_ns, utilization)

    def utilization(self, span_ns: int, capacity: int) -> float:
        if span_ns <= 0:
            return 0.0
        return min(1.0, self.busy_ns / (span_ns * capacity))

    def blocking(self) -> tuple[float, bool]:
        if self.ready_observations == 0:
            return 0.0, False
        return self.busy_when_ready / self.ready_observations, True


@dataclass
class MetricsLedger:
    """Everything a simulation reports."""

    schema_version: int = SCHEMA_VERSION
    soc_name: str = ""
    scheduler_name: str = ""
    governor_name: str = ""
    seed: int = 0
    area_mm2: float = 0.0

    sim_end_ns: int = 0
    jobs_injected: int = 0
    jobs_completed: int = 0
    jobs_in_flight: int = 0
    job_records: list = field(default_factory=list)  # (job_id, app, arrival_ns, finish_ns)

    gantt: list = field(default_factory=list)        # GanttRecord
    pe_usage: dict = field(default_factory=dict)     # pe_id -> PeUsage
    pe_capacity: dict = field(default_factory=dict)  # pe_id -> capacity
    pe_cluster: dict = field(default_factory=dict)   # pe_id -> cluster name

    # (time_ns, pe_id, dyn_w, static_w, temp_c, opp_index) per DTPM epoch
    power_trace: list = field(default_factory=list)
    # (time_ns, cluster, temp_c, throttled)
    temp_trace: list = field(default_factory=list)

    dram_saturation_count: int = 0
    events_processed: int = 0
    # optional per-event trace: (time_ns, event, job, task, pe, opp)
    trace_events: list = field(default_factory=list)

    @property
    def total_energy_j(self) -> float:
        return sum(u.dynamic_j + u.static_j for u in self.pe_usage.values())

    def job_latencies_us(self) -> list[float]:
        return [(finish - arrival) / 1000.0
                for _, _, arrival, finish in self.job_records]


def summarize(ledger: MetricsLedger) -> dict:
    """Headline statistics for one run.

    Energy-delay product is total energy (mJ) times average job latency (ms).
    Performance per watt is throughput (jobs/ms) divided by time-averaged
    power; energy-area product is energy per job (uJ) times SoC area (mm^2).
    Averages over zero completed jobs are reported as null with an
    `undefined` flag rather than zero.
    """
    latencies = ledger.job_latencies_us()
    sim_us = ledger.sim_end_ns / 1000.0
    energy_j = ledger.total_energy_j
    has_jobs = ledger.jobs_completed > 0

    avg_latency_us = (sum(latencies) / len(latencies)) if has_jobs else None
    throughput = (ledger.jobs_completed / (sim_us / 1000.0)) if sim_us > 0 else 0.0
    avg_power_w = (energy_j / (sim_us * 1e-6)) if sim_us > 0 else 0.0
    energy_per_job_uj = (energy_j * 1e6 / ledger.jobs_completed) if has_jobs else None
    edp_mj_ms = (energy_j * 1e3 * (avg_latency_us / 1000.0)) if has_jobs else None
    ppw = (throughput / avg_power_w) if (has_jobs and avg_power_w > 0) else None
    eap = (energy_per_job_uj * ledger.area_mm2) if has_jobs else None

    per_pe = {}
    for pe_id in sorted(ledger.pe_usage):
        usage = ledger.pe_usage[pe_id]
        blocking, has_data = usage.blocking()
        per_pe[str(pe_id)] = {
            "utilization": usage.utilization(ledger.sim_end_ns,
                                             ledger.pe_capacity[pe_id]),
            "blocking": blocking,
            "blocking_observed": has_data,
            "dynamic_j": usage.dynamic_j,
            "static_j": usage.static_j,
        }

    return {
        "schema_version": SCHEMA_VERSION,
        "soc": ledger.soc_name,
        "scheduler": ledger.scheduler_name,
        "governor": ledger.governor_name,
        "seed": ledger.seed,
        "sim_time_us": sim_us,
        "jobs_injected": ledger.jobs_injected,
        "jobs_completed": ledger.jobs_completed,
        "jobs_in_flight": ledger.jobs_in_flight,
        "undefined": not has_jobs,
        "avg_job_execution_us": avg_latency_us,
        "throughput_jobs_per_ms": throughput,
        "avg_power_w": avg_power_w,
        "total_energy_mj": energy_j * 1e3,
        "energy_per_job_uj": energy_per_job_uj,
        "edp_mj_ms": edp_mj_ms,
        "ppw_jobs_per_ms_per_w": ppw,
        "eap_uj_mm2": eap,
        "area_mm2": ledger.area_mm2,
        "dram_saturation_count": ledger.dram_saturation_count,
        "per_pe": per_pe,
    }


def pareto_frontier(points: list[tuple[float, float]]) -> list[tuple[float, float]]:
    """Non-dominated subset, both objectives minimized.

    Duplicates collapse to a single representative. Output is ordered by the
    first objective ascending.
    """
    if not points:
        raise ValueError("pareto_frontier needs at least one point")
    unique = sorted(set(points))
    frontier = []
    best_y = None
    for x, y in unique:
        if best_y is None or y < best_y:
            frontier.append((x, y))
            best_y = y
    return frontier


def histogram(values: list[float], bin_width: float) -> list[tuple[float, int]]:
    """Counts per half-open bin [k*w, (k+1)*w); only occupied bins appear."""
    if bin_width <= 0:
        raise ValueError("bin_width must be > 0")
    counts: dict[int, int] = {}
    for v in values:
        k = int(v // bin_width)
        counts[k] = counts.get(k, 0) + 1
    return [(k * bin_width, counts[k]) for k in sorted(counts)]


def _fmt_us(ns: int) -> str:
    """Nanosecond timestamp as microseconds with fixed 3-decimal formatting."""
    return f"{ns // 1000}.{ns % 1000:03d}"


def write_gantt_csv(ledger: MetricsLedger, path: Path) -> None:
    rows = sorted(ledger.gantt, key=lambda g: (g.start_ns, g.pe_id, g.job_id, g.task_id))
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["job", "task", "pe", "start_us", "end_us", "opp_index"])
        for g in rows:
            writer.writerow([g.job_id, g.task_id, g.pe_id,
                             _fmt_us(g.start_ns), _fmt_us(g.end_ns), g.opp_index])


def write_traces_csv(ledger: MetricsLedger, path: Path) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time_us", "pe_or_cluster", "dyn_w", "static_w",
                         "temp_c", "opp_index"])
        for t_ns, pe_id, dyn, static, temp, opp in ledger.power_trace:
            writer.writerow([_fmt_us(t_ns), f"pe{pe_id}", f"{dyn:.6f}",
                             f"{static:.6f}", f"{temp:.3f}", opp])
        # cluster rows carry the thermal state; opp_index holds -1 while the
        # cluster is throttled and stays empty otherwise
        for t_ns, cluster, temp, throttled in ledger.temp_trace:
            writer.writerow([_fmt_us(t_ns), cluster, "", "", f"{temp:.3f}",
                             -1 if throttled else ""])


def write_summary_json(summary: dict, path: Path) -> None:
    path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")


def export(ledger: MetricsLedger, fmt: str, out_dir: str | Path) -> list[Path]:
    """Write run artifacts; returns the paths written. Byte-stable for
    identical ledgers."""
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown export format {fmt!r}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    summary = summarize(ledger)
    summary_path = out / "summary.json"
    write_summary_json(summary, summary_path)
    written.append(summary_path)
    if fmt == "csv":
        gantt_path = out / "gantt.csv"
        write_gantt_csv(ledger, gantt_path)
        traces_path = out / "traces.csv"
        write_traces_csv(ledger, traces_path)
        written.extend([gantt_path, traces_path])
    else:
        gantt_path = out / "gantt.json"
        gantt_path.write_text(json.dumps(
            [{"job": g.job_id, "task": g.task_id, "pe": g.pe_id,
              "start_us": g.start_ns / 1000.0, "end_us": g.end_ns / 1000.0,
              "opp_index": g.opp_index}
             for g in sorted(ledger.gantt,
                             key=lambda g: (g.start_ns, g.pe_id, g.job_id, g.task_id))],
            indent=2) + "\n")
        written.append(gantt_path)
    return written
