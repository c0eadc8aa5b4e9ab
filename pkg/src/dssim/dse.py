"""Design space exploration: grid sweeps and the guided accelerator search.

Grid cells are independent simulations and run in parallel processes
(capped by the DSSIM_THREADS environment variable); results reduce
deterministically in cell order. The guided loop places each PE cluster on
the utilization-versus-blocking plane after every simulation and grows the
accelerator pool until no cluster sits in the needs-more-resources corner.
"""
from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

from .apps import build_benchmark
from .kernel import run as kernel_run
from .metrics import MetricsLedger, pareto_frontier, summarize
from .resources import (PeDescriptor, SocConfig, ValidationError,
                        parse_soc_config, soc_to_dict)
from .scheduling import BUILTIN_SCHEDULERS
from .workload import WorkloadSpec, parse_workload, workload_to_dict

# Quadrant thresholds for the guided loop (action thresholds) and for the
# sanity check on the implausible low-utilization / high-blocking corner.
DEFAULT_UPPER_RIGHT = (0.60, 0.30)
UPPER_LEFT_CHECK = (0.10, 0.60)


def area_model(soc: SocConfig, packing_factor: float = 1.0) -> float:
    """Linear area estimate: uncore plus packed PE areas, in mm^2."""
    return soc.uncore_area_mm2 + packing_factor * sum(pe.area_mm2 for pe in soc.pes)


@dataclass(frozen=True)
class PlanePoint:
    """One cluster on the utilization/blocking performance plane (percent)."""

    cluster: str
    utilization_pct: float
    blocking_pct: float
    avg_job_execution_us: float | None

    def quadrant(self, thresholds=DEFAULT_UPPER_RIGHT) -> str:
        util_hi, block_hi = thresholds
        hi_u = self.utilization_pct >= util_hi * 100
        hi_b = self.blocking_pct >= block_hi * 100
        if hi_u and hi_b:
            return "upper-right"
        if hi_u:
            return "lower-right"
        if hi_b:
            return "upper-left"
        return "lower-left"


def cluster_plane(ledger: MetricsLedger, soc: SocConfig,
                  avg_latency_us: float | None) -> list[PlanePoint]:
    """Aggregate per-PE utilization/blocking into per-cluster plane points."""
    points = []
    for cluster in soc.clusters():
        pes = [pe for pe in soc.pes if pe.cluster == cluster]
        busy = sum(ledger.pe_usage[pe.pe_id].busy_ns for pe in pes)
        cap = sum(pe.capacity for pe in pes)
        util = busy / (ledger.sim_end_ns * cap) if ledger.sim_end_ns > 0 else 0.0
        blocked = sum(ledger.pe_usage[pe.pe_id].busy_when_ready for pe in pes)
        observed = sum(ledger.pe_usage[pe.pe_id].ready_observations for pe in pes)
        blocking = blocked / observed if observed else 0.0
        points.append(PlanePoint(cluster=cluster, utilization_pct=100 * util,
                                 blocking_pct=100 * blocking,
                                 avg_job_execution_us=avg_latency_us))
    return points


def implausible_points(points: list[PlanePoint]) -> list[PlanePoint]:
    """Plane points in the extreme low-utilization / high-blocking corner.

    A healthy kernel should never produce these; they are surfaced as a
    simulation self-check rather than silently ignored.
    """
    util_lo, block_hi = UPPER_LEFT_CHECK
    return [p for p in points
            if p.utilization_pct < util_lo * 100 and p.blocking_pct > block_hi * 100]


# -- SoC mutation helpers -----------------------------------------------------

def _next_pe_id(soc: SocConfig) -> int:
    return max(pe.pe_id for pe in soc.pes) + 1


def add_accelerator(soc: SocConfig, prototype: PeDescriptor, count: int = 1) -> SocConfig:
    """Return a config with `count` copies of an accelerator prototype added."""
    pes = list(soc.pes)
    for i in range(count):
        pe_id = max(pe.pe_id for pe in pes) + 1
        existing = sum(1 for pe in pes if pe.cluster == prototype.cluster)
        pes.append(replace(prototype, pe_id=pe_id,
                           name=f"{prototype.subtype}-{existing}"))
    return replace(soc, pes=tuple(pes))


def accelerator_count(soc: SocConfig, cluster: str) -> int:
    return sum(1 for pe in soc.pes if pe.cluster == cluster)


def scale_soc(soc: SocConfig, factor: float) -> SocConfig:
    """Scale every cluster's PE count by `factor` (counts rounded, >= 1)."""
    pes = []
    next_id = 0
    for cluster in soc.clusters():
        members = [pe for pe in soc.pes if pe.cluster == cluster]
        target = max(1, round(len(members) * factor))
        for i in range(target):
            proto = members[i % len(members)]
            pes.append(replace(proto, pe_id=next_id, name=f"{proto.subtype}-{i}"))
            next_id += 1
    return replace(soc, pes=tuple(pes))


# -- grid search --------------------------------------------------------------

@dataclass(frozen=True)
class GridSpec:
    """Explicit grid cells over a base SoC.

    Each cell is a dict of axis settings:

    * ``fft`` / ``viterbi``: accelerator counts (prototypes must be given),
    * ``cores``: {cluster: active count} keeping the first N PEs of a cluster,
    * ``opp``: {cluster: index} pinning the cluster to one operating point,
    * ``governor``: per-cell DVFS policy override,
    * ``label``: row name in the results table.
    """

    base: SocConfig
    cells: tuple[dict, ...]
    workload: WorkloadSpec
    prototypes: dict[str, PeDescriptor] = field(default_factory=dict)
    scheduler: str = "etf"
    packing_factor: float = 1.0

    def soc_for(self, cell: dict) -> SocConfig:
        soc = self.base
        for axis in ("fft", "viterbi"):
            count = int(cell.get(axis, 0))
            if count:
                soc = add_accelerator(soc, self.prototypes[axis], count)
        cores = cell.get("cores", {})
        if cores:
            kept = []
            seen: dict[str, int] = {}
            for pe in soc.pes:
                limit = cores.get(pe.cluster)
                seen[pe.cluster] = seen.get(pe.cluster, 0) + 1
                if limit is not None and seen[pe.cluster] > int(limit):
                    continue
                kept.append(pe)
            for cluster, limit in cores.items():
                if int(limit) < 1:
                    raise ValidationError(f"cores for {cluster!r} must be >= 1")
                if seen.get(cluster, 0) < int(limit):
                    raise ValidationError(
                        f"cell asks for {limit} {cluster!r} PEs, base has "
                        f"{seen.get(cluster, 0)}")
            soc = replace(soc, pes=tuple(kept))
        opp = cell.get("opp", {})
        if opp:
            pes = []
            for pe in soc.pes:
                idx = opp.get(pe.cluster)
                if idx is None:
                    pes.append(pe)
                    continue
                if not 0 <= int(idx) < len(pe.opps):
                    raise ValidationError(
                        f"opp index {idx} out of range for cluster {pe.cluster!r}")
                pes.append(replace(pe, dvfs_policy=f"fixed:{int(idx)}"))
            soc = replace(soc, pes=tuple(pes))
        return soc


def dvfs_sweep_cells(big_opps: int = 8, little_opps: int = 5,
                     big_cores: int = 4, little_cores: int = 4,
                     governors: tuple[str, ...] = ("ondemand", "performance",
                                                   "powersave")) -> list[dict]:
    """Full DVFS design space: every (big OPP, little OPP, core-count)
    combination pinned statically, plus one cell per dynamic governor."""
    cells = []
    for b_opp in range(big_opps):
        for l_opp in range(little_opps):
            for b_n in range(1, big_cores + 1):
                for l_n in range(1, little_cores + 1):
                    cells.append({
                        "label": f"b{b_opp}l{l_opp}-c{b_n}x{l_n}",
                        "opp": {"big": b_opp, "little": l_opp},
                        "cores": {"big": b_n, "little": l_n},
                    })
    for gov in governors:
        cells.append({"label": f"gov-{gov}", "governor": gov})
    return cells


@dataclass
class GridResult:
    label: str
    cell: dict
    area_mm2: float
    summary: dict
    plane: list[PlanePoint]
    error: str | None = None


def _max_workers(n_cells: int) -> int:
    env = os.environ.get("DSSIM_THREADS")
    cap = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(cap, n_cells))


def _run_cell(payload: dict) -> dict:
    """Worker entry: payload carries serialized configs (picklable)."""
    soc = parse_soc_config(payload["soc"], source=payload["label"])
    workload = parse_workload(payload["workload"], source=payload["label"])
    scheduler = BUILTIN_SCHEDULERS[payload["scheduler"]]
    try:
        ledger = kernel_run(soc, workload, scheduler,
                            scheduler_name=payload["scheduler"],
                            governor_override=payload.get("governor"))
        ledger.area_mm2 = payload["area_mm2"]
        summary = summarize(ledger)
        plane = [(p.cluster, p.utilization_pct, p.blocking_pct)
                 for p in cluster_plane(ledger, soc,
                                        summary["avg_job_execution_us"])]
        return {"label": payload["label"], "summary": summary, "plane": plane,
                "error": None}
    except Exception as exc:  # cell failures recorded, others continue
        return {"label": payload["label"], "summary": None, "plane": [],
                "error": f"{type(exc).__name__}: {exc}"}


def grid_search(spec: GridSpec, governor: str | None = "performance",
                parallel: bool = True) -> list[GridResult]:
    """Simulate every grid cell; cells that fail are recorded, not fatal."""
    if not spec.cells:
        raise ValidationError("grid has no cells")
    payloads = []
    metas = []
    for i, cell in enumerate(spec.cells):
        label = str(cell.get("label", f"cell-{i}"))
        try:
            soc = spec.soc_for(cell)
            area = area_model(soc, spec.packing_factor)
        except Exception as exc:  # bad cell recorded, others continue
            metas.append((label, cell, 0.0, f"{type(exc).__name__}: {exc}"))
            payloads.append(None)
            continue
        payloads.append({
            "soc": soc_to_dict(soc),
            "workload": workload_to_dict(spec.workload),
            "scheduler": spec.scheduler,
            # OPP-pinned cells run their per-PE fixed policies unless the
            # cell names a governor explicitly.
            "governor": cell.get("governor",
                                 None if "opp" in cell else governor),
            "label": label, "area_mm2": area,
        })
        metas.append((label, cell, area, None))

    runnable = [p for p in payloads if p is not None]
    workers = _max_workers(len(runnable)) if (parallel and runnable) else 1
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            ran = list(pool.map(_run_cell, runnable))
    else:
        ran = [_run_cell(p) for p in runnable]
    ran_iter = iter(ran)

    results = []
    for (label, cell, area, setup_error), payload in zip(metas, payloads):
        if payload is None:
            results.append(GridResult(label=label, cell=cell, area_mm2=area,
                                      summary=None, plane=[],
                                      error=setup_error))
            continue
        out = next(ran_iter)
        plane = [PlanePoint(c, u, b,
                            out["summary"]["avg_job_execution_us"]
                            if out["summary"] else None)
                 for c, u, b in out["plane"]]
        results.append(GridResult(label=label, cell=cell, area_mm2=area,
                                  summary=out["summary"], plane=plane,
                                  error=out["error"]))
    return results


def grid_pareto(results: list[GridResult]) -> list[GridResult]:
    """Grid rows on the (area, energy per job) frontier."""
    ok = [r for r in results if r.error is None
          and r.summary["energy_per_job_uj"] is not None]
    if not ok:
        return []
    points = [(r.area_mm2, r.summary["energy_per_job_uj"]) for r in ok]
    frontier = set(pareto_frontier(points))
    return [r for r, p in zip(ok, points) if p in frontier]


def write_grid_csv(results: list[GridResult], path: Path) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label", "fft", "viterbi", "area_mm2",
                         "avg_job_execution_us", "energy_per_job_uj",
                         "edp_mj_ms", "eap_uj_mm2", "error"])
        for r in results:
            s = r.summary or {}
            writer.writerow([
                r.label, r.cell.get("fft", 0), r.cell.get("viterbi", 0),
                f"{r.area_mm2:.4f}",
                _fmt(s.get("avg_job_execution_us")),
                _fmt(s.get("energy_per_job_uj")),
                _fmt(s.get("edp_mj_ms")),
                _fmt(s.get("eap_uj_mm2")),
                r.error or "",
            ])


def write_pareto_csv(results: list[GridResult], path: Path) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label", "area_mm2", "energy_per_job_uj"])
        for r in grid_pareto(results):
            writer.writerow([r.label, f"{r.area_mm2:.4f}",
                             _fmt(r.summary["energy_per_job_uj"])])


def _fmt(value) -> str:
    return "" if value is None else f"{value:.4f}"


# -- guided search -------------------------------------------------------------

@dataclass(frozen=True)
class CandidateKind:
    """An accelerator the guided loop may add."""

    name: str
    prototype: PeDescriptor

    def offloads(self, kind: str) -> bool:
        return self.prototype.supports(kind)


@dataclass
class GuidedStep:
    iteration: int
    plane: list[PlanePoint]
    action: str
    detail: dict
    counts: dict[str, int]


@dataclass
class GuidedResult:
    soc: SocConfig
    trace: list[GuidedStep]
    converged: bool
    implausible: list[str] = field(default_factory=list)

    def counts(self) -> dict[str, int]:
        return self.trace[-1].counts if self.trace else {}


def _dominant_offloadable_kind(ledger: MetricsLedger, soc: SocConfig,
                               cluster: str,
                               candidates: list[CandidateKind]) -> str | None:
    """Task kind with the most busy time on `cluster` that a candidate can take."""
    app_of_job = {job_id: app for job_id, app, _, _ in ledger.job_records}
    templates: dict[str, object] = {}
    busy_by_kind: dict[str, int] = {}
    cluster_pes = {pe.pe_id for pe in soc.pes if pe.cluster == cluster}
    for g in ledger.gantt:
        if g.pe_id not in cluster_pes:
            continue
        app = app_of_job.get(g.job_id)
        if app is None:
            continue
        template = templates.get(app)
        if template is None:
            template = templates.setdefault(app, build_benchmark(app))
        kind = template.kind_of(g.task_id)
        busy_by_kind[kind] = busy_by_kind.get(kind, 0) + (g.end_ns - g.start_ns)
    offloadable = [(busy, kind) for kind, busy in busy_by_kind.items()
                   if any(c.offloads(kind) for c in candidates)]
    if not offloadable:
        return None
    offloadable.sort(key=lambda x: (-x[0], x[1]))
    return offloadable[0][1]


def guided_search(base: SocConfig, candidates: list[CandidateKind],
                  workload: WorkloadSpec, scheduler: str = "etf",
                  thresholds: tuple[float, float] = DEFAULT_UPPER_RIGHT,
                  freeze_thresholds: tuple[float, float] = (0.15, 0.15),
                  budget: int = 10,
                  governor: str | None = "performance") -> GuidedResult:
    """Iteratively grow the accelerator pool until no cluster is starved.

    Each iteration simulates the workload, places every cluster on the
    utilization/blocking plane, and adds one unit of the candidate that
    offloads the dominant task of the worst upper-right cluster. A candidate
    whose own cluster shows low utilization and low blocking is frozen at
    its current count. Clusters whose dominant work no candidate can absorb
    are noted and skipped. The loop stops when nothing actionable remains or
    the budget is exhausted.
    """
    soc = base
    trace: list[GuidedStep] = []
    frozen: set[str] = set()
    implausible_seen: list[str] = []
    sched_fn = BUILTIN_SCHEDULERS[scheduler]
    converged = False

    for iteration in range(budget):
        ledger = kernel_run(soc, workload, sched_fn, scheduler_name=scheduler,
                            governor_override=governor)
        summary = summarize(ledger)
        plane = cluster_plane(ledger, soc, summary["avg_job_execution_us"])
        counts = {c.name: accelerator_count(soc, c.prototype.cluster)
                  for c in candidates}
        implausible_seen.extend(p.cluster for p in implausible_points(plane))

        for cand in candidates:
            if cand.name in frozen or counts[cand.name] == 0:
                continue
            point = next((p for p in plane if p.cluster == cand.prototype.cluster),
                         None)
            if point is None:
                continue
            f_util, f_block = freeze_thresholds
            if (point.utilization_pct < f_util * 100
                    and point.blocking_pct < f_block * 100):
                frozen.add(cand.name)
                trace.append(GuidedStep(
                    iteration, plane, "freeze",
                    {"candidate": cand.name, "count": counts[cand.name],
                     "utilization_pct": point.utilization_pct,
                     "blocking_pct": point.blocking_pct}, dict(counts)))

        upper_right = [p for p in plane
                       if p.quadrant(thresholds) == "upper-right"]
        upper_right.sort(key=lambda p: (-p.blocking_pct, -p.utilization_pct,
                                        p.cluster))
        action_taken = False
        skipped = []
        for point in upper_right:
            kind = _dominant_offloadable_kind(ledger, soc, point.cluster,
                                              [c for c in candidates
                                               if c.name not in frozen])
            if kind is None:
                skipped.append(point.cluster)
                continue
            cand = next(c for c in candidates
                        if c.name not in frozen and c.offloads(kind))
            soc = add_accelerator(soc, cand.prototype)
            counts_after = {c.name: accelerator_count(soc, c.prototype.cluster)
                            for c in candidates}
            trace.append(GuidedStep(
                iteration, plane, "add",
                {"candidate": cand.name, "cluster": point.cluster,
                 "dominant_kind": kind,
                 "avg_job_execution_us": summary["avg_job_execution_us"]},
                counts_after))
            action_taken = True
            break

        if not action_taken:
            reason = ("no-upper-right" if not upper_right else
                      "bottleneck-not-offloadable")
            trace.append(GuidedStep(iteration, plane, "stop",
                                    {"reason": reason, "skipped": skipped},
                                    dict(counts)))
            converged = True
            break

    return GuidedResult(soc=soc, trace=trace, converged=converged,
                        implausible=implausible_seen)


def guided_trace_to_dict(result: GuidedResult) -> dict:
    return {
        "converged": result.converged,
        "implausible_points": result.implausible,
        "final_counts": result.counts(),
        "steps": [
            {
                "iteration": s.iteration,
                "action": s.action,
                "detail": s.detail,
                "counts": s.counts,
                "plane": [
                    {"cluster": p.cluster,
                     "utilization_pct": round(p.utilization_pct, 3),
                     "blocking_pct": round(p.blocking_pct, 3),
                     "avg_job_execution_us": p.avg_job_execution_us}
                    for p in s.plane
                ],
            }
            for s in result.trace
        ],
    }


def write_guided_trace(result: GuidedResult, path: Path) -> None:
    path.write_text(json.dumps(guided_trace_to_dict(result), indent=2) + "\n")
