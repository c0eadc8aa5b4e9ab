"""Pluggable schedulers: MET, ETF, and table-based.

A scheduler is a callable taking a SchedulingContext and returning an
Assignment mapping (job_id, task_id) to a PE id. Schedulers are pure with
respect to the context; the kernel rebuilds the context at every scheduling
epoch, so no state leaks between calls.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from .resources import ConfigError

Assignment = dict[tuple[int, int], int]


class SchedulingError(ConfigError):
    """A scheduler produced or required an impossible mapping."""


@dataclass(frozen=True)
class ReadyTask:
    """One task currently in the ready queue."""

    job_id: int
    task_id: int
    app_name: str
    kind: str
    arrival_ns: int          # arrival time of the owning job
    ready_ns: int            # instant the task entered the ready queue
    preds: tuple[tuple[int, int, int], ...]  # (pe_id, finish_ns, volume_bytes)

    @property
    def key(self) -> tuple[int, int]:
        return (self.job_id, self.task_id)


@dataclass(frozen=True)
class PeSnapshot:
    """Read-only view of one PE at a scheduling epoch.

    slot_free_ns has one entry per capacity slot: the estimated earliest time
    that slot can accept a new task given running tasks and tasks already
    committed but not yet started.
    """

    pe_id: int
    capacity: int
    opp_index: int
    latency_ns: dict[str, int]     # supported kind -> execution ns at current OPP
    slot_free_ns: tuple[int, ...]
    occupied_slots: int            # running plus queued-but-unstarted tasks
    utilization: float
    blocking: float

    def supports(self, kind: str) -> bool:
        return kind in self.latency_ns


@dataclass(frozen=True)
class SchedulingContext:
    now_ns: int
    ready: tuple[ReadyTask, ...]
    pes: tuple[PeSnapshot, ...]
    comm_delay_ns: Callable[[int, int, int], int]   # (src_pe, dst_pe, volume) -> ns

    def candidates(self, kind: str) -> list[PeSnapshot]:
        return [pe for pe in self.pes if pe.supports(kind)]


Scheduler = Callable[[SchedulingContext], Assignment]


def _no_candidate(task: ReadyTask) -> SchedulingError:
    return SchedulingError(
        f"no PE supports task kind {task.kind!r} "
        f"(job {task.job_id}, task {task.task_id})")


def met_schedule(ctx: SchedulingContext) -> Assignment:
    """Minimum expected execution time, FIFO over the ready queue.

    Each task goes to the PE with the smallest scaled latency for its kind.
    Ties go to the most idle PE: fewest occupied slots (counting tasks this
    call has already placed, since assignments take effect immediately),
    then lowest windowed utilization, then lowest PE id.
    """
    assignment: Assignment = {}
    claimed: dict[int, int] = {}
    for task in sorted(ctx.ready, key=lambda t: (t.arrival_ns, t.job_id, t.task_id)):
        best = None
        for pe in ctx.candidates(task.kind):
            occupancy = (pe.occupied_slots + claimed.get(pe.pe_id, 0)) / pe.capacity
            key = (pe.latency_ns[task.kind], occupancy, pe.utilization, pe.pe_id)
            if best is None or key < best[0]:
                best = (key, pe.pe_id)
        if best is None:
            raise _no_candidate(task)
        assignment[task.key] = best[1]
        claimed[best[1]] = claimed.get(best[1], 0) + 1
    return assignment


def _earliest_data_ns(ctx: SchedulingContext, task: ReadyTask, pe_id: int) -> int:
    """Latest (predecessor finish + transfer delay) toward `pe_id`."""
    ready = task.ready_ns
    for src_pe, finish_ns, volume in task.preds:
        ready = max(ready, finish_ns + ctx.comm_delay_ns(src_pe, pe_id, volume))
    return max(ready, 0)


def etf_schedule(ctx: SchedulingContext) -> Assignment:
    """Greedy earliest-finish-time over (task, PE) pairs.

    Repeatedly commits the pair with the smallest estimated finish time
    (PE availability vs. data arrival, plus execution), updating the
    availability picture after each commitment. Ties break on lower finish,
    then lower task id, then lower PE id.
    """
    slots = {pe.pe_id: sorted(pe.slot_free_ns) for pe in ctx.pes}
    assignment: Assignment = {}
    pending = sorted(ctx.ready, key=lambda t: (t.job_id, t.task_id))
    while pending:
        best = None
        for task in pending:
            for pe in ctx.pes:
                if not pe.supports(task.kind):
                    continue
                avail = max(slots[pe.pe_id][0], ctx.now_ns)
                est = max(avail, _earliest_data_ns(ctx, task, pe.pe_id))
                eft = est + pe.latency_ns[task.kind]
                key = (eft, task.job_id, task.task_id, pe.pe_id)
                if best is None or key < best[0]:
                    best = (key, task, pe.pe_id, eft)
        if best is None:
            raise _no_candidate(pending[0])
        _, task, pe_id, eft = best
        assignment[task.key] = pe_id
        slot = slots[pe_id]
        slot[0] = eft
        slot.sort()
        pending.remove(task)
    return assignment


class TableScheduler:
    """Static lookup of task to PE mappings, one table per application."""

    def __init__(self, tables: dict[str, dict[int, int]]):
        self.tables = {app: {int(t): int(p) for t, p in table.items()}
                       for app, table in tables.items()}

    def validate_against(self, templates: dict[str, "object"],
                         pe_ids: set[int]) -> None:
        """Check full coverage before a run; missing entries are config errors."""
        for app, template in templates.items():
            table = self.tables.get(app)
            if table is None:
                raise SchedulingError(f"no schedule table for application {app!r}")
            for node in template.nodes:
                if node.task_id not in table:
                    raise SchedulingError(
                        f"table for {app!r} missing task {node.task_id}")
                if table[node.task_id] not in pe_ids:
                    raise SchedulingError(
                        f"table for {app!r} maps task {node.task_id} to "
                        f"unknown PE {table[node.task_id]}")

    def __call__(self, ctx: SchedulingContext) -> Assignment:
        assignment: Assignment = {}
        for task in ctx.ready:
            table = self.tables.get(task.app_name)
            if table is None or task.task_id not in table:
                raise SchedulingError(
                    f"schedule table missing entry for {task.app_name!r} "
                    f"task {task.task_id}")
            assignment[task.key] = table[task.task_id]
        return assignment


def load_tables(path: str | Path) -> dict[str, dict[int, int]]:
    """Read a table file: {app_name: {task_id: pe_id}}."""
    raw = json.loads(Path(path).read_text())
    return {app: {int(t): int(p) for t, p in table.items()}
            for app, table in raw.items()}


def save_tables(tables: dict[str, dict[int, int]], path: str | Path) -> None:
    serializable = {app: {str(t): p for t, p in sorted(table.items())}
                    for app, table in tables.items()}
    Path(path).write_text(json.dumps(serializable, indent=2, sort_keys=True) + "\n")


BUILTIN_SCHEDULERS = {
    "met": met_schedule,
    "etf": etf_schedule,
}
