"""Discrete-event simulation kernel.

Tasks move Outstanding -> Ready -> Executable -> Running -> Completed.
Arrivals and task completions promote successors to the ready queue and
trigger a scheduling epoch; assigned tasks wait in the executable queue
until their data has arrived (latest predecessor finish plus transfer
delay) and a PE slot is free. Assignments are frozen at scheduling time.

All timestamps are integer nanoseconds. The event queue orders by
(time, event-kind rank, job id, task id), so identical inputs replay to
identical ledgers. Task durations and the OPP they were issued at are
frozen at task start; per-epoch energy accounting follows the OPP in
effect during the epoch.
"""
from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass, field

from .apps import AppTemplate
from .metrics import GanttRecord, MetricsLedger, PeUsage
from .power import DtpmController, dynamic_power, static_power
from .resources import (DramModel, NocModel, PeDescriptor, PeRuntimeState,
                        SocConfig, record_blocking_observation, scaled_latency_ns)
from .scheduling import (Assignment, PeSnapshot, ReadyTask, Scheduler,
                         SchedulingContext, SchedulingError)
from .workload import JobSource, WorkloadSpec, next_arrival

# Event kind ranks; ties at one timestamp process in this order.
EV_ARRIVAL = 0
EV_FINISH = 1
EV_WAKE = 2
EV_EPOCH = 3
EV_END = 4

_EVENT_NAMES = {EV_ARRIVAL: "job-arrival", EV_FINISH: "task-finish",
                EV_WAKE: "task-eligible", EV_EPOCH: "dtpm-epoch",
                EV_END: "sim-end"}

OUTSTANDING = 0
READY = 1
EXECUTABLE = 2
RUNNING = 3
COMPLETED = 4


class SimulationError(Exception):
    """Fatal inconsistency while running (bad scheduler output, etc.)."""


def communication_delay_ns(noc: NocModel, src_pe: int, dst_pe: int,
                           volume_bytes: int, load: float) -> int:
    """Transfer delay for one edge. Same-PE data reuse costs nothing."""
    if src_pe == dst_pe:
        return 0
    return noc.transfer_ns(volume_bytes, load)


class MemorySlidingWindow:
    """Outstanding memory traffic over a trailing window.

    Bandwidth is total bytes recorded inside the window divided by the
    window length; the DRAM table maps that bandwidth to a latency penalty
    added to task execution time.
    """

    def __init__(self, dram: DramModel):
        self.dram = dram
        self._records: deque[tuple[int, int]] = deque()
        self._bytes = 0

    def _evict(self, now_ns: int) -> None:
        horizon = now_ns - self.dram.window_ns
        while self._records and self._records[0][0] < horizon:
            _, volume = self._records.popleft()
            self._bytes -= volume

    def record(self, now_ns: int, volume_bytes: int) -> None:
        if volume_bytes <= 0:
            return
        self._evict(now_ns)
        self._records.append((now_ns, volume_bytes))
        self._bytes += volume_bytes

    def bandwidth_bytes_per_us(self, now_ns: int) -> float:
        self._evict(now_ns)
        return self._bytes * 1000.0 / self.dram.window_ns

    def latency_ns(self, now_ns: int) -> tuple[int, bool]:
        return self.dram.latency_ns(self.bandwidth_bytes_per_us(now_ns))


@dataclass
class QueueSet:
    """Task life-cycle bookkeeping for one job."""

    remaining_preds: dict[int, int]
    state: dict[int, int]

    @classmethod
    def for_template(cls, template: AppTemplate) -> "QueueSet":
        remaining = {n.task_id: len(template.predecessors[n.task_id])
                     for n in template.nodes}
        state = {n.task_id: OUTSTANDING if remaining[n.task_id] else READY
                 for n in template.nodes}
        return cls(remaining_preds=remaining, state=state)


def promote_ready(queues: QueueSet, template: AppTemplate,
                  completed_task: int) -> list[int]:
    """Mark a task completed; returns successors that just became ready."""
    queues.state[completed_task] = COMPLETED
    newly_ready = []
    for succ, _ in template.successors[completed_task]:
        queues.remaining_preds[succ] -= 1
        if queues.remaining_preds[succ] == 0:
            queues.state[succ] = READY
            newly_ready.append(succ)
    return newly_ready


@dataclass
class _JobRun:
    job_id: int
    app_name: str
    template: AppTemplate
    arrival_ns: int
    queues: QueueSet
    unfinished: int
    pe_of: dict[int, int] = field(default_factory=dict)
    finish_of: dict[int, int] = field(default_factory=dict)
    ready_at: dict[int, int] = field(default_factory=dict)


@dataclass
class _PendingTask:
    job_id: int
    task_id: int
    elig_ns: int
    dur_est_ns: int


class Simulation:
    """One deterministic, single-threaded simulation run."""

    def __init__(self, soc: SocConfig, workload: WorkloadSpec,
                 scheduler: Scheduler, scheduler_name: str = "custom",
                 governor_override: str | None = None,
                 templates: dict[str, AppTemplate] | None = None,
                 collect_events: bool = False,
                 ondemand_thresholds: tuple[float, float] = (0.3, 0.8)):
        self.soc = soc
        self.workload = workload
        self.scheduler = scheduler
        self.templates = templates or {}
        self.collect_events = collect_events

        self.dtpm = DtpmController(soc, governor_override=governor_override,
                                   ondemand_thresholds=ondemand_thresholds)
        self.ledger = MetricsLedger(
            soc_name=soc.name, scheduler_name=scheduler_name,
            governor_name=governor_override or "per-pe", seed=workload.seed)
        self.events = self.ledger.trace_events

        self._rt: dict[int, PeRuntimeState] = {}
        self._pending: dict[int, list[_PendingTask]] = {}
        self._running: dict[int, dict[tuple[int, int], int]] = {}
        self._epoch_busy_snapshot: dict[int, int] = {}
        self._prev_epoch_util: dict[int, float] = {}
        for pe in soc.pes:
            rt = PeRuntimeState(pe=pe, opp_index=self.dtpm.initial_index(pe))
            self._rt[pe.pe_id] = rt
            self._pending[pe.pe_id] = []
            self._running[pe.pe_id] = {}
            self._epoch_busy_snapshot[pe.pe_id] = 0
            self._prev_epoch_util[pe.pe_id] = 0.0
            self.ledger.pe_usage[pe.pe_id] = PeUsage()
            self.ledger.pe_capacity[pe.pe_id] = pe.capacity
            self.ledger.pe_cluster[pe.pe_id] = pe.cluster

        self._latency_cache: dict[tuple[int, str, int], int] = {}
        self._memory = MemorySlidingWindow(soc.dram)
        self._transfers: list[int] = []   # heap of in-flight transfer end times
        self._jobs: dict[int, _JobRun] = {}
        self._ready: list[tuple[int, int]] = []
        self._heap: list[tuple] = []
        self._seq = 0
        self._now = 0
        self._last_epoch_ns = 0
        self._epoch_scheduled = False
        self._end_ns: int | None = None
        if workload.duration_us is not None:
            self._end_ns = round(workload.duration_us * 1000)
        self._source = JobSource(workload)
        self._pending_arrival = None
        self._candidate_cache: dict[str, list[int]] = {}

    # -- event plumbing ----------------------------------------------------

    def _push(self, t_ns: int, kind: int, job_id: int = -1, task_id: int = -1):
        self._seq += 1
        heapq.heappush(self._heap, (t_ns, kind, job_id, task_id, self._seq))

    def _trace(self, t_ns: int, kind_name: str, job_id=-1, task_id=-1, pe=-1, opp=-1):
        if self.collect_events:
            self.events.append((t_ns, kind_name, job_id, task_id, pe, opp))

    # -- model helpers -----------------------------------------------------

    def _scaled(self, pe: PeDescriptor, kind: str, opp_index: int) -> int:
        key = (pe.pe_id, kind, opp_index)
        ns = self._latency_cache.get(key)
        if ns is None:
            ns = scaled_latency_ns(pe, kind, opp_index)
            self._latency_cache[key] = ns
        return ns

    def _noc_load(self, now_ns: int) -> float:
        while self._transfers and self._transfers[0] <= now_ns:
            heapq.heappop(self._transfers)
        return min(1.0, len(self._transfers) / self.soc.noc.link_capacity)

    def _comm_delay(self, src_pe: int, dst_pe: int, volume: int) -> int:
        return communication_delay_ns(self.soc.noc, src_pe, dst_pe, volume,
                                      self._noc_load(self._now))

    def _template_for(self, app_name: str) -> AppTemplate:
        template = self.templates.get(app_name)
        if template is None:
            from .apps import build_benchmark
            template = build_benchmark(app_name)
            self.templates[app_name] = template
        return template

    def _candidates(self, kind: str) -> list[int]:
        pe_ids = self._candidate_cache.get(kind)
        if pe_ids is None:
            pe_ids = [pe.pe_id for pe in self.soc.pes if pe.supports(kind)]
            self._candidate_cache[kind] = pe_ids
        return pe_ids

    # -- lifecycle ---------------------------------------------------------

    def _inject(self, job) -> None:
        template = self._template_for(job.app_name)
        run = _JobRun(job_id=job.job_id, app_name=job.app_name,
                      template=template, arrival_ns=job.arrival_ns,
                      queues=QueueSet.for_template(template),
                      unfinished=template.size)
        self._jobs[job.job_id] = run
        self.ledger.jobs_injected += 1
        self._trace(job.arrival_ns, "job-arrival", job.job_id)
        for task_id in template.entries():
            self._mark_ready(run, task_id, job.arrival_ns)

    def _mark_ready(self, run: _JobRun, task_id: int, now_ns: int) -> None:
        run.ready_at[task_id] = now_ns
        self._ready.append((run.job_id, task_id))
        kind = run.template.kind_of(task_id)
        for pe_id in self._candidates(kind):
            rt = self._rt[pe_id]
            busy = rt.busy_slots >= rt.pe.capacity
            record_blocking_observation(rt, busy)

    def _windowed_utilization(self, pe_id: int) -> float:
        rt = self._rt[pe_id]
        t0 = self._last_epoch_ns
        if self._now <= t0:
            return self._prev_epoch_util[pe_id]
        rt.accumulate_busy(self._now)
        span = (self._now - t0) * rt.pe.capacity
        return min(1.0, (rt.busy_ns - self._epoch_busy_snapshot[pe_id]) / span)

    def _build_context(self) -> SchedulingContext:
        ready_tasks = []
        ready_kinds = set()
        for job_id, task_id in sorted(self._ready):
            run = self._jobs[job_id]
            kind = run.template.kind_of(task_id)
            ready_kinds.add(kind)
            preds = tuple(
                (run.pe_of[src], run.finish_of[src], volume)
                for src, volume in run.template.predecessors[task_id])
            ready_tasks.append(ReadyTask(
                job_id=job_id, task_id=task_id, app_name=run.app_name,
                kind=kind, arrival_ns=run.arrival_ns,
                ready_ns=run.ready_at[task_id], preds=preds))

        snapshots = []
        for pe in self.soc.pes:
            rt = self._rt[pe.pe_id]
            latency = {}
            for kind in ready_kinds:
                if pe.supports(kind):
                    latency[kind] = self._scaled(pe, kind, rt.opp_index)
            slots = [self._now] * pe.capacity
            for i, finish in enumerate(sorted(self._running[pe.pe_id].values())):
                if i < pe.capacity:
                    slots[i] = max(self._now, finish)
            # Fold queued-but-unstarted tasks into the availability estimate
            # in the order the start discipline will issue them.
            for p in sorted(self._pending[pe.pe_id],
                            key=lambda p: (p.elig_ns, p.job_id, p.task_id)):
                slots.sort()
                start = max(p.elig_ns, slots[0], self._now)
                slots[0] = start + p.dur_est_ns
            blocking, _ = rt.blocking()
            snapshots.append(PeSnapshot(
                pe_id=pe.pe_id, capacity=pe.capacity, opp_index=rt.opp_index,
                latency_ns=latency, slot_free_ns=tuple(sorted(slots)),
                occupied_slots=rt.busy_slots + len(self._pending[pe.pe_id]),
                utilization=self._windowed_utilization(pe.pe_id),
                blocking=blocking))

        return SchedulingContext(now_ns=self._now, ready=tuple(ready_tasks),
                                 pes=tuple(snapshots),
                                 comm_delay_ns=self._comm_delay)

    def _apply_assignment(self, assignment: Assignment) -> None:
        ready_set = set(self._ready)
        for key, pe_id in sorted(assignment.items()):
            if key not in ready_set:
                raise SimulationError(f"scheduler assigned non-ready task {key}")
            job_id, task_id = key
            run = self._jobs[job_id]
            kind = run.template.kind_of(task_id)
            if pe_id not in self._rt:
                raise SchedulingError(
                    f"scheduler mapped job {job_id} task {task_id} to unknown PE {pe_id}")
            pe = self._rt[pe_id].pe
            if not pe.supports(kind):
                raise SchedulingError(
                    f"scheduler mapped task kind {kind!r} (job {job_id}, "
                    f"task {task_id}) to PE {pe_id} which does not support it")

            elig = run.ready_at[task_id]
            for src, volume in run.template.predecessors[task_id]:
                delay = self._comm_delay(run.pe_of[src], pe_id, volume)
                arrival = run.finish_of[src] + delay
                elig = max(elig, arrival)
                if run.pe_of[src] != pe_id and arrival > self._now:
                    heapq.heappush(self._transfers, arrival)

            dur_est = self._scaled(pe, kind, self._rt[pe_id].opp_index)
            self._pending[pe_id].append(_PendingTask(job_id, task_id, elig, dur_est))
            run.queues.state[task_id] = EXECUTABLE
            run.pe_of[task_id] = pe_id
            self._ready.remove(key)
            if elig > self._now:
                self._push(elig, EV_WAKE, job_id, task_id)

    def _start_phase(self) -> None:
        for pe in self.soc.pes:
            pe_id = pe.pe_id
            pending = self._pending[pe_id]
            if not pending:
                continue
            rt = self._rt[pe_id]
            while rt.busy_slots < pe.capacity:
                eligible = [p for p in pending if p.elig_ns <= self._now]
                if not eligible:
                    break
                chosen = min(eligible, key=lambda p: (p.job_id, p.task_id))
                pending.remove(chosen)
                self._start_task(chosen, pe)

    def _start_task(self, pending: _PendingTask, pe: PeDescriptor) -> None:
        run = self._jobs[pending.job_id]
        task_id = pending.task_id
        kind = run.template.kind_of(task_id)
        rt = self._rt[pe.pe_id]

        in_bytes = sum(v for _, v in run.template.predecessors[task_id])
        mem_ns, saturated = self._memory.latency_ns(self._now)
        if saturated:
            self.ledger.dram_saturation_count += 1
        self._memory.record(self._now, in_bytes)

        dur = self._scaled(pe, kind, rt.opp_index) + mem_ns
        start = self._now
        finish = start + dur

        rt.accumulate_busy(start)
        rt.busy_slots += 1
        run.queues.state[task_id] = RUNNING
        self._running[pe.pe_id][(pending.job_id, task_id)] = finish
        self.ledger.gantt.append(GanttRecord(pending.job_id, task_id, pe.pe_id,
                                             start, finish, rt.opp_index))
        self._trace(start, "task-start", pending.job_id, task_id, pe.pe_id,
                    rt.opp_index)
        self._push(finish, EV_FINISH, pending.job_id, task_id)

    def _finish_task(self, job_id: int, task_id: int) -> None:
        run = self._jobs[job_id]
        pe_id = run.pe_of[task_id]
        rt = self._rt[pe_id]
        rt.accumulate_busy(self._now)
        rt.busy_slots -= 1
        del self._running[pe_id][(job_id, task_id)]
        run.finish_of[task_id] = self._now
        run.unfinished -= 1

        out_bytes = sum(v for _, v in run.template.successors[task_id])
        self._memory.record(self._now, out_bytes)

        self._trace(self._now, "task-finish", job_id, task_id, pe_id,
                    rt.opp_index)
        for succ in promote_ready(run.queues, run.template, task_id):
            self._mark_ready(run, succ, self._now)
        if run.unfinished == 0:
            self.ledger.jobs_completed += 1
            self.ledger.job_records.append(
                (job_id, run.app_name, run.arrival_ns, self._now))
            del self._jobs[job_id]

    # -- power, thermal, governors ------------------------------------------

    def _fold_epoch_energy(self, t_end_ns: int) -> None:
        """Accrue dynamic and static energy over [last_epoch, t_end]."""
        dt_ns = t_end_ns - self._last_epoch_ns
        if dt_ns <= 0:
            return
        dt_us = dt_ns / 1000.0
        dt_s = dt_ns * 1e-9
        cluster_power: dict[str, float] = {c: 0.0 for c in self.dtpm.clusters}
        for pe in self.soc.pes:
            rt = self._rt[pe.pe_id]
            rt.accumulate_busy(t_end_ns)
            busy_ns = rt.busy_ns - self._epoch_busy_snapshot[pe.pe_id]
            busy_fraction = busy_ns / (dt_ns * pe.capacity)
            opp = pe.opps[rt.opp_index]
            p_dyn = dynamic_power(pe.power, opp,
                                  busy_fraction * pe.power.activity * pe.capacity)
            temp = self.dtpm.temperature(pe.cluster)
            p_static = static_power(pe.power, opp.voltage_v, temp)
            usage = self.ledger.pe_usage[pe.pe_id]
            usage.dynamic_j += p_dyn * dt_s
            usage.static_j += p_static * dt_s
            usage.util_samples.append((t_end_ns, busy_fraction))
            cluster_power[pe.cluster] += p_dyn + p_static
            self.ledger.power_trace.append(
                (t_end_ns, pe.pe_id, p_dyn, p_static, temp, rt.opp_index))
            rt.window_samples.append((busy_ns, dt_ns))
            self._prev_epoch_util[pe.pe_id] = busy_fraction
            self._epoch_busy_snapshot[pe.pe_id] = rt.busy_ns
        for cluster, power_w in cluster_power.items():
            temp = self.dtpm.step_cluster(cluster, power_w, dt_us)
            self.ledger.temp_trace.append(
                (t_end_ns, cluster, temp, self.dtpm.is_throttled(cluster)))
        self._last_epoch_ns = t_end_ns

    def _dtpm_epoch(self) -> None:
        self._fold_epoch_energy(self._now)
        for pe in self.soc.pes:
            rt = self._rt[pe.pe_id]
            util = self._prev_epoch_util[pe.pe_id]
            new_index = self.dtpm.next_index(pe, rt.opp_index, util)
            if new_index != rt.opp_index:
                rt.opp_index = new_index
            self._trace(self._now, "dtpm-epoch", -1, -1, pe.pe_id, rt.opp_index)

    def _work_remains(self) -> bool:
        return self._pending_arrival is not None or bool(self._jobs)

    # -- main loop -----------------------------------------------------------

    def run(self) -> MetricsLedger:
        epoch_ns = self.soc.dtpm_epoch_ns
        self._pending_arrival = next_arrival(self._source)
        if self._pending_arrival is not None:
            self._push(self._pending_arrival.arrival_ns, EV_ARRIVAL,
                       self._pending_arrival.job_id)
            self._push(epoch_ns, EV_EPOCH)
        if self._end_ns is not None:
            self._push(self._end_ns, EV_END)

        last_activity = 0
        stopped = False
        while self._heap and not stopped:
            t = self._heap[0][0]
            if t < self._now:
                raise SimulationError("event time went backwards")
            self._now = t
            needs_schedule = False
            saw_epoch = False
            while self._heap and self._heap[0][0] == t:
                _, kind, job_id, task_id, _ = heapq.heappop(self._heap)
                self.ledger.events_processed += 1
                if kind == EV_ARRIVAL:
                    self._inject(self._pending_arrival)
                    needs_schedule = True
                    last_activity = t
                    self._pending_arrival = next_arrival(self._source)
                    if self._pending_arrival is not None:
                        self._push(self._pending_arrival.arrival_ns, EV_ARRIVAL,
                                   self._pending_arrival.job_id)
                elif kind == EV_FINISH:
                    self._finish_task(job_id, task_id)
                    needs_schedule = True
                    last_activity = t
                elif kind == EV_WAKE:
                    pass  # start phase below picks it up
                elif kind == EV_EPOCH:
                    # Epochs after the last job drained carry no information;
                    # drop them so drain-mode end time tracks real activity.
                    if self._work_remains():
                        self._dtpm_epoch()
                        saw_epoch = True
                elif kind == EV_END:
                    stopped = True
                    break
            if stopped:
                break
            if needs_schedule and self._ready:
                ctx = self._build_context()
                assignment = self.scheduler(ctx)
                self._apply_assignment(assignment)
            self._start_phase()
            if saw_epoch and self._work_remains():
                self._push(self._now + epoch_ns, EV_EPOCH)

        if self._end_ns is not None and stopped:
            self._now = self._end_ns
        else:
            self._now = last_activity
        self.ledger.sim_end_ns = self._now
        self._fold_epoch_energy(self._now)
        self.ledger.jobs_in_flight = self.ledger.jobs_injected - self.ledger.jobs_completed
        for pe_id, rt in self._rt.items():
            usage = self.ledger.pe_usage[pe_id]
            rt.accumulate_busy(self._now)
            usage.busy_ns = rt.busy_ns
            usage.busy_when_ready = rt.busy_when_ready
            usage.ready_observations = rt.ready_observations
        self._trace(self._now, "sim-end")
        return self.ledger


def run(soc: SocConfig, workload: WorkloadSpec, scheduler: Scheduler,
        scheduler_name: str = "custom", governor_override: str | None = None,
        templates: dict[str, AppTemplate] | None = None,
        collect_events: bool = False) -> MetricsLedger:
    """Convenience wrapper: build a Simulation and run it to completion."""
    sim = Simulation(soc, workload, scheduler, scheduler_name=scheduler_name,
                     governor_override=governor_override, templates=templates,
                     collect_events=collect_events)
    return sim.run()


def run_single_job(soc: SocConfig, template: AppTemplate, scheduler: Scheduler,
                   scheduler_name: str = "custom",
                   governor_override: str | None = "performance"
                   ) -> tuple[int, MetricsLedger]:
    """Simulate one job of `template` arriving at t=0; returns (makespan_ns, ledger).

    Runs under the performance governor by default so latency profiles apply
    at the reference OPP.
    """
    spec = WorkloadSpec(mixture=((template.name, 1.0),), rate_jobs_per_ms=1000.0,
                        jobs=1, seed=0, distribution="fixed")
    ledger = run(soc, spec, scheduler, scheduler_name=scheduler_name,
                 governor_override=governor_override,
                 templates={template.name: template})
    if not ledger.job_records:
        raise SimulationError("single job did not complete")
    _, _, arrival, finish = ledger.job_records[0]
    return finish - arrival, ledger
