"""Offline schedule-table construction and fixed-assignment evaluation.

Small single-job instances are solved exactly by enumerating every
task-to-PE assignment and simulating each one; larger instances start from
the assignments the built-in schedulers realize and hill-climb on the
worst-finishing tasks. Either way the result is a lookup table for the
table-based scheduler.

Evaluating millions of candidate assignments is the one hot numeric loop in
the package. Two interchangeable backends implement it:

* ``numba``: an @njit greedy list-scheduling kernel (default when numba is
  importable),
* ``numpy``: a batched vectorized twin used as a fallback.

Select explicitly with the ``DSSIM_BACKEND`` environment variable
(``numba`` or ``numpy``); ``benchmarks/bench_oracle.py`` compares the two.

The evaluator reproduces the kernel's single-job semantics: tasks start in
chronological order, each on its assigned PE as soon as its data has
arrived and a slot is free, ties resolved by task id. Transfer and memory
penalties are taken at zero load, which matches the kernel exactly under
load-invariant (flat) NoC/DRAM tables such as the bundled configurations.
"""
from __future__ import annotations

import itertools
import os
from dataclasses import dataclass

import numpy as np

from .apps import AppTemplate
from .resources import SocConfig, scaled_latency_ns

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn
        return wrap(args[0]) if args and callable(args[0]) else wrap


_UNSUPPORTED = np.int64(1) << 60
_INF = np.int64(1) << 62

BACKENDS = ("numba", "numpy")


class OracleLimitError(Exception):
    """Instance too large for exhaustive search."""


class BackendError(Exception):
    """Unknown or unavailable evaluation backend."""


@dataclass(frozen=True)
class OracleLimits:
    max_tasks: int = 12
    max_pes: int = 4


DEFAULT_LIMITS = OracleLimits()


def active_backend(backend: str | None = None) -> str:
    """Resolve the evaluation backend: argument, env flag, then default."""
    name = backend or os.environ.get("DSSIM_BACKEND")
    if name is None:
        name = "numba" if HAS_NUMBA else "numpy"
    if name not in BACKENDS:
        raise BackendError(f"unknown backend {name!r}; choose from {BACKENDS}")
    if name == "numba" and not HAS_NUMBA:
        raise BackendError("numba backend requested but numba is not importable")
    return name


@dataclass(frozen=True)
class Instance:
    """Flattened single-job scheduling instance for the evaluators."""

    n_tasks: int
    n_pes: int
    dur: np.ndarray        # (n, P) int64 exec ns at max OPP (+ memory penalty)
    succ_ptr: np.ndarray   # (n+1,) int64 CSR offsets into succ arrays
    succ_task: np.ndarray  # (E,) int64
    succ_comm: np.ndarray  # (E,) int64 cross-PE transfer ns at zero load
    preds0: np.ndarray     # (n,) int64 predecessor counts
    caps: np.ndarray       # (P,) int64
    allowed: tuple[tuple[int, ...], ...]   # PE indices per task
    pe_ids: tuple[int, ...]                # PE index -> configured id
    key_mult: int


def build_instance(template: AppTemplate, soc: SocConfig) -> Instance:
    n = template.size
    pes = soc.pes
    P = len(pes)
    mem_ns = soc.dram.latency_ns(0.0)[0]
    dur = np.full((n, P), _UNSUPPORTED, dtype=np.int64)
    allowed = []
    for node in template.nodes:
        options = []
        for j, pe in enumerate(pes):
            if pe.supports(node.kind):
                dur[node.task_id, j] = (
                    scaled_latency_ns(pe, node.kind, pe.max_opp_index) + mem_ns)
                options.append(j)
        if not options:
            raise ValueError(f"no PE supports task kind {node.kind!r}")
        allowed.append(tuple(options))

    base_noc = soc.noc.latency_ns(0.0)
    succ_ptr = np.zeros(n + 1, dtype=np.int64)
    succ_task = []
    succ_comm = []
    for t in range(n):
        for s, volume in template.successors[t]:
            succ_task.append(s)
            succ_comm.append((volume * 1000) // soc.noc.bandwidth_bytes_per_us
                             + base_noc)
        succ_ptr[t + 1] = len(succ_task)
    preds0 = np.array([len(template.predecessors[t]) for t in range(n)],
                      dtype=np.int64)
    return Instance(
        n_tasks=n, n_pes=P, dur=dur, succ_ptr=succ_ptr,
        succ_task=np.array(succ_task, dtype=np.int64),
        succ_comm=np.array(succ_comm, dtype=np.int64),
        preds0=preds0,
        caps=np.array([pe.capacity for pe in pes], dtype=np.int64),
        allowed=tuple(allowed),
        pe_ids=tuple(pe.pe_id for pe in pes),
        key_mult=1 << n.bit_length(),
    )


# -- numba backend ----------------------------------------------------------

@njit(cache=True)
def _greedy_makespan_jit(dur, succ_ptr, succ_task, succ_comm, preds0, caps,
                         maxcap, assign, key_mult, finish_out):
    n = dur.shape[0]
    P = caps.shape[0]
    slots = np.zeros((P, maxcap), dtype=np.int64)
    for p in range(P):
        for s in range(caps[p], maxcap):
            slots[p, s] = _INF
    elig = np.zeros(n, dtype=np.int64)
    preds_left = preds0.copy()
    committed = np.zeros(n, dtype=np.uint8)
    makespan = np.int64(0)
    for _ in range(n):
        best_key = _INF
        best_t = -1
        best_est = np.int64(0)
        for t in range(n):
            if committed[t] == 1 or preds_left[t] > 0:
                continue
            p = assign[t]
            m = slots[p, 0]
            for s in range(1, caps[p]):
                if slots[p, s] < m:
                    m = slots[p, s]
            est = elig[t]
            if m > est:
                est = m
            key = est * key_mult + t
            if key < best_key:
                best_key = key
                best_t = t
                best_est = est
        t = best_t
        p = assign[t]
        smin = 0
        m = slots[p, 0]
        for s in range(1, caps[p]):
            if slots[p, s] < m:
                m = slots[p, s]
                smin = s
        fin = best_est + dur[t, p]
        slots[p, smin] = fin
        committed[t] = 1
        finish_out[t] = fin
        if fin > makespan:
            makespan = fin
        for e in range(succ_ptr[t], succ_ptr[t + 1]):
            s2 = succ_task[e]
            preds_left[s2] -= 1
            cand = fin
            if assign[s2] != p:
                cand = fin + succ_comm[e]
            if cand > elig[s2]:
                elig[s2] = cand
    return makespan


@njit(cache=True)
def _eval_batch_jit(dur, succ_ptr, succ_task, succ_comm, preds0, caps, maxcap,
                    assigns, key_mult):
    B = assigns.shape[0]
    out = np.empty(B, dtype=np.int64)
    finish = np.empty(assigns.shape[1], dtype=np.int64)
    for b in range(B):
        out[b] = _greedy_makespan_jit(dur, succ_ptr, succ_task, succ_comm,
                                      preds0, caps, maxcap, assigns[b],
                                      key_mult, finish)
    return out


@njit(cache=True)
def _exhaustive_jit(dur, succ_ptr, succ_task, succ_comm, preds0, caps, maxcap,
                    allowed_ptr, allowed_flat, key_mult):
    n = dur.shape[0]
    idx = np.zeros(n, dtype=np.int64)
    assign = np.empty(n, dtype=np.int64)
    for t in range(n):
        assign[t] = allowed_flat[allowed_ptr[t]]
    best = _INF
    best_assign = assign.copy()
    finish = np.empty(n, dtype=np.int64)
    while True:
        mk = _greedy_makespan_jit(dur, succ_ptr, succ_task, succ_comm, preds0,
                                  caps, maxcap, assign, key_mult, finish)
        if mk < best:
            best = mk
            best_assign[:] = assign
        k = n - 1
        while k >= 0:
            idx[k] += 1
            if allowed_ptr[k] + idx[k] < allowed_ptr[k + 1]:
                assign[k] = allowed_flat[allowed_ptr[k] + idx[k]]
                break
            idx[k] = 0
            assign[k] = allowed_flat[allowed_ptr[k]]
            k -= 1
        if k < 0:
            break
    return best, best_assign


# -- numpy backend ----------------------------------------------------------

def _eval_batch_numpy(inst: Instance, assigns: np.ndarray
                      ) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized greedy evaluation of a batch; returns (makespans, finishes)."""
    B, n = assigns.shape
    maxcap = int(inst.caps.max())
    P = inst.n_pes
    succs = [[] for _ in range(n)]
    for t in range(n):
        for e in range(inst.succ_ptr[t], inst.succ_ptr[t + 1]):
            succs[t].append((int(inst.succ_task[e]), int(inst.succ_comm[e])))

    slots = np.zeros((B, P, maxcap), dtype=np.int64)
    for p in range(P):
        slots[:, p, int(inst.caps[p]):] = _INF
    elig = np.zeros((B, n), dtype=np.int64)
    preds_left = np.tile(inst.preds0, (B, 1))
    committed = np.zeros((B, n), dtype=bool)
    finish = np.zeros((B, n), dtype=np.int64)
    task_ids = np.arange(n, dtype=np.int64)
    bindex = np.arange(B)

    for _ in range(n):
        slot_min = slots.min(axis=2)
        avail = np.take_along_axis(slot_min, assigns, axis=1)
        est = np.maximum(elig, avail)
        key = np.where(~committed & (preds_left == 0),
                       est * inst.key_mult + task_ids, _INF)
        j = key.argmin(axis=1)
        p_j = assigns[bindex, j]
        est_j = est[bindex, j]
        fin_j = est_j + inst.dur[j, p_j]
        finish[bindex, j] = fin_j
        committed[bindex, j] = True
        slot_rows = slots[bindex, p_j]
        s_idx = slot_rows.argmin(axis=1)
        slots[bindex, p_j, s_idx] = fin_j
        for u in np.unique(j):
            mask = j == u
            if not succs[u]:
                continue
            a_u = assigns[mask, u]
            f_u = fin_j[mask]
            for s, comm in succs[u]:
                preds_left[mask, s] -= 1
                cand = f_u + np.where(assigns[mask, s] != a_u, comm, 0)
                elig[mask, s] = np.maximum(elig[mask, s], cand)
    return finish.max(axis=1), finish


def evaluate_batch(inst: Instance, assigns: np.ndarray,
                   backend: str | None = None) -> np.ndarray:
    """Makespans (ns) for a batch of assignments given as PE indices."""
    assigns = np.ascontiguousarray(assigns, dtype=np.int64)
    if active_backend(backend) == "numba":
        return _eval_batch_jit(inst.dur, inst.succ_ptr, inst.succ_task,
                               inst.succ_comm, inst.preds0, inst.caps,
                               int(inst.caps.max()), assigns, inst.key_mult)
    return _eval_batch_numpy(inst, assigns)[0]


def evaluate_with_finishes(inst: Instance, assign: np.ndarray,
                           backend: str | None = None
                           ) -> tuple[int, np.ndarray]:
    assign = np.ascontiguousarray(assign, dtype=np.int64)
    if active_backend(backend) == "numba":
        finish = np.empty(inst.n_tasks, dtype=np.int64)
        mk = _greedy_makespan_jit(inst.dur, inst.succ_ptr, inst.succ_task,
                                  inst.succ_comm, inst.preds0, inst.caps,
                                  int(inst.caps.max()), assign, inst.key_mult,
                                  finish)
        return int(mk), finish
    mks, finishes = _eval_batch_numpy(inst, assign[None, :])
    return int(mks[0]), finishes[0]


def _check_assignment(inst: Instance, assign: np.ndarray) -> None:
    for t in range(inst.n_tasks):
        if assign[t] not in inst.allowed[t]:
            raise ValueError(f"task {t} assigned to PE index {int(assign[t])} "
                             f"which does not support it")


def evaluate_assignment(template: AppTemplate, soc: SocConfig,
                        table: dict[int, int],
                        backend: str | None = None) -> int:
    """Makespan (ns) of one task_id -> pe_id table under single-job semantics."""
    inst = build_instance(template, soc)
    index_of = {pe_id: i for i, pe_id in enumerate(inst.pe_ids)}
    assign = np.array([index_of[table[t]] for t in range(inst.n_tasks)],
                      dtype=np.int64)
    _check_assignment(inst, assign)
    return int(evaluate_batch(inst, assign[None, :], backend=backend)[0])


def _exhaustive_numpy(inst: Instance, chunk: int = 65536
                      ) -> tuple[int, np.ndarray]:
    best_mk = int(_INF)
    best_assign = None
    product = itertools.product(*inst.allowed)
    while True:
        rows = list(itertools.islice(product, chunk))
        if not rows:
            break
        arr = np.array(rows, dtype=np.int64)
        mks, _ = _eval_batch_numpy(inst, arr)
        i = int(mks.argmin())
        if int(mks[i]) < best_mk:
            best_mk = int(mks[i])
            best_assign = arr[i].copy()
    return best_mk, best_assign


def oracle_optimal_table(template: AppTemplate, soc: SocConfig,
                         limits: OracleLimits = DEFAULT_LIMITS,
                         backend: str | None = None
                         ) -> tuple[dict[int, int], int]:
    """Exhaustive minimum-makespan table for a small single-job instance.

    Refuses instances beyond `limits`. Ties resolve to the lexicographically
    smallest assignment vector.
    """
    if template.size > limits.max_tasks or len(soc.pes) > limits.max_pes:
        raise OracleLimitError(
            f"instance ({template.size} tasks, {len(soc.pes)} PEs) exceeds "
            f"exhaustive bounds ({limits.max_tasks} tasks, {limits.max_pes} PEs)")
    inst = build_instance(template, soc)
    if active_backend(backend) == "numba":
        allowed_flat = np.array([p for opts in inst.allowed for p in opts],
                                dtype=np.int64)
        allowed_ptr = np.zeros(inst.n_tasks + 1, dtype=np.int64)
        for t, opts in enumerate(inst.allowed):
            allowed_ptr[t + 1] = allowed_ptr[t] + len(opts)
        mk, assign = _exhaustive_jit(inst.dur, inst.succ_ptr, inst.succ_task,
                                     inst.succ_comm, inst.preds0, inst.caps,
                                     int(inst.caps.max()), allowed_ptr,
                                     allowed_flat, inst.key_mult)
        mk = int(mk)
    else:
        mk, assign = _exhaustive_numpy(inst)
    table = {t: inst.pe_ids[int(assign[t])] for t in range(inst.n_tasks)}
    return table, mk


def _pred_lists(inst: Instance) -> list[list[int]]:
    preds: list[list[int]] = [[] for _ in range(inst.n_tasks)]
    for t in range(inst.n_tasks):
        for e in range(inst.succ_ptr[t], inst.succ_ptr[t + 1]):
            preds[int(inst.succ_task[e])].append(t)
    return preds


def refine_assignment(inst: Instance, assign: np.ndarray, rounds: int = 12,
                      top_k: int = 24, backend: str | None = None
                      ) -> tuple[np.ndarray, int]:
    """Deterministic best-move hill climbing.

    Each round reassigns one task; candidates are the latest-finishing tasks
    together with their direct predecessors (stragglers are often cheap
    join/tail tasks whose late start is caused upstream).
    """
    preds = _pred_lists(inst)
    best = np.ascontiguousarray(assign, dtype=np.int64).copy()
    best_mk, finishes = evaluate_with_finishes(inst, best, backend=backend)
    for _ in range(rounds):
        order = sorted(range(inst.n_tasks), key=lambda t: (-finishes[t], t))
        move_tasks: list[int] = []
        seen: set[int] = set()
        for t in order[:top_k]:
            for cand in (t, *preds[t]):
                if cand not in seen:
                    seen.add(cand)
                    move_tasks.append(cand)
            if len(move_tasks) >= 2 * top_k:
                break
        moves = [(t, p) for t in move_tasks for p in inst.allowed[t]
                 if p != best[t]]
        if not moves:
            break
        batch = np.tile(best, (len(moves), 1))
        for i, (t, p) in enumerate(moves):
            batch[i, t] = p
        mks = evaluate_batch(inst, batch, backend=backend)
        i_best = int(mks.argmin())
        if int(mks[i_best]) >= best_mk:
            break
        best = batch[i_best].copy()
        best_mk, finishes = evaluate_with_finishes(inst, best, backend=backend)
    return best, best_mk


def capture_assignment(template: AppTemplate, soc: SocConfig,
                       scheduler, scheduler_name: str = "capture"
                       ) -> tuple[dict[int, int], int]:
    """Run one job under a live scheduler; return its realized table and
    kernel makespan."""
    from .kernel import run_single_job

    makespan, ledger = run_single_job(soc, template, scheduler,
                                      scheduler_name=scheduler_name)
    table = {g.task_id: g.pe_id for g in ledger.gantt}
    return table, makespan


def simulate_table(template: AppTemplate, soc: SocConfig,
                   table: dict[int, int]) -> int:
    """Kernel makespan (ns) of a fixed table replayed on a single job."""
    from .kernel import run_single_job
    from .scheduling import TableScheduler

    scheduler = TableScheduler({template.name: table})
    makespan, _ = run_single_job(soc, template, scheduler,
                                 scheduler_name="table")
    return makespan


def build_scheduler_table(template: AppTemplate, soc: SocConfig,
                          limits: OracleLimits = DEFAULT_LIMITS,
                          backend: str | None = None, rounds: int = 12,
                          top_k: int = 24) -> tuple[dict[int, int], int, str]:
    """Best-effort optimal table for any instance size.

    Within the exhaustive bounds this is the enumerated optimum. Beyond
    them, the table starts from the better of the assignments MET and ETF
    realize on an idle system and is improved by hill climbing. The returned
    makespan is measured by replaying the table in the kernel; the realized
    MET/ETF assignments stay in the candidate pool, so the result is never
    worse than either baseline.
    """
    from .scheduling import etf_schedule, met_schedule

    met_table, met_mk = capture_assignment(template, soc, met_schedule, "met")
    etf_table, etf_mk = capture_assignment(template, soc, etf_schedule, "etf")
    candidates = [("etf-capture", etf_table, etf_mk),
                  ("met-capture", met_table, met_mk)]

    inst = build_instance(template, soc)
    index_of = {pe_id: i for i, pe_id in enumerate(inst.pe_ids)}
    try:
        table, _ = oracle_optimal_table(template, soc, limits=limits,
                                        backend=backend)
        candidates.insert(0, ("exhaustive", table, simulate_table(template, soc, table)))
    except OracleLimitError:
        base_name, base_table, _ = min(
            candidates, key=lambda c: (c[2], c[0]))
        base = np.array([index_of[base_table[t]] for t in range(inst.n_tasks)],
                        dtype=np.int64)
        refined, _ = refine_assignment(inst, base, rounds=rounds, top_k=top_k,
                                       backend=backend)
        refined_table = {t: inst.pe_ids[int(refined[t])]
                         for t in range(inst.n_tasks)}
        candidates.insert(0, (f"refined-{base_name}", refined_table,
                              simulate_table(template, soc, refined_table)))

    method, table, makespan = min(candidates, key=lambda c: (c[2], c[0]))
    return table, makespan, method
