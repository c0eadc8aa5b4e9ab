import itertools

import pytest

from dssim.apps import AppTemplate, TaskNode, build_canonical_graph
from dssim.kernel import run_single_job
from dssim.scheduling import (PeSnapshot, ReadyTask, SchedulingContext,
                              SchedulingError, TableScheduler, etf_schedule,
                              load_tables, met_schedule, save_tables)

from conftest import chain_template, make_pe, make_soc


def ctx_of(ready, pes, now_ns=0, comm=lambda s, d, v: 0):
    return SchedulingContext(now_ns=now_ns, ready=tuple(ready),
                             pes=tuple(pes), comm_delay_ns=comm)


def snapshot(pe_id, latency, slot_free=(0,), occupied=0, util=0.0,
             capacity=1, blocking=0.0, opp=0):
    return PeSnapshot(pe_id=pe_id, capacity=capacity, opp_index=opp,
                      latency_ns=latency, slot_free_ns=tuple(slot_free),
                      occupied_slots=occupied, utilization=util,
                      blocking=blocking)


def ready(job, task, kind, app="app", arrival=0, ready_ns=0, preds=()):
    return ReadyTask(job_id=job, task_id=task, app_name=app, kind=kind,
                     arrival_ns=arrival, ready_ns=ready_ns,
                     preds=tuple(preds))


def test_met_picks_min_latency():
    pes = [snapshot(0, {"x": 500}), snapshot(1, {"x": 300}), snapshot(2, {"x": 900})]
    out = met_schedule(ctx_of([ready(0, 0, "x")], pes))
    assert out == {(0, 0): 1}


def test_met_tie_breaks_lower_id_when_equally_idle():
    pes = [snapshot(0, {"x": 300}), snapshot(1, {"x": 300})]
    out = met_schedule(ctx_of([ready(0, 0, "x")], pes))
    assert out == {(0, 0): 0}


def test_met_tie_prefers_less_occupied():
    pes = [snapshot(0, {"x": 300}, occupied=1), snapshot(1, {"x": 300})]
    out = met_schedule(ctx_of([ready(0, 0, "x")], pes))
    assert out == {(0, 0): 1}


def test_met_spreads_equal_tasks_within_epoch():
    pes = [snapshot(0, {"x": 300}), snapshot(1, {"x": 300})]
    tasks = [ready(0, i, "x") for i in range(4)]
    out = met_schedule(ctx_of(tasks, pes))
    assert sorted(out.values()) == [0, 0, 1, 1]


def test_met_single_candidate_regardless_of_load():
    pes = [snapshot(0, {"x": 100}, occupied=5, util=1.0), snapshot(1, {"y": 10})]
    out = met_schedule(ctx_of([ready(0, 0, "x")], pes))
    assert out == {(0, 0): 0}


def test_met_no_candidate_raises():
    pes = [snapshot(0, {"y": 100})]
    with pytest.raises(SchedulingError, match="no PE supports"):
        met_schedule(ctx_of([ready(0, 0, "x")], pes))


def test_etf_degenerates_to_met_on_idle_system():
    pes = [snapshot(0, {"x": 500}), snapshot(1, {"x": 300})]
    task = ready(0, 0, "x")
    assert etf_schedule(ctx_of([task], pes)) == met_schedule(ctx_of([task], pes))


def test_etf_uses_communication_costs():
    # data sits on pe0; pe1 is faster but the transfer makes it finish later
    pes = [snapshot(0, {"x": 500}), snapshot(1, {"x": 400})]
    task = ready(0, 1, "x", preds=[(0, 0, 100)])
    comm = lambda s, d, v: 0 if s == d else 500
    out = etf_schedule(ctx_of([task], pes, comm=comm))
    assert out == {(0, 1): 0}


def test_etf_two_tasks_one_fast_pe_matches_bruteforce():
    # independent oracle: enumerate both commit orders over a 2-task, 2-PE
    # instance and check ETF achieves the better total finish profile
    lat = {"a": {0: 100, 1: 250}, "b": {0: 120, 1: 260}}
    pes = [snapshot(0, {"a": 100, "b": 120}), snapshot(1, {"a": 250, "b": 260})]
    tasks = [ready(0, 0, "a"), ready(0, 1, "b")]
    out = etf_schedule(ctx_of(tasks, pes))

    best = None
    for order in itertools.permutations([0, 1]):
        for assign in itertools.product([0, 1], repeat=2):
            avail = {0: 0, 1: 0}
            finish = {}
            for t in order:
                p = assign[t]
                kind = "a" if t == 0 else "b"
                start = avail[p]
                finish[t] = start + lat[kind][p]
                avail[p] = finish[t]
            key = max(finish.values())
            if best is None or key < best:
                best = key
    # replay ETF's choice through the same evaluator
    avail = {0: 0, 1: 0}
    worst = 0
    for (job, task), p in sorted(out.items(), key=lambda kv: kv[0][1]):
        kind = "a" if task == 0 else "b"
        start = avail[p]
        avail[p] = start + lat[kind][p]
        worst = max(worst, avail[p])
    assert worst == best


def test_etf_respects_availability():
    pes = [snapshot(0, {"x": 100}, slot_free=(1000,)), snapshot(1, {"x": 300})]
    # pe0 busy until 1000: finishing there takes 1100, pe1 finishes at 300
    out = etf_schedule(ctx_of([ready(0, 0, "x")], pes))
    assert out == {(0, 0): 1}


def test_canonical_met_assignment(canonical_soc):
    template, costs = build_canonical_graph()
    _, ledger = run_single_job(canonical_soc, template, met_schedule, "met")
    mapping = {g.task_id: g.pe_id for g in ledger.gantt}
    for task in range(10):
        assert mapping[task] == min(range(3), key=lambda p: costs[task][p])


def test_canonical_etf_equals_met_makespan(canonical_soc):
    template, _ = build_canonical_graph()
    mk_met, _ = run_single_job(canonical_soc, template, met_schedule, "met")
    mk_etf, _ = run_single_job(canonical_soc, template, etf_schedule, "etf")
    assert mk_met == mk_etf


def test_table_scheduler_serializes_on_one_pe():
    profile = {"k0": 5.0, "k1": 7.0, "k2": 11.0}
    soc = make_soc([make_pe(0, profile), make_pe(1, profile)],
                   extra_kinds=list(profile))
    t = AppTemplate("free", tuple(TaskNode(i, f"k{i}") for i in range(3)), ())
    table = TableScheduler({"free": {0: 0, 1: 0, 2: 0}})
    mk, _ = run_single_job(soc, t, table, "table")
    assert mk == (5 + 7 + 11) * 1000


def test_table_missing_entry_detected_at_validation():
    t = chain_template("app", ["k0", "k1"])
    table = TableScheduler({"app": {0: 0}})
    with pytest.raises(SchedulingError, match="missing task 1"):
        table.validate_against({"app": t}, {0})


def test_table_missing_app_detected():
    t = chain_template("app", ["k0"])
    with pytest.raises(SchedulingError, match="no schedule table"):
        TableScheduler({}).validate_against({"app": t}, {0})


def test_table_unknown_pe_detected():
    t = chain_template("app", ["k0"])
    table = TableScheduler({"app": {0: 99}})
    with pytest.raises(SchedulingError, match="unknown PE"):
        table.validate_against({"app": t}, {0, 1})


def test_tables_file_roundtrip(tmp_path):
    tables = {"wifi-tx": {0: 8, 1: 0}, "canonical": {0: 2}}
    path = tmp_path / "tables.json"
    save_tables(tables, path)
    assert load_tables(path) == tables


def _reference_etf(tasks, latencies, slot0):
    """Straight-line reimplementation of greedy earliest-finish commitment,
    used to cross-check the production scheduler and its EFT monotonicity."""
    avail = dict(slot0)
    pending = sorted(tasks)
    assignment = {}
    efts = []
    while pending:
        best = None
        for t in pending:
            for p in sorted(avail):
                if t not in latencies[p]:
                    continue
                eft = avail[p] + latencies[p][t]
                key = (eft, t, p)
                if best is None or key < best:
                    best = key
        eft, t, p = best
        assignment[t] = p
        avail[p] = eft
        efts.append(eft)
        pending.remove(t)
    return assignment, efts


@pytest.mark.parametrize("seed", range(10))
def test_etf_matches_reference_and_commits_monotone(seed):
    import numpy as np

    rng = np.random.default_rng(seed)
    n_tasks = int(rng.integers(2, 7))
    n_pes = int(rng.integers(2, 4))
    latencies = {p: {t: int(rng.integers(1, 50)) * 1000
                     for t in range(n_tasks)} for p in range(n_pes)}
    pes = [snapshot(p, {f"k{t}": latencies[p][t] for t in range(n_tasks)})
           for p in range(n_pes)]
    tasks = [ready(0, t, f"k{t}") for t in range(n_tasks)]
    out = etf_schedule(ctx_of(tasks, pes))

    ref_lat = {p: {t: latencies[p][t] for t in range(n_tasks)}
               for p in range(n_pes)}
    expected, efts = _reference_etf(list(range(n_tasks)), ref_lat,
                                    {p: 0 for p in range(n_pes)})
    assert {k[1]: v for k, v in out.items()} == expected
    assert efts == sorted(efts)   # finish estimates never regress


@pytest.mark.parametrize("seed", range(10))
def test_met_never_picks_dominated_pe(seed):
    import numpy as np

    rng = np.random.default_rng(100 + seed)
    n_pes = int(rng.integers(2, 5))
    lat = {p: int(rng.integers(1, 40)) * 1000 for p in range(n_pes)}
    pes = [snapshot(p, {"x": lat[p]}, util=float(rng.random()))
           for p in range(n_pes)]
    out = met_schedule(ctx_of([ready(0, 0, "x")], pes))
    chosen = out[(0, 0)]
    assert lat[chosen] == min(lat.values())
