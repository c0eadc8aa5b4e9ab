import json
from dataclasses import replace

import pytest

from dssim.dse import (CandidateKind, GridSpec, PlanePoint, add_accelerator,
                       area_model, dvfs_sweep_cells, grid_pareto, grid_search,
                       guided_search, guided_trace_to_dict, implausible_points,
                       scale_soc)
from dssim.resources import ValidationError, load_soc_config
from dssim.workload import WorkloadSpec

from conftest import data_path


def test_area_model_reference_config():
    soc = load_soc_config(data_path("soc_dse_cfg1.json"))
    assert area_model(soc) == pytest.approx(14.94)


def test_area_model_zero_pes_is_uncore():
    soc = load_soc_config(data_path("soc_dse_cfg1.json"))
    empty = replace(soc, pes=())
    assert area_model(empty) == pytest.approx(soc.uncore_area_mm2)


def test_area_model_linear_in_added_pe(soc16):
    proto = next(pe for pe in soc16.pes if pe.subtype == "fft-acc")
    grown = add_accelerator(soc16, proto)
    assert area_model(grown) - area_model(soc16) == pytest.approx(proto.area_mm2)
    assert area_model(grown, packing_factor=2.0) - area_model(soc16, 2.0) == \
        pytest.approx(2 * proto.area_mm2)


def test_add_accelerator_unique_ids(soc16):
    proto = next(pe for pe in soc16.pes if pe.subtype == "viterbi-acc")
    grown = add_accelerator(soc16, proto, count=3)
    ids = [pe.pe_id for pe in grown.pes]
    assert len(ids) == len(set(ids))
    assert len(grown.pes) == len(soc16.pes) + 3


def test_scale_soc_counts(soc16):
    assert len(scale_soc(soc16, 2.0).pes) == 32
    assert len(scale_soc(soc16, 3.5).pes) == 56
    ids = [pe.pe_id for pe in scale_soc(soc16, 3.5).pes]
    assert len(ids) == len(set(ids))


def test_quadrants():
    th = (0.6, 0.3)
    assert PlanePoint("c", 80, 50, None).quadrant(th) == "upper-right"
    assert PlanePoint("c", 80, 10, None).quadrant(th) == "lower-right"
    assert PlanePoint("c", 10, 50, None).quadrant(th) == "upper-left"
    assert PlanePoint("c", 10, 10, None).quadrant(th) == "lower-left"


def test_implausible_detector():
    ok = PlanePoint("a", 50, 20, None)
    bad = PlanePoint("b", 1, 90, None)
    assert implausible_points([ok, bad]) == [bad]


def grid_fixture(cells, jobs=40, scheduler="etf"):
    base = load_soc_config(data_path("soc_dse_base.json"))
    cfg3 = load_soc_config(data_path("soc_dse_cfg3.json"))
    fft = next(pe for pe in cfg3.pes if pe.subtype == "fft-acc")
    vit = next(pe for pe in cfg3.pes if pe.subtype == "viterbi-acc")
    wl = WorkloadSpec(mixture=(("wifi-tx", 1.0),), rate_jobs_per_ms=1.0,
                      jobs=jobs, seed=3)
    return GridSpec(base=base, cells=tuple(cells), workload=wl,
                    prototypes={"fft": fft, "viterbi": vit},
                    scheduler=scheduler)


def test_grid_single_cell_serial():
    spec = grid_fixture([{"label": "only", "fft": 1}])
    results = grid_search(spec, parallel=False)
    assert len(results) == 1
    assert results[0].error is None
    assert results[0].summary["jobs_completed"] == 40
    frontier = grid_pareto(results)
    assert [r.label for r in frontier] == ["only"]


def test_grid_cells_visited_once_each_and_order_independent():
    cells = [{"label": f"c{i}", "fft": i} for i in (0, 1, 2)]
    a = grid_search(grid_fixture(cells), parallel=False)
    b = grid_search(grid_fixture(list(reversed(cells))), parallel=False)
    by_label_a = {r.label: r.summary["avg_job_execution_us"] for r in a}
    by_label_b = {r.label: r.summary["avg_job_execution_us"] for r in b}
    assert by_label_a == by_label_b
    assert [r.label for r in a] == ["c0", "c1", "c2"]


def test_grid_parallel_matches_serial():
    cells = [{"label": f"c{i}", "fft": i} for i in (0, 2)]
    serial = grid_search(grid_fixture(cells), parallel=False)
    parallel = grid_search(grid_fixture(cells), parallel=True)
    for s, p in zip(serial, parallel):
        assert s.summary == p.summary


def test_grid_cell_error_recorded_not_fatal():
    cells = [{"label": "ok", "fft": 1},
             {"label": "bad", "fft": 1, "cores": {"big": 9}}]
    results = grid_search(grid_fixture(cells), parallel=False)
    assert results[0].error is None
    assert results[1].error is not None
    assert "big" in results[1].error


def test_grid_opp_and_core_axes():
    cells = [{"label": "pinned", "opp": {"big": 0, "little": 0},
              "cores": {"big": 2, "little": 1}}]
    spec = grid_fixture(cells, jobs=20)
    soc = spec.soc_for(cells[0])
    bigs = [pe for pe in soc.pes if pe.cluster == "big"]
    assert len(bigs) == 2
    assert all(pe.dvfs_policy == "fixed:0" for pe in bigs)
    results = grid_search(spec, parallel=False)
    assert results[0].error is None


def test_dvfs_sweep_enumeration_complete():
    cells = dvfs_sweep_cells(big_opps=8, little_opps=5,
                             big_cores=4, little_cores=4)
    assert len(cells) == 8 * 5 * 4 * 4 + 3
    labels = [c["label"] for c in cells]
    assert len(set(labels)) == len(labels)


def test_grid_empty_rejected():
    with pytest.raises(ValidationError):
        grid_search(grid_fixture([]))


def test_guided_base_already_quiet_returns_base():
    # light load: no cluster is starved, the loop stops in one iteration
    soc = load_soc_config(data_path("soc_dse_cfg3.json"))
    fft = next(pe for pe in soc.pes if pe.subtype == "fft-acc")
    wl = WorkloadSpec(mixture=(("wifi-tx", 1.0),), rate_jobs_per_ms=0.05,
                      jobs=5, seed=1)
    result = guided_search(soc, [CandidateKind("fft", fft)], wl)
    assert result.converged
    assert [s.action for s in result.trace] == ["stop"]
    assert result.trace[-1].detail["reason"] == "no-upper-right"
    assert len(result.soc.pes) == len(soc.pes)


def test_guided_trace_serializable(tmp_path):
    soc = load_soc_config(data_path("soc_dse_cfg3.json"))
    wl = WorkloadSpec(mixture=(("wifi-tx", 1.0),), rate_jobs_per_ms=0.5,
                      jobs=10, seed=1)
    cfg3 = load_soc_config(data_path("soc_dse_cfg3.json"))
    fft = next(pe for pe in cfg3.pes if pe.subtype == "fft-acc")
    result = guided_search(soc, [CandidateKind("fft", fft)], wl)
    payload = guided_trace_to_dict(result)
    json.dumps(payload)
    assert "steps" in payload and "final_counts" in payload
