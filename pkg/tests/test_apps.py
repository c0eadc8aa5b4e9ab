import pytest

from dssim.apps import (AppTemplate, CommEdge, GraphError, TaskNode,
                        build_benchmark, build_canonical_graph,
                        known_task_kinds, load_template, save_template,
                        template_to_dict, topological_order, BENCHMARK_NAMES)


def test_wifi_tx_default_shape():
    t = build_benchmark("wifi-tx")
    assert t.size == 30
    # five parallel chains, each the full transmit pipeline
    for c in range(5):
        ids = list(range(c * 6, c * 6 + 6))
        kinds = [t.kind_of(i) for i in ids]
        assert kinds == ["wifi-scramble-encode", "wifi-interleave",
                         "wifi-qpsk-mod", "wifi-pilot-insert", "wifi-ifft",
                         "wifi-crc"]
        for a, b in zip(ids, ids[1:]):
            assert (a, 8) in [(s, v) for s, v in t.predecessors[b]]
    assert len(t.entries()) == 5
    assert len(t.exits()) == 5


def test_wifi_rx_shape():
    t = build_benchmark("wifi-rx")
    assert t.size == 40
    assert len(t.entries()) == 5


def test_range_detection_has_seven_tasks():
    t = build_benchmark("range-detection")
    assert t.size == 7
    assert len(t.exits()) == 1
    assert t.kind_of(t.exits()[0]) == "rd-detect"
    # two independent transform branches join at the multiply stage
    assert len(t.predecessors[4]) == 2


def test_pulse_doppler_task_count():
    t = build_benchmark("pulse-doppler")
    assert t.size == 451
    assert len(t.exits()) == 1


def test_pulse_doppler_param_validation():
    with pytest.raises(ValueError):
        build_benchmark("pulse-doppler", signals=0)
    t = build_benchmark("pulse-doppler", signals=2, samples=3)
    assert t.size == 2 * 3 * 5 + 1


def test_unknown_app_rejected():
    with pytest.raises(ValueError, match="unknown application"):
        build_benchmark("lte-tx")


def test_invalid_chain_count():
    with pytest.raises(ValueError):
        build_benchmark("wifi-tx", chains=0)


def test_all_benchmarks_acyclic_and_connected():
    for name in BENCHMARK_NAMES:
        t = build_benchmark(name)
        order = topological_order(t)
        assert len(order) == t.size
        # every non-entry reachable from an entry: walk forward
        reached = set(t.entries())
        for i in order:
            if i in reached:
                for s, _ in t.successors[i]:
                    reached.add(s)
        assert reached == {n.task_id for n in t.nodes}


def test_benchmark_kinds_are_registered(soc16):
    for name in ("wifi-tx", "wifi-rx", "range-detection", "pulse-doppler"):
        t = build_benchmark(name)
        for node in t.nodes:
            assert node.kind in known_task_kinds()
            assert any(pe.supports(node.kind) for pe in soc16.pes)


def test_canonical_graph_costs():
    t, costs = build_canonical_graph()
    assert t.size == 10
    assert costs[0] == (14, 16, 9)
    assert costs[3] == (13, 8, 17)
    assert costs[9] == (21, 7, 16)
    assert min(range(3), key=lambda p: costs[0][p]) == 2
    assert t.exits() == [9]


def test_canonical_graph_referentially_transparent():
    a = template_to_dict(build_canonical_graph()[0])
    b = template_to_dict(build_canonical_graph()[0])
    assert a == b


def test_topological_order_singleton():
    t = AppTemplate("one", (TaskNode(0, "canon-0"),), ())
    assert topological_order(t) == [0]


def test_topological_order_canonical_ends():
    t, _ = build_canonical_graph()
    order = topological_order(t)
    assert order[0] == 0
    assert order[-1] == 9


def test_cycle_detected():
    with pytest.raises(GraphError, match="cycle"):
        AppTemplate("loop", (TaskNode(0, "canon-0"), TaskNode(1, "canon-1")),
                    (CommEdge(0, 1, 0), CommEdge(1, 0, 0)))


def test_dangling_edge_rejected():
    with pytest.raises(GraphError, match="unknown task"):
        AppTemplate("bad", (TaskNode(0, "canon-0"),), (CommEdge(0, 7, 0),))


def test_template_json_roundtrip(tmp_path):
    t = build_benchmark("range-detection")
    path = tmp_path / "rd.json"
    save_template(t, path)
    again = load_template(path)
    assert template_to_dict(again) == template_to_dict(t)
