"""Application DAGs: benchmark builders, the canonical 10-task graph, and
serialization.

Applications are directed acyclic graphs of typed tasks. A task's kind keys
into per-PE latency profiles in the resource database; edges carry the data
volume moved between producer and consumer.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources as importlib_resources
from pathlib import Path

DEFAULT_FRAME_BYTES = 8  # one 64-bit frame per edge unless configured


class GraphError(Exception):
    """Structural problem in a task graph (cycle, dangling edge, ...)."""


@dataclass(frozen=True)
class TaskNode:
    task_id: int
    kind: str


@dataclass(frozen=True)
class CommEdge:
    src: int
    dst: int
    volume_bytes: int


@dataclass(frozen=True)
class AppTemplate:
    """Immutable application template shared by all jobs of that app."""

    name: str
    nodes: tuple[TaskNode, ...]
    edges: tuple[CommEdge, ...]
    predecessors: dict[int, tuple[tuple[int, int], ...]] = field(repr=False, default=None)
    successors: dict[int, tuple[tuple[int, int], ...]] = field(repr=False, default=None)

    def __post_init__(self):
        ids = [n.task_id for n in self.nodes]
        if len(set(ids)) != len(ids):
            raise GraphError(f"duplicate task ids in {self.name}")
        # Contiguous ids keep per-job bookkeeping arrays simple.
        if sorted(ids) != list(range(len(ids))):
            raise GraphError(f"task ids must be 0..n-1 in {self.name}")
        if ids != sorted(ids):
            object.__setattr__(self, "nodes",
                               tuple(sorted(self.nodes, key=lambda n: n.task_id)))
        id_set = set(ids)
        preds: dict[int, list] = {i: [] for i in ids}
        succs: dict[int, list] = {i: [] for i in ids}
        for e in self.edges:
            if e.src not in id_set or e.dst not in id_set:
                raise GraphError(f"edge {e.src}->{e.dst} references unknown task in {self.name}")
            if e.volume_bytes < 0:
                raise GraphError(f"negative volume on edge {e.src}->{e.dst} in {self.name}")
            preds[e.dst].append((e.src, e.volume_bytes))
            succs[e.src].append((e.dst, e.volume_bytes))
        object.__setattr__(self, "predecessors",
                           {i: tuple(sorted(v)) for i, v in preds.items()})
        object.__setattr__(self, "successors",
                           {i: tuple(sorted(v)) for i, v in succs.items()})
        topological_order(self)  # raises GraphError on cycles

    @property
    def size(self) -> int:
        return len(self.nodes)

    def kind_of(self, task_id: int) -> str:
        return self.nodes[task_id].kind

    def entries(self) -> list[int]:
        return [n.task_id for n in self.nodes if not self.predecessors[n.task_id]]

    def exits(self) -> list[int]:
        return [n.task_id for n in self.nodes if not self.successors[n.task_id]]


def topological_order(template: AppTemplate) -> list[int]:
    """Deterministic topological order; ties broken by ascending task id."""
    import heapq

    remaining = {i: len(preds) for i, preds in template.predecessors.items()}
    succs = {i: [s for s, _ in template.successors[i]] for i in remaining}
    frontier = [i for i, c in remaining.items() if c == 0]
    heapq.heapify(frontier)
    order = []
    while frontier:
        i = heapq.heappop(frontier)
        order.append(i)
        for s in succs[i]:
            remaining[s] -= 1
            if remaining[s] == 0:
                heapq.heappush(frontier, s)
    if len(order) != len(remaining):
        raise GraphError(f"cycle detected in {template.name}")
    return order


def _chain_template(name: str, kinds: list[str], chains: int,
                    frame_bytes: int) -> AppTemplate:
    """`chains` parallel copies of a linear pipeline over `kinds`."""
    nodes = []
    edges = []
    depth = len(kinds)
    for c in range(chains):
        base = c * depth
        for i, kind in enumerate(kinds):
            nodes.append(TaskNode(base + i, kind))
            if i:
                edges.append(CommEdge(base + i - 1, base + i, frame_bytes))
    return AppTemplate(name, tuple(nodes), tuple(edges))


WIFI_TX_KINDS = ["wifi-scramble-encode", "wifi-interleave", "wifi-qpsk-mod",
                 "wifi-pilot-insert", "wifi-ifft", "wifi-crc"]
WIFI_RX_KINDS = ["wifi-match-filter", "wifi-payload-extract", "wifi-fft",
                 "wifi-pilot-extract", "wifi-qpsk-demod", "wifi-deinterleave",
                 "wifi-viterbi-decode", "wifi-descramble"]
SC_TX_KINDS = ["sc-encode", "sc-mod", "sc-pulse-shape", "sc-crc"]
SC_RX_KINDS = ["sc-sync", "sc-demod", "sc-equalize", "sc-decode"]
PULSE_DOPPLER_KINDS = ["pd-fft", "pd-vector-multiply", "pd-ifft",
                       "pd-amplitude", "pd-fft-shift"]
RANGE_DETECTION_KINDS = ["rd-lfm-gen", "rd-fft", "rd-vector-multiply",
                         "rd-ifft", "rd-detect"]

WIFI_CHAINS = 5


def build_wifi_tx(chains: int = WIFI_CHAINS,
                  frame_bytes: int = DEFAULT_FRAME_BYTES) -> AppTemplate:
    if chains <= 0:
        raise ValueError("chains must be positive")
    return _chain_template("wifi-tx", WIFI_TX_KINDS, chains, frame_bytes)


def build_wifi_rx(chains: int = WIFI_CHAINS,
                  frame_bytes: int = DEFAULT_FRAME_BYTES) -> AppTemplate:
    if chains <= 0:
        raise ValueError("chains must be positive")
    return _chain_template("wifi-rx", WIFI_RX_KINDS, chains, frame_bytes)


def build_sc_tx(frame_bytes: int = DEFAULT_FRAME_BYTES) -> AppTemplate:
    return _chain_template("sc-tx", SC_TX_KINDS, 1, frame_bytes)


def build_sc_rx(frame_bytes: int = DEFAULT_FRAME_BYTES) -> AppTemplate:
    return _chain_template("sc-rx", SC_RX_KINDS, 1, frame_bytes)


def build_range_detection(frame_bytes: int = DEFAULT_FRAME_BYTES) -> AppTemplate:
    """Seven-task pulse-compression pipeline.

    Two waveform sources (received signal and reference) are transformed
    independently, multiplied in the frequency domain, inverse-transformed,
    and thresholded.
    """
    nodes = (
        TaskNode(0, "rd-lfm-gen"),
        TaskNode(1, "rd-lfm-gen"),
        TaskNode(2, "rd-fft"),
        TaskNode(3, "rd-fft"),
        TaskNode(4, "rd-vector-multiply"),
        TaskNode(5, "rd-ifft"),
        TaskNode(6, "rd-detect"),
    )
    edges = tuple(CommEdge(s, d, frame_bytes)
                  for s, d in ((0, 2), (1, 3), (2, 4), (3, 4), (4, 5), (5, 6)))
    return AppTemplate("range-detection", nodes, edges)


def build_pulse_doppler(signals: int | None = None, samples: int | None = None,
                        frame_bytes: int = DEFAULT_FRAME_BYTES) -> AppTemplate:
    """Pulse-Doppler DAG: signals x samples parallel five-stage chains that
    join in a final aggregation node. Default (signals, samples) comes from
    the bundled benchmark parameter file and yields 451 tasks."""
    defaults = _benchmark_params()["pulse-doppler"]
    signals = defaults["signals"] if signals is None else signals
    samples = defaults["samples"] if samples is None else samples
    if signals <= 0 or samples <= 0:
        raise ValueError("signals and samples must be positive")
    depth = len(PULSE_DOPPLER_KINDS)
    chains = signals * samples
    nodes = []
    edges = []
    for c in range(chains):
        base = c * depth
        for i, kind in enumerate(PULSE_DOPPLER_KINDS):
            nodes.append(TaskNode(base + i, kind))
            if i:
                edges.append(CommEdge(base + i - 1, base + i, frame_bytes))
    join_id = chains * depth
    nodes.append(TaskNode(join_id, "pd-fft-shift"))
    for c in range(chains):
        edges.append(CommEdge(c * depth + depth - 1, join_id, frame_bytes))
    return AppTemplate("pulse-doppler", tuple(nodes), tuple(edges))


_BENCHMARKS = {
    "wifi-tx": build_wifi_tx,
    "wifi-rx": build_wifi_rx,
    "range-detection": build_range_detection,
    "pulse-doppler": build_pulse_doppler,
    "sc-tx": build_sc_tx,
    "sc-rx": build_sc_rx,
}

BENCHMARK_NAMES = tuple(_BENCHMARKS)

CANONICAL_NAME = "canonical"
CANONICAL_KINDS = tuple(f"canon-{i}" for i in range(10))

# Computation cost table for the canonical graph: cost of task i on PE j,
# in microseconds on the bundled three-PE reference configuration.
CANONICAL_COSTS = (
    (14, 16, 9),
    (13, 19, 18),
    (11, 13, 19),
    (13, 8, 17),
    (12, 13, 10),
    (13, 16, 9),
    (7, 15, 11),
    (5, 11, 14),
    (18, 12, 29),
    (21, 7, 16),
)


def _data_text(filename: str) -> str:
    return importlib_resources.files("dssim.data").joinpath(filename).read_text()


def _benchmark_params() -> dict:
    return json.loads(_data_text("benchmark_params.json"))


def canonical_edge_costs() -> list[tuple[int, int, int]]:
    """Edge costs of the canonical graph from the bundled data file."""
    raw = json.loads(_data_text("canonical_edges.json"))
    return [(int(s), int(d), int(c)) for s, d, c in raw["edges"]]


def build_canonical_graph() -> tuple[AppTemplate, tuple[tuple[int, ...], ...]]:
    """The 10-task reference graph plus its computation cost table.

    Edge costs are abstract units read from canonical_edges.json; on the
    bundled three-PE configuration one unit translates to one microsecond of
    transfer time between distinct PEs.
    """
    nodes = tuple(TaskNode(i, CANONICAL_KINDS[i]) for i in range(10))
    edges = tuple(CommEdge(s, d, c) for s, d, c in canonical_edge_costs())
    return AppTemplate(CANONICAL_NAME, nodes, edges), CANONICAL_COSTS


def build_benchmark(name: str, **params) -> AppTemplate:
    """Build a benchmark application DAG by name."""
    if name == CANONICAL_NAME:
        return build_canonical_graph()[0]
    try:
        builder = _BENCHMARKS[name]
    except KeyError:
        raise ValueError(f"unknown application {name!r}; "
                         f"known: {sorted(_BENCHMARKS)}") from None
    return builder(**params)


def known_task_kinds() -> set[str]:
    """Every task kind used by the bundled applications."""
    kinds = set(WIFI_TX_KINDS) | set(WIFI_RX_KINDS) | set(SC_TX_KINDS) | set(SC_RX_KINDS)
    kinds |= set(PULSE_DOPPLER_KINDS) | set(RANGE_DETECTION_KINDS)
    kinds |= set(CANONICAL_KINDS)
    return kinds


def template_to_dict(template: AppTemplate) -> dict:
    return {
        "name": template.name,
        "tasks": [{"id": n.task_id, "kind": n.kind} for n in template.nodes],
        "edges": [{"src": e.src, "dst": e.dst, "volume_bytes": e.volume_bytes}
                  for e in template.edges],
    }


def template_from_dict(raw: dict) -> AppTemplate:
    nodes = tuple(TaskNode(int(t["id"]), str(t["kind"])) for t in raw["tasks"])
    edges = tuple(CommEdge(int(e["src"]), int(e["dst"]), int(e["volume_bytes"]))
                  for e in raw["edges"])
    return AppTemplate(str(raw["name"]), nodes, edges)


def save_template(template: AppTemplate, path: str | Path) -> None:
    Path(path).write_text(json.dumps(template_to_dict(template), indent=2) + "\n")


def load_template(path: str | Path) -> AppTemplate:
    return template_from_dict(json.loads(Path(path).read_text()))
