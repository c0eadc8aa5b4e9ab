import json
from pathlib import Path

import pytest

from dssim.apps import AppTemplate, CommEdge, TaskNode
from dssim.resources import load_soc_config, parse_soc_config

DATA = Path(__file__).resolve().parent.parent / "src" / "dssim" / "data"


def data_path(name: str) -> Path:
    return DATA / name


@pytest.fixture(scope="session")
def canonical_soc():
    return load_soc_config(data_path("canonical_soc.json"))


@pytest.fixture(scope="session")
def soc16():
    return load_soc_config(data_path("soc16.json"))


def make_soc(pes, noc=None, dram=None, extra_kinds=(), dtpm_epoch_us=20000.0,
             thermal=None, uncore=0.0, name="test-soc"):
    """Assemble a small synthetic SoC dict and parse it."""
    raw = {
        "name": name,
        "pes": pes,
        "noc": noc or {"bandwidth_bytes_per_us": 1000,
                       "load_latency_us": [[0.0, 0.0], [1.0, 0.0]],
                       "link_capacity": 8},
        "dram": dram or {"window_us": 100.0, "table": [[0.0, 0.0], [1e9, 0.0]]},
        "uncore_area_mm2": uncore,
        "dtpm_epoch_us": dtpm_epoch_us,
        "extra_task_kinds": list(extra_kinds),
    }
    if thermal:
        raw["thermal"] = thermal
    return parse_soc_config(raw, source=name)


def make_pe(pe_id, profile, name=None, capacity=1, opps=None, policy="performance",
            cluster=None, leak=(0.0, 0.0), cap_f=1e-10, area=1.0,
            pe_type="general-core", subtype="test-core"):
    return {
        "id": pe_id,
        "name": name or f"pe{pe_id}",
        "type": pe_type,
        "subtype": subtype,
        "capacity": capacity,
        "opps": opps or [{"voltage_v": 1.0, "frequency_mhz": 1000}],
        "latency_profile_us": profile,
        "power": {"cap_f": cap_f, "activity": 1.0,
                  "leak_a": leak[0], "leak_b": leak[1]},
        "area_mm2": area,
        "dvfs_policy": policy,
        "cluster": cluster or subtype,
    }


def chain_template(name, kinds, volumes=None):
    nodes = tuple(TaskNode(i, k) for i, k in enumerate(kinds))
    if volumes is None:
        volumes = [0] * (len(kinds) - 1)
    edges = tuple(CommEdge(i, i + 1, volumes[i]) for i in range(len(kinds) - 1))
    return AppTemplate(name, nodes, edges)
