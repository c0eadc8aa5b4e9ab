"""dssim: discrete-event simulation of domain-specific heterogeneous SoCs.

Streams DAG jobs through a configurable SoC, schedules them with pluggable
policies (MET, ETF, table-based, or user supplied), models power,
temperature, and DVFS governors, and drives grid or guided design space
exploration over SoC configurations.
"""

from .apps import (AppTemplate, CommEdge, TaskNode, build_benchmark,
                   build_canonical_graph, topological_order)
from .kernel import Simulation, run, run_single_job
from .metrics import MetricsLedger, histogram, pareto_frontier, summarize
from .oracle import build_scheduler_table, oracle_optimal_table
from .resources import (OppPoint, PeDescriptor, SocConfig, load_soc_config,
                        scaled_latency)
from .scheduling import TableScheduler, etf_schedule, met_schedule
from .workload import Job, JobSource, WorkloadSpec, load_workload, mixture_for_study

__version__ = "0.1.0"

__all__ = [
    "AppTemplate", "CommEdge", "TaskNode", "build_benchmark",
    "build_canonical_graph", "topological_order",
    "Simulation", "run", "run_single_job",
    "MetricsLedger", "histogram", "pareto_frontier", "summarize",
    "build_scheduler_table", "oracle_optimal_table",
    "OppPoint", "PeDescriptor", "SocConfig", "load_soc_config", "scaled_latency",
    "TableScheduler", "etf_schedule", "met_schedule",
    "Job", "JobSource", "WorkloadSpec", "load_workload", "mixture_for_study",
    "__version__",
]
