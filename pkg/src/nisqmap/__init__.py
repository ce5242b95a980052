"""Multi-program qubit mapping for NISQ devices."""

from nisqmap.cdap import HierarchyTree, Layout, PartitionRequest, PartitionResult, allocate, build_hierarchy_tree, partition
from nisqmap.circuit import Circuit, Gate, build_dag, layer_cnots
from nisqmap.config import RouteOptions, RunConfig, SchedulerConfig
from nisqmap.device import DeviceModel, device_from_topology, load_device
from nisqmap.pipeline import map_graph, schedule_graph
from nisqmap.profiler import Profile, build_profile, initial_mapping_profile
from nisqmap.qasm import load_circuit, parse_circuit, to_qasm
from nisqmap.scheduler import BatchPlan, Job, schedule, trf
from nisqmap.verify import MetricsReport, compliance_audit, compute_metrics, equivalence_check
from nisqmap.xswap import FinalSchedule, route

__all__ = [
    "BatchPlan",
    "Circuit",
    "DeviceModel",
    "FinalSchedule",
    "Gate",
    "HierarchyTree",
    "Job",
    "Layout",
    "MetricsReport",
    "PartitionRequest",
    "PartitionResult",
    "Profile",
    "RouteOptions",
    "RunConfig",
    "SchedulerConfig",
    "allocate",
    "build_dag",
    "build_hierarchy_tree",
    "build_profile",
    "compliance_audit",
    "compute_metrics",
    "device_from_topology",
    "equivalence_check",
    "initial_mapping_profile",
    "layer_cnots",
    "load_circuit",
    "load_device",
    "map_graph",
    "parse_circuit",
    "partition",
    "route",
    "schedule",
    "schedule_graph",
    "to_qasm",
    "trf",
]
