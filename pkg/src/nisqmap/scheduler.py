"""Multi-programming job scheduler.

Jobs leave the queue head-first. Each head job is offered the next
co-locatable candidates in order of descending fitness, and a candidate is
admitted when no member's estimated success probability drops by more than
the configured threshold compared with running alone.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Union

import numpy as np

from nisqmap.cdap import HierarchyTree, Layout, PartitionRequest, PartitionResult, partition
from nisqmap.circuit import Circuit
from nisqmap.config import RouteOptions, SchedulerConfig
from nisqmap.device import DeviceModel
from nisqmap.errors import PartitionError
from nisqmap.profiler import Profile, initial_mapping_profile
from nisqmap.qasm import load_circuit
from nisqmap.xswap import FinalSchedule, route

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Job:
    name: str
    circuit: Circuit
    profile: Profile
    n_qubits: int
    depth: int
    n_cnots: int
    n_1q_gates: int

    @classmethod
    def from_circuit(cls, circuit: Circuit) -> "Job":
        return cls(
            name=circuit.name,
            circuit=circuit,
            profile=initial_mapping_profile(circuit),
            n_qubits=circuit.n_qubits,
            depth=circuit.depth(),
            n_cnots=circuit.n_cnots,
            n_1q_gates=circuit.n_one_qubit_gates,
        )

    @property
    def request(self) -> PartitionRequest:
        return PartitionRequest(self.n_qubits, self.n_cnots, self.profile)


def load_queue(path: Union[str, Path]) -> List[Circuit]:
    """Newline-separated circuit paths, relative to the queue file; ``#`` starts a comment."""
    path = Path(path)
    circuits = []
    for raw in path.read_text(encoding="utf-8").splitlines():
        entry = raw.split("#", 1)[0].strip()
        if entry:
            target = Path(entry)
            circuits.append(load_circuit(target if target.is_absolute() else path.parent / target))
    return circuits


def _sigmoid(x: float) -> float:
    return 1.0 / (1.0 + math.exp(-x))


def fitness(p0: Job, pi: Job) -> float:
    """Small jobs of similar depth pair best with the head job."""
    return 1.0 / (pi.n_qubits * _sigmoid(abs(pi.depth - p0.depth)))


def epst(job: Job, region: Iterable[int], model: DeviceModel, extra_cnots: int = 0) -> float:
    """Estimated probability of a successful trial of ``job`` on ``region``."""
    region = sorted(set(region))
    if not region:
        raise PartitionError(f"job {job.name} has an empty region")
    edges = model.internal_edges(region)
    r_2q = float(np.mean([1.0 - model.cx_error[e] for e in edges])) if edges else 1.0
    r_1q = float(np.mean([1.0 - model.sq_error[q] for q in region]))
    r_ro = float(np.mean([1.0 - model.readout_error[q] for q in region]))
    return r_2q ** (job.n_cnots + extra_cnots) * r_1q**job.n_1q_gates * r_ro**job.n_qubits


# ============================================================================
# Plan
# ============================================================================


@dataclass
class Batch:
    members: List[int]
    names: List[str]
    partition: PartitionResult
    sep_epst: List[float]
    co_epst: List[float]
    violation: List[float]
    schedule: Optional[FinalSchedule] = None

    @property
    def n_qubits(self) -> int:
        return sum(len(layout) for layout in self.partition.layouts)

    def to_dict(self) -> dict:
        data = {
            "members": self.members,
            "names": self.names,
            "sep_epst": self.sep_epst,
            "co_epst": self.co_epst,
            "violation": self.violation,
            "partition": self.partition.to_dict(),
        }
        if self.schedule is not None:
            data["swaps"] = len(self.schedule.swaps)
            data["inter_swaps"] = self.schedule.inter_swaps
        return data


@dataclass
class BatchPlan:
    batches: List[Batch] = field(default_factory=list)
    n_jobs: int = 0

    @property
    def trf(self) -> float:
        return trf(self)

    def to_dict(self) -> dict:
        return {"n_jobs": self.n_jobs, "n_batches": len(self.batches), "trf": self.trf, "batches": [b.to_dict() for b in self.batches]}


def trf(plan: BatchPlan) -> float:
    """Trial reduction factor: jobs per execution round."""
    if not plan.batches:
        raise ValueError("cannot compute TRF of an empty plan")
    return plan.n_jobs / len(plan.batches)


# ============================================================================
# Admission loop
# ============================================================================


class _SeparateEpst:
    """Best-alone EPST per queue position, each on a fresh tree."""

    def __init__(self, queue: Sequence[Job], model: DeviceModel, tree: HierarchyTree, jobs: int):
        self.queue = queue
        self.model = model
        self.tree = tree
        self.jobs = jobs
        self.values: Dict[int, float] = {}

    def _compute(self, index: int) -> float:
        job = self.queue[index]
        result = partition(self.tree, [job.request], self.model, search_single=True)
        if result.reverted:
            result = partition(self.tree, [job.request], self.model)
        return epst(job, result.layouts[0].physical, self.model)

    def prefetch(self, indices: Sequence[int]) -> None:
        missing = [i for i in indices if i not in self.values]
        if self.jobs > 1 and len(missing) > 1:
            with ThreadPoolExecutor(max_workers=self.jobs) as pool:
                self.values.update(zip(missing, pool.map(self._compute, missing)))
        else:
            self.values.update((i, self._compute(i)) for i in missing)

    def __getitem__(self, index: int) -> float:
        self.prefetch([index])
        return self.values[index]


def _singleton(index: int, queue: Sequence[Job], model: DeviceModel, tree: HierarchyTree, sep: _SeparateEpst) -> Batch:
    job = queue[index]
    result = partition(tree, [job.request], model)
    return Batch([index], [job.name], result, [sep[index]], [sep[index]], [0.0])


def schedule(
    queue: Sequence[Job],
    model: DeviceModel,
    tree: HierarchyTree,
    cfg: Optional[SchedulerConfig] = None,
    route_options: Optional[RouteOptions] = None,
    jobs: int = 1,
) -> BatchPlan:
    """Group the queue into co-located batches; routes each batch when ``route_options`` is given."""
    cfg = cfg or SchedulerConfig()
    for job in queue:
        if job.n_qubits > model.n_qubits:
            raise PartitionError(f"job {job.name} needs {job.n_qubits} qubits, device has {model.n_qubits}")
    sep = _SeparateEpst(queue, model, tree, jobs)
    remaining = list(range(len(queue)))
    plan = BatchPlan(n_jobs=len(queue))
    while remaining:
        head = remaining.pop(0)
        budget = model.n_qubits - queue[head].n_qubits
        window = [i for i in remaining if queue[i].n_qubits <= budget][: cfg.window]
        window.sort(key=lambda i: -fitness(queue[head], queue[i]))
        sep.prefetch([head] + window)
        batch = _singleton(head, queue, model, tree, sep)
        for candidate in window:
            if len(batch.members) >= cfg.max_coloc:
                break
            if batch.n_qubits + queue[candidate].n_qubits > model.n_qubits:
                continue
            members = batch.members + [candidate]
            result = partition(tree, [queue[i].request for i in members], model)
            if result.reverted:
                logger.debug("candidate %s rejected: no region left", queue[candidate].name)
                continue
            co = [epst(queue[i], result.layouts[k].physical, model) for k, i in enumerate(members)]
            violation = [1.0 - c / sep[i] for c, i in zip(co, members)]
            if max(violation) > cfg.epsilon:
                logger.debug("candidate %s rejected: violation %.4f > %.4f", queue[candidate].name, max(violation), cfg.epsilon)
                continue
            batch = Batch(members, [queue[i].name for i in members], result, [sep[i] for i in members], co, violation)
        for i in batch.members[1:]:
            remaining.remove(i)
        logger.info("batch %d: %s", len(plan.batches), ", ".join(batch.names))
        plan.batches.append(batch)
    if route_options is not None:
        route_plan(plan, queue, model, route_options, jobs)
    return plan


def separate_plan(queue: Sequence[Job], model: DeviceModel, tree: HierarchyTree) -> BatchPlan:
    """Every job in its own batch."""
    sep = _SeparateEpst(queue, model, tree, 1)
    return BatchPlan([_singleton(i, queue, model, tree, sep) for i in range(len(queue))], len(queue))


def joint_plan(queue: Sequence[Job], model: DeviceModel, tree: HierarchyTree, layouts: Optional[Sequence[Layout]] = None) -> BatchPlan:
    """All jobs in one batch, on the tree partition or on the given ``layouts``.

    The batch's partition is marked ``reverted`` when the jobs cannot share
    the device.
    """
    members = list(range(len(queue)))
    if layouts is None:
        result = partition(tree, [job.request for job in queue], model)
    else:
        result = PartitionResult(
            regions=[lay.physical for lay in layouts],
            order=members,
            layouts=list(layouts),
            redundant=[frozenset()] * len(layouts),
            nodes=[None] * len(layouts),
        )
    plan = BatchPlan(n_jobs=len(queue))
    if result.reverted:
        plan.batches.append(Batch(members, [job.name for job in queue], result, [], [], []))
        return plan
    sep = _SeparateEpst(queue, model, tree, 1)
    co = [epst(job, lay.physical, model) for job, lay in zip(queue, result.layouts)]
    violation = [1.0 - c / sep[i] for i, c in enumerate(co)]
    plan.batches.append(Batch(members, [job.name for job in queue], result, [sep[i] for i in members], co, violation))
    return plan


def _route_batch(batch: Batch, queue: Sequence[Job], model: DeviceModel, options: RouteOptions) -> FinalSchedule:
    return route([queue[i].circuit for i in batch.members], batch.partition.layouts, model, options)


def route_plan(plan: BatchPlan, queue: Sequence[Job], model: DeviceModel, options: RouteOptions, jobs: int = 1) -> None:
    """Attach a routed schedule to every batch; batches are independent."""
    if jobs > 1 and len(plan.batches) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            schedules = list(pool.map(lambda b: _route_batch(b, queue, model, options), plan.batches))
    else:
        schedules = [_route_batch(b, queue, model, options) for b in plan.batches]
    for batch, fs in zip(plan.batches, schedules):
        batch.schedule = fs
