"""State definitions.

State is the interface between the pipeline graphs and the CLI as well as the
data model passed between graph nodes.
"""

import operator
from typing import Annotated, List, Optional, TypedDict

from nisqmap.cdap import HierarchyTree
from nisqmap.circuit import Circuit
from nisqmap.config import RunConfig
from nisqmap.device import DeviceModel
from nisqmap.scheduler import BatchPlan, Job
from nisqmap.verify import AuditResult, MetricsReport


class PipelineState(TypedDict, total=False):
    config: RunConfig
    model: DeviceModel
    tree: HierarchyTree
    circuits: List[Circuit]
    jobs: List[Job]
    batch_plan: BatchPlan
    audits: List[AuditResult]
    equivalence: List[Optional[bool]]
    equivalence_notes: List[Optional[str]]
    metrics: List[MetricsReport]
    status: str
    next: str
    outputs: List[str]
    events: Annotated[List[str], operator.add]
