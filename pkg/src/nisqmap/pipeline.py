"""Mapping pipelines.

``map_graph`` maps the given circuits either one by one or as a single
co-located batch. ``schedule_graph`` groups a job queue into batches first.
Both end in the same route, verify and report nodes.
"""

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional, Tuple

from langgraph.graph import END, START, StateGraph

from nisqmap.cdap import build_hierarchy_tree, random_layouts
from nisqmap.config import substream
from nisqmap.device import load_device
from nisqmap.errors import SimulationError
from nisqmap.qasm import load_circuit
from nisqmap.scheduler import Batch, Job, joint_plan, load_queue, route_plan, schedule, separate_plan
from nisqmap.state import PipelineState
from nisqmap.verify import AuditResult, MetricsReport, compliance_audit, compute_metrics, equivalence_check

logger = logging.getLogger(__name__)

STATUS_OK = "ok"
STATUS_REVERTED = "reverted"
STATUS_VERIFICATION_FAILED = "verification_failed"


def load(state: PipelineState):
    cfg = state["config"]
    model = load_device(cfg.device)
    circuits = [load_circuit(path) for path in cfg.circuits]
    if cfg.queue is not None:
        circuits += load_queue(cfg.queue)
    tree = build_hierarchy_tree(model, cfg.omega)
    return {
        "model": model,
        "tree": tree,
        "circuits": circuits,
        "status": STATUS_OK,
        "events": [f"loaded {len(circuits)} circuit(s) on a {model.n_qubits}-qubit device"],
    }


def profile(state: PipelineState):
    jobs = [Job.from_circuit(c) for c in state["circuits"]]
    return {"jobs": jobs, "events": [f"profiled {', '.join(j.name for j in jobs)}"]}


def plan(state: PipelineState):
    cfg, model, tree, jobs = state["config"], state["model"], state["tree"], state["jobs"]
    if cfg.mode == "single":
        return {"batch_plan": separate_plan(jobs, model, tree), "next": "route", "events": ["planned separate execution"]}
    layouts = None
    if cfg.layout == "random":
        layouts = random_layouts([j.n_qubits for j in jobs], model, substream(cfg.seed, "layout"))
    result = joint_plan(jobs, model, tree, layouts)
    if result.batches[0].partition.reverted:
        return {"batch_plan": result, "next": "separate", "events": [f"partition failed at program {result.batches[0].partition.failed_program}"]}
    return {"batch_plan": result, "next": "route", "events": [f"planned one batch of {len(jobs)} program(s)"]}


def separate(state: PipelineState):
    logger.warning("programs cannot share the device; reverting to separate execution")
    plan = separate_plan(state["jobs"], state["model"], state["tree"])
    return {"batch_plan": plan, "status": STATUS_REVERTED, "events": ["reverted to separate execution"]}


def batch_schedule(state: PipelineState):
    cfg = state["config"]
    plan = schedule(state["jobs"], state["model"], state["tree"], cfg.scheduler, jobs=cfg.jobs)
    return {"batch_plan": plan, "events": [f"scheduled {plan.n_jobs} job(s) into {len(plan.batches)} batch(es)"]}


def route(state: PipelineState):
    cfg, plan = state["config"], state["batch_plan"]
    route_plan(plan, state["jobs"], state["model"], cfg.route_options, cfg.jobs)
    swaps = sum(len(b.schedule.swaps) for b in plan.batches)
    return {"batch_plan": plan, "events": [f"routed {len(plan.batches)} batch(es) with {swaps} swap(s)"]}


def _verify_batch(batch: Batch, state: PipelineState) -> Tuple[AuditResult, Optional[bool], Optional[str], MetricsReport]:
    circuits = [state["jobs"][i].circuit for i in batch.members]
    fs = batch.schedule
    audit = compliance_audit(fs, state["model"], circuits=circuits)
    equivalent, note = None, None
    try:
        equivalent = equivalence_check(circuits, fs, seed=state["config"].seed)
    except SimulationError as exc:
        logger.info("equivalence skipped for %s: %s", "+".join(batch.names), exc)
        note = f"skipped: {exc}"
    return audit, equivalent, note, compute_metrics(fs, circuits, state["model"])


def verify(state: PipelineState):
    batches = state["batch_plan"].batches
    workers = state["config"].jobs
    if workers > 1 and len(batches) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda b: _verify_batch(b, state), batches))
    else:
        results = [_verify_batch(b, state) for b in batches]
    audits = [r[0] for r in results]
    equivalence = [r[1] for r in results]
    failed = not all(a.ok for a in audits) or any(e is False for e in equivalence)
    update = {
        "audits": audits,
        "equivalence": equivalence,
        "equivalence_notes": [r[2] for r in results],
        "metrics": [r[3] for r in results],
        "next": END if failed else "report",
        "events": ["verification failed" if failed else "verification passed"],
    }
    if failed:
        update["status"] = STATUS_VERIFICATION_FAILED
    return update


def _batch_file(batch: Batch, index: int) -> str:
    return f"{batch.names[0]}.qasm" if len(batch.members) == 1 else f"batch_{index}.qasm"


def report(state: PipelineState):
    cfg, plan = state["config"], state["batch_plan"]
    out = Path(cfg.out)
    mapped = out / "mapped"
    mapped.mkdir(parents=True, exist_ok=True)
    outputs = []
    traces = []
    for index, batch in enumerate(plan.batches):
        circuits = [state["jobs"][i].circuit for i in batch.members]
        target = mapped / _batch_file(batch, index)
        target.write_text(batch.schedule.to_qasm(circuits), encoding="utf-8")
        outputs.append(str(target))
        traces.append({"batch": index, "programs": batch.names, **batch.schedule.to_dict()})
    summary = {
        "status": state["status"],
        "mode": cfg.mode,
        "xswap": cfg.xswap,
        "layout": cfg.layout,
        "trf": plan.trf,
        "batches": [
            {"programs": b.names, "metrics": m.model_dump(), "audit_ok": a.ok, "equivalent": e, "equivalence_note": note}
            for b, m, a, e, note in zip(plan.batches, state["metrics"], state["audits"], state["equivalence"], state["equivalence_notes"])
        ],
    }
    files = {
        "report.json": summary,
        "trace.json": traces,
        "tree.json": state["tree"].to_dict(),
        "plan.json": plan.to_dict(),
    }
    for name, payload in files.items():
        path = out / name
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        outputs.append(str(path))
    return {"outputs": outputs, "events": [f"wrote {len(outputs)} file(s) to {out}"]}


def _finish(workflow: StateGraph) -> None:
    workflow.add_node("route", route)
    workflow.add_node("verify", verify)
    workflow.add_node("report", report)
    workflow.add_edge("route", "verify")
    workflow.add_conditional_edges("verify", lambda state: state["next"], {"report": "report", END: END})
    workflow.add_edge("report", END)


map_workflow = StateGraph(PipelineState)
map_workflow.add_node("load", load)
map_workflow.add_node("profile", profile)
map_workflow.add_node("plan", plan)
map_workflow.add_node("separate", separate)
_finish(map_workflow)
map_workflow.add_edge(START, "load")
map_workflow.add_edge("load", "profile")
map_workflow.add_edge("profile", "plan")
map_workflow.add_conditional_edges("plan", lambda state: state["next"], {"route": "route", "separate": "separate"})
map_workflow.add_edge("separate", "route")

map_graph = map_workflow.compile()
map_graph.name = "nisqmap-map"


schedule_workflow = StateGraph(PipelineState)
schedule_workflow.add_node("load", load)
schedule_workflow.add_node("profile", profile)
schedule_workflow.add_node("schedule", batch_schedule)
_finish(schedule_workflow)
schedule_workflow.add_edge(START, "load")
schedule_workflow.add_edge("load", "profile")
schedule_workflow.add_edge("profile", "schedule")
schedule_workflow.add_edge("schedule", "route")

schedule_graph = schedule_workflow.compile()
schedule_graph.name = "nisqmap-schedule"
