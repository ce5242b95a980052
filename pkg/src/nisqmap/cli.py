"""Command-line entry point.

Exit codes: 0 success, 1 verification failure, 2 input error, 3 routing failure.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from pydantic import ValidationError
from rich.console import Console
from rich.table import Table

from nisqmap.cdap import redundancy_sweep
from nisqmap.circuit import layer_cnots
from nisqmap.config import DEFAULT_EPSILON, DEFAULT_MAX_COLOC, DEFAULT_OMEGA, DEFAULT_WINDOW, CalibrationRanges, RunConfig, configure_logging
from nisqmap.device import device_from_topology, load_device
from nisqmap.errors import EmptyCandidateSetError, NisqmapError, RoutingDivergenceError, SimulationError
from nisqmap.pipeline import STATUS_VERIFICATION_FAILED, map_graph, schedule_graph
from nisqmap.profiler import build_profile
from nisqmap.qasm import load_circuit
from nisqmap.topology import gen_lattice
from nisqmap.verify import compliance_audit, equivalence_check
from nisqmap.xswap import FinalSchedule

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VERIFICATION = 1
EXIT_INPUT = 2
EXIT_ROUTING = 3

console = Console()


def _write_json(payload, out: Optional[Path]) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if out is None:
        sys.stdout.write(text)
        return
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text, encoding="utf-8")


# ============================================================================
# Commands
# ============================================================================


def cmd_profile(args: argparse.Namespace) -> int:
    circuit = load_circuit(args.circuit)
    layers = layer_cnots(circuit)
    report = {
        "name": circuit.name,
        "n_cnots": circuit.n_cnots,
        "depth": circuit.depth(),
        "gate_sets": len(layers),
        **build_profile(circuit, layers).to_dict(),
    }
    _write_json(report, args.out)
    return EXIT_OK


def cmd_gen_device(args: argparse.Namespace) -> int:
    ranges = CalibrationRanges(
        readout=tuple(args.readout_range),
        sq=tuple(args.sq_range),
        cx=tuple(args.cx_range),
        crosstalk_ratio=tuple(args.crosstalk_ratio),
        crosstalk_fraction=args.crosstalk_fraction,
    )
    model = device_from_topology(args.spec, args.seed, ranges)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    model.save(args.out)
    logger.info("wrote %s: %d qubits, %d edges", args.out, model.n_qubits, len(model.edges))
    return EXIT_OK


def _summarize(result: dict) -> None:
    table = Table(title=f"status: {result['status']}")
    for column in ("programs", "swaps", "inter", "cnots added", "depth", "audit", "equivalent"):
        table.add_column(column)
    for batch, metrics, audit, equivalent in zip(result["batch_plan"].batches, result["metrics"], result["audits"], result["equivalence"]):
        table.add_row(
            ", ".join(batch.names),
            str(metrics.swaps),
            str(metrics.inter_swaps),
            str(metrics.cnots_added),
            f"{metrics.depth_original} -> {metrics.depth_post}",
            "ok" if audit.ok else f"{len(audit.violations)} violation(s)",
            "skipped" if equivalent is None else str(equivalent).lower(),
        )
    console.print(table)
    console.print(f"TRF: {result['batch_plan'].trf:.2f}")


def _run_graph(graph, cfg: RunConfig) -> int:
    result = graph.invoke({"config": cfg, "events": []})
    for event in result["events"]:
        logger.info(event)
    _summarize(result)
    if result["status"] == STATUS_VERIFICATION_FAILED:
        for audit in result["audits"]:
            for violation in audit.violations:
                logger.error(violation)
        return EXIT_VERIFICATION
    return EXIT_OK


def cmd_map(args: argparse.Namespace) -> int:
    cfg = RunConfig(
        device=args.device,
        circuits=args.circuit,
        omega=args.omega,
        xswap=args.xswap == "on",
        mode=args.mode,
        layout=args.layout,
        seed=args.seed,
        out=args.out,
        jobs=args.jobs,
    )
    return _run_graph(map_graph, cfg)


def cmd_schedule(args: argparse.Namespace) -> int:
    cfg = RunConfig(
        device=args.device,
        queue=args.queue,
        omega=args.omega,
        epsilon=args.epsilon,
        max_coloc=args.max_coloc,
        window=args.window,
        xswap=args.xswap == "on",
        seed=args.seed,
        out=args.out,
        jobs=args.jobs,
    )
    return _run_graph(schedule_graph, cfg)


def cmd_verify(args: argparse.Namespace) -> int:
    model = load_device(args.device)
    circuits = {c.name: c for c in (load_circuit(path) for path in args.circuit)}
    batches = json.loads(args.trace.read_text(encoding="utf-8"))
    failed = False
    for batch in batches:
        missing = [name for name in batch["programs"] if name not in circuits]
        if missing:
            raise NisqmapError(f"trace references circuits that were not given: {', '.join(missing)}")
        members = [circuits[name] for name in batch["programs"]]
        fs = FinalSchedule.from_dict(batch)
        audit = compliance_audit(fs, model, circuits=members)
        for violation in audit.violations:
            logger.error("batch %s: %s", batch["batch"], violation)
        equivalent = None
        if args.equivalence:
            try:
                equivalent = equivalence_check(members, fs, seed=args.seed)
            except SimulationError as exc:
                logger.warning("batch %s: equivalence skipped: %s", batch["batch"], exc)
        if not audit.ok or equivalent is False:
            failed = True
        console.print(f"batch {batch['batch']}: audit {'ok' if audit.ok else 'FAILED'}, equivalence {'skipped' if equivalent is None else equivalent}")
    return EXIT_VERIFICATION if failed else EXIT_OK


def cmd_sweep_omega(args: argparse.Namespace) -> int:
    n, edges = gen_lattice(args.topology)
    frame = redundancy_sweep(n, edges, args.omegas, args.calibrations, args.seed)
    summary = frame.groupby("omega", sort=True)["mean_redundant"].mean()
    table = Table(title=f"mean redundant qubits on {args.topology}")
    table.add_column("omega")
    table.add_column("mean redundant")
    for omega, value in summary.items():
        table.add_row(f"{omega:g}", f"{value:.3f}")
    console.print(table)
    if args.out is not None:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(args.out, index=False)
    return EXIT_OK


# ============================================================================
# Parser
# ============================================================================


def _add_run_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--device", type=Path, required=True)
    parser.add_argument("--omega", type=float, default=DEFAULT_OMEGA)
    parser.add_argument("--xswap", choices=["on", "off"], default="on")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", type=Path, default=Path("out"))
    parser.add_argument("--jobs", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nisqmap", description="Multi-program qubit mapping on NISQ devices.")
    parser.add_argument("--log-level", default=None, help="overrides NISQMAP_LOG")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("profile", help="profile one circuit")
    p.add_argument("circuit", type=Path)
    p.add_argument("--out", type=Path, default=None)
    p.set_defaults(handler=cmd_profile)

    p = sub.add_parser("gen-device", help="generate a calibrated device file")
    p.add_argument("spec", help="grid2d:WxH, grid3d:XxYxZ, toronto or london")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", type=Path, required=True)
    defaults = CalibrationRanges()
    p.add_argument("--readout-range", type=float, nargs=2, default=defaults.readout)
    p.add_argument("--sq-range", type=float, nargs=2, default=defaults.sq)
    p.add_argument("--cx-range", type=float, nargs=2, default=defaults.cx)
    p.add_argument("--crosstalk-ratio", type=float, nargs=2, default=defaults.crosstalk_ratio)
    p.add_argument("--crosstalk-fraction", type=float, default=defaults.crosstalk_fraction)
    p.set_defaults(handler=cmd_gen_device)

    p = sub.add_parser("map", help="map circuits onto a device")
    _add_run_options(p)
    p.add_argument("--circuit", type=Path, action="append", required=True)
    p.add_argument("--mode", choices=["single", "multi"], default="multi")
    p.add_argument("--layout", choices=["cdap", "random"], default="cdap")
    p.set_defaults(handler=cmd_map)

    p = sub.add_parser("schedule", help="batch a job queue and map every batch")
    _add_run_options(p)
    p.add_argument("--queue", type=Path, required=True)
    p.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    p.add_argument("--max-coloc", type=int, default=DEFAULT_MAX_COLOC)
    p.add_argument("--window", type=int, default=DEFAULT_WINDOW)
    p.set_defaults(handler=cmd_schedule)

    p = sub.add_parser("verify", help="audit a written trace")
    p.add_argument("--device", type=Path, required=True)
    p.add_argument("--trace", type=Path, required=True)
    p.add_argument("--circuit", type=Path, action="append", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-equivalence", dest="equivalence", action="store_false")
    p.set_defaults(handler=cmd_verify)

    p = sub.add_parser("sweep-omega", help="redundant qubits against omega")
    p.add_argument("--topology", default="toronto")
    p.add_argument("--omegas", type=float, nargs="+", default=[0.0, 0.4, 1.0, 2.5])
    p.add_argument("--calibrations", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, default=None)
    p.set_defaults(handler=cmd_sweep_omega)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    try:
        return args.handler(args)
    except (RoutingDivergenceError, EmptyCandidateSetError) as exc:
        logger.error("routing failed: %s", exc)
        return EXIT_ROUTING
    except (NisqmapError, OSError, ValidationError, ValueError) as exc:
        logger.error("%s", exc)
        return EXIT_INPUT


if __name__ == "__main__":
    raise SystemExit(main())
