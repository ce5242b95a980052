"""Mapping transition with inter-program SWAPs.

The router drains hardware-compliant gates of every co-located program, and
when all fronts are blocked it picks one SWAP among the edges touching
critical-gate qubits. Candidates are scored by the nearest-neighbour cost of
the fronts and extended sets, plus a bonus for SWAPs that shortcut through
qubits owned by other programs.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Set, Tuple, Union

import networkx as nx
import numpy as np

from nisqmap.cdap import Layout
from nisqmap.circuit import Circuit, CircuitDag, DagCursor, Gate, GateSetLayering, build_dag, layer_cnots
from nisqmap.config import RouteOptions
from nisqmap.device import DeviceModel, Edge, conditional_cx_error, edge_key
from nisqmap.errors import EmptyCandidateSetError, RoutingDivergenceError, RoutingError
from nisqmap.profiler import InvolvementLists, build_involvement_lists

logger = logging.getLogger(__name__)

SCORE_TOLERANCE = 1e-9


class SwapClass(str, Enum):
    INTRA = "intra"
    INTER = "inter"


@dataclass(frozen=True)
class SwapOp:
    edge: Edge
    swap_class: SwapClass
    step: int
    score: Optional[float] = None


@dataclass(frozen=True)
class ScheduledGate:
    program: int
    gate_id: int
    physical: Tuple[int, ...]


ScheduleItem = Union[ScheduledGate, SwapOp]


@dataclass
class FinalSchedule:
    items: List[ScheduleItem]
    initial_layouts: List[Dict[int, int]]
    final_layouts: List[Dict[int, int]]
    completed: List[bool]
    n_physical: int

    @property
    def swaps(self) -> List[SwapOp]:
        return [item for item in self.items if isinstance(item, SwapOp)]

    @property
    def inter_swaps(self) -> int:
        return sum(1 for s in self.swaps if s.swap_class is SwapClass.INTER)

    @property
    def intra_swaps(self) -> int:
        return sum(1 for s in self.swaps if s.swap_class is SwapClass.INTRA)

    def trace(self) -> List[dict]:
        rows = []
        for step, item in enumerate(self.items):
            if isinstance(item, SwapOp):
                rows.append({"step": step, "op": "swap", "edge": list(item.edge), "score": item.score, "class": item.swap_class.value})
            else:
                rows.append({"step": step, "op": "gate", "program": item.program, "gate": item.gate_id, "physical": list(item.physical)})
        return rows

    def to_dict(self) -> dict:
        return {
            "n_physical": self.n_physical,
            "initial_layouts": [{str(k): v for k, v in sorted(lay.items())} for lay in self.initial_layouts],
            "final_layouts": [{str(k): v for k, v in sorted(lay.items())} for lay in self.final_layouts],
            "completed": list(self.completed),
            "trace": self.trace(),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "FinalSchedule":
        items: List[ScheduleItem] = []
        swap_index = 0
        for row in data["trace"]:
            if row["op"] == "swap":
                items.append(SwapOp(edge_key(*row["edge"]), SwapClass(row["class"]), swap_index, row.get("score")))
                swap_index += 1
            else:
                items.append(ScheduledGate(row["program"], row["gate"], tuple(row["physical"])))
        return cls(
            items=items,
            initial_layouts=[{int(k): v for k, v in lay.items()} for lay in data["initial_layouts"]],
            final_layouts=[{int(k): v for k, v in lay.items()} for lay in data["final_layouts"]],
            completed=list(data["completed"]),
            n_physical=data["n_physical"],
        )

    def to_qasm(self, circuits: Sequence[Circuit]) -> str:
        """Mapped assembly over physical qubits; each SWAP becomes three CNOTs."""
        offsets, total = [], 0
        for circuit in circuits:
            offsets.append(total)
            total += circuit.n_clbits
        lines = ["OPENQASM 2.0;", 'include "qelib1.inc";', f"qreg q[{self.n_physical}];"]
        if total:
            lines.append(f"creg c[{total}];")
        for item in self.items:
            if isinstance(item, SwapOp):
                a, b = item.edge
                lines += [f"cx q[{a}],q[{b}];", f"cx q[{b}],q[{a}];", f"cx q[{a}],q[{b}];"]
                continue
            gate = circuits[item.program].gates[item.gate_id]
            if gate.is_measure:
                lines.append(f"measure q[{item.physical[0]}] -> c[{offsets[item.program] + gate.clbit}];")
                continue
            head = gate.kind
            if gate.params:
                head += "(" + ",".join(repr(float(p)) for p in gate.params) + ")"
            lines.append(f"{head} " + ",".join(f"q[{p}]" for p in item.physical) + ";")
        return "\n".join(lines) + "\n"


# ============================================================================
# Mapping state
# ============================================================================


class MappingState:
    """Layouts of all co-located programs plus physical occupancy."""

    def __init__(self, model: DeviceModel, layouts: Sequence[Mapping[int, int]]):
        self.model = model
        self.layouts: List[Dict[int, int]] = [dict(lay) for lay in layouts]
        self.owner: Dict[int, Tuple[int, int]] = {}
        for program, layout in enumerate(self.layouts):
            for qubit, phys in layout.items():
                if not 0 <= phys < model.n_qubits:
                    raise RoutingError(f"program {program} qubit {qubit} mapped outside the device")
                if phys in self.owner:
                    raise RoutingError(f"physical qubit {phys} is assigned twice")
                self.owner[phys] = (program, qubit)
        self.D = model.distance_matrix()

    def phys(self, program: int, qubit: int) -> int:
        return self.layouts[program][qubit]

    def owner_program(self, phys: int) -> Optional[int]:
        entry = self.owner.get(phys)
        return None if entry is None else entry[0]

    def allowed(self, program: int) -> FrozenSet[int]:
        """Physical qubits not occupied by any other program."""
        return frozenset(p for p in range(self.model.n_qubits) if self.owner_program(p) in (None, program))

    def d_prime(self, program: int) -> np.ndarray:
        return self.model.distance_matrix(self.allowed(program))

    def own_distance(self, program: int) -> np.ndarray:
        return self.model.distance_matrix(self.layouts[program].values())

    def swap_class(self, a: int, b: int) -> SwapClass:
        pa, pb = self.owner_program(a), self.owner_program(b)
        return SwapClass.INTRA if pa is not None and pa == pb else SwapClass.INTER

    def apply_swap(self, a: int, b: int) -> None:
        at_a, at_b = self.owner.pop(a, None), self.owner.pop(b, None)
        if at_a is not None:
            self.owner[b] = at_a
            self.layouts[at_a[0]][at_a[1]] = b
        if at_b is not None:
            self.owner[a] = at_b
            self.layouts[at_b[0]][at_b[1]] = a


def _moved(phys: int, edge: Edge) -> int:
    a, b = edge
    if phys == a:
        return b
    if phys == b:
        return a
    return phys


# ============================================================================
# Look-ahead sets
# ============================================================================


def remaining_cnot_layers(circuit: Circuit, dag: CircuitDag, executed: Iterable[int] = ()) -> Dict[int, int]:
    """ASAP gate-set index of every unexecuted CNOT in the remaining DAG."""
    done = set(executed)
    level: Dict[int, int] = {}
    layers: Dict[int, int] = {}
    for gate in circuit.gates:
        if gate.id in done:
            continue
        depth = max((level[p] for p in dag.graph.predecessors(gate.id) if p not in done), default=0)
        if gate.is_cnot:
            depth += 1
            layers[gate.id] = depth
        level[gate.id] = depth
    return layers


def critical_gates(front: Iterable[int], dag: CircuitDag, circuit: Circuit, executed: Iterable[int] = ()) -> Set[int]:
    """Front CNOTs with a successor CNOT in the second remaining gate set."""
    layers = remaining_cnot_layers(circuit, dag, executed)
    critical = set()
    for gid in front:
        if gid not in layers:
            continue
        stack = dag.successors(gid)
        while stack:
            succ = stack.pop()
            if circuit.gates[succ].is_cnot:
                if layers.get(succ) == 2:
                    critical.add(gid)
                    break
            else:
                stack.extend(dag.successors(succ))
    return critical


def qubit_cnot_sequence(circuit: Circuit) -> Dict[int, List[int]]:
    sequence: Dict[int, List[int]] = {q: [] for q in range(circuit.n_qubits)}
    for gate in circuit.cnots:
        for q in gate.qubits:
            sequence[q].append(gate.id)
    return sequence


def build_extended_set(
    front: Iterable[int],
    circuit: Circuit,
    layering: GateSetLayering,
    involvement: InvolvementLists,
    executed: Iterable[int] = (),
    sequence: Optional[Dict[int, List[int]]] = None,
) -> List[int]:
    """CNOTs of the involvement runs active at the front's earliest gate set."""
    front_ids = {gid for gid in front if gid in layering.index_of}
    if not front_ids:
        return []
    done = set(executed)
    sequence = sequence if sequence is not None else qubit_cnot_sequence(circuit)
    earliest = min(layering.index_of[gid] for gid in front_ids)
    selected = set()
    for qubit, runs in involvement.items():
        offset, chosen = 0, None
        for start, length in runs:
            if start <= earliest:
                chosen = (offset, length)
            offset += length
        if chosen is None:
            continue
        first, length = chosen
        for gid in sequence[qubit][first : first + length]:
            if gid not in done and gid not in front_ids:
                selected.add(gid)
    return sorted(selected)


# ============================================================================
# Cost functions
# ============================================================================

GateSets = Mapping[int, Sequence[Gate]]


def gain(gate: Gate, program: int, state: MappingState) -> int:
    """Distance saved by routing through other programs' qubits (never positive)."""
    p, q = state.phys(program, gate.qubits[0]), state.phys(program, gate.qubits[1])
    return int(state.D[p, q] - state.d_prime(program)[p, q])


def _mean_distance(gates: Sequence[Gate], program: int, state: MappingState, edge: Edge, metric: np.ndarray) -> float:
    total = sum(metric[_moved(state.phys(program, g.qubits[0]), edge), _moved(state.phys(program, g.qubits[1]), edge)] for g in gates)
    return float(total) / len(gates)


def heuristic_H(
    edge: Edge,
    state: MappingState,
    fronts: GateSets,
    extended: GateSets,
    extended_weight: float = 0.5,
    metrics: Optional[Mapping[int, np.ndarray]] = None,
) -> float:
    """Nearest-neighbour cost of fronts plus weighted extended sets after ``edge`` is swapped."""
    front_cost = sum(_mean_distance(gates, i, state, edge, metrics[i] if metrics else state.D) for i, gates in fronts.items() if gates)
    ext_cost = sum(_mean_distance(gates, i, state, edge, metrics[i] if metrics else state.D) for i, gates in extended.items() if gates)
    return front_cost + extended_weight * ext_cost


def on_shortest_path(edge: Edge, source: int, target: int, distances: np.ndarray) -> bool:
    a, b = edge
    best = distances[source, target]
    return distances[source, a] + 1 + distances[b, target] == best or distances[source, b] + 1 + distances[a, target] == best


def score(
    edge: Edge,
    state: MappingState,
    fronts: GateSets,
    extended: GateSets,
    extended_weight: float = 0.5,
) -> float:
    """H plus the size-normalised gain of front gates whose shortest path uses ``edge``."""
    value = heuristic_H(edge, state, fronts, extended, extended_weight)
    for program, gates in fronts.items():
        if not gates:
            continue
        bonus = 0
        for g in gates:
            p, q = state.phys(program, g.qubits[0]), state.phys(program, g.qubits[1])
            if on_shortest_path(edge, p, q, state.D):
                bonus += gain(g, program, state)
        value += bonus / len(gates)
    return value


# ============================================================================
# Router
# ============================================================================


@dataclass(eq=False)
class _Program:
    index: int
    circuit: Circuit
    dag: CircuitDag
    layering: GateSetLayering
    involvement: InvolvementLists
    sequence: Dict[int, List[int]]
    cursor: DagCursor = field(init=False)

    def __post_init__(self):
        self.cursor = self.dag.cursor()

    @classmethod
    def build(cls, index: int, circuit: Circuit) -> "_Program":
        dag = build_dag(circuit)
        layering = layer_cnots(circuit, dag)
        return cls(index, circuit, dag, layering, build_involvement_lists(layering, circuit), qubit_cnot_sequence(circuit))

    def front_gates(self) -> List[Gate]:
        return [self.circuit.gates[gid] for gid in sorted(self.cursor.front)]


class Router:
    """One routing job; single-threaded, owns its mapping state."""

    def __init__(self, circuits: Sequence[Circuit], layouts: Sequence[Union[Layout, Mapping[int, int]]], model: DeviceModel, options: Optional[RouteOptions] = None):
        self.model = model
        self.options = options or RouteOptions()
        if len(circuits) != len(layouts):
            raise RoutingError("one layout per program is required")
        mappings = [dict(getattr(lay, "mapping", lay)) for lay in layouts]
        for circuit, mapping in zip(circuits, mappings):
            if sorted(mapping) != list(range(circuit.n_qubits)):
                raise RoutingError(f"layout of {circuit.name} must map every program qubit")
        self.programs = [_Program.build(i, c) for i, c in enumerate(circuits)]
        self.state = MappingState(model, mappings)
        self.initial = [dict(m) for m in mappings]
        self.items: List[ScheduleItem] = []
        self.n_swaps = 0
        self.recent: List[Edge] = []

    # ---------------------------------------------------------------- drain

    def _compliant(self, program: int, gate: Gate) -> bool:
        if not gate.is_cnot:
            return True
        return self.model.has_edge(*(self.state.phys(program, q) for q in gate.qubits))

    def _drain(self) -> bool:
        progressed = False
        changed = True
        while changed:
            changed = False
            for prog in self.programs:
                for gate in prog.front_gates():
                    if self._compliant(prog.index, gate):
                        prog.cursor.execute(gate.id)
                        physical = tuple(self.state.phys(prog.index, q) for q in gate.qubits)
                        self.items.append(ScheduledGate(prog.index, gate.id, physical))
                        if gate.is_cnot:
                            self.recent.append(edge_key(*physical))
                        changed = progressed = True
        return progressed

    # ---------------------------------------------------------------- search

    def _fronts(self) -> Dict[int, List[Gate]]:
        return {p.index: p.front_gates() for p in self.programs if p.cursor.front}

    def _extended(self, fronts: Mapping[int, Sequence[Gate]]) -> Dict[int, List[Gate]]:
        extended = {}
        for i, gates in fronts.items():
            prog = self.programs[i]
            ids = build_extended_set((g.id for g in gates), prog.circuit, prog.layering, prog.involvement, prog.cursor.executed, prog.sequence)
            extended[i] = [prog.circuit.gates[gid] for gid in ids]
        return extended

    def _candidates(self, fronts: Mapping[int, Sequence[Gate]]) -> List[Edge]:
        candidates = set()
        for i, gates in fronts.items():
            prog = self.programs[i]
            critical = critical_gates((g.id for g in gates), prog.dag, prog.circuit, prog.cursor.executed)
            chosen = [g for g in gates if g.id in critical] or list(gates)
            for gate in chosen:
                for q in gate.qubits:
                    a = self.state.phys(i, q)
                    for b in self.model.neighbors(a):
                        if self.options.xswap_enabled or self.state.owner_program(b) == i:
                            candidates.add(edge_key(a, b))
        return sorted(candidates)

    def _crosstalk_error(self, edge: Edge) -> float:
        """Conditional error of ``edge`` against CNOTs drained since the last SWAP."""
        concurrent = [e for e in self.recent if not set(e) & set(edge)]
        return conditional_cx_error(self.model, edge, concurrent, self.options.crosstalk_aggregation)

    def _select(self, fronts: Mapping[int, Sequence[Gate]]) -> Tuple[Edge, float]:
        candidates = self._candidates(fronts)
        if not candidates:
            raise EmptyCandidateSetError("no swap candidate touches a blocked front gate")
        extended = self._extended(fronts)
        weight = self.options.extended_weight
        if self.options.xswap_enabled:
            scored = [(score(e, self.state, fronts, extended, weight), e) for e in candidates]
        else:
            metrics = {i: self.state.own_distance(i) for i in fronts}
            scored = [(heuristic_H(e, self.state, fronts, extended, weight, metrics), e) for e in candidates]
        best = min(value for value, _ in scored)
        tied = [(value, e) for value, e in scored if value - best <= SCORE_TOLERANCE]
        if len(tied) > 1:
            tied.sort(key=lambda item: (self._crosstalk_error(item[1]), item[1]))
        value, edge = tied[0]
        return edge, value

    def _swap(self, edge: Edge, value: Optional[float]) -> None:
        op = SwapOp(edge, self.state.swap_class(*edge), self.n_swaps, value)
        self.state.apply_swap(*edge)
        self.recent = []
        self.items.append(op)
        self.n_swaps += 1
        logger.debug("swap %s (%s) score=%s", edge, op.swap_class.value, value)

    def _release(self, fronts: Mapping[int, Sequence[Gate]]) -> bool:
        """Walk the closest blocked CNOT together along a shortest allowed path."""
        best = None
        for i, gates in fronts.items():
            graph = self.model.graph if self.options.xswap_enabled else self.model.subgraph(self.state.layouts[i].values())
            for g in gates:
                p, q = self.state.phys(i, g.qubits[0]), self.state.phys(i, g.qubits[1])
                try:
                    path = nx.shortest_path(graph, p, q)
                except nx.NetworkXNoPath:
                    continue
                if best is None or len(path) < len(best):
                    best = path
        if best is None:
            return False
        logger.info("release valve: walking %d swaps along %s", len(best) - 2, best)
        for k in range(len(best) - 2):
            self._swap(edge_key(best[k], best[k + 1]), None)
        return True

    # ---------------------------------------------------------------- loop

    def run(self) -> FinalSchedule:
        n = self.model.n_qubits
        limit = n * n
        release_after = self.options.release_after or n
        stalled = 0
        while True:
            if self._drain():
                stalled = 0
            if all(p.cursor.done for p in self.programs):
                break
            if stalled >= limit:
                raise RoutingDivergenceError(f"no front gate became compliant within {limit} swaps")
            fronts = self._fronts()
            if self.options.release_valve and stalled >= release_after and self._release(fronts):
                stalled += 1
                continue
            edge, value = self._select(fronts)
            self._swap(edge, value)
            stalled += 1
        logger.info("routed %d program(s): %d swaps", len(self.programs), self.n_swaps)
        return FinalSchedule(
            items=self.items,
            initial_layouts=self.initial,
            final_layouts=[dict(lay) for lay in self.state.layouts],
            completed=[p.cursor.done for p in self.programs],
            n_physical=n,
        )


def route(
    circuits: Sequence[Circuit],
    layouts: Sequence[Union[Layout, Mapping[int, int]]],
    model: DeviceModel,
    options: Optional[RouteOptions] = None,
) -> FinalSchedule:
    """Insert SWAPs until every gate of every program has executed."""
    return Router(circuits, layouts, model, options).run()
