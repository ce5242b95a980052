"""Circuit model, dependency DAG and CNOT gate-set layering.

A ``Circuit`` is an immutable gate list over program qubits. Everything the
mapper needs downstream (front layers, gate-set indices, involvement runs) is
derived from the DAG built here.
"""

from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

import networkx as nx

CNOT = "cx"
MEASURE = "measure"


@dataclass(frozen=True)
class Gate:
    """One instruction. For a CNOT ``qubits`` is (control, target)."""

    id: int
    kind: str
    qubits: Tuple[int, ...]
    params: Tuple[float, ...] = ()
    clbit: Optional[int] = None

    @property
    def is_cnot(self) -> bool:
        return self.kind == CNOT

    @property
    def is_measure(self) -> bool:
        return self.kind == MEASURE


@dataclass(frozen=True)
class Circuit:
    name: str
    n_qubits: int
    gates: Tuple[Gate, ...] = ()
    n_clbits: int = 0

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        for position, gate in enumerate(self.gates):
            if gate.id != position:
                raise ValueError(f"gate ids must be dense and ordered, got {gate.id} at position {position}")
            if any(q < 0 or q >= self.n_qubits for q in gate.qubits):
                raise ValueError(f"gate {gate.id} references a qubit outside 0..{self.n_qubits - 1}")
            expected = 2 if gate.is_cnot else 1
            if len(gate.qubits) != expected or len(set(gate.qubits)) != expected:
                raise ValueError(f"gate {gate.id} ({gate.kind}) needs {expected} distinct qubits")

    @classmethod
    def from_ops(cls, name: str, n_qubits: int, ops: Iterable[Sequence], n_clbits: int = 0) -> "Circuit":
        """Build from ``(kind, qubits[, params])`` tuples, assigning ids in order."""
        gates = []
        for position, op in enumerate(ops):
            kind, qubits = op[0], tuple(op[1])
            params = tuple(op[2]) if len(op) > 2 else ()
            clbit = qubits[0] if kind == MEASURE else None
            gates.append(Gate(position, kind, qubits, params, clbit))
        if any(g.is_measure for g in gates):
            n_clbits = max(n_clbits, n_qubits)
        return cls(name, n_qubits, tuple(gates), n_clbits)

    @property
    def cnots(self) -> List[Gate]:
        return [g for g in self.gates if g.is_cnot]

    @property
    def n_cnots(self) -> int:
        return sum(1 for g in self.gates if g.is_cnot)

    @property
    def n_one_qubit_gates(self) -> int:
        return sum(1 for g in self.gates if not g.is_cnot and not g.is_measure)

    @property
    def active_qubits(self) -> FrozenSet[int]:
        """Qubits touched by at least one CNOT."""
        return frozenset(q for g in self.gates if g.is_cnot for q in g.qubits)

    def depth(self) -> int:
        """Longest gate chain, every gate (measure included) counting 1."""
        level = [0] * self.n_qubits
        for gate in self.gates:
            d = 1 + max(level[q] for q in gate.qubits)
            for q in gate.qubits:
                level[q] = d
        return max(level, default=0)


@dataclass(eq=False)
class CircuitDag:
    """Gate dependency graph; an edge u->v means v is the next gate after u on a shared qubit."""

    graph: nx.DiGraph

    @property
    def nodes(self) -> List[int]:
        return sorted(self.graph.nodes)

    @property
    def edges(self) -> Dict[int, List[int]]:
        return {n: sorted(self.graph.successors(n)) for n in self.nodes}

    @property
    def front(self) -> FrozenSet[int]:
        return frozenset(n for n, d in self.graph.in_degree() if d == 0)

    def successors(self, gate_id: int) -> List[int]:
        return sorted(self.graph.successors(gate_id))

    def predecessors(self, gate_id: int) -> List[int]:
        return sorted(self.graph.predecessors(gate_id))

    def cursor(self) -> "DagCursor":
        return DagCursor(self)


@dataclass(eq=False)
class DagCursor:
    """Mutable execution pointer over a ``CircuitDag``.

    ``front`` is always the set of unexecuted gates with no unexecuted
    predecessor.
    """

    dag: CircuitDag
    pending: Dict[int, int] = field(init=False)
    front: Set[int] = field(init=False)
    executed: Set[int] = field(init=False)

    def __post_init__(self):
        self.pending = {n: d for n, d in self.dag.graph.in_degree()}
        self.front = {n for n, d in self.pending.items() if d == 0}
        self.executed = set()

    @property
    def done(self) -> bool:
        return not self.front

    def execute(self, gate_id: int) -> None:
        if gate_id not in self.front:
            raise ValueError(f"gate {gate_id} is not in the front layer")
        self.front.discard(gate_id)
        self.executed.add(gate_id)
        for succ in self.dag.graph.successors(gate_id):
            self.pending[succ] -= 1
            if self.pending[succ] == 0:
                self.front.add(succ)


@dataclass(frozen=True)
class GateSetLayering:
    """ASAP layering of the CNOTs; layer indices are 1-based."""

    layers: Tuple[FrozenSet[int], ...]
    index_of: Mapping[int, int]

    def __len__(self) -> int:
        return len(self.layers)

    def layer(self, index: int) -> FrozenSet[int]:
        return self.layers[index - 1]


def build_dag(circuit: Circuit) -> CircuitDag:
    graph = nx.DiGraph()
    graph.add_nodes_from(g.id for g in circuit.gates)
    last: Dict[int, int] = {}
    for gate in circuit.gates:
        for q in gate.qubits:
            if q in last:
                graph.add_edge(last[q], gate.id)
            last[q] = gate.id
    return CircuitDag(graph)


def layer_cnots(circuit: Circuit, dag: Optional[CircuitDag] = None) -> GateSetLayering:
    """Layer CNOTs as soon as possible, looking through one-qubit gates."""
    dag = dag or build_dag(circuit)
    level: Dict[int, int] = {}
    index_of: Dict[int, int] = {}
    for gate in circuit.gates:
        depth = max((level[p] for p in dag.graph.predecessors(gate.id)), default=0)
        if gate.is_cnot:
            depth += 1
            index_of[gate.id] = depth
        level[gate.id] = depth
    n_layers = max(index_of.values(), default=0)
    buckets: List[Set[int]] = [set() for _ in range(n_layers)]
    for gid, idx in index_of.items():
        buckets[idx - 1].add(gid)
    return GateSetLayering(tuple(frozenset(b) for b in buckets), index_of)
