"""Program profiling: involvement lists, coupling strength and initial subcircuit.

Involvement lists record, per program qubit, when and for how long it takes
part in consecutive CNOT gate sets. The coupling matrix counts CNOTs per
qubit pair. Both drive allocation; routing only uses the involvement lists.
"""

from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from nisqmap.circuit import Circuit, GateSetLayering, build_dag, layer_cnots

Run = Tuple[int, int]
InvolvementLists = Dict[int, List[Run]]


@dataclass(frozen=True)
class Profile:
    involvement: InvolvementLists
    coupling: np.ndarray
    qubit_degrees: Tuple[int, ...]
    subcircuit_layers: int

    @property
    def n_qubits(self) -> int:
        return int(self.coupling.shape[0])

    def first_run(self, qubit: int) -> Optional[Run]:
        runs = self.involvement.get(qubit) or []
        return runs[0] if runs else None

    def to_dict(self) -> dict:
        return {
            "n_qubits": self.n_qubits,
            "involvement": {str(q): [list(run) for run in runs] for q, runs in sorted(self.involvement.items())},
            "coupling": self.coupling.tolist(),
            "qubit_degrees": list(self.qubit_degrees),
            "subcircuit_layers": self.subcircuit_layers,
        }


def build_involvement_lists(layers: GateSetLayering, circuit: Circuit, upto: Optional[int] = None) -> InvolvementLists:
    """Per-qubit runs ``(start, length)`` over the first ``upto`` gate sets.

    A qubit extends its current run when one of its gates is still in the
    working set at the time the current gate set is examined; the working set
    is pruned of gates sharing a qubit with the current set afterwards.
    """
    involvement: InvolvementLists = {q: [] for q in range(circuit.n_qubits)}
    gates = {g.id: g for g in circuit.gates}
    working: List[int] = []
    n_layers = len(layers) if upto is None else min(upto, len(layers))
    for index in range(1, n_layers + 1):
        current = sorted(layers.layer(index))
        current_qubits = {q for gid in current for q in gates[gid].qubits}
        evicted = [gid for gid in working if current_qubits.intersection(gates[gid].qubits)]
        for gid in current:
            for q in gates[gid].qubits:
                runs = involvement[q]
                if runs and any(q in gates[w].qubits for w in working):
                    start, length = runs[-1]
                    runs[-1] = (start, length + 1)
                else:
                    runs.append((index, 1))
        working = [gid for gid in working if gid not in evicted] + current
    return involvement


def build_coupling_matrix(circuit: Circuit) -> np.ndarray:
    coupling = np.zeros((circuit.n_qubits, circuit.n_qubits), dtype=np.int64)
    for gate in circuit.cnots:
        a, b = gate.qubits
        coupling[a, b] += 1
        coupling[b, a] += 1
    return coupling


def extract_initial_subcircuit(circuit: Circuit, layers: GateSetLayering) -> int:
    """Smallest gate-set prefix in which every CNOT-active qubit already appears."""
    active = circuit.active_qubits
    if not active:
        return 0
    gates = {g.id: g for g in circuit.gates}
    touched = set()
    for index in range(1, len(layers) + 1):
        touched.update(q for gid in layers.layer(index) for q in gates[gid].qubits)
        if touched >= active:
            return index
    return len(layers)


def _degrees(coupling: np.ndarray) -> Tuple[int, ...]:
    return tuple(int(d) for d in np.count_nonzero(coupling, axis=1))


def build_profile(circuit: Circuit, layers: Optional[GateSetLayering] = None) -> Profile:
    """Full-circuit profile, used for routing look-ahead and reporting."""
    layers = layers or layer_cnots(circuit, build_dag(circuit))
    coupling = build_coupling_matrix(circuit)
    return Profile(
        involvement=build_involvement_lists(layers, circuit),
        coupling=coupling,
        qubit_degrees=_degrees(coupling),
        subcircuit_layers=extract_initial_subcircuit(circuit, layers),
    )


def initial_mapping_profile(circuit: Circuit, layers: Optional[GateSetLayering] = None) -> Profile:
    """Profile restricted to the initial-mapping prefix of gate sets."""
    layers = layers or layer_cnots(circuit, build_dag(circuit))
    prefix = extract_initial_subcircuit(circuit, layers)
    in_prefix = {gid for index in range(1, prefix + 1) for gid in layers.layer(index)}
    coupling = np.zeros((circuit.n_qubits, circuit.n_qubits), dtype=np.int64)
    for gate in circuit.cnots:
        if gate.id in in_prefix:
            a, b = gate.qubits
            coupling[a, b] += 1
            coupling[b, a] += 1
    return Profile(
        involvement=build_involvement_lists(layers, circuit, upto=prefix),
        coupling=coupling,
        qubit_degrees=_degrees(coupling),
        subcircuit_layers=prefix,
    )
