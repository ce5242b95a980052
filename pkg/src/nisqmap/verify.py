"""Verification of routed schedules.

``compliance_audit`` replays a schedule and checks hardware constraints.
``equivalence_check`` compares state vectors of the original programs and of
the mapped schedule on small workloads. ``compute_metrics`` reports CNOT
overhead, depth and success-probability estimates.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Literal, Optional, Sequence, Set, Tuple

import numpy as np
from pydantic import BaseModel, Field

from nisqmap.circuit import Circuit, Gate, build_dag
from nisqmap.config import substream
from nisqmap.device import DeviceModel
from nisqmap.errors import SimulationError
from nisqmap.scheduler import Job, epst
from nisqmap.xswap import FinalSchedule, SwapOp

logger = logging.getLogger(__name__)

MAX_SIM_QUBITS = 14
AMPLITUDE_TOLERANCE = 1e-9


# ============================================================================
# Compliance audit
# ============================================================================


@dataclass
class AuditResult:
    violations: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def compliance_audit(
    fs: FinalSchedule,
    model: DeviceModel,
    initial_layouts: Optional[Sequence[Dict[int, int]]] = None,
    circuits: Optional[Sequence[Circuit]] = None,
) -> AuditResult:
    """Replay ``fs`` from the initial layouts and collect every violation."""
    result = AuditResult()
    layouts = [dict(lay) for lay in (initial_layouts if initial_layouts is not None else fs.initial_layouts)]
    owner: Dict[int, Tuple[int, int]] = {p: (i, q) for i, lay in enumerate(layouts) for q, p in lay.items()}
    seen: List[Set[int]] = [set() for _ in layouts]
    dags = [build_dag(c) for c in circuits] if circuits is not None else None
    for step, item in enumerate(fs.items):
        if isinstance(item, SwapOp):
            a, b = item.edge
            if not model.has_edge(a, b):
                result.violations.append(f"step {step}: swap on non-edge ({a},{b})")
            at_a, at_b = owner.pop(a, None), owner.pop(b, None)
            if at_a is not None:
                owner[b] = at_a
                layouts[at_a[0]][at_a[1]] = b
            if at_b is not None:
                owner[a] = at_b
                layouts[at_b[0]][at_b[1]] = a
            continue
        if not 0 <= item.program < len(layouts):
            result.violations.append(f"step {step}: unknown program {item.program}")
            continue
        if item.gate_id in seen[item.program]:
            result.violations.append(f"step {step}: gate {item.gate_id} of program {item.program} scheduled twice")
        if circuits is not None:
            circuit = circuits[item.program]
            if not 0 <= item.gate_id < len(circuit.gates):
                result.violations.append(f"step {step}: program {item.program} has no gate {item.gate_id}")
                continue
            gate = circuit.gates[item.gate_id]
            physical = tuple(layouts[item.program].get(q, -1) for q in gate.qubits)
            if physical != item.physical:
                result.violations.append(f"step {step}: gate {item.gate_id} recorded on {item.physical}, layout places it on {physical}")
            early = [p for p in dags[item.program].predecessors(item.gate_id) if p not in seen[item.program]]
            if early:
                result.violations.append(f"step {step}: gate {item.gate_id} of program {item.program} runs before {early}")
        if len(item.physical) == 2 and not model.has_edge(*item.physical):
            result.violations.append(f"step {step}: two-qubit gate on non-edge {item.physical}")
        seen[item.program].add(item.gate_id)
    if circuits is not None:
        for i, circuit in enumerate(circuits):
            missing = sorted(set(range(len(circuit.gates))) - seen[i])
            if missing:
                result.violations.append(f"program {i}: gates {missing} never scheduled")
    if layouts != [dict(lay) for lay in fs.final_layouts]:
        result.violations.append("replayed final layouts differ from the recorded ones")
    if result.violations:
        logger.warning("compliance audit found %d violation(s)", len(result.violations))
    return result


# ============================================================================
# State-vector simulation
# ============================================================================


def _u3(theta: float, phi: float, lam: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -np.exp(1j * lam) * s], [np.exp(1j * phi) * s, np.exp(1j * (phi + lam)) * c]], dtype=complex)


def _phase(lam: float) -> np.ndarray:
    return np.array([[1, 0], [0, np.exp(1j * lam)]], dtype=complex)


def _rz(theta: float) -> np.ndarray:
    return np.array([[np.exp(-0.5j * theta), 0], [0, np.exp(0.5j * theta)]], dtype=complex)


_SQRT_HALF = 1 / np.sqrt(2)

GATE_MATRICES: Dict[str, Callable[..., np.ndarray]] = {
    "id": lambda: np.eye(2, dtype=complex),
    "h": lambda: np.array([[_SQRT_HALF, _SQRT_HALF], [_SQRT_HALF, -_SQRT_HALF]], dtype=complex),
    "x": lambda: np.array([[0, 1], [1, 0]], dtype=complex),
    "y": lambda: np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": lambda: np.diag([1, -1]).astype(complex),
    "s": lambda: _phase(np.pi / 2),
    "sdg": lambda: _phase(-np.pi / 2),
    "t": lambda: _phase(np.pi / 4),
    "tdg": lambda: _phase(-np.pi / 4),
    "rx": lambda theta: _u3(theta, -np.pi / 2, np.pi / 2),
    "ry": lambda theta: _u3(theta, 0.0, 0.0),
    "rz": _rz,
    "u1": _phase,
    "p": _phase,
    "u2": lambda phi, lam: _u3(np.pi / 2, phi, lam),
    "u3": _u3,
}


def gate_matrix(gate: Gate) -> np.ndarray:
    try:
        factory = GATE_MATRICES[gate.kind]
    except KeyError:
        raise SimulationError(f"gate '{gate.kind}' cannot be simulated") from None
    try:
        return factory(*gate.params)
    except TypeError:
        raise SimulationError(f"gate '{gate.kind}' got {len(gate.params)} parameter(s)") from None


def apply_one_qubit(psi: np.ndarray, matrix: np.ndarray, axis: int) -> np.ndarray:
    return np.moveaxis(np.tensordot(matrix, psi, axes=([1], [axis])), 0, axis)


def apply_cx(psi: np.ndarray, control: int, target: int) -> np.ndarray:
    index = [slice(None)] * psi.ndim
    index[control] = 1
    out = psi.copy()
    out[tuple(index)] = np.flip(psi[tuple(index)], axis=target - 1 if target > control else target)
    return out


def apply_gate(psi: np.ndarray, gate: Gate, axes: Sequence[int]) -> np.ndarray:
    if gate.is_measure:
        return psi
    if gate.is_cnot:
        return apply_cx(psi, axes[0], axes[1])
    return apply_one_qubit(psi, gate_matrix(gate), axes[0])


def random_state(n_qubits: int, rng: np.random.Generator) -> np.ndarray:
    """Normalised random amplitudes shaped ``(2,) * n_qubits``."""
    if n_qubits > MAX_SIM_QUBITS:
        raise SimulationError(f"{n_qubits} qubits exceed the simulation limit of {MAX_SIM_QUBITS}")
    psi = rng.normal(size=2**n_qubits) + 1j * rng.normal(size=2**n_qubits)
    return (psi / np.linalg.norm(psi)).reshape((2,) * n_qubits)


def simulate(circuit: Circuit, initial: Optional[np.ndarray] = None) -> np.ndarray:
    """Final state of ``circuit``; starts from |0...0> unless ``initial`` is given."""
    n = circuit.n_qubits
    if n > MAX_SIM_QUBITS:
        raise SimulationError(f"{n} qubits exceed the simulation limit of {MAX_SIM_QUBITS}")
    if initial is None:
        psi = np.zeros((2,) * n, dtype=complex)
        psi[(0,) * n] = 1.0
    else:
        psi = np.asarray(initial, dtype=complex).reshape((2,) * n)
    for gate in circuit.gates:
        psi = apply_gate(psi, gate, gate.qubits)
    return psi.reshape(-1)


# ============================================================================
# Equivalence
# ============================================================================


def _touched(fs: FinalSchedule) -> List[int]:
    touched = {p for lay in fs.initial_layouts for p in lay.values()}
    for item in fs.items:
        touched.update(item.edge if isinstance(item, SwapOp) else item.physical)
    return sorted(touched)


def equivalence_check(
    circuits: Sequence[Circuit],
    fs: FinalSchedule,
    swap_mode: Literal["cnot", "relabel"] = "cnot",
    seed: int = 0,
    tol: float = AMPLITUDE_TOLERANCE,
) -> bool:
    """Compare the programs, tensored in declared order, with the mapped schedule.

    Only physical qubits the schedule touches are simulated. Unused qubits
    that swaps move through start in |0>.
    """
    offsets, n_logical = [], 0
    for circuit in circuits:
        offsets.append(n_logical)
        n_logical += circuit.n_qubits
    touched = _touched(fs)
    if len(touched) > MAX_SIM_QUBITS:
        raise SimulationError(f"schedule touches {len(touched)} qubits, limit is {MAX_SIM_QUBITS}")
    position = {p: c for c, p in enumerate(touched)}
    token_at: Dict[int, int] = {}
    for i, lay in enumerate(fs.initial_layouts):
        for q, p in lay.items():
            token_at[position[p]] = offsets[i] + q
    n_tokens = len(touched)
    ancillas = [c for c in range(n_tokens) if c not in token_at]
    for k, c in enumerate(ancillas):
        token_at[c] = n_logical + k

    rng = substream(seed, "equivalence")
    psi = random_state(n_logical, rng).reshape(-1)
    zero = np.zeros(2 ** len(ancillas), dtype=complex)
    zero[0] = 1.0
    psi_logical = np.kron(psi, zero).reshape((2,) * n_tokens) if n_tokens else psi

    expected = psi_logical
    for i, circuit in enumerate(circuits):
        for gate in circuit.gates:
            expected = apply_gate(expected, gate, [offsets[i] + q for q in gate.qubits])

    mapped = np.transpose(psi_logical, axes=[token_at[c] for c in range(n_tokens)])
    axis_of = list(range(n_tokens))
    for item in fs.items:
        if isinstance(item, SwapOp):
            a, b = position[item.edge[0]], position[item.edge[1]]
            if swap_mode == "cnot":
                for control, target in ((a, b), (b, a), (a, b)):
                    mapped = apply_cx(mapped, control, target)
            else:
                axis_of[a], axis_of[b] = axis_of[b], axis_of[a]
            token_at[a], token_at[b] = token_at[b], token_at[a]
            continue
        gate = circuits[item.program].gates[item.gate_id]
        mapped = apply_gate(mapped, gate, [axis_of[position[p]] for p in item.physical])

    position_of_token = {token: c for c, token in token_at.items()}
    actual = np.transpose(mapped, axes=[axis_of[position_of_token[t]] for t in range(n_tokens)])
    deviation = float(np.max(np.abs(actual - expected))) if n_tokens else 0.0
    if deviation > tol:
        logger.warning("mapped schedule deviates from the original by %.3e (%s swaps)", deviation, swap_mode)
        return False
    return True


# ============================================================================
# Metrics
# ============================================================================


class MetricsReport(BaseModel):
    cnots_original: int = Field(ge=0)
    cnots_added: int = Field(ge=0, multiple_of=3)
    swaps: int = Field(ge=0)
    inter_swaps: int = Field(ge=0)
    intra_swaps: int = Field(ge=0)
    depth_original: int = Field(ge=0)
    depth_post: int = Field(ge=0)
    epst_values: List[float] = Field(default_factory=list)
    epst_post: List[float] = Field(default_factory=list)
    trf: Optional[float] = None


def schedule_depth(fs: FinalSchedule) -> int:
    """Longest chain over physical wires; a swap is three CNOTs in series."""
    level: Dict[int, int] = {}
    for item in fs.items:
        if isinstance(item, SwapOp):
            d = 3 + max(level.get(p, 0) for p in item.edge)
            wires = item.edge
        else:
            d = 1 + max(level.get(p, 0) for p in item.physical)
            wires = item.physical
        for p in wires:
            level[p] = d
    return max(level.values(), default=0)


def swap_cnots_per_program(fs: FinalSchedule) -> List[int]:
    """Swap CNOTs charged to each program owning an endpoint at swap time."""
    owner = {p: i for i, lay in enumerate(fs.initial_layouts) for p in lay.values()}
    charged = [0] * len(fs.initial_layouts)
    for swap in fs.swaps:
        a, b = swap.edge
        for i in {owner.get(a), owner.get(b)} - {None}:
            charged[i] += 3
        at_a, at_b = owner.pop(a, None), owner.pop(b, None)
        if at_a is not None:
            owner[b] = at_a
        if at_b is not None:
            owner[a] = at_b
    return charged


def compute_metrics(
    fs: FinalSchedule,
    circuits: Sequence[Circuit],
    model: Optional[DeviceModel] = None,
    trf: Optional[float] = None,
) -> MetricsReport:
    """Overhead and fidelity estimates of one routed batch."""
    epst_values, epst_post = [], []
    if model is not None:
        charged = swap_cnots_per_program(fs)
        for circuit, layout, extra in zip(circuits, fs.initial_layouts, charged):
            if not layout:
                continue
            job = Job.from_circuit(circuit)
            epst_values.append(epst(job, layout.values(), model))
            epst_post.append(epst(job, layout.values(), model, extra_cnots=extra))
    return MetricsReport(
        cnots_original=sum(c.n_cnots for c in circuits),
        cnots_added=3 * len(fs.swaps),
        swaps=len(fs.swaps),
        inter_swaps=fs.inter_swaps,
        intra_swaps=fs.intra_swaps,
        depth_original=max((c.depth() for c in circuits), default=0),
        depth_post=schedule_depth(fs),
        epst_values=epst_values,
        epst_post=epst_post,
        trf=trf,
    )
