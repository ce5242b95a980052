from pathlib import Path
from typing import Callable, List

import numpy as np
import pytest

import nisqmap
from nisqmap.circuit import Circuit
from nisqmap.device import DeviceModel
from nisqmap.qasm import load_circuit

BENCHMARKS = Path(nisqmap.__file__).parent / "benchmarks"

# 2x3 grid: A=0 B=1 C=2 on top, D=3 E=4 F=5 below.
SIX_QUBIT_EDGES = [(0, 1), (1, 2), (3, 4), (4, 5), (0, 3), (1, 4), (2, 5)]

# Two rows joined through a hub qubit 8.
NINE_QUBIT_EDGES = [(0, 1), (1, 2), (2, 3), (3, 4), (0, 8), (8, 4), (8, 5), (5, 6), (6, 7)]

ONE_QUBIT_KINDS = ["h", "x", "t", "s", "tdg", "rz", "ry"]


@pytest.fixture(scope="session")
def qft4() -> Circuit:
    return load_circuit(BENCHMARKS / "qft_4.qasm")


@pytest.fixture(scope="session")
def toffoli() -> Circuit:
    return load_circuit(BENCHMARKS / "toffoli.qasm")


@pytest.fixture
def six_qubit_device() -> DeviceModel:
    return DeviceModel.uniform(6, SIX_QUBIT_EDGES)


@pytest.fixture
def two_program_workload():
    """Each program has two compliant CNOTs and one CNOT two hops away."""
    p1 = Circuit.from_ops("p1", 3, [("cx", (0, 1)), ("cx", (1, 2)), ("cx", (0, 2))])
    p2 = Circuit.from_ops("p2", 3, [("cx", (1, 0)), ("cx", (0, 2)), ("cx", (1, 2))])
    layouts = [{0: 1, 1: 0, 2: 3}, {0: 5, 1: 4, 2: 2}]
    return [p1, p2], layouts


@pytest.fixture
def nine_qubit_device() -> DeviceModel:
    return DeviceModel.uniform(9, NINE_QUBIT_EDGES)


@pytest.fixture
def hub_workload():
    """Program 0 needs a CNOT between its two row ends; program 1 owns the hub."""
    p1 = Circuit.from_ops("row", 5, [("cx", (0, 4))])
    p2 = Circuit.from_ops("idle", 4, [])
    layouts = [{q: q for q in range(5)}, {0: 5, 1: 6, 2: 7, 3: 8}]
    return [p1, p2], layouts


def make_random_circuit(rng: np.random.Generator, name: str, n_qubits: int, n_gates: int, cx_share: float = 0.4) -> Circuit:
    ops = []
    for _ in range(n_gates):
        if n_qubits >= 2 and rng.random() < cx_share:
            a, b = rng.choice(n_qubits, size=2, replace=False)
            ops.append(("cx", (int(a), int(b))))
        else:
            kind = ONE_QUBIT_KINDS[int(rng.integers(len(ONE_QUBIT_KINDS)))]
            params = (float(rng.uniform(0, 2 * np.pi)),) if kind in ("rz", "ry") else ()
            ops.append((kind, (int(rng.integers(n_qubits)),), params))
    return Circuit.from_ops(name, n_qubits, ops)


@pytest.fixture
def random_circuit() -> Callable[..., Circuit]:
    return make_random_circuit


@pytest.fixture
def random_workload() -> Callable[..., List[Circuit]]:
    def build(rng: np.random.Generator, n_programs: int, max_qubits: int, max_gates: int) -> List[Circuit]:
        return [make_random_circuit(rng, f"p{i}", int(rng.integers(2, max_qubits + 1)), int(rng.integers(1, max_gates + 1))) for i in range(n_programs)]

    return build
