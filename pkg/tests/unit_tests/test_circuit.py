import pytest

from nisqmap.circuit import Circuit, build_dag, layer_cnots


def test_from_ops_assigns_dense_ids() -> None:
    circuit = Circuit.from_ops("c", 2, [("h", (0,)), ("cx", (0, 1)), ("rz", (1,), (0.5,))])
    assert [g.id for g in circuit.gates] == [0, 1, 2]
    assert circuit.gates[2].params == (0.5,)
    assert circuit.n_cnots == 1
    assert circuit.n_one_qubit_gates == 2


@pytest.mark.parametrize(
    "ops",
    [
        [("cx", (0, 0))],
        [("cx", (0,))],
        [("h", (2,))],
        [("h", (0, 1))],
    ],
)
def test_invalid_gates_rejected(ops) -> None:
    with pytest.raises(ValueError):
        Circuit.from_ops("bad", 2, ops)


def test_dag_front_and_cursor(toffoli) -> None:
    dag = build_dag(toffoli)
    assert dag.front == frozenset({0})
    cursor = dag.cursor()
    cursor.execute(0)
    assert cursor.front == {1}
    with pytest.raises(ValueError):
        cursor.execute(3)
    for gid in range(1, len(toffoli.gates)):
        cursor.execute(gid)
    assert cursor.done


def test_dag_edges_follow_shared_qubits() -> None:
    circuit = Circuit.from_ops("c", 3, [("h", (0,)), ("h", (2,)), ("cx", (0, 1)), ("cx", (1, 2))])
    dag = build_dag(circuit)
    assert dag.front == frozenset({0, 1})
    assert dag.edges == {0: [2], 1: [3], 2: [3], 3: []}
    assert dag.predecessors(3) == [1, 2]


def test_qft4_layering(qft4) -> None:
    layers = layer_cnots(qft4)
    assert len(layers) == 12
    assert all(len(layers.layer(i)) == 1 for i in range(1, 13))
    cnots = [g.id for g in qft4.cnots]
    assert [layers.index_of[gid] for gid in cnots] == list(range(1, 13))


def test_layering_looks_through_one_qubit_gates() -> None:
    circuit = Circuit.from_ops("c", 4, [("cx", (0, 1)), ("h", (1,)), ("t", (1,)), ("cx", (1, 2)), ("cx", (0, 3))])
    layers = layer_cnots(circuit)
    assert layers.layer(1) == frozenset({0})
    assert layers.layer(2) == frozenset({3, 4})


def test_depth_counts_every_gate() -> None:
    circuit = Circuit.from_ops("c", 2, [("h", (0,)), ("cx", (0, 1)), ("measure", (1,))])
    assert circuit.depth() == 3
    assert Circuit("empty", 2).depth() == 0


def test_active_qubits(toffoli) -> None:
    assert toffoli.active_qubits == frozenset({0, 1, 2})
    assert Circuit.from_ops("c", 3, [("h", (2,))]).active_qubits == frozenset()
