import json

import networkx as nx
import numpy as np
import pytest

from nisqmap.config import CalibrationRanges
from nisqmap.device import DeviceModel, conditional_cx_error, crosstalk_candidate_pairs, device_from_topology, gen_calibration, load_device
from nisqmap.errors import DeviceValidationError
from nisqmap.topology import LONDON_EDGES, TORONTO_EDGES, gen_lattice, grid2d, grid3d


def test_grid2d_row_major() -> None:
    n, edges = grid2d(3, 2)
    assert n == 6
    assert edges == [(0, 1), (0, 3), (1, 2), (1, 4), (2, 5), (3, 4), (4, 5)]


def test_grid3d_counts() -> None:
    n, edges = grid3d(3, 3, 3)
    assert n == 27
    assert len(edges) == 54


def test_gen_lattice_specs() -> None:
    assert gen_lattice("grid2d:1x2") == (2, [(0, 1)])
    assert gen_lattice("toronto")[0] == 27
    assert len(TORONTO_EDGES) == 28
    assert gen_lattice("london") == (5, LONDON_EDGES)
    with pytest.raises(ValueError):
        gen_lattice("grid2d:3x3x3")
    with pytest.raises(ValueError):
        gen_lattice("hexagon:3")
    with pytest.raises(ValueError):
        grid2d(0, 3)


def test_toronto_is_connected() -> None:
    graph = nx.Graph(TORONTO_EDGES)
    assert nx.is_connected(graph)
    assert max(d for _, d in graph.degree()) == 3


def test_distance_matrix_with_allowed_subset(six_qubit_device) -> None:
    full = six_qubit_device.distance_matrix()
    assert full[1, 3] == 2
    assert full[0, 5] == 3
    inside = six_qubit_device.distance_matrix({0, 1, 3})
    assert inside[1, 3] == 2
    assert inside[0, 5] == 7
    blocked = six_qubit_device.distance_matrix({1, 2, 3, 5})
    assert blocked[1, 3] == 7
    assert blocked[1, 5] == 2
    with pytest.raises(ValueError):
        full[0, 0] = 1


def test_distance_matrix_is_cached(six_qubit_device) -> None:
    assert six_qubit_device.distance_matrix({0, 1}) is six_qubit_device.distance_matrix([1, 0])
    assert six_qubit_device.distance_matrix(range(6)) is six_qubit_device.distance_matrix()


def test_disconnected_device_rejected() -> None:
    with pytest.raises(DeviceValidationError):
        DeviceModel.uniform(4, [(0, 1), (2, 3)])


@pytest.mark.parametrize(
    "edges",
    [
        [(0, 0)],
        [(0, 5)],
        [(0, 1), (1, 0)],
    ],
)
def test_invalid_edges_rejected(edges) -> None:
    with pytest.raises(ValueError):
        DeviceModel.uniform(2, edges)


def test_crosstalk_must_reference_known_edges() -> None:
    with pytest.raises(ValueError):
        DeviceModel.uniform(3, [(0, 1), (1, 2)], crosstalk={((0, 1), (0, 2)): 2.0})


def test_conditional_cx_error() -> None:
    model = DeviceModel.uniform(4, [(0, 1), (1, 2), (2, 3)], cx_error=0.01, crosstalk={((0, 1), (2, 3)): 3.0, ((2, 3), (0, 1)): 1.5})
    assert conditional_cx_error(model, (0, 1)) == pytest.approx(0.01)
    assert conditional_cx_error(model, (1, 0), [(2, 3)]) == pytest.approx(0.03)
    assert conditional_cx_error(model, (2, 3), [(0, 1)]) == pytest.approx(0.015)
    assert conditional_cx_error(model, (0, 1), [(1, 2)]) == pytest.approx(0.01)
    with pytest.raises(DeviceValidationError):
        conditional_cx_error(model, (0, 2))


def test_conditional_cx_error_is_clamped() -> None:
    model = DeviceModel.uniform(4, [(0, 1), (1, 2), (2, 3)], cx_error=0.5, crosstalk={((0, 1), (2, 3)): 4.0})
    assert conditional_cx_error(model, (0, 1), [(2, 3)]) == 1.0


def test_crosstalk_candidates_are_one_hop_apart() -> None:
    n, edges = grid2d(4, 1)
    pairs = crosstalk_candidate_pairs(edges, nx.Graph(edges))
    assert pairs == [((0, 1), (2, 3))]


def test_calibration_is_deterministic_and_keeps_topology() -> None:
    base = device_from_topology("grid3d:3x3x3")
    a = gen_calibration(base, 7)
    b = gen_calibration(base, 7)
    c = gen_calibration(base, 8)
    assert a.to_json() == b.to_json()
    assert a.to_json() != c.to_json()
    assert a.edges == c.edges == base.edges
    ranges = CalibrationRanges()
    assert all(ranges.cx[0] <= err <= ranges.cx[1] for err in a.cx_error.values())
    assert all(ranges.crosstalk_ratio[0] <= r <= ranges.crosstalk_ratio[1] for r in a.crosstalk.values())
    assert a.crosstalk


def test_save_and_load_round_trip(tmp_path) -> None:
    model = device_from_topology("grid2d:3x3", seed=1)
    path = tmp_path / "device.json"
    model.save(path)
    again = load_device(path)
    assert again.to_json() == model.to_json()
    assert np.array_equal(again.distance_matrix(), model.distance_matrix())


def test_load_device_errors(tmp_path) -> None:
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    with pytest.raises(DeviceValidationError, match="invalid JSON"):
        load_device(broken)
    incomplete = tmp_path / "incomplete.json"
    incomplete.write_text(json.dumps({"n_qubits": 2, "edges": [{"a": 0, "b": 1, "cx_error": 0.01}], "qubits": [{"id": 0, "readout_error": 0.02, "sq_error": 0.001}]}))
    with pytest.raises(DeviceValidationError):
        load_device(incomplete)


def test_grid2d_edge_count() -> None:
    n, edges = grid2d(3, 3)
    assert n == 9
    assert len(edges) == 12 == 2 * 3 * 3 - 3 - 3


def test_grid3d_interior_qubit_has_six_links() -> None:
    n, edges = grid3d(3, 3, 3)
    graph = nx.Graph(edges)
    centre = 1 + 3 * (1 + 3 * 1)
    assert graph.degree(centre) == 6
    assert [v for v in range(n) if graph.degree(v) == 6] == [centre]


def test_toronto_q1_has_three_links() -> None:
    model = device_from_topology("toronto", seed=0)
    assert model.degree(1) == 3
    assert sorted(model.neighbors(1)) == [0, 2, 4]


def test_device_file_without_crosstalk_has_unit_ratios(tmp_path) -> None:
    path = tmp_path / "line.json"
    path.write_text(
        json.dumps(
            {
                "n_qubits": 4,
                "edges": [{"a": 0, "b": 1, "cx_error": 0.01}, {"a": 1, "b": 2, "cx_error": 0.02}, {"a": 2, "b": 3, "cx_error": 0.03}],
                "qubits": [{"id": q, "readout_error": 0.02, "sq_error": 0.001} for q in range(4)],
            }
        )
    )
    model = load_device(path)
    assert model.crosstalk == {}
    assert model.ratio((0, 1), (2, 3)) == 1.0
    assert conditional_cx_error(model, (0, 1), [(2, 3)]) == pytest.approx(0.01)
    assert conditional_cx_error(model, (2, 3), [(0, 1)], aggregation="product") == pytest.approx(0.03)


def _min_swaps_to_adjacent(graph: nx.Graph, a: int, b: int) -> int:
    start = (a, b)
    seen = {start}
    frontier = [start]
    depth = 0
    while frontier:
        if any(graph.has_edge(pa, pb) for pa, pb in frontier):
            return depth
        following = []
        for pa, pb in frontier:
            for u, v in graph.edges:
                moved = tuple(v if p == u else u if p == v else p for p in (pa, pb))
                if moved not in seen:
                    seen.add(moved)
                    following.append(moved)
        frontier = following
        depth += 1
    raise AssertionError("pair can never become adjacent")


def test_distance_minus_one_is_minimum_swap_count() -> None:
    rng = np.random.default_rng(13)
    checked = 0
    while checked < 25:
        n = int(rng.integers(2, 7))
        graph = nx.gnp_random_graph(n, 0.5, seed=int(rng.integers(1 << 30)))
        if not nx.is_connected(graph):
            continue
        dist = DeviceModel.uniform(n, sorted(graph.edges)).distance_matrix()
        for a in range(n):
            for b in range(a + 1, n):
                assert dist[a, b] - 1 == _min_swaps_to_adjacent(graph, a, b)
        checked += 1
