import json
from pathlib import Path

import pytest

import nisqmap
from nisqmap import RunConfig, map_graph, schedule_graph
from nisqmap.device import DeviceModel, device_from_topology
from nisqmap.pipeline import STATUS_OK, STATUS_REVERTED

BENCHMARKS = Path(nisqmap.__file__).parent / "benchmarks"
QFT4 = BENCHMARKS / "qft_4.qasm"
TOFFOLI = BENCHMARKS / "toffoli.qasm"


@pytest.fixture
def grid_device(tmp_path) -> Path:
    path = tmp_path / "grid.json"
    device_from_topology("grid2d:3x3", seed=1).save(path)
    return path


def _run(graph, **kwargs) -> dict:
    return graph.invoke({"config": RunConfig(**kwargs), "events": []})


def test_graph_names() -> None:
    assert map_graph.name == "nisqmap-map"
    assert schedule_graph.name == "nisqmap-schedule"


def test_map_two_programs_together(tmp_path, grid_device) -> None:
    out = tmp_path / "out"
    result = _run(map_graph, device=grid_device, circuits=[QFT4, TOFFOLI], out=out)
    assert result["status"] == STATUS_OK
    assert len(result["batch_plan"].batches) == 1
    assert all(a.ok for a in result["audits"])
    assert result["equivalence"] == [True]
    assert (out / "mapped" / "batch_0.qasm").exists()
    report = json.loads((out / "report.json").read_text())
    assert report["trf"] == 2.0
    assert report["batches"][0]["programs"] == ["qft_4", "toffoli"]
    trace = json.loads((out / "trace.json").read_text())
    assert trace[0]["programs"] == ["qft_4", "toffoli"]
    assert {"tree.json", "plan.json"} <= {p.name for p in out.iterdir()}
    assert result["events"][0].startswith("loaded 2 circuit(s)")


def test_map_single_mode_writes_one_file_per_program(tmp_path, grid_device) -> None:
    out = tmp_path / "out"
    result = _run(map_graph, device=grid_device, circuits=[QFT4, TOFFOLI], out=out, mode="single")
    assert result["status"] == STATUS_OK
    assert [b.members for b in result["batch_plan"].batches] == [[0], [1]]
    assert sorted(p.name for p in (out / "mapped").iterdir()) == ["qft_4.qasm", "toffoli.qasm"]


def test_random_layout_without_xswap(tmp_path, grid_device) -> None:
    result = _run(map_graph, device=grid_device, circuits=[QFT4, TOFFOLI], out=tmp_path / "out", layout="random", xswap=False, seed=7)
    assert result["status"] == STATUS_OK
    assert result["metrics"][0].inter_swaps == 0


def test_failed_partition_reverts_to_separate_runs(tmp_path) -> None:
    device = tmp_path / "star.json"
    DeviceModel.uniform(5, [(0, 1), (0, 2), (0, 3), (0, 4)]).save(device)
    pair = tmp_path / "pair.qasm"
    pair.write_text('OPENQASM 2.0;\ninclude "qelib1.inc";\nqreg q[2];\ncx q[0],q[1];\n')
    other = tmp_path / "other.qasm"
    other.write_text('OPENQASM 2.0;\ninclude "qelib1.inc";\nqreg q[2];\ncx q[1],q[0];\n')
    result = _run(map_graph, device=device, circuits=[pair, other], out=tmp_path / "out")
    assert result["status"] == STATUS_REVERTED
    assert len(result["batch_plan"].batches) == 2
    assert "reverted to separate execution" in result["events"]


def test_schedule_queue(tmp_path) -> None:
    device = tmp_path / "grid.json"
    device_from_topology("grid2d:4x4", seed=2).save(device)
    queue = tmp_path / "queue.txt"
    queue.write_text("\n".join(str(p) for p in [QFT4, TOFFOLI, TOFFOLI, QFT4]) + "\n")
    out = tmp_path / "out"
    result = _run(schedule_graph, device=device, queue=queue, out=out, epsilon=0.5, jobs=2)
    assert result["status"] == STATUS_OK
    plan = result["batch_plan"]
    assert sorted(i for b in plan.batches for i in b.members) == [0, 1, 2, 3]
    assert plan.trf == 4 / len(plan.batches)
    assert json.loads((out / "plan.json").read_text())["n_jobs"] == 4


def test_large_workload_records_skipped_equivalence(tmp_path) -> None:
    device = tmp_path / "grid.json"
    device_from_topology("grid2d:4x4", seed=3).save(device)
    wide = tmp_path / "wide.qasm"
    wide.write_text('OPENQASM 2.0;\ninclude "qelib1.inc";\nqreg q[15];\nh q[7];\ncx q[0],q[14];\ncx q[3],q[11];\n')
    out = tmp_path / "out"
    result = _run(map_graph, device=device, circuits=[wide], out=out)
    assert result["status"] == STATUS_OK
    assert result["equivalence"] == [None]
    assert all(a.ok for a in result["audits"])
    entry = json.loads((out / "report.json").read_text())["batches"][0]
    assert entry["equivalent"] is None
    assert entry["equivalence_note"].startswith("skipped:")
    assert "limit is 14" in entry["equivalence_note"]
