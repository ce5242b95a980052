import json
from pathlib import Path

import pandas as pd
import pytest

import nisqmap
import nisqmap.pipeline
from nisqmap.cli import EXIT_INPUT, EXIT_OK, EXIT_ROUTING, EXIT_VERIFICATION, main
from nisqmap.errors import RoutingDivergenceError

BENCHMARKS = Path(nisqmap.__file__).parent / "benchmarks"
QFT4 = str(BENCHMARKS / "qft_4.qasm")
TOFFOLI = str(BENCHMARKS / "toffoli.qasm")


@pytest.fixture
def device_file(tmp_path) -> str:
    path = tmp_path / "device.json"
    assert main(["gen-device", "grid2d:3x3", "--seed", "5", "--out", str(path)]) == EXIT_OK
    return str(path)


def test_profile_reports_involvement_runs(capsys) -> None:
    assert main(["profile", QFT4]) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["name"] == "qft_4"
    assert report["gate_sets"] == 12
    assert [1, 6] in report["involvement"]["1"]


def test_profile_of_malformed_circuit(tmp_path) -> None:
    broken = tmp_path / "broken.qasm"
    broken.write_text("OPENQASM 2.0;\nqreg q[2];\ncx q[0] q[1];\n")
    assert main(["profile", str(broken)]) == EXIT_INPUT
    assert main(["profile", str(tmp_path / "missing.qasm")]) == EXIT_INPUT


def test_gen_device_is_deterministic(tmp_path) -> None:
    paths = [tmp_path / name for name in ("a.json", "b.json", "c.json")]
    for path, seed in zip(paths, ["3", "3", "4"]):
        assert main(["gen-device", "grid3d:2x2x2", "--seed", seed, "--out", str(path)]) == EXIT_OK
    a, b, c = (p.read_text() for p in paths)
    assert a == b
    assert a != c
    assert json.loads(a)["n_qubits"] == 8


def test_gen_device_rejects_bad_ranges(tmp_path) -> None:
    out = tmp_path / "d.json"
    assert main(["gen-device", "grid2d:2x2", "--cx-range", "0.5", "0.1", "--out", str(out)]) == EXIT_INPUT
    assert main(["gen-device", "ring:5", "--out", str(out)]) == EXIT_INPUT
    assert not out.exists()


def test_map_then_verify(tmp_path, device_file) -> None:
    out = tmp_path / "out"
    assert main(["map", "--device", device_file, "--circuit", QFT4, "--circuit", TOFFOLI, "--out", str(out)]) == EXIT_OK
    trace = out / "trace.json"
    args = ["verify", "--device", device_file, "--trace", str(trace), "--circuit", QFT4, "--circuit", TOFFOLI]
    assert main(args) == EXIT_OK

    batches = json.loads(trace.read_text())
    layout = batches[0]["final_layouts"][0]
    layout["0"], layout["1"] = layout["1"], layout["0"]
    tampered = tmp_path / "tampered.json"
    tampered.write_text(json.dumps(batches))
    assert main(args[:4] + [str(tampered)] + args[5:]) == EXIT_VERIFICATION


def test_verify_needs_every_traced_circuit(tmp_path, device_file) -> None:
    out = tmp_path / "out"
    assert main(["map", "--device", device_file, "--circuit", QFT4, "--circuit", TOFFOLI, "--out", str(out), "--mode", "single"]) == EXIT_OK
    assert main(["verify", "--device", device_file, "--trace", str(out / "trace.json"), "--circuit", QFT4]) == EXIT_INPUT
    assert main(["verify", "--device", device_file, "--trace", str(out / "trace.json"), "--circuit", QFT4, "--circuit", TOFFOLI, "--no-equivalence"]) == EXIT_OK


def test_map_with_missing_device(tmp_path) -> None:
    assert main(["map", "--device", str(tmp_path / "nope.json"), "--circuit", QFT4, "--out", str(tmp_path / "out")]) == EXIT_INPUT


def test_schedule_command(tmp_path, device_file) -> None:
    queue = tmp_path / "queue.txt"
    queue.write_text(f"{TOFFOLI}\n{TOFFOLI}\n# skipped\n{QFT4}\n")
    out = tmp_path / "out"
    assert main(["schedule", "--device", device_file, "--queue", str(queue), "--epsilon", "0.5", "--out", str(out)]) == EXIT_OK
    plan = json.loads((out / "plan.json").read_text())
    assert plan["n_jobs"] == 3
    assert plan["trf"] == pytest.approx(3 / plan["n_batches"])


def test_sweep_omega_writes_csv(tmp_path) -> None:
    out = tmp_path / "sweep.csv"
    assert main(["sweep-omega", "--topology", "grid2d:3x3", "--omegas", "0", "1", "--calibrations", "2", "--out", str(out)]) == EXIT_OK
    frame = pd.read_csv(out)
    assert len(frame) == 4
    assert set(frame["omega"]) == {0.0, 1.0}


def test_routing_failure_has_its_own_exit_code(tmp_path, device_file, monkeypatch) -> None:
    def diverge(*args, **kwargs):
        raise RoutingDivergenceError("no front gate became compliant within 81 swaps")

    monkeypatch.setattr(nisqmap.pipeline, "route_plan", diverge)
    assert main(["map", "--device", device_file, "--circuit", QFT4, "--out", str(tmp_path / "out")]) == EXIT_ROUTING
