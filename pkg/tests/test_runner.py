import json

import numpy as np
import pytest

from qonn.cli import _angle, _depths, main
from qonn.runner import (
    CSV_HEADER,
    ConfigError,
    ExperimentConfig,
    OptimizerSettings,
    SweepResult,
    emit_curves,
    load_sweep,
    output_state,
    parameter_dump,
    run_sweep,
    verify_tables,
)


def small_config(tmp_path=None, **kw):
    base = dict(
        task="discriminate",
        qubits=2,
        depths=[0, 1],
        phi_b=[0.0],
        states=4,
        optimizer=OptimizerSettings(runs=2, budget=4000, seed=7),
        output=str(tmp_path) if tmp_path else None,
    )
    base.update(kw)
    return ExperimentConfig(**base)


@pytest.mark.parametrize(
    "kw",
    [
        dict(depths=[]),
        dict(task="teleport"),
        dict(architecture="hybrid"),
        dict(phi_b=[2 * np.pi]),
        dict(phi_b=[-0.1]),
        dict(states=5),
        dict(qubits=3),
        dict(depths=[-1]),
        dict(architecture="linear-optics", corrections=False),
    ],
)
def test_invalid_configs(kw):
    with pytest.raises(ConfigError):
        small_config(**kw).validate()


def test_task_specific_requirements():
    with pytest.raises(ConfigError):
        ExperimentConfig(task="prepare", qubits=3).validate()
    with pytest.raises(ConfigError):
        ExperimentConfig(task="vqe", qubits=5).validate()


def test_config_json_round_trip_and_hash():
    cfg = small_config()
    assert ExperimentConfig.from_dict(json.loads(cfg.to_json())) == cfg
    other = small_config(phi_b=[np.pi])
    assert cfg.hash() != other.hash()
    more_runs = small_config(optimizer=OptimizerSettings(runs=9, budget=4000, seed=7))
    assert cfg.hash() == more_runs.hash()


def test_sweep_cells_and_files(tmp_path):
    result = run_sweep(small_config(tmp_path), workers=1)
    assert [c.depth for c in result.cells] == [0, 1]
    assert all(c.params == [0, 2][c.depth] and c.runs == 2 for c in result.cells)
    assert result.cell(1, 0.0, "bell4").best_cost < 1e-7
    lines = (tmp_path / "curves.csv").read_text().splitlines()
    assert lines[0].split(",") == CSV_HEADER
    assert len(lines) == 3
    runs = [json.loads(l) for l in (tmp_path / "runs.jsonl").read_text().splitlines()]
    assert len(runs) == 4
    assert {"cell", "config_hash", "version", "record"} <= set(runs[0])
    assert runs[0]["record"]["seed"] and runs[0]["config_hash"] == result.config.hash()


def test_byte_identical_and_resume(tmp_path):
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    run_sweep(small_config(a), workers=1)
    run_sweep(small_config(b), workers=1)
    for name in ("curves.csv", "runs.jsonl", "config.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    # extend a two-run sweep to three runs and compare with a fresh three-run sweep
    three = OptimizerSettings(runs=3, budget=4000, seed=7)
    run_sweep(small_config(a, optimizer=three), workers=1)
    run_sweep(small_config(c, optimizer=three), workers=1)
    for name in ("curves.csv", "runs.jsonl"):
        assert (a / name).read_bytes() == (c / name).read_bytes()


def test_resume_rejects_other_sweep(tmp_path):
    run_sweep(small_config(tmp_path, depths=[0]), workers=1)
    with pytest.raises(ConfigError):
        run_sweep(small_config(tmp_path, depths=[0], phi_b=[np.pi]), workers=1)


def test_parallel_cells_match_serial(tmp_path):
    serial = run_sweep(small_config(tmp_path / "s"), workers=1)
    parallel = run_sweep(small_config(tmp_path / "p"), workers=2)
    assert (tmp_path / "s" / "runs.jsonl").read_bytes() == (tmp_path / "p" / "runs.jsonl").read_bytes()
    assert serial.to_dict()["cells"] == parallel.to_dict()["cells"]


def test_cell_errors_are_recorded():
    # lattice fragments have five spins, so a two-qubit VQE cell fails on its own
    cfg = ExperimentConfig(task="vqe", qubits=2, depths=[1], phi_b=[0.0], hamiltonian_seeds=[0], optimizer=OptimizerSettings(runs=1))
    result = run_sweep(cfg, workers=1)
    assert len(result.errored) == 1 and "spins" in result.cells[0].error


def test_json_round_trip(tmp_path):
    result = run_sweep(small_config(), workers=1)
    path = emit_curves(result, tmp_path, "json")
    back = SweepResult.from_dict(json.loads(path.read_text()))
    assert back == result
    with pytest.raises(ValueError):
        emit_curves(result, tmp_path, "xml")


def test_load_sweep(tmp_path):
    result = run_sweep(small_config(tmp_path), workers=1)
    assert load_sweep(tmp_path).cells == result.cells


def test_parameter_dump_and_output_state(tmp_path):
    cfg = small_config(tmp_path, depths=[1])
    result = run_sweep(cfg, workers=1)
    cell = result.cells[0]
    dump = parameter_dump(cfg, cell)
    assert len(dump["layers"]) == 1 and len(dump["layers"][0]) == 2
    assert len(dump["corrections_in"]) == len(dump["corrections_out"]) == 4
    out = output_state(cfg, cell, "00")
    assert out.norm() == pytest.approx(1.0)


def test_linear_optics_sweep_records_lo_depth():
    cfg = small_config(architecture="linear-optics", depths=[0], optimizer=OptimizerSettings(runs=1, budget=3000))
    cell = run_sweep(cfg, workers=1).cells[0]
    assert cell.phi_b is None and cell.params == 12 and cell.d_lo == 5
    assert len(parameter_dump(cfg, cell)["interferometers"]) == 1


def test_verify_tables_arithmetic_without_training():
    for table in ("I", "II", "III", "IV"):
        checks = verify_tables(None, table)
        assert checks and all(c.arithmetic_ok and c.depth_ok is None for c in checks)
    rows = {(c.row, c.expected_depth): c for c in verify_tables(None, "I")}
    lo = [c for c in verify_tables(None, "I") if c.row == "LO"]
    assert [(c.expected_depth, c.d_lo, c.params) for c in lo] == [(1, 14, 60), (2, 27, 168)]
    assert rows


def test_verify_tables_reads_minimal_depth():
    result = run_sweep(small_config(), workers=1)
    (check,) = [c for c in verify_tables(result, "III") if c.row == "NL (phi_b=0)" and c.column["states"] == 4]
    assert check.curve[0][0] == 0 and check.measured_depth == 1 and check.depth_ok


def test_cli_helpers():
    assert _angle("pi/4") == pytest.approx(np.pi / 4)
    assert _angle("3pi/4") == pytest.approx(3 * np.pi / 4)
    assert _angle("0.5") == 0.5
    assert _depths("1-3,5") == [1, 2, 3, 5]


def test_cli_end_to_end(tmp_path, capsys):
    out = tmp_path / "sweep"
    rc = main(["discriminate", "--depths", "1", "--phi-b", "0", "--runs", "2", "--seed", "3", "--output", str(out)])
    assert rc == 0
    assert (out / "curves.csv").exists()
    assert main(["verify", "--table", "III", str(out)]) == 0
    assert main(["dump-amplitudes", str(out), "--depth", "1", "--phi-b", "0"]) == 0
    shots = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert len(shots["layers"]) == 1
    assert main(["dump-amplitudes", str(out), "--depth", "1", "--params"]) == 0
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"task": "vqe", "qubits": 2, "depths": [1], "hamiltonian_seeds": [0], "optimizer": {"runs": 1}}))
    assert main(["sweep", str(cfg)]) == 1
    assert main(["discriminate", "--depths", "1", "--phi-b", "7"]) == 2
