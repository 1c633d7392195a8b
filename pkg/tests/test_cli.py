import json
import subprocess
import sys

import pytest

from absnet.cli import EXIT_OK, EXIT_RUNTIME, EXIT_VALIDATION, main


def cli(*args):
    return subprocess.run([sys.executable, "-m", "absnet", *args], capture_output=True, text=True)


def test_validate_ok():
    proc = cli("validate", "--scenario", "fig1_single_si")
    assert proc.returncode == EXIT_OK
    assert json.loads(proc.stdout)["n_abs"] == 8


def test_validation_error_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[scenario]\nschema_version = 1\nabs.initial = [[1, 1, 20]]\nnetwork.r_int_m = -3\n")
    assert main(["validate", "--scenario", str(bad)]) == EXIT_VALIDATION
    rec = json.loads(capsys.readouterr().err)
    assert rec["error"] == "validation" and rec["key"] == "network.r_int_m"


def test_missing_file_exit_2(capsys):
    assert main(["validate", "--scenario", "/nonexistent/x.ini"]) == EXIT_VALIDATION
    assert json.loads(capsys.readouterr().err)["type"] == "FileNotFoundError"


def test_bad_runs_exit_2(tmp_path):
    assert main(["run", "--scenario", "fig1_single_si", "--runs", "0", "--out", str(tmp_path)]) == EXIT_VALIDATION


def test_runtime_error_exit_3(tmp_path, capsys):
    # a 1 m range disconnects the graph, which the distributed solver rejects
    sc = tmp_path / "cut.ini"
    sc.write_text("[scenario]\nschema_version = 1\nabs.initial = [[50, 10, 20], [150, 10, 20]]\n"
                  "interferers = [[30, 0, 0]]\nnetwork.range_m = 1\n"
                  "mobility.fiedler_source = distributed\n")
    assert main(["run", "--scenario", str(sc), "--out", str(tmp_path / "o")]) == EXIT_RUNTIME
    rec = json.loads(capsys.readouterr().err)
    assert rec["error"] == "runtime" and "connected" in rec["message"]


def test_run_writes_outputs(tmp_path):
    proc = cli("run", "--scenario", "fig1_single_si", "--mode", "unweighted", "--iters", "5",
               "--runs", "2", "--seed", "3", "--out", str(tmp_path))
    assert proc.returncode == EXIT_OK, proc.stderr
    summary = json.loads(proc.stdout)
    assert summary["mode"] == "unweighted"
    assert (tmp_path / "trajectories.csv").exists() and (tmp_path / "flow.csv").exists()


def test_baseline_command():
    proc = cli("baseline", "--scenario", "fig1_single_si", "--runs", "3")
    assert proc.returncode == EXIT_OK
    out = json.loads(proc.stdout)
    assert out["runs"] == 3 and out["metric"] == "max_flow"


def test_usage_error():
    with pytest.raises(SystemExit) as info:
        main(["run"])
    assert info.value.code == 2
