import subprocess
import sys

import numpy as np
import pytest

from conftest import SCENARIO_DIR
from damageplast.cli import cli_main
from damageplast.scenario_io import read_timeseries, snapshot_paths

TINY = str(SCENARIO_DIR / "tiny_bar.cfg")
BAR = str(SCENARIO_DIR / "bar1d.cfg")


def test_run_writes_outputs(tmp_path):
    out = tmp_path / "bar"
    assert cli_main(["run", BAR, "--out", str(out)]) == 0
    ts = read_timeseries(out / "timeseries.csv")
    assert len(ts["step"]) == 41
    assert (out / "scenario.cfg").exists()
    assert all(p.exists() for p in snapshot_paths(out / "snapshots", 40).values())


def test_run_without_snapshots(tmp_path):
    assert cli_main(["run", TINY, "--out", str(tmp_path), "--no-snapshots"]) == 0
    assert not (tmp_path / "snapshots").exists()


def test_invalid_scenario_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("[domain]\ndim = 1\n[material]\nk_min = 0\nfoo = 1\n")
    assert cli_main(["run", str(bad)]) == 1
    err = capsys.readouterr().err
    assert "k_min" in err and "foo" in err
    assert cli_main(["run", str(tmp_path / "missing.cfg")]) == 1
    assert cli_main(["no-such-command"]) == 1


def test_verify_fresh_run(tmp_path, capsys):
    assert cli_main(["verify", TINY, "--out", str(tmp_path)]) == 0
    assert (tmp_path / "verification.csv").exists()
    assert "stability" in capsys.readouterr().out


def test_verify_planted_healing(tmp_path, capsys):
    run = tmp_path / "run"
    assert cli_main(["run", TINY, "--out", str(run)]) == 0
    path = snapshot_paths(run / "snapshots", 3)["chi"]
    prev = np.loadtxt(snapshot_paths(run / "snapshots", 2)["chi"], delimiter=",", skiprows=1)
    rows = path.read_text().splitlines()
    cells = rows[1].split(",")
    cells[-1] = repr(float(prev[0, -1]) + 0.01)
    rows[1] = ",".join(cells)
    path.write_text("\n".join(rows) + "\n")
    code = cli_main(["verify", TINY, "--trajectory", str(run)])
    out = capsys.readouterr().out
    assert code == 3
    assert "step 3" in out and "healing" in out


def test_oracle_command(capsys):
    assert cli_main(["oracle", TINY, "--step", "2", "--levels", "7"]) == 0
    assert "oracle objective" in capsys.readouterr().out


def test_oracle_refuses_oversized(capsys):
    code = cli_main(["oracle", BAR, "--step", "1"])
    assert code == 1
    assert "nodal unknowns" in capsys.readouterr().err
    assert cli_main(["oracle", TINY, "--step", "9"]) == 1


def test_check_conditions(capsys):
    assert cli_main(["check-conditions", BAR, "--samples", "50"]) == 0
    out = capsys.readouterr().out
    assert "power_control" in out and "FAIL" not in out


def test_stall_exit_code(tmp_path):
    slow = tmp_path / "slow.cfg"
    text = (SCENARIO_DIR / "bar1d.cfg").read_text() + "\n[solver]\nam_max_sweeps = 1\n"
    slow.write_text(text)
    assert cli_main(["run", str(slow), "--out", str(tmp_path / "o"), "--no-snapshots"]) == 2


def test_console_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "damageplast.cli", "--help"], capture_output=True, text=True
    )
    assert proc.returncode == 0
    assert "check-conditions" in proc.stdout
