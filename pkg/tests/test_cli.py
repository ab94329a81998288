import json
import subprocess
import sys

import pytest

from pilotlattice import cli
from pilotlattice.cli import Config, ConfigError, format_table, read_csv_table, run

BASE = """
[grid]
M = 16
N = 8
T_seconds = 1.07
F_hz = 1.0

[channel]
tau_D_seconds = 0.15625
nu_D_hz = 0.29205607476635514
S0 = 1.0

[stats]
sigma_n2 = 1.0
beta = 1.0

[rank]
r_tau = 3
r_nu = 3
"""


def _write(tmp_path, text, name="run.ini"):
    path = tmp_path / name
    path.write_text(text)
    return path


def _run(tmp_path, cmd, text, *extra):
    cfg = _write(tmp_path, text)
    out = tmp_path / f"{cmd}.out"
    code = run([cmd, "--config", str(cfg), "--out", str(out), *extra])
    return code, (out.read_text() if out.exists() else None)


def test_bound(tmp_path):
    code, text = _run(tmp_path, "bound", BASE)
    assert code == 0
    header, rows = read_csv_table(text)
    assert header == ["convention", "D", "bound"]
    assert rows[0]["bound"] == 7.947019867549669
    assert rows[1]["D"] == 6.0
    code, text2 = _run(tmp_path, "bound", BASE.replace("beta = 1.0", "beta = 2.0"))
    assert read_csv_table(text2)[1][0]["bound"] < rows[0]["bound"]


def test_lattice_search(tmp_path):
    code, text = _run(tmp_path, "lattice-search", BASE + "[lattice]\nL = 8\n")
    assert code == 0
    _, rows = read_csv_table(text)
    assert rows and {"a1": 2, "b1": 0, "a2": 0, "b2": 4} in [{k: r[k] for k in ("a1", "b1", "a2", "b2")} for r in rows]
    assert all(r["K"] == 16 for r in rows)


def test_lattice_check_pass_and_fail(tmp_path, capsys):
    text = BASE + "[lattice]\nV = 2 -2 2 2; 1 0 0 8\nbias = 1 1; 0 0\n"
    code, out = _run(tmp_path, "lattice-check", text)
    assert code == 0
    err = capsys.readouterr().err
    assert "V=[[2,-2],[2,2]];r=(1,1): K=16 L=8 analytic=PASS fft=PASS" in err
    assert "V=[[1,0],[0,8]];r=(0,0): K=16 L=8 analytic=FAIL fft=FAIL" in err
    header, rows = read_csv_table(out)
    assert len(rows) == 2 * 128
    bad = {(r["m_tilde"], r["n_tilde"]) for r in rows if r["violation"]}
    assert bad == {(0, 1), (0, 7)}
    code, js = _run(tmp_path, "lattice-check", text, "--format", "json")
    reps = [json.loads(line) for line in js.splitlines()]
    assert [r["analytic"] for r in reps] == ["PASS", "FAIL"]
    assert reps[0]["magnitude"][0][0] == 16.0


def test_lattice_check_unit(tmp_path, capsys):
    code, _ = _run(tmp_path, "lattice-check", BASE + "[lattice]\nV = 1 0 0 1\n")
    assert code == 0
    assert "K=128 L=1 analytic=PASS fft=PASS" in capsys.readouterr().err


def test_consistency_failure_exit_code(tmp_path, monkeypatch):
    from pilotlattice.lattice import ConditionResult

    monkeypatch.setattr(cli, "check_condition_analytic", lambda *a: ConditionResult(False, [(0, 1, 16.0)]))
    code, _ = _run(tmp_path, "lattice-check", BASE + "[lattice]\nV = 2 0 0 4\n")
    assert code == 2


def test_approx_error_panels(tmp_path):
    code, text = _run(tmp_path, "approx-error", "[approx_error]\npanel = dimension\ndims = 32 64 128\nspread_ratio = 0.0625\n")
    assert code == 0
    _, rows = read_csv_table(text)
    errs = [r["rel_error"] for r in rows]
    assert errs == sorted(errs, reverse=True)
    assert [r["spread_product"] for r in rows] == [2.0, 4.0, 8.0]
    integ = BASE.replace("[channel]", "[channel]\ndelay_profile = triangular\ndoppler_profile = triangular")
    code, text = _run(tmp_path, "approx-error", integ + "[approx_error]\npanel = integration\ndelta_D = 1e-4, 1e-3\n")
    assert code == 0
    _, rows = read_csv_table(text)
    assert rows[0]["rel_error"] > 0.1  # support-scaled triangle: order-one error
    code, text = _run(tmp_path, "approx-error", BASE + "[approx_error]\npanel = integration\ndelta_D = 1e-4 1e-2\n")
    assert all(r["rel_error"] < 1e-8 for r in read_csv_table(text)[1])


def test_mse(tmp_path):
    text = BASE + "[lattice]\nV = 2 0 2 4\n[mse]\ntrials = 300\nalpha_db = 10\n"
    code, out = _run(tmp_path, "mse", text, "--seed", "7", "--format", "json")
    assert code == 0
    rec = json.loads(out)
    assert rec["status"] == "OK" and rec["seed"] == 7 and rec["K"] == 16
    assert rec["alpha_db"] == pytest.approx(10.0)
    code, again = _run(tmp_path, "mse", text, "--seed", "7", "--format", "json")
    assert again == out


@pytest.mark.parametrize(
    "text,needle",
    [
        (BASE.replace("M = 16", "M = sixteen"), "[grid] M"),
        (BASE.replace("F_hz = 1.0", ""), "missing [grid] F_hz"),
        (BASE.replace("T_seconds = 1.07", "T_seconds = 0.5"), "[grid]"),
        (BASE + "[lattice]\nV = 1 2 3\n", "[lattice] V"),
        (BASE + "[lattice]\nV = 3 0 0 1\n", "does not divide"),
        (BASE.replace("r_tau = 3", "r_tau = 4"), "[rank]"),
    ],
)
def test_config_errors(tmp_path, capsys, text, needle):
    code, _ = _run(tmp_path, "lattice-check", text)
    assert code == 1
    assert needle in capsys.readouterr().err


def test_missing_config_file(tmp_path, capsys):
    assert run(["bound", "--config", str(tmp_path / "nope.ini")]) == 1
    assert run(["bound", "--config", str(_write(tmp_path, BASE)), "--seed", str(2**64)]) == 1


def test_approx_error_bad_sweep(tmp_path, capsys):
    code, _ = _run(tmp_path, "approx-error", "[approx_error]\ndims = 32\n")
    assert code == 1
    code, _ = _run(tmp_path, "approx-error", "[approx_error]\ndims = 8\nspread_product = 9\n")
    assert code == 1
    assert "spread product" in capsys.readouterr().err


def test_csv_round_trip():
    rows = [{"a": 1, "x": 0.1 + 0.2, "s": "V=[[1,0],[0,1]];r=(0,0)", "ok": True}, {"a": -3, "x": 1e-300, "s": "b", "ok": False}]
    text = format_table(["a", "x", "s", "ok"], rows, "csv")
    header, back = read_csv_table(text)
    assert header == ["a", "x", "s", "ok"]
    assert back == rows


def test_config_list_and_bool():
    cfg = Config("[s]\nxs = 1, 2 3\nflag = yes\n")
    assert cfg.list("s", "xs", int) == [1, 2, 3]
    assert cfg.get("s", "flag", cli._bool) is True
    with pytest.raises(ConfigError):
        cfg.get("s", "xs", int)


def test_console_entry_point(tmp_path):
    cfg = _write(tmp_path, BASE)
    a = subprocess.run([sys.executable, "-m", "pilotlattice.cli", "bound", "--config", str(cfg)], capture_output=True, text=True)
    b = subprocess.run([sys.executable, "-m", "pilotlattice.cli", "bound", "--config", str(cfg)], capture_output=True, text=True)
    assert a.returncode == 0 and a.stdout == b.stdout
    assert a.stdout.startswith("convention,D,bound\n")
