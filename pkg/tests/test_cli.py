import json

import pytest

from pesym.cli import main, read_config


def _json(path):
    return json.loads(path.read_text())


def test_catalog_lists_entries(capsys):
    assert main(["catalog", "--reductions"]) == 0
    out = capsys.readouterr().out
    assert "T1.9" in out and "T2.21" in out and "T4.3 [alpha = 0]" in out


def test_verify_symmetries_single_entry(tmp_path):
    assert main(["verify-symmetries", "--table", "1", "--case", "9", "--out", str(tmp_path)]) == 0
    rep = _json(tmp_path / "verify-symmetries.json")
    assert rep["pass"] and rep["manifest"]["seed"] == 0
    listed = [c for c in rep["checks"] if c["role"] == "listed"]
    assert len(listed) >= 2 * 5


def test_negative_control_reported_as_expected_failure(tmp_path):
    code = main(["verify-symmetries", "--table", "1", "--case", "1", "--negative",
                 "--out", str(tmp_path)])
    rep = _json(tmp_path / "verify-symmetries.json")
    assert code == 0
    assert {c["role"] for c in rep["checks"]} == {"negative"}
    assert all(c["max_ratio"] > 1e-3 for c in rep["checks"])


@pytest.mark.parametrize("argv,target", [
    (["--table", "3", "--case", "4"], "T1.8"),
    (["--table", "4", "--case", "3", "--branch", "alpha=0"], "T2.11"),
])
def test_verify_transforms_examples(tmp_path, argv, target):
    assert main(["verify-transforms", *argv, "--out", str(tmp_path)]) == 0
    rep = _json(tmp_path / "verify-transforms.json")
    assert {r["target"] for r in rep["reductions"]} == {target}
    assert {r["route"] for r in rep["reductions"]} == {"push", "theorem1"}
    assert rep["g_scaling"]["alternative_fails_when_a3_ne_1"]


def test_usage_errors_exit_2(tmp_path, capsys):
    assert main(["verify-symmetries", "--table", "9", "--case", "1"]) == 2
    assert main(["verify-symmetries"]) == 2
    assert main(["verify-transforms", "--table", "3", "--case", "4", "--branch", "zz"]) == 2
    assert main(["reduce", "--alpha-s", "2", "--out", str(tmp_path)]) == 2
    assert main(["nonsense"]) == 2
    bad = tmp_path / "bad.conf"
    bad.write_text("m = 1\nwhatever = 3\n")
    assert main(["reduce", "--config", str(bad), "--out", str(tmp_path)]) == 2


def test_reduce_exact_and_shoot(tmp_path):
    assert main(["reduce", "--mode", "exact", "--out", str(tmp_path)]) == 0
    rep = _json(tmp_path / "reduce_exact.json")
    assert rep["max_residual"] < 1e-11
    lines = (tmp_path / "profile_exact.csv").read_text().splitlines()
    assert lines[0].startswith("# command:") and "omega,phi,psi,dphi,dpsi" in lines
    assert main(["reduce", "--mode", "shoot", "--m", "0", "--out", str(tmp_path)]) == 0
    rep = _json(tmp_path / "reduce_shoot.json")
    assert rep["omega0_error"] < 1e-6 and rep["profile_error"] < 1e-6


def test_config_precedence(tmp_path):
    conf = tmp_path / "run.conf"
    conf.write_text("# parameters\nm = 0\nq0 = 0.25   # halved\nmode = exact\n")
    assert read_config(conf) == {"m": "0", "q0": "0.25", "mode": "exact"}
    assert main(["reduce", "--config", str(conf), "--q0", "0.75", "--out", str(tmp_path)]) == 0
    params = _json(tmp_path / "reduce_exact.json")["manifest"]["params"]
    assert params["m"] == 0 and params["q0"] == 0.75 and params["c_inf"] == 2.0


def test_simulate_writes_snapshots_and_errors(tmp_path):
    assert main(["simulate", "--N", "32", "--t-end", "1.2", "--cadence", "0.1",
                 "--out", str(tmp_path)]) == 0
    rep = _json(tmp_path / "simulate.json")
    assert set(rep) >= {"N", "t_final", "err_alpha_sup", "err_c_sup", "err_front",
                        "observed_order"}
    assert rep["err_front"] < 1e-3
    text = (tmp_path / "snapshots.csv").read_text()
    assert "t,s,y,r,U,V,alpha,c" in text


def test_identical_manifest_gives_identical_output(tmp_path, monkeypatch):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert main(["verify-symmetries", "--table", "2", "--case", "3", "--seed", "7",
                     "--out", str(d)]) == 0
        assert main(["figures", "5", "--no-png", "--out", str(d)]) == 0
    for name in ("verify-symmetries.json", "fig5_f.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_figures_emit_csv_and_png(tmp_path):
    assert main(["figures", "all", "--out", str(tmp_path)]) == 0
    for w in (1, 2, 3, 4, 5):
        assert (tmp_path / f"fig{w}.png").stat().st_size > 1000
    for name in ("fig1_alpha.csv", "fig1_c.csv", "fig1_front.csv", "fig4_S.csv", "fig4_Q.csv",
                 "fig5_f.csv"):
        assert (tmp_path / name).exists()
