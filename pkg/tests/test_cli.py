import json
import subprocess
import sys

import pytest

from a2g import cli

SMALL_CONFIG = """\
[campaign]
env = urban
theta_grid = 20, 50, 90
trials_per_point = 150
master_seed = 5
models = itu, scurve3
"""


@pytest.fixture
def run(monkeypatch, capsys):
    monkeypatch.delenv(cli.SEED_ENV, raising=False)

    def _run(*argv):
        code = cli.main([str(a) for a in argv])
        out, err = capsys.readouterr()
        return code, out, err

    return _run


def test_plos_theta_grid_row_count(run):
    code, out, _ = run("plos", "--env", "urban", "--models", "itu,scurve3", "--theta-grid", "10:90:5")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "theta_deg,model,value"
    assert len(lines) - 1 == 34


def test_plos_r_grid(run):
    code, out, _ = run("plos", "--env", "dense", "--models", "region3d,first_building", "--r-grid", "50,200")
    assert code == 0
    assert out.splitlines()[0] == "r_m,model,value"
    assert len(out.splitlines()) == 5


@pytest.mark.parametrize("argv", [
    ["plos", "--env", "nosuch", "--models", "itu", "--theta-grid", "10:90:5"],
    ["plos", "--env", "urban", "--models", "nosuch", "--theta-grid", "10:90:5"],
    ["plos", "--env", "urban", "--models", "itu"],
    ["bogus"],
])
def test_usage_errors_exit_2(run, argv):
    code, _, err = run(*argv)
    assert code == 2
    assert err


def test_plos_output_is_byte_identical_and_has_manifest(run, tmp_path):
    out = tmp_path / "p.csv"
    args = ["plos", "--env", "urban", "--models", "itu,sigmoid", "--theta-grid", "10:90:10", "--out", out]
    assert run(*args)[0] == 0
    first = out.read_bytes()
    assert run(*args)[0] == 0
    assert out.read_bytes() == first
    manifest = json.loads((tmp_path / "p.csv.manifest.json").read_text())
    assert manifest["command"] == "plos"
    assert manifest["outputs"][0]["path"] == str(out)
    assert b"\r\n" not in first


def test_sim_worker_invariance_manifest_and_seed_override(run, tmp_path, monkeypatch):
    cfg = tmp_path / "c.ini"
    cfg.write_text(SMALL_CONFIG)
    outs = []
    for workers in (1, 3):
        d = tmp_path / f"w{workers}"
        assert run("sim", "--config", cfg, "--workers", workers, "--out-dir", d)[0] == 0
        outs.append(((d / "curves.csv").read_bytes(), (d / "report.csv").read_bytes()))
    assert outs[0] == outs[1]
    manifest = json.loads((tmp_path / "w1" / "manifest.json").read_text())
    assert manifest["seeds"] == {"master_seed": 5}
    assert len(manifest["outputs"]) == 2

    d = tmp_path / "seeded"
    assert run("sim", "--config", cfg, "--seed", "8", "--out-dir", d)[0] == 0
    monkeypatch.setenv(cli.SEED_ENV, "9")
    assert run("sim", "--config", cfg, "--seed", "8", "--out-dir", d)[0] == 0
    manifest = json.loads((d / "manifest.json").read_text())
    assert manifest["seeds"] == {"master_seed": 9}
    assert manifest["replay_argv"][-2:] == ["--seed", "9"]


def test_sim_manifest_replays_byte_identically(run, tmp_path):
    cfg = tmp_path / "c.ini"
    cfg.write_text(SMALL_CONFIG)
    d = tmp_path / "out"
    assert run("sim", "--config", cfg, "--out-dir", d)[0] == 0
    manifest = json.loads((d / "manifest.json").read_text())
    before = {o["path"]: o["sha256"] for o in manifest["outputs"]}
    assert run(*manifest["replay_argv"])[0] == 0
    after = {o["path"]: o["sha256"] for o in json.loads((d / "manifest.json").read_text())["outputs"]}
    assert before == after


def test_sim_malformed_config_reports_line(run, tmp_path):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[campaign]\nenv = urban\ntrials_per_point = 3\n")
    code, _, err = run("sim", "--config", cfg)
    assert code == 2
    assert f"{cfg}:3:" in err


def test_missing_files_exit_4(run, tmp_path):
    assert run("sim", "--config", tmp_path / "none.ini")[0] == 4
    code, _, _ = run("localize", "--measurements", tmp_path / "none.csv", "--p-ref", "-30",
                     "--region", "0:1:0:1")
    assert code == 4


def test_bad_seed_environment_variable(run, monkeypatch, tmp_path):
    monkeypatch.setenv(cli.SEED_ENV, "abc")
    assert run("fade", "--kind", "shadow", "--n", "5")[0] == 2


def test_pathloss_wrappers(run):
    code, out, _ = run("pathloss", "--model", "fspl", "--d-grid", "100", "--freq", "5.9")
    assert code == 0 and abs(float(out.splitlines()[1].split(",")[1]) - 87.87) < 0.01
    code, out, _ = run("pathloss", "--model", "3gpp", "--d-grid", "100", "--freq", "2", "--h-tx", "50")
    assert code == 0 and abs(float(out.splitlines()[1].split(",")[1]) - 78.02) < 0.01
    code, out, _ = run("pathloss", "--model", "ab", "--study", "[63]", "--environment", "dense",
                       "--freq", "28", "--d-grid", "100")
    assert code == 0 and abs(float(out.splitlines()[1].split(",")[1]) - 101.4) < 0.01
    code, out, _ = run("pathloss", "--model", "log-distance", "--n", "2", "--d-grid", "1:10:9", "--freq", "5")
    assert code == 0 and len(out.splitlines()) == 3
    code, out, _ = run("pathloss", "--model", "two-ray", "--d-grid", "1000,10000")
    assert code == 0
    assert run("pathloss", "--model", "ab", "--d-grid", "100")[0] == 2


def test_fade_wrappers_are_seeded(run):
    a = run("fade", "--kind", "shadow", "--n", "20", "--seed", "4")[1]
    b = run("fade", "--kind", "shadow", "--n", "20", "--seed", "4")[1]
    assert a == b and a.startswith("index,distance_m,value\n")
    code, out, _ = run("fade", "--kind", "rician", "--n", "3", "--k-db", "10")
    assert code == 0 and out.splitlines()[0] == "index,gain"


def test_localize_wrapper(run, tmp_path):
    from a2g.localization import RssiModel, synthesize_measurements

    model = RssiModel(-30.0, 1.0, 3.0)
    poses = [(-40, -40, 30), (40, -35, 30), (0, 45, 30)]
    ms = synthesize_measurements(model, (10.0, -5.0, 0.0), poses, 2.0)
    meas = tmp_path / "m.csv"
    meas.write_text("x,y,z,rssi_dbm,sigma_db\n" + "".join(
        f"{m.uav_position[0]},{m.uav_position[1]},{m.uav_position[2]},{m.rho},{m.sigma}\n" for m in ms
    ))
    out, grid = tmp_path / "est.csv", tmp_path / "map.csv"
    code, _, _ = run("localize", "--measurements", meas, "--p-ref", "-30", "--n-p", "3",
                     "--region=-50:50:-50:50", "--resolution", "0.5", "--out", out, "--map-out", grid)
    assert code == 0
    x, y, z, _ = map(float, out.read_text().splitlines()[1].split(","))
    assert abs(x - 10.0) <= 0.5 and abs(y + 5.0) <= 0.5
    assert grid.read_text().startswith("x,y,loglik\n")
    manifest = json.loads((tmp_path / "est.csv.manifest.json").read_text())
    assert len(manifest["outputs"]) == 2


def test_console_entry_point_runs():
    proc = subprocess.run([sys.executable, "-m", "a2g.cli", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and "a2g" in proc.stdout
