import json

from click.testing import CliRunner

from qmcts.cli import main


def run(args):
    return CliRunner().invoke(main, args, catch_exceptions=False)


BASE = ["--set", "m=2", "--set", "N=16", "--set", "R=2", "--set", "tau=0.05",
        "--set", "T=0.1", "--set", "M=32"]


def test_solve_writes_profile(tmp_path):
    res = run(["solve", *BASE, "--xi", "0.5,-0.2", "--out", str(tmp_path)])
    assert res.exit_code == 0
    lines = (tmp_path / "solve.csv").read_text().splitlines()
    assert lines[0] == "x,value"
    assert len(lines) == 33
    assert (tmp_path / "solve.png").exists()


def test_solve_rejects_wrong_xi_length(tmp_path):
    res = CliRunner().invoke(main, ["solve", *BASE, "--xi", "0.5",
                                    "--out", str(tmp_path)])
    assert res.exit_code == 2


def test_cbc_and_points(tmp_path):
    res = run(["cbc", *BASE, "--out", str(tmp_path)])
    assert res.exit_code == 0
    gv_file = tmp_path / "gv_N16_m2.txt"
    assert gv_file.read_text().splitlines()[0] == "N 16"

    res = run(["points", *BASE, "--out", str(tmp_path)])
    assert res.exit_code == 0
    lines = (tmp_path / "points.csv").read_text().splitlines()
    assert lines[0] == "j,x1,x2"
    assert len(lines) == 17


def test_estimate_and_config_file(tmp_path):
    cfgfile = tmp_path / "run.cfg"
    cfgfile.write_text("m = 2\nN = 16\nR = 2\ntau = 0.05\nT = 0.1\nM = 32\n")
    res = run(["estimate", "--config", str(cfgfile), "--out", str(tmp_path)])
    assert res.exit_code == 0
    man = json.loads((tmp_path / "estimate_manifest.json").read_text())
    assert man["kind"] == "estimate"


def test_study_samples_and_fit(tmp_path):
    res = run(["study-samples", *BASE, "--set", "m=1", "--ladder", "8,16,32",
               "--out", str(tmp_path)])
    assert res.exit_code == 0
    csv = tmp_path / "study_samples.csv"
    assert csv.exists() and (tmp_path / "study_samples.png").exists()

    res = run(["fit", str(csv), "--x-col", "N_total", "--y-col", "err_density",
               "--window", "3"])
    assert res.exit_code == 0
    out = json.loads(res.output)
    assert "slope" in out


def test_reference_command(tmp_path):
    res = run(["reference", *BASE, "--out", str(tmp_path)])
    assert res.exit_code == 0
    assert (tmp_path / "reference.csv").read_text().startswith("x,value")


def test_bad_config_exit_code(tmp_path):
    res = CliRunner().invoke(main, ["estimate", "--set", "sampler=sobol",
                                    "--out", str(tmp_path)])
    assert res.exit_code == 2
