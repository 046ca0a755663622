import json

import pytest

from contactopt import cli


QUAD_GRADIENT = """\
[run]
scenario = quad1d
method = gradient
"""

WEDGE_ECHO = """\
[run]
scenario = wedge
method = cbo
budget = 0
"""


@pytest.fixture()
def sandbox(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUT_ROOT_ENV, str(tmp_path))
    monkeypatch.chdir(tmp_path)
    return tmp_path


def _write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_gradient_run_writes_artifacts(sandbox):
    cfg = _write(sandbox, "run.ini", QUAD_GRADIENT)
    rc = cli.main(["run", cfg, "--out", "g"])
    assert rc == 0
    out = sandbox / "g"
    for name in ("manifest.json", "summary.json", "iterates.csv", "iterates.png"):
        assert (out / name).exists()
    summary = json.loads((out / "summary.json").read_text())
    assert summary["scenario"] == "quad1d"
    assert summary["converged"] is True
    assert summary["feasible"] is True
    assert abs(summary["rho"][0] - 0.5) <= 1e-6
    # analytic scenarios carry no pressure profiles
    assert not (out / "pressure_initial.csv").exists()
    header = (out / "iterates.csv").read_text().split("\n")[0]
    assert header == "iteration,phase,rho1,objective,violation,dual_opt"


def test_cbo_echo_run_writes_pressure_artifacts(sandbox):
    cfg = _write(sandbox, "wedge.ini", WEDGE_ECHO)
    rc = cli.main(["run", cfg, "--out", "w"])
    assert rc == 0
    out = sandbox / "w"
    for name in (
        "manifest.json",
        "summary.json",
        "samples.csv",
        "samples.png",
        "pressure_initial.csv",
        "pressure_initial.png",
        "pressure_final.csv",
        "pressure_final.png",
    ):
        assert (out / name).exists()
    summary = json.loads((out / "summary.json").read_text())
    assert summary["samples"] == 1
    assert summary["rho"] == [30.0, 43.0, 1.05]
    lines = (out / "samples.csv").read_text().strip().split("\n")
    assert len(lines) == 2


def test_rerun_is_byte_identical(sandbox):
    cfg = _write(sandbox, "wedge.ini", WEDGE_ECHO)
    assert cli.main(["run", cfg, "--out", "r1"]) == 0
    assert cli.main(["run", cfg, "--out", "r2"]) == 0
    for name in (
        "manifest.json",
        "summary.json",
        "samples.csv",
        "pressure_initial.csv",
        "pressure_final.csv",
    ):
        a = (sandbox / "r1" / name).read_bytes()
        b = (sandbox / "r2" / name).read_bytes()
        assert a == b, name


def test_seed_override_lands_in_manifest(sandbox):
    cfg = _write(sandbox, "run.ini", QUAD_GRADIENT)
    assert cli.main(["run", cfg, "--seed", "9", "--out", "s"]) == 0
    manifest = json.loads((sandbox / "s" / "manifest.json").read_text())
    assert manifest["seed"] == 9
    assert manifest["tool"] == "contactopt"


def test_repeats_make_seed_subdirectories(sandbox):
    cfg = _write(
        sandbox,
        "cbo.ini",
        "[run]\nscenario = quad1d\nmethod = cbo\nbudget = 2\nn_init = 3\n",
    )
    rc = cli.main(["run", cfg, "--repeats", "2", "--out", "rep"])
    assert rc == 0
    for seed in (0, 1):
        summary = json.loads(
            (sandbox / "rep" / f"seed-{seed}" / "summary.json").read_text()
        )
        assert summary["seed"] == seed
    assert cli.main(["run", cfg, "--repeats", "0"]) == 1


def test_default_out_dir_under_env_root(sandbox):
    cfg = _write(sandbox, "run.ini", QUAD_GRADIENT)
    assert cli.main(["run", cfg]) == 0
    assert (sandbox / "runs" / "quad1d-gradient" / "summary.json").exists()


def test_compare_identical_runs(sandbox, capsys):
    cfg = _write(sandbox, "run.ini", QUAD_GRADIENT)
    assert cli.main(["run", cfg, "--out", "a"]) == 0
    assert cli.main(["run", cfg, "--out", "b"]) == 0
    rc = cli.main(
        ["compare", str(sandbox / "a"), str(sandbox / "b"), "--out", "cmp.csv"]
    )
    assert rc == 0
    text = capsys.readouterr().out
    assert "rel_abs_err 0" in text
    lines = (sandbox / "cmp.csv").read_text().strip().split("\n")
    assert lines[0] == "variable,mean,std,reference,rel_abs_error"
    var, mean, std, ref, rel = lines[1].split(",")
    assert var == "rho1"
    assert std == "0"
    assert rel == "0"


def test_compare_scenario_mismatch_fails(sandbox):
    quad = _write(sandbox, "run.ini", QUAD_GRADIENT)
    para = _write(
        sandbox, "para.ini", "[run]\nscenario = parabola\nmethod = gradient\n"
    )
    assert cli.main(["run", quad, "--out", "q"]) == 0
    assert cli.main(["run", para, "--out", "p"]) == 0
    assert cli.main(["compare", str(sandbox / "q"), str(sandbox / "p")]) == 1
    assert cli.main(["compare", str(sandbox / "q"), str(sandbox / "missing")]) == 1


def test_bad_config_fails_cleanly(sandbox, capsys):
    cfg = _write(sandbox, "bad.ini", "[run]\nscenario = wedge\n")
    assert cli.main(["run", cfg]) == 1
    assert "method" in capsys.readouterr().err
    assert cli.main(["run", str(sandbox / "absent.ini")]) == 1
    assert cli.main(["definitely-not-a-command"]) == 1
