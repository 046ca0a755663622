import numpy as np

from contactopt import bayesopt, nlpopt, report, scenarios


def _log_rows():
    return [
        nlpopt.LogRow(0, np.array([0.5, 0.25]), 1.0, 0.125, 0.75, "init"),
        nlpopt.LogRow(1, np.array([0.4, 0.3]), 0.9, 0.0, 0.5, "normal"),
        nlpopt.LogRow(2, np.array([0.35, 0.31]), 0.85, 0.01, np.nan, "restoration"),
    ]


def test_iterates_csv_layout(tmp_path):
    path = tmp_path / "iterates.csv"
    report.write_iterates_csv(path, _log_rows(), ("x", "y"))
    lines = path.read_text().split("\n")
    assert lines[0] == "iteration,phase,x,y,objective,violation,dual_opt"
    assert lines[1] == "0,init,0.5,0.25,1,0.125,0.75"
    assert lines[3] == "2,restoration,0.35,0.31,0.85,0.01,nan"
    assert lines[-1] == ""  # single trailing LF
    assert "\r" not in path.read_bytes().decode()


def test_samples_csv_layout(tmp_path):
    samples = [
        bayesopt.BoSample(0, np.array([0.75]), 0.2025, np.array([0.25]), True, np.nan),
        bayesopt.BoSample(
            1, np.array([0.1]), np.nan, np.full(1, -np.inf), False, 0.3, failed=True
        ),
        bayesopt.BoSample(2, np.array([0.4]), 0.01, np.array([-0.1]), False, 0.2),
    ]
    path = tmp_path / "samples.csv"
    report.write_samples_csv(path, samples, ("rho1",))
    lines = path.read_text().split("\n")
    assert lines[0] == "index,rho1,objective,violation,feasible,acquisition,failed"
    assert lines[1] == "0,0.75,0.2025,0,1,nan,0"
    # failed samples report infinite violation
    assert lines[2] == "1,0.1,nan,inf,0,0.3,1"
    assert lines[3] == "2,0.4,0.01,0.1,0,0.2,0"


def test_pressure_csv_long_format(tmp_path):
    snapshots = [
        {
            "label": "t5",
            "nodes": np.array([10, 11, 12, 13, 14]),
            "nodal_pressure": np.array([1.0, 2.0, 3.0, 4.0, 5.0]),
            "groups": [np.array([0, 1, 2]), np.array([2, 3, 4])],
            "segment_pressure": np.array([2.0, 4.0]),
        }
    ]
    path = tmp_path / "pressure.csv"
    report.write_pressure_csv(path, snapshots)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "snapshot,segment_index,node_index,nodal_pressure,segment_pressure"
    # 3 nodes per segment, shared node 12 listed under both segments
    assert len(lines) == 1 + 6
    assert lines[1] == "t5,0,10,1,2"
    assert lines[3] == "t5,0,12,3,2"
    assert lines[4] == "t5,1,12,3,4"


def test_numbers_use_repr_precision(tmp_path):
    rows = [nlpopt.LogRow(0, np.array([1.0 / 3.0]), 2.0 / 3.0, 0.0, 1e-13, "init")]
    path = tmp_path / "iterates.csv"
    report.write_iterates_csv(path, rows, ("x",))
    body = path.read_text().split("\n")[1]
    assert body.split(",")[2] == "0.333333333333"
    assert body.split(",")[3] == "0.666666666667"
    assert body.split(",")[5] == "1e-13"


def test_csv_writers_are_byte_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    report.write_iterates_csv(a, _log_rows(), ("x", "y"))
    report.write_iterates_csv(b, _log_rows(), ("x", "y"))
    assert a.read_bytes() == b.read_bytes()


def test_write_json_sorted_and_newline_terminated(tmp_path):
    path = tmp_path / "payload.json"
    report.write_json(path, {"zeta": 1, "alpha": {"b": 2, "a": 3}})
    text = path.read_text()
    assert text.endswith("\n")
    assert text.index('"alpha"') < text.index('"zeta"')


def test_compare_csv(tmp_path):
    path = tmp_path / "compare.csv"
    report.write_compare_csv(
        path,
        ("theta1", "theta2"),
        mean=[30.0, 37.0],
        std=[0.0, 0.5],
        ref=[30.0, 36.5],
        rel_err=[0.0, 0.0136986301369863],
    )
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "variable,mean,std,reference,rel_abs_error"
    assert lines[1] == "theta1,30,0,30,0"
    assert lines[2] == "theta2,37,0.5,36.5,0.013698630137"


def test_figures_render_to_files(tmp_path):
    report.render_iterates_figure(tmp_path / "iterates.png", _log_rows())
    samples = [
        bayesopt.BoSample(0, np.array([0.75]), 0.2, np.array([0.25]), True, np.nan),
        bayesopt.BoSample(1, np.array([0.4]), 0.01, np.array([-0.1]), False, 0.2),
    ]
    report.render_samples_figure(tmp_path / "samples.png", samples)
    sc = scenarios.make_scenario("quad1d")
    snap = {
        "label": "t5",
        "nodes": np.arange(5),
        "nodal_pressure": np.array([1.0, 2.0, 3.0, 4.0, 5.0]),
        "groups": [np.array([0, 1, 2]), np.array([2, 3, 4])],
        "segment_pressure": np.array([2.0, 4.0]),
    }
    report.render_pressure_figure(
        tmp_path / "pressure.png", [snap], limits={"floor": 1.0, "cap": 20.0}
    )
    for name in ("iterates.png", "samples.png", "pressure.png"):
        out = tmp_path / name
        assert out.exists()
        assert out.stat().st_size > 1000
        assert out.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
