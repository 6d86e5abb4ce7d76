import json
from dataclasses import replace

import numpy as np
import pytest

from magconfine import (
    load_builtin,
    plot_trajectories,
    read_trajectory_csv,
    run_simulation,
    write_report,
    write_trajectory_csv,
)
from magconfine.output import CSV_COLUMNS, OutputFormatError, trajectory_filename
from magconfine.runner import evaluate_bounds


@pytest.fixture(scope="module")
def fig1_result():
    scenario = replace(load_builtin("fig1"), T=3.0)
    return run_simulation(scenario, bounds=False)


def test_trajectory_filename():
    assert trajectory_filename(7) == "trajectory_007.csv"


def test_csv_layout(tmp_path, fig1_result):
    trajectory = fig1_result.trajectories[1]
    path = write_trajectory_csv(trajectory, str(tmp_path / "t.csv"))
    lines = open(path, encoding="utf-8").read().split("\n")
    assert lines[0] == (
        f"# magconfine-trajectory schema=1 particle=1 status=completed "
        f"H0={trajectory.H0!r} charge=1.0 mass=1.0"
    )
    assert lines[1] == ",".join(CSV_COLUMNS)
    assert len(lines) == len(trajectory) + 3
    assert lines[-1] == ""
    # starts at r = 0.3, outside the collar
    assert lines[2].split(",")[5:10] == ["", "", "", "", ""]


def test_csv_round_trip(tmp_path, fig1_result):
    trajectory = fig1_result.trajectories[0]
    path = write_trajectory_csv(trajectory, str(tmp_path / trajectory_filename(0)))
    back = read_trajectory_csv(path)
    assert back.index == 0
    assert back.status == trajectory.status
    assert back.H0 == trajectory.H0
    np.testing.assert_array_equal(back.times, trajectory.times)
    np.testing.assert_array_equal(back.positions, trajectory.positions)
    np.testing.assert_array_equal(back.samples["p_s"].values, trajectory.samples["p_s"].values)


def test_csv_deterministic(tmp_path, fig1_result):
    trajectory = fig1_result.trajectories[0]
    a = write_trajectory_csv(trajectory, str(tmp_path / "a.csv"))
    b = write_trajectory_csv(trajectory, str(tmp_path / "b.csv"))
    assert open(a, "rb").read() == open(b, "rb").read()


@pytest.mark.parametrize(
    "content, match",
    [
        ("t,x,y\n0,0,0\n", "schema comment"),
        ("# magconfine-trajectory schema=2 particle=0 status=completed H0=0.5\n", "schema 2"),
        (
            "# magconfine-trajectory schema=1 particle=0 status=completed H0=0.5\nt,x,y\n0,0,0\n",
            "expected columns",
        ),
        (
            "# magconfine-trajectory schema=1 particle=0 status=completed H0=0.5\n"
            + ",".join(CSV_COLUMNS)
            + "\n1,0,0,0,0,,,,,,0\n0,0,0,0,0,,,,,,0\n",
            "strictly increasing",
        ),
    ],
)
def test_malformed_csv(tmp_path, content, match):
    path = tmp_path / "bad.csv"
    path.write_text(content)
    with pytest.raises(OutputFormatError, match=match):
        read_trajectory_csv(str(path))


def test_report_nan_is_null(tmp_path):
    path = write_report(
        {"a": float("nan"), "b": [np.float64(np.inf), np.int64(3)], "c": np.bool_(True)},
        str(tmp_path / "report.json"),
    )
    text = open(path, encoding="utf-8").read()
    assert json.loads(text) == {"a": None, "b": [None, 3], "c": True}
    assert text.endswith("}\n")


def test_simulation_report_is_json(tmp_path, fig1_result):
    path = write_report(fig1_result.to_report(), str(tmp_path / "report.json"))
    report = json.load(open(path, encoding="utf-8"))
    assert report["domain"] == {"kind": "disc", "R": 1.0}
    assert len(report["particles"]) == 2


def test_svg_deterministic(tmp_path, fig1_result):
    domain = {"kind": "disc", "R": 1.0}
    a = plot_trajectories(fig1_result.trajectories, domain, str(tmp_path / "a.svg"), title="1/(1-r)")
    b = plot_trajectories(fig1_result.trajectories, domain, str(tmp_path / "b.svg"), title="1/(1-r)")
    content = open(a, "rb").read()
    assert content == open(b, "rb").read()
    assert b"<svg" in content
    assert b"1/(1-r)" in content


def test_svg_annulus_and_single_sample(tmp_path, fig1_result):
    trajectory = fig1_result.trajectories[0]
    single = replace(trajectory, samples=trajectory.samples.isel(t=[0]))
    path = plot_trajectories([single], {"kind": "annulus", "R1": 1.0, "R2": 2.0}, str(tmp_path / "c.svg"))
    assert open(path, "rb").read().startswith(b"<?xml")


def test_csv_bounds_verify_again(tmp_path):
    result = run_simulation(replace(load_builtin("fig2a"), T=5.0))
    for trajectory in result.trajectories:
        path = write_trajectory_csv(trajectory, str(tmp_path / trajectory_filename(trajectory.index)))
        back = read_trajectory_csv(path)
        assert back.has_diagnostics
        np.testing.assert_array_equal(
            back.samples["component"].values, trajectory.samples["component"].values
        )
        again = evaluate_bounds(result.setup, back)
        expected = result.bounds[trajectory.index]
        assert [r.to_dict() for r in again] == [r.to_dict() for r in expected]
        assert all(r.passed for r in again)


def test_csv_components_on_annulus(tmp_path):
    result = run_simulation(replace(load_builtin("annulus"), T=3.0), bounds=False)
    for trajectory in result.trajectories:
        path = write_trajectory_csv(trajectory, str(tmp_path / "t.csv"))
        back = read_trajectory_csv(path, charts=result.setup.charts)
        np.testing.assert_array_equal(
            back.samples["component"].values, trajectory.samples["component"].values
        )


def test_csv_without_diagnostics(tmp_path, fig1_result):
    trajectory = fig1_result.trajectories[0]
    bare = replace(trajectory, samples=trajectory.samples[["x", "y", "vx", "vy"]])
    back = read_trajectory_csv(write_trajectory_csv(bare, str(tmp_path / "bare.csv")))
    assert not back.has_diagnostics
