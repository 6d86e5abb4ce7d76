from dataclasses import replace

import numpy as np
import pytest

from magconfine import (
    ChartError,
    DecompositionError,
    ScenarioError,
    build_setup,
    initial_states,
    load_builtin,
    parse_scenario,
    run_check,
    run_simulation,
    run_verification,
)


def _short(name, T=2.0, particles=None):
    return replace(load_builtin(name), T=T).with_overrides(particles=particles)


def test_build_setup_disc():
    setup = build_setup(load_builtin("fig1"))
    assert setup.domain.kind == "disc"
    assert [chart.name for chart in setup.charts] == ["outer"]
    assert setup.decompositions[0].M == -1.0
    assert setup.tangential_bound(0) == 0.0


def test_build_setup_annulus():
    setup = build_setup(load_builtin("annulus"))
    assert [chart.name for chart in setup.charts] == ["outer", "inner"]
    assert [d.M for d in setup.decompositions] == [-1.0, 1.0]


def test_build_setup_rejects_overlapping_collars():
    raw = load_builtin("annulus").to_dict()
    raw["collars"] = {"outer": {"N": 0.6, "epsilon": 0.5}, "inner": {"N": 0.45, "epsilon": 0.5}}
    with pytest.raises(ChartError, match="overlap"):
        build_setup(parse_scenario(raw))


def test_initial_states_seeded():
    scenario = load_builtin("fig1").with_overrides(particles=6)
    setup = build_setup(scenario)
    first = initial_states(scenario, setup.domain)
    again = initial_states(scenario, setup.domain)
    other = initial_states(scenario.with_overrides(seed=1), setup.domain)

    assert len(first) == 6
    np.testing.assert_array_equal(first[0].q, [0.5, 0.0])
    for a, b in zip(first, again):
        np.testing.assert_array_equal(a.q, b.q)
        np.testing.assert_array_equal(a.v, b.v)
    assert not np.allclose(first[2].q, other[2].q)
    for state in first[2:]:
        assert np.hypot(*state.q) <= 0.5
        assert np.linalg.norm(state.v) == pytest.approx(1.0)


def test_initial_states_annulus_band():
    scenario = load_builtin("annulus").with_overrides(particles=20)
    states = initial_states(scenario, build_setup(scenario).domain)
    radii = np.array([np.hypot(*s.q) for s in states[2:]])
    assert np.all((radii >= 1.25) & (radii <= 1.75))


def test_explicit_start_outside_domain():
    raw = load_builtin("fig1").to_dict()
    raw["initial_conditions"]["explicit"] = [{"q": [1.5, 0.0], "v": [0.0, 1.0]}]
    scenario = parse_scenario(raw)
    with pytest.raises(ScenarioError) as info:
        initial_states(scenario, build_setup(scenario).domain)
    assert info.value.key == "initial_conditions.explicit[0]"


def test_run_simulation_report():
    result = run_simulation(_short("fig1"))
    report = result.to_report()
    assert report["prng"] == "PCG64"
    assert report["counts"] == {"completed": 2, "hit_floor": 0, "step_failure": 0}
    assert report["collars"][0]["decomposition"]["source"] == "template"
    particle = report["particles"][0]
    assert particle["t_final"] == pytest.approx(2.0)
    assert {b["kind"] for b in particle["bounds"]} == {"potential", "distance"}


def test_run_simulation_without_particles():
    result = run_simulation(_short("fig1", particles=0))
    assert result.trajectories == []
    assert result.to_report()["particles"] == []


def test_run_simulation_workers_match():
    scenario = _short("fig2a", T=1.0, particles=3)
    serial = run_simulation(scenario, bounds=False)
    parallel = run_simulation(scenario, workers=2, bounds=False)
    assert [t.index for t in parallel.trajectories] == [0, 1, 2]
    for a, b in zip(serial.trajectories, parallel.trajectories):
        np.testing.assert_array_equal(a.positions, b.positions)


def test_step_failure_recorded():
    raw = load_builtin("fig1").to_dict()
    raw.update(field="1/(1-r) + sqrt(x + 0.2)", T=2.0)
    raw["initial_conditions"] = {"explicit": [{"q": [0.0, 0.0], "v": [-1.0, 0.0]}]}
    result = run_simulation(parse_scenario(raw), bounds=False)
    assert result.trajectories[0].status == "step_failure"
    assert result.failures == [0]


def test_run_check():
    report = run_check(load_builtin("counterexample")).to_report()
    hypotheses = report["collars"][0]["hypotheses"]
    assert hypotheses["confinement_theorem"] == "not satisfied"
    assert hypotheses["growth_comparison"] == "meets"


def test_run_verification_requires_decomposition():
    with pytest.raises(DecompositionError):
        run_verification(_short("fig3"))


def test_run_verification_passes():
    result = run_verification(_short("b_alpha_05", T=5.0, particles=2))
    assert result.passed
    report = result.to_report()
    assert report["passed"] is True
    assert report["worst_failure"] is None


def test_weak_field_tangential_starts_reach_floor():
    result = run_simulation(_short("fig3", T=10.0))
    statuses = [t.status for t in result.trajectories]
    assert statuses[:2] == ["hit_floor", "hit_floor"]
    for index in (0, 1):
        surrogate = [r for r in result.bounds[index] if r.kind == "surrogate"]
        assert len(surrogate) == 1
        assert not surrogate[0].passed
        assert surrogate[0].note == "min n below surrogate bound"


@pytest.mark.parametrize(
    "name, confinement, growth",
    [("b_alpha_05", "satisfied", "fails"), ("b_alpha_1", "satisfied", "meets")],
)
def test_b_alpha_hypotheses(name, confinement, growth):
    hypotheses = run_check(load_builtin(name)).to_report()["collars"][0]["hypotheses"]
    assert hypotheses["confinement_theorem"] == confinement
    assert hypotheses["growth_comparison"] == growth


@pytest.mark.slow
def test_understated_tangential_bound_fails_verification():
    result = run_verification(load_builtin("understated_dc"))
    assert result.simulation.trajectories[0].status == "completed"
    assert not result.passed
    worst = result.worst()
    assert worst["kind"] == "potential"
    assert worst["margin"] < 0
    assert result.to_report()["worst_failure"] == worst
