import math
from dataclasses import replace

import numpy as np
import pytest

from magconfine import (
    IntegrationOptions,
    NotInCollarError,
    ParticleParams,
    build_field,
    diagnostics_pass,
    hamiltonian,
    integrate,
    load_builtin,
    make_state,
    potential,
    ps_rate,
    rhs,
    run_simulation,
    run_verification,
    to_canonical,
)

UNIT = ParticleParams()


def _options(unit_disc, disc_chart, **kwargs):
    return IntegrationOptions(charts=(disc_chart,), domain=unit_disc, **kwargs)


def test_particle_params_validation():
    with pytest.raises(ValueError):
        ParticleParams(mass=0.0)
    with pytest.raises(ValueError):
        ParticleParams(charge=0.0)
    assert ParticleParams(charge=2.0, mass=4.0).charge_to_mass == 0.5


def test_make_state_outside_domain(unit_disc):
    with pytest.raises(ValueError, match="outside"):
        make_state(unit_disc, (1.0, 0.0), (0.0, 1.0))
    with pytest.raises(ValueError):
        make_state(unit_disc, (0.0, 0.0, 0.0), (0.0, 1.0))


def test_rhs_example():
    state = make_state(None, (0.0, 0.0), (1.0, 0.0))
    dq, dv = rhs(build_field("2"), UNIT, state)
    np.testing.assert_allclose(dq, [1.0, 0.0])
    np.testing.assert_allclose(dv, [0.0, -2.0])


def test_rhs_force_orthogonal(fig2a_field):
    rng = np.random.default_rng(0)
    params = ParticleParams(charge=-1.5, mass=0.7)
    for _ in range(50):
        radius, angle = 0.95 * math.sqrt(rng.random()), rng.uniform(0, 2 * np.pi)
        q = radius * np.array([math.cos(angle), math.sin(angle)])
        state = make_state(None, q, rng.normal(size=2))
        _, dv = rhs(fig2a_field, params, state)
        assert abs(np.dot(dv, state.v)) < 1e-12 * max(1.0, np.linalg.norm(dv))


def test_larmor_orbit_closes():
    state0 = make_state(None, (0.0, 0.0), (1.0, 0.0))
    trajectory = integrate(build_field("1"), UNIT, state0, 2 * math.pi)
    assert trajectory.status == "completed"
    assert trajectory.times[-1] == pytest.approx(2 * math.pi)
    np.testing.assert_allclose(trajectory.positions[-1], [0.0, 0.0], atol=1e-6)
    np.testing.assert_allclose(trajectory.velocities[-1], [1.0, 0.0], atol=1e-6)
    # clockwise for positive charge and field
    quarter = np.argmin(np.abs(trajectory.times - math.pi / 2))
    assert trajectory.positions[quarter, 1] < 0


def test_zero_field_straight_line():
    state0 = make_state(None, (0.1, -0.2), (0.3, 0.4))
    trajectory = integrate(build_field("0"), UNIT, state0, 2.0)
    expected = state0.q[None, :] + trajectory.times[:, None] * state0.v[None, :]
    np.testing.assert_allclose(trajectory.positions, expected, atol=1e-12)


def test_cadence_samples(unit_disc, disc_chart, fig1_field):
    state0 = make_state(unit_disc, (0.2, 0.0), (0.0, 0.2))
    options = _options(unit_disc, disc_chart, cadence=0.25)
    trajectory = integrate(fig1_field, UNIT, state0, 5.0, options=options)
    np.testing.assert_allclose(trajectory.times, np.arange(21) * 0.25, atol=1e-12)
    assert len(trajectory) == 21


def test_speed_drift(unit_disc, disc_chart, fig2a_field):
    state0 = make_state(unit_disc, (0.0, 0.0), (0.5, 0.0))
    trajectory = integrate(fig2a_field, UNIT, state0, 10.0, options=_options(unit_disc, disc_chart))
    trajectory = diagnostics_pass(trajectory, [disc_chart], fig2a_field)
    assert trajectory.summary.max_speed_drift < 1e-12

    options = _options(unit_disc, disc_chart, project_speed=False)
    unprojected = integrate(fig2a_field, UNIT, state0, 10.0, options=options)
    speeds = np.linalg.norm(unprojected.velocities, axis=1)
    assert np.max(np.abs(speeds - 0.5)) < 1e-6


def test_to_canonical_example(disc_chart, fig1_field):
    state = make_state(None, (0.6, 0.0), (0.0, 1.0))
    c = to_canonical(fig1_field, UNIT, disc_chart, state)
    A = math.log(1.25) - 0.1
    assert c.n == pytest.approx(0.4)
    assert c.s == pytest.approx(0.0)
    assert c.p_n == pytest.approx(0.0, abs=1e-15)
    assert c.A == pytest.approx(A)
    assert c.p_s == pytest.approx(0.6 + A)
    assert hamiltonian(UNIT, disc_chart, *c) == pytest.approx(0.5)


def test_to_canonical_outside_collar(disc_chart, fig1_field):
    with pytest.raises(NotInCollarError):
        to_canonical(fig1_field, UNIT, disc_chart, make_state(None, (0.1, 0.0), (1.0, 0.0)))


@pytest.mark.parametrize("count", [20, pytest.param(5000, marks=pytest.mark.slow)])
def test_hamiltonian_equals_kinetic_energy(annulus_charts, count):
    field = build_field("1/(2-r) + 1/(r-1) + 0.5*x")
    params = ParticleParams(charge=2.0, mass=3.0)
    rng = np.random.default_rng(9)
    for chart in annulus_charts:
        for _ in range(count):
            n = rng.uniform(0.01, 0.99) * chart.width
            s = rng.uniform(0, chart.curve.length)
            q = chart.curve.point(s) + n * chart.curve.normal(s)
            state = make_state(None, q, rng.normal(size=2))
            c = to_canonical(field, params, chart, state)
            assert hamiltonian(params, chart, *c) == pytest.approx(
                state.kinetic_energy(params), rel=1e-8
            )


def test_ps_rate_vanishes(disc_chart, fig1_field, fig2a_field):
    assert ps_rate(fig1_field, UNIT, disc_chart, 0.2, 1.0, 0.3, 0.7) == 0.0
    A = potential(fig2a_field, disc_chart, 0.2, 1.0)
    assert ps_rate(fig2a_field, UNIT, disc_chart, 0.2, 1.0, 0.3, A) == 0.0


def test_ps_rate_matches_trajectory(unit_disc, disc_chart, fig2a_field):
    h = 1e-3
    state0 = make_state(unit_disc, (0.7, 0.0), (0.0, 0.5))
    options = _options(unit_disc, disc_chart, cadence=h)
    trajectory = integrate(fig2a_field, UNIT, state0, 0.25, options=options)
    trajectory = diagnostics_pass(trajectory, [disc_chart], fig2a_field)
    samples = trajectory.samples
    assert np.all(samples["component"].values == 0)

    p_s = samples["p_s"].values
    indices = range(2, 202, 2)
    assert len(indices) == 100
    for i in indices:
        central = (p_s[i + 1] - p_s[i - 1]) / (2 * h)
        wide = (p_s[i + 2] - p_s[i - 2]) / (4 * h)
        observed = (4 * central - wide) / 3
        expected = ps_rate(
            fig2a_field,
            UNIT,
            disc_chart,
            float(samples["n"][i]),
            float(samples["s"][i]),
            float(samples["p_n"][i]),
            float(samples["p_s"][i]),
        )
        assert observed == pytest.approx(expected, abs=1e-5 * max(1.0, abs(expected)))


def test_radial_field_conserves_ps(unit_disc, disc_chart, fig1_field):
    state0 = make_state(unit_disc, (0.6, 0.0), (0.0, 1.0))
    trajectory = integrate(
        fig1_field, UNIT, state0, 20.0, options=_options(unit_disc, disc_chart, cadence=0.05)
    )
    trajectory = diagnostics_pass(trajectory, [disc_chart], fig1_field)
    assert trajectory.status == "completed"
    p_s = trajectory.samples["p_s"].values
    p_s = p_s[np.isfinite(p_s)]
    assert np.max(np.abs(p_s - p_s[0])) < 1e-7 * max(1.0, abs(p_s[0]))
    assert trajectory.summary.max_energy_drift < 1e-7


def test_reversibility(unit_disc, disc_chart, fig2a_field):
    state0 = make_state(unit_disc, (0.1, 0.2), (0.4, -0.3))
    options = _options(unit_disc, disc_chart)
    forward = integrate(fig2a_field, UNIT, state0, 5.0, options=options)
    assert forward.status == "completed"

    end = forward.state(len(forward) - 1)
    reversed_state = make_state(unit_disc, end.q, -end.v)
    backward = integrate(fig2a_field, ParticleParams(charge=-1.0), reversed_state, 5.0, options=options)
    np.testing.assert_allclose(backward.positions[-1], state0.q, atol=1e-7)


def test_diagnostics_outside_collars(unit_disc, disc_chart, fig1_field):
    state0 = make_state(unit_disc, (0.0, 0.0), (0.2, 0.0))
    trajectory = integrate(
        fig1_field, UNIT, state0, 0.5, options=_options(unit_disc, disc_chart, cadence=0.1)
    )
    trajectory = diagnostics_pass(trajectory, [disc_chart], fig1_field)
    samples = trajectory.samples
    assert np.all(samples["component"].values == -1)
    assert np.all(np.isnan(samples["n"].values))
    np.testing.assert_allclose(samples["H"].values, 0.02, rtol=1e-9)
    assert trajectory.summary.min_n is None
    assert trajectory.summary.in_collar_fraction == 0.0


def test_weak_field_hits_floor(unit_disc, disc_chart, fig3_field):
    state0 = make_state(unit_disc, (0.9, 0.0), (1.0, 0.0))
    trajectory = integrate(fig3_field, UNIT, state0, 5.0, options=_options(unit_disc, disc_chart))
    assert trajectory.status == "hit_floor"
    assert trajectory.times[-1] < 5.0
    assert 1 - np.linalg.norm(trajectory.positions[-1]) < 1e-5
    assert "float64" not in trajectory.message
    when = float(trajectory.message.rsplit("at t=", 1)[1])
    assert when == pytest.approx(trajectory.times[-1], rel=1e-6)


def test_singular_start_is_step_failure(fig1_field):
    state0 = make_state(None, (1.0, 0.0), (1.0, 0.0))
    trajectory = integrate(fig1_field, UNIT, state0, 1.0)
    assert trajectory.status == "step_failure"
    assert "singular" in trajectory.message


@pytest.mark.slow
@pytest.mark.parametrize("name", ["fig1", "fig2a", "fig2b"])
def test_speed_drift_seeded_particles(name):
    scenario = replace(load_builtin(name), T=100.0).with_overrides(particles=10)
    assert scenario.initial_conditions.random.r_max <= 0.5
    result = run_simulation(scenario, bounds=False)
    assert len(result.trajectories) == 10
    for trajectory in result.trajectories:
        assert trajectory.status == "completed"
        speeds = np.linalg.norm(trajectory.velocities, axis=1)
        assert np.max(np.abs(speeds - speeds[0])) < 1e-8


@pytest.mark.slow
def test_log_field_confines():
    scenario = load_builtin("fig1").with_overrides(particles=10)
    assert scenario.T == 500.0
    result = run_verification(scenario)
    assert [t.status for t in result.simulation.trajectories] == ["completed"] * 10
    assert result.passed, result.worst()
    for trajectory in result.simulation.trajectories:
        # |p_s - eA| <= |v| keeps ln(N/n) - (N - n) below p_s + 1
        assert np.min(1 - np.linalg.norm(trajectory.positions, axis=1)) > 1e-3
        speeds = np.linalg.norm(trajectory.velocities, axis=1)
        assert np.max(np.abs(speeds - speeds[0])) < 1e-8
