"""
This module contains the workflow functions that turn a `Scenario` into
simulated trajectories, hypothesis reports and bound verifications. They wrap
the `geometry`, `field`, `dynamics` and `bounds` functions the same way for the
command line and for library users.

Particles of a scenario are independent: with `workers > 1` they are integrated
in a process pool and merged back by particle index, so results do not depend
on the number of workers.
"""

import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field as dc_field, replace
from typing import Optional

import numpy as np

from ._utils import optional_float
from .bounds import (
    HypothesisReport,
    hypothesis_report,
    make_constants,
    surrogate_distance_check,
    verify_distance_bound,
    verify_potential_bound,
)
from .dynamics import (
    IntegrationOptions,
    ParticleParams,
    State,
    Trajectory,
    diagnostics_pass,
    integrate,
    make_state,
)
from .field import (
    CollarDecomposition,
    DecompositionError,
    FieldSpec,
    build_field,
    check_tangential_hypothesis,
    collar_decomposition,
)
from .geometry import ChartError, Domain, collars_overlap, make_annulus, make_chart, make_disc
from .scenario import Scenario, ScenarioError

log = logging.getLogger(__name__)

PRNG = "PCG64"


@dataclass(eq=False)
class Setup:
    """Everything needed to simulate and verify a scenario."""

    scenario: Scenario
    domain: Domain
    field: FieldSpec
    charts: list
    decompositions: list
    params: ParticleParams
    _tangential: dict = dc_field(default_factory=dict, repr=False)

    def tangential_bound(self, j: int) -> float:
        """D_C of component `j`: the scenario's analytic value, or the estimate
        of `check_tangential_hypothesis`."""

        declared = self.scenario.collar(self.charts[j].name).D_C
        if declared is not None:
            return declared
        if j not in self._tangential:
            estimate = check_tangential_hypothesis(self.field, self.charts[j])
            if estimate.growing:
                log.warning(
                    "Tangential integral still growing on %r; D_C=%.6g is a lower estimate",
                    self.charts[j].name,
                    estimate.value,
                )
            self._tangential[j] = estimate.value
        return self._tangential[j]

    def integration_options(self) -> IntegrationOptions:
        settings = self.scenario.integrator
        return IntegrationOptions(
            charts=tuple(self.charts),
            domain=self.domain,
            cadence=self.scenario.output.cadence,
            record_steps=self.scenario.output.record_steps,
            c_step=settings.c_step,
            n_floor_ratio=settings.n_floor_ratio,
        )


def build_setup(scenario: Scenario) -> Setup:
    """Returns the validated Setup of a scenario: domain, parsed field, one
    collar chart and (optional) decomposition per boundary component.

    :param scenario: Scenario
    :type scenario: Scenario

    :returns: Setup
    :rtype: Setup
    """

    spec = scenario.domain
    if spec.kind == "disc":
        domain = make_disc(spec.R)
    else:
        domain = make_annulus(spec.R1, spec.R2)

    field = build_field(scenario.field, scenario.parameters)

    charts, decompositions = [], []
    for curve in domain.components:
        settings = scenario.collar(curve.name)
        chart = make_chart(curve, settings.N, settings.epsilon)
        charts.append(chart)
        decompositions.append(
            collar_decomposition(field, chart, settings.M, settings.alpha, settings.C_f)
        )

    if collars_overlap(domain, charts):
        raise ChartError(
            "Collars overlap: N_outer + N_inner must be smaller than R2 - R1"
        )

    params = ParticleParams(scenario.particle.charge, scenario.particle.mass)
    return Setup(scenario, domain, field, charts, decompositions, params)


def initial_states(scenario: Scenario, domain: Domain) -> list:
    """Returns the initial states of a scenario: explicit starts first, then
    random draws from numpy's PCG64 generator seeded with the scenario seed.
    Random positions are uniform in area over the band r_min <= r <= r_max,
    directions uniform on the circle.

    :param scenario: Scenario
    :type scenario: Scenario
    :param domain: Domain built from the scenario
    :type domain: Domain

    :returns: Initial states
    :rtype: list
    """

    states = []
    for i, (q, v) in enumerate(scenario.initial_conditions.explicit):
        try:
            states.append(make_state(domain, q, v))
        except ValueError as exc:
            raise ScenarioError(
                str(exc), source=scenario.source, key=f"initial_conditions.explicit[{i}]"
            ) from None

    draws = scenario.initial_conditions.random
    if draws is None or draws.count == 0:
        return states

    inner = 0.0 if domain.kind == "disc" else domain.radii[0]
    outer = domain.radii[-1]
    if draws.r_max >= outer or (domain.kind == "annulus" and draws.r_min <= inner):
        raise ScenarioError(
            "random band must lie inside the domain",
            source=scenario.source,
            key="initial_conditions.random",
        )

    rng = np.random.Generator(np.random.PCG64(scenario.seed))
    u = rng.random((draws.count, 3))
    radius = np.sqrt(draws.r_min**2 + u[:, 0] * (draws.r_max**2 - draws.r_min**2))
    theta = 2 * np.pi * u[:, 1]
    phi = 2 * np.pi * u[:, 2]

    cx, cy = domain.center
    for k in range(draws.count):
        q = (cx + radius[k] * np.cos(theta[k]), cy + radius[k] * np.sin(theta[k]))
        v = (draws.speed * np.cos(phi[k]), draws.speed * np.sin(phi[k]))
        states.append(make_state(domain, q, v))
    return states


def simulate_particle(setup: Setup, index: int, state: State) -> Trajectory:
    """Integrate one particle and fill its diagnostics."""

    settings = setup.scenario.integrator
    trajectory = integrate(
        setup.field,
        setup.params,
        state,
        setup.scenario.T,
        rel_tol=settings.rel_tol,
        abs_tol=settings.abs_tol,
        options=setup.integration_options(),
    )
    trajectory = diagnostics_pass(
        trajectory, setup.charts, setup.field, setup.params, setup.decompositions
    )
    if trajectory.status != "completed":
        log.info("Particle %d: %s (%s)", index, trajectory.status, trajectory.message)
    return replace(trajectory, index=index)


# Worker processes rebuild the setup once per scenario
_WORKER_SETUPS = {}


def _worker(task: tuple) -> Trajectory:
    scenario, index, q, v = task
    key = json.dumps(scenario.to_dict(), sort_keys=True)
    if key not in _WORKER_SETUPS:
        _WORKER_SETUPS[key] = build_setup(scenario)
    setup = _WORKER_SETUPS[key]
    return simulate_particle(setup, index, State(0.0, np.asarray(q), np.asarray(v)))


def evaluate_bounds(setup: Setup, trajectory: Trajectory) -> list:
    """Bound reports of one trajectory on every collar: the potential bound,
    and the distance bound when the collar has a decomposition (the surrogate
    check otherwise)."""

    reports = []
    for j, chart in enumerate(setup.charts):
        decomposition = setup.decompositions[j]
        constants = make_constants(
            chart, setup.params, trajectory.H0, setup.tangential_bound(j), decomposition
        )
        reports.append(verify_potential_bound(trajectory, constants, j))
        if decomposition is not None:
            reports.append(verify_distance_bound(trajectory, constants, j))
        else:
            reports.append(surrogate_distance_check(trajectory, constants, j))
    return reports


@dataclass(eq=False)
class SimulationResult:
    setup: Setup
    trajectories: list
    bounds: dict = dc_field(default_factory=dict)

    @property
    def scenario(self) -> Scenario:
        return self.setup.scenario

    @property
    def failures(self) -> list:
        return [t.index for t in self.trajectories if t.status == "step_failure"]

    def _particle_entry(self, trajectory: Trajectory) -> dict:
        state = trajectory.state(0)
        final = trajectory.positions[-1]
        entry = {
            "index": trajectory.index,
            "status": trajectory.status,
            "message": trajectory.message,
            "H0": trajectory.H0,
            "q0": state.q.tolist(),
            "v0": state.v.tolist(),
            "t_final": float(trajectory.times[-1]),
            "max_r": float(np.max(np.hypot(*trajectory.positions.T))),
            "final_q": final.tolist(),
            "samples": len(trajectory),
        }
        if trajectory.summary is not None:
            entry.update(
                {k: optional_float(v) for k, v in trajectory.summary.to_dict().items()}
            )
        if trajectory.index in self.bounds:
            entry["bounds"] = [r.to_dict() for r in self.bounds[trajectory.index]]
        return entry

    def to_report(self) -> dict:
        statuses = [t.status for t in self.trajectories]
        return {
            "scenario": self.scenario.name,
            "field": self.scenario.field,
            "domain": self.setup.domain.describe(),
            "seed": self.scenario.seed,
            "prng": PRNG,
            "T": self.scenario.T,
            "collars": [_collar_entry(self.setup, j) for j in range(len(self.setup.charts))],
            "counts": {s: statuses.count(s) for s in ("completed", "hit_floor", "step_failure")},
            "particles": [self._particle_entry(t) for t in self.trajectories],
        }


def _collar_entry(setup: Setup, j: int) -> dict:
    chart = setup.charts[j]
    decomposition: Optional[CollarDecomposition] = setup.decompositions[j]
    return {
        "component": chart.name,
        "N": chart.width,
        "epsilon": chart.epsilon,
        "K": chart.K,
        "K_prime": chart.K_prime,
        "decomposition": decomposition.to_dict() if decomposition else None,
    }


def run_simulation(
    scenario: Scenario,
    workers: int = 1,
    verbose: bool = False,
    bounds: bool = True,
    setup: Optional[Setup] = None,
) -> SimulationResult:
    """Integrates every particle of a scenario and fills their diagnostics.
    This function is a wrapper for the `build_setup`, `initial_states`,
    `integrate`, `diagnostics_pass` and bound-checking functions.

    :param scenario: Scenario
    :type scenario: Scenario
    :param workers: Number of worker processes, defaults to 1
    :type workers: int, optional
    :param verbose: Logs intermediate steps and timings if True, defaults to
        False
    :type verbose: bool, optional
    :param bounds: Evaluate the bound reports of every trajectory, defaults to
        True
    :type bounds: bool, optional
    :param setup: Setup already built from `scenario`, defaults to None
    :type setup: Setup, optional

    :returns: Simulation result with trajectories in particle order
    :rtype: SimulationResult
    """

    if workers < 1:
        raise ValueError("`workers` must be at least 1")

    # Step 1: Setup
    if verbose:
        log.info("Building setup for %r...", scenario.name)
        start = time.time()

    setup = setup or build_setup(scenario)
    states = initial_states(scenario, setup.domain)

    if verbose:
        log.info("Setup built in %.1f s", time.time() - start)

    # Step 2: Integration
    if verbose:
        log.info("Integrating %d particles...", len(states))
        start = time.time()

    if workers == 1 or len(states) <= 1:
        trajectories = [simulate_particle(setup, i, s) for i, s in enumerate(states)]
    else:
        tasks = [(scenario, i, s.q, s.v) for i, s in enumerate(states)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            trajectories = list(pool.map(_worker, tasks))

    if verbose:
        log.info("Integrated in %.1f s", time.time() - start)

    result = SimulationResult(setup, trajectories)

    # Step 3: Bounds
    if bounds and trajectories:
        if verbose:
            log.info("Checking bounds...")
            start = time.time()

        result.bounds = {t.index: evaluate_bounds(setup, t) for t in trajectories}

        if verbose:
            log.info("Bounds checked in %.1f s", time.time() - start)

    return result


@dataclass(eq=False)
class CheckResult:
    setup: Setup
    reports: list

    def to_report(self) -> dict:
        return {
            "scenario": self.setup.scenario.name,
            "field": self.setup.scenario.field,
            "domain": self.setup.domain.describe(),
            "collars": [
                dict(_collar_entry(self.setup, j), hypotheses=report.to_dict())
                for j, report in enumerate(self.reports)
            ],
        }


def run_check(scenario: Scenario, verbose: bool = False) -> CheckResult:
    """Runs `hypothesis_report` on every collar of a scenario.

    :param scenario: Scenario
    :type scenario: Scenario
    :param verbose: Logs intermediate steps and timings if True, defaults to
        False
    :type verbose: bool, optional

    :returns: Hypothesis reports per boundary component
    :rtype: CheckResult
    """

    setup = build_setup(scenario)
    reports = []
    for chart in setup.charts:
        if verbose:
            log.info("Checking hypotheses on %r...", chart.name)
            start = time.time()

        report: HypothesisReport = hypothesis_report(setup.field, chart)
        reports.append(report)

        if verbose:
            log.info(
                "%r: confinement theorem %s, growth comparison %s (%.1f s)",
                chart.name,
                report.confinement_theorem,
                report.growth_comparison,
                time.time() - start,
            )
    return CheckResult(setup, reports)


@dataclass(eq=False)
class VerificationResult:
    simulation: SimulationResult

    @property
    def reports(self) -> list:
        return [
            report
            for index in sorted(self.simulation.bounds)
            for report in self.simulation.bounds[index]
            if report.kind != "surrogate"
        ]

    @property
    def passed(self) -> bool:
        return all(report.passed for report in self.reports)

    def worst(self) -> Optional[dict]:
        """Worst failing margin over all particles, or None when all pass."""
        failing = [
            (index, report)
            for index, reports in sorted(self.simulation.bounds.items())
            for report in reports
            if report.kind != "surrogate" and not report.passed
        ]
        if not failing:
            return None
        index, report = min(failing, key=lambda item: item[1].worst_margin)
        return {
            "particle": index,
            "kind": report.kind,
            "component": self.simulation.setup.charts[report.component].name,
            "margin": report.worst_margin,
            "t": report.worst_time,
        }

    def to_report(self) -> dict:
        report = self.simulation.to_report()
        report["passed"] = self.passed
        report["worst_failure"] = self.worst()
        return report


def run_verification(
    scenario: Scenario, workers: int = 1, verbose: bool = False
) -> VerificationResult:
    """Simulates a scenario and verifies the potential and distance bounds for
    every particle and collar. At least one collar must have a decomposition,
    declared in the scenario or derived from the field expression.

    :param scenario: Scenario
    :type scenario: Scenario
    :param workers: Number of worker processes, defaults to 1
    :type workers: int, optional
    :param verbose: Logs intermediate steps and timings if True, defaults to
        False
    :type verbose: bool, optional

    :returns: Verification result
    :rtype: VerificationResult
    """

    setup = build_setup(scenario)
    missing = [c.name for c, d in zip(setup.charts, setup.decompositions) if d is None]
    if len(missing) == len(setup.charts):
        raise DecompositionError(
            f"No collar decomposition for {', '.join(map(repr, missing))}: declare M, "
            "alpha and C_f in the scenario's collars, or use a field with a c/(R-r) term"
        )
    for name in missing:
        log.warning("No collar decomposition on %r; only the surrogate check runs", name)

    simulation = run_simulation(
        scenario, workers=workers, verbose=verbose, bounds=True, setup=setup
    )
    result = VerificationResult(simulation)
    if verbose:
        log.info("Verification %s", "passed" if result.passed else "failed")
    return result
