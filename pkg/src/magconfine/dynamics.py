"""
This module contains the equations of motion of a charged particle in a planar
magnetic field,

    dq/dt = v,   dv/dt = -(e/m) B(q) J v,

their adaptive integration, and the conversion of cartesian states into the
canonical coordinates (n, s, p_n, p_s) of a collar chart.
"""

import logging
from dataclasses import dataclass, field as dc_field, replace
from typing import NamedTuple, Optional, Sequence

import numpy as np
import xarray as xr
from scipy.integrate import RK45

from ._utils import relative_drift, rotate90
from .field import (
    CollarDecomposition,
    FieldSingularError,
    FieldSpec,
    eval_cartesian,
    potential,
    potential_s_derivative,
)
from .geometry import (
    CollarChart,
    Domain,
    NotInCollarError,
    _check_depth,
    metric_factor,
    to_normal,
)

log = logging.getLogger(__name__)

STATUSES = ("completed", "hit_floor", "step_failure")


@dataclass(frozen=True)
class ParticleParams:
    """Mass and charge of the particle."""

    charge: float = 1.0
    mass: float = 1.0

    def __post_init__(self):
        if not self.mass > 0:
            raise ValueError("`mass` must be positive")
        if self.charge == 0 or not np.isfinite(self.charge):
            raise ValueError("`charge` must be finite and nonzero")

    @property
    def charge_to_mass(self) -> float:
        return self.charge / self.mass


@dataclass(frozen=True, eq=False)
class State:
    t: float
    q: np.ndarray
    v: np.ndarray

    def kinetic_energy(self, params: ParticleParams) -> float:
        return 0.5 * params.mass * float(np.dot(self.v, self.v))


def make_state(domain: Optional[Domain], q, v, t: float = 0.0) -> State:
    """Returns a State after checking that `q` lies in the open domain.

    :param domain: Domain, or None to skip the membership check
    :type domain: Domain
    :param q: Position (x, y)
    :type q: Sequence[float]
    :param v: Velocity (v_x, v_y)
    :type v: Sequence[float]
    :param t: Time, defaults to 0.0
    :type t: float, optional

    :returns: State
    :rtype: State
    """

    q = np.array(q, dtype=float)
    v = np.array(v, dtype=float)
    if q.shape != (2,) or v.shape != (2,):
        raise ValueError("`q` and `v` must be planar vectors")
    if not (np.all(np.isfinite(q)) and np.all(np.isfinite(v))):
        raise ValueError("`q` and `v` must be finite")
    if domain is not None and not domain.contains(q):
        raise ValueError(f"Initial position {tuple(q)} lies outside the {domain.kind}")
    return State(float(t), q, v)


def rhs(field: FieldSpec, params: ParticleParams, state: State) -> tuple:
    """Right-hand side of the cartesian equations of motion.

    :param field: Field specification
    :type field: FieldSpec
    :param params: Particle parameters
    :type params: ParticleParams
    :param state: Current state
    :type state: State

    :returns: (dq/dt, dv/dt)
    :rtype: tuple
    """

    B = eval_cartesian(field, state.q)
    return state.v.copy(), -params.charge_to_mass * B * rotate90(state.v)


@dataclass(frozen=True)
class IntegrationOptions:
    """Integration settings beyond the tolerances.

    `charts` are the collars used for the step cap and the floor test;
    `cadence` is the output interval (None records every internal step).
    With `project_speed` every accepted step and every dense sample is
    rescaled to the initial speed.
    """

    charts: tuple = ()
    domain: Optional[Domain] = None
    cadence: Optional[float] = None
    record_steps: bool = False
    c_step: float = 0.1
    n_floor_ratio: float = 1e-6
    min_step_ratio: float = 1e-14
    project_speed: bool = True

    def __post_init__(self):
        if self.cadence is not None and not self.cadence > 0:
            raise ValueError("`cadence` must be positive")
        if not self.c_step > 0:
            raise ValueError("`c_step` must be positive")
        if not 0 < self.n_floor_ratio < 1:
            raise ValueError("`n_floor_ratio` must lie in (0, 1)")


@dataclass(frozen=True)
class TrajectorySummary:
    min_n: Optional[float]
    max_abs_A: Optional[float]
    max_energy_drift: float
    max_speed_drift: float
    in_collar_fraction: float

    def to_dict(self) -> dict:
        return {
            "min_n": self.min_n,
            "max_abs_A": self.max_abs_A,
            "max_energy_drift": self.max_energy_drift,
            "max_speed_drift": self.max_speed_drift,
            "in_collar_fraction": self.in_collar_fraction,
        }


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Integrated trajectory. `samples` is an xarray Dataset indexed by time `t`
    with variables x, y, vx, vy, and after `diagnostics_pass` also n, s, p_n,
    p_s, A, H and `component` (index of the chart holding the sample, -1
    outside all collars)."""

    samples: xr.Dataset
    status: str
    H0: float
    params: ParticleParams
    message: str = ""
    index: int = 0
    summary: Optional[TrajectorySummary] = dc_field(default=None)

    @property
    def times(self) -> np.ndarray:
        return self.samples["t"].values

    @property
    def positions(self) -> np.ndarray:
        return np.column_stack([self.samples["x"].values, self.samples["y"].values])

    @property
    def velocities(self) -> np.ndarray:
        return np.column_stack([self.samples["vx"].values, self.samples["vy"].values])

    @property
    def has_diagnostics(self) -> bool:
        return "component" in self.samples

    def state(self, i: int) -> State:
        return State(float(self.times[i]), self.positions[i], self.velocities[i])

    def __len__(self) -> int:
        return self.samples.sizes["t"]


def _samples_dataset(times: list, states: list) -> xr.Dataset:
    Y = np.asarray(states, dtype=float).reshape(-1, 4)
    return xr.Dataset(
        {
            "x": ("t", Y[:, 0]),
            "y": ("t", Y[:, 1]),
            "vx": ("t", Y[:, 2]),
            "vy": ("t", Y[:, 3]),
        },
        coords={"t": np.asarray(times, dtype=float)},
    )


def _project_speed(Y: np.ndarray, speed: float) -> np.ndarray:
    """Rescale the velocity part of Y = (x, y, vx, vy) to `speed`."""
    current = np.hypot(Y[2], Y[3])
    if speed > 0 and current > 0:
        Y = Y.copy()
        Y[2:] *= speed / current
    return Y


def _boundary_distance(charts: Sequence[CollarChart], q: np.ndarray) -> Optional[tuple]:
    """Smallest normal distance over the collars containing `q`, with its chart."""
    best = None
    for chart in charts:
        coords = to_normal(chart, q)
        if coords is not None and (best is None or coords[0] < best[0]):
            best = (coords[0], chart)
    return best


def integrate(
    field: FieldSpec,
    params: ParticleParams,
    state0: State,
    T: float,
    rel_tol: float = 1e-10,
    abs_tol: float = 1e-12,
    options: Optional[IntegrationOptions] = None,
) -> Trajectory:
    """Integrate the equations of motion from `state0` over a duration `T` with
    the Dormand-Prince 5(4) pair of `scipy.integrate.RK45`, stepped manually.

    Inside a collar the step is capped at c_step * n / |v|. The integration
    stops with status "hit_floor" when n drops below n_floor_ratio * N on any
    chart (or the particle leaves the domain), and with "step_failure" when
    the step controller fails, the step underflows min_step_ratio * T or the
    field is not finite.

    :param field: Field specification
    :type field: FieldSpec
    :param params: Particle parameters
    :type params: ParticleParams
    :param state0: Initial state
    :type state0: State
    :param T: Duration, > 0
    :type T: float
    :param rel_tol: Relative tolerance, defaults to 1e-10
    :type rel_tol: float, optional
    :param abs_tol: Absolute tolerance, defaults to 1e-12
    :type abs_tol: float, optional
    :param options: Charts, output cadence and step settings, defaults to None
    :type options: IntegrationOptions, optional

    :returns: Trajectory
    :rtype: Trajectory
    """

    if not T > 0:
        raise ValueError("`T` must be positive")

    options = options or IntegrationOptions()
    qm = params.charge_to_mass
    t0 = state0.t
    t_end = t0 + T
    y0 = np.concatenate([state0.q, state0.v])
    H0 = state0.kinetic_energy(params)
    speed = float(np.linalg.norm(state0.v))
    min_step = options.min_step_ratio * T

    def fun(t, Y):
        B = eval_cartesian(field, Y[:2])
        return np.array([Y[2], Y[3], qm * B * Y[3], -qm * B * Y[2]])

    def project(Y) -> np.ndarray:
        return _project_speed(Y, speed) if options.project_speed else Y

    def step_cap(Y) -> float:
        near = _boundary_distance(options.charts, Y[:2])
        if near is None or speed == 0:
            return np.inf
        return options.c_step * near[0] / speed

    times, states = [t0], [y0]
    status, message = "completed", ""

    def finish() -> Trajectory:
        log.debug("Trajectory finished at t=%.6g with status %s", times[-1], status)
        return Trajectory(_samples_dataset(times, states), status, H0, params, message)

    try:
        solver = RK45(fun, t0, y0, t_end, max_step=step_cap(y0), rtol=rel_tol, atol=abs_tol)
    except FieldSingularError as exc:
        status, message = "step_failure", str(exc)
        return finish()

    cadence = options.cadence
    record_steps = options.record_steps or cadence is None
    k_next = 1

    while solver.status == "running":
        t_old = solver.t
        try:
            solver.step()
        except FieldSingularError as exc:
            status, message = "step_failure", str(exc)
            break

        if solver.status == "failed":
            status, message = "step_failure", "Step controller failed at t=%.9g" % float(solver.t)
            break

        if options.project_speed:
            # the next step starts from the projected state, so its FSAL
            # derivative is recomputed
            solver.y = project(solver.y)
            try:
                solver.f = fun(solver.t, solver.y)
            except FieldSingularError as exc:
                status, message = "step_failure", str(exc)
                break

        if cadence is not None:
            dense = solver.dense_output()
            while k_next * cadence + t0 < solver.t and k_next * cadence + t0 <= t_end:
                t_k = t0 + k_next * cadence
                if t_k > t_old:
                    times.append(t_k)
                    states.append(project(dense(t_k)))
                k_next += 1

        if record_steps or solver.status == "finished":
            times.append(solver.t)
            states.append(solver.y.copy())
        elif cadence is not None and np.isclose(t0 + k_next * cadence, solver.t, rtol=0, atol=1e-12 * T):
            times.append(solver.t)
            states.append(solver.y.copy())
            k_next += 1

        q = solver.y[:2]
        if options.domain is not None and not options.domain.contains(q):
            status, message = "hit_floor", "Particle left the domain at t=%.9g" % float(solver.t)
            break

        near = _boundary_distance(options.charts, q)
        if near is not None and near[0] < near[1].n_floor(options.n_floor_ratio):
            status = "hit_floor"
            message = "n=%.3e below floor on %r at t=%.9g" % (near[0], near[1].name, float(solver.t))
            break

        if solver.status == "running":
            if solver.h_abs < min_step and t_end - solver.t > min_step:
                status = "step_failure"
                message = "Step size %.3e underflowed at t=%.9g" % (solver.h_abs, float(solver.t))
                break
            solver.max_step = step_cap(solver.y)

    if times[-1] < solver.t:
        times.append(solver.t)
        states.append(solver.y.copy())

    return finish()


class CanonicalState(NamedTuple):
    n: float
    s: float
    p_n: float
    p_s: float
    A: float


def hamiltonian(
    params: ParticleParams, chart: CollarChart, n: float, s: float, p_n: float, p_s: float, A: float
) -> float:
    """Hamiltonian in normal coordinates,
    H = p_n^2 / 2m + (p_s - eA)^2 / (2m (1 - kappa n)^2).

    :returns: H
    :rtype: float
    """

    g = metric_factor(chart, n, s)
    m, e = params.mass, params.charge
    return p_n**2 / (2 * m) + (p_s - e * A) ** 2 / (2 * m * g**2)


def to_canonical(
    field: FieldSpec,
    params: ParticleParams,
    chart: CollarChart,
    state: State,
    decomposition: Optional[CollarDecomposition] = None,
) -> CanonicalState:
    """Returns the canonical coordinates of a state in a collar:
    p_n = m dn/dt and p_s = m (1 - kappa n)^2 ds/dt + e A(n, s).

    :param field: Field specification
    :type field: FieldSpec
    :param params: Particle parameters
    :type params: ParticleParams
    :param chart: Collar chart
    :type chart: CollarChart
    :param state: Cartesian state
    :type state: State
    :param decomposition: Collar decomposition passed on to `potential`,
        defaults to None
    :type decomposition: CollarDecomposition, optional

    :returns: (n, s, p_n, p_s, A)
    :rtype: CanonicalState
    """

    coords = to_normal(chart, state.q)
    if coords is None:
        raise NotInCollarError(f"q = {tuple(state.q)} is not in the collar of {chart.name!r}")
    n, s = coords

    curve = chart.curve
    g = 1.0 - curve.curvature(s) * n
    n_dot = float(np.dot(state.v, curve.normal(s)))
    s_dot = float(np.dot(state.v, curve.tangent(s))) / g

    A = potential(field, chart, n, s, decomposition=decomposition)
    p_n = params.mass * n_dot
    p_s = params.mass * g**2 * s_dot + params.charge * A
    return CanonicalState(n, s, p_n, p_s, A)


def ps_rate(
    field: FieldSpec,
    params: ParticleParams,
    chart: CollarChart,
    n: float,
    s: float,
    p_n: float,
    p_s: float,
    decomposition: Optional[CollarDecomposition] = None,
) -> float:
    """Returns dp_s/dt = -dH/ds,

        (p_s - eA) / (m g^2) * e dA/ds - (p_s - eA)^2 / (m g^3) * kappa'(s) n,

    with g = 1 - kappa(s) n. `p_n` does not enter.
    """

    _check_depth(chart, n)
    m, e = params.mass, params.charge
    A = potential(field, chart, n, s, decomposition=decomposition)
    w = p_s - e * A
    if w == 0:
        return 0.0

    curve = chart.curve
    g = 1.0 - curve.curvature(s) * n
    dA_ds = potential_s_derivative(field, chart, n, s)
    return w / (m * g**2) * e * dA_ds - w**2 / (m * g**3) * curve.curvature_derivative(s) * n


def diagnostics_pass(
    trajectory: Trajectory,
    charts: Sequence[CollarChart],
    field: FieldSpec,
    params: Optional[ParticleParams] = None,
    decompositions: Optional[Sequence[Optional[CollarDecomposition]]] = None,
) -> Trajectory:
    """Fill the per-sample diagnostics (n, s, p_n, p_s, A, H, component) of a
    trajectory and its summary. Samples outside all collars get NaN
    coordinates, component -1 and H = m|v|^2 / 2.

    :param trajectory: Integrated trajectory
    :type trajectory: Trajectory
    :param charts: Collar charts, checked in order
    :type charts: Sequence[CollarChart]
    :param field: Field specification
    :type field: FieldSpec
    :param params: Particle parameters, defaults to those of the trajectory
    :type params: ParticleParams, optional
    :param decompositions: Collar decomposition per chart, defaults to None
    :type decompositions: Sequence[CollarDecomposition], optional

    :returns: Trajectory with diagnostics and summary
    :rtype: Trajectory
    """

    params = params or trajectory.params
    decompositions = list(decompositions or [None] * len(charts))
    size = len(trajectory)

    columns = {name: np.full(size, np.nan) for name in ("n", "s", "p_n", "p_s", "A", "H")}
    component = np.full(size, -1, dtype=int)

    for i in range(size):
        state = trajectory.state(i)
        for j, chart in enumerate(charts):
            if to_normal(chart, state.q) is None:
                continue
            c = to_canonical(field, params, chart, state, decompositions[j])
            for name in ("n", "s", "p_n", "p_s", "A"):
                columns[name][i] = getattr(c, name)
            columns["H"][i] = hamiltonian(params, chart, c.n, c.s, c.p_n, c.p_s, c.A)
            component[i] = j
            break
        else:
            columns["H"][i] = state.kinetic_energy(params)

    samples = trajectory.samples.assign(
        {name: ("t", values) for name, values in columns.items()}
    ).assign(component=("t", component))

    inside = component >= 0
    speeds = np.linalg.norm(trajectory.velocities, axis=1)
    summary = TrajectorySummary(
        min_n=float(np.min(columns["n"][inside])) if inside.any() else None,
        max_abs_A=float(np.max(np.abs(columns["A"][inside]))) if inside.any() else None,
        max_energy_drift=relative_drift(columns["H"], trajectory.H0),
        max_speed_drift=relative_drift(speeds, speeds[0]) if size else 0.0,
        in_collar_fraction=float(inside.mean()) if size else 0.0,
    )
    return replace(trajectory, samples=samples, summary=summary)
