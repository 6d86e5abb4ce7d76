"""
This module contains the explicit confinement constants and their verification
along simulated trajectories:

    |A(q(t))| <= C0 + C1 t

for a trajectory inside one collar, and, for fields with a collar
decomposition B~ = M / n^alpha + f,

    n(t) >= (N^-(alpha-1) + (alpha-1) d(t))^(-1/(alpha-1)),   d(t) = D0 + D1 t,

with the limit N exp(-d(t)) at alpha = 1.
"""

import logging
import math
from dataclasses import dataclass, field as dc_field, replace
from typing import Optional

import numpy as np

from ._utils import optional_float
from .dynamics import ParticleParams, Trajectory
from .field import (
    CollarDecomposition,
    DecompositionError,
    FieldSpec,
    check_blowup_hypothesis,
    check_tangential_hypothesis,
    devt_comparison,
)
from .geometry import CollarChart

log = logging.getLogger(__name__)

TOL_MARGIN = 1e-6


def _check_inputs(epsilon: float, H0: float, charge: float, mass: float):
    if not 0 < epsilon < 1:
        raise ValueError("`epsilon` must lie in (0, 1)")
    if H0 < 0:
        raise ValueError("`H0` must be nonnegative")
    if charge == 0:
        raise ValueError("`charge` must be nonzero")
    if not mass > 0:
        raise ValueError("`mass` must be positive")


def proposition_constants(
    p_s0: float,
    H0: float,
    charge: float,
    mass: float,
    epsilon: float,
    D_C: float,
    K_prime: float,
    N: float,
) -> tuple:
    """Returns the constants (C0, C1) of the potential bound |A| <= C0 + C1 t:

        C0 = (|p_s0| + sqrt(2 m H0) (1 + eps)) / |e|
        C1 = sqrt(2 H0 / m) D_C / (1 - eps) + 2 H0 K' N / (|e| (1 - eps))

    :param p_s0: Canonical momentum p_s at the start of the segment
    :type p_s0: float
    :param H0: Energy
    :type H0: float
    :param charge: Charge e
    :type charge: float
    :param mass: Mass m
    :type mass: float
    :param epsilon: Collar safety ratio in (0, 1)
    :type epsilon: float
    :param D_C: Bound on sup_s int_0^N |dB~/ds| dn
    :type D_C: float
    :param K_prime: Bound on |kappa'|
    :type K_prime: float
    :param N: Collar width
    :type N: float

    :returns: (C0, C1)
    :rtype: tuple
    """

    _check_inputs(epsilon, H0, charge, mass)
    e = abs(charge)
    C0 = (abs(p_s0) + math.sqrt(2 * mass * H0) * (1 + epsilon)) / e
    C1 = math.sqrt(2 * H0 / mass) * D_C / (1 - epsilon) + 2 * H0 * K_prime * N / (
        e * (1 - epsilon)
    )
    return C0, C1


def theorem2_constants(
    p_s0: float,
    H0: float,
    charge: float,
    mass: float,
    epsilon: float,
    D_C: float,
    K_prime: float,
    N: float,
    M: float,
    C_f: float,
    conservative: bool = False,
) -> tuple:
    """Returns (D0, D1) of the distance bound, d(t) = D0 + D1 t:

        D0 = C_f / |M| + (|p_s0| + sqrt(2 m H0) (1 + eps)) / (|e| |M|)
        D1 = sqrt(2 H0 / m) D_C / (|M| (1 - eps)) + 2 H0 K' N / (|e| |M| (1 - eps))

    With `conservative`, the remainder term C_f / |M| becomes C_f N / |M|.
    """

    if M == 0:
        raise ValueError("`M` must be nonzero")
    C0, C1 = proposition_constants(p_s0, H0, charge, mass, epsilon, D_C, K_prime, N)
    remainder = C_f * N / abs(M) if conservative else C_f / abs(M)
    return remainder + C0 / abs(M), C1 / abs(M)


@dataclass(frozen=True)
class ConfinementConstants:
    """Inputs of the confinement bounds on one collar. The derived constants
    C0, C1, D0, D1 are recomputed from these on access."""

    K: float
    K_prime: float
    N: float
    epsilon: float
    D_C: float
    H0: float
    charge: float
    mass: float
    p_s0: float = 0.0
    M: Optional[float] = None
    alpha: Optional[float] = None
    C_f: Optional[float] = None

    def __post_init__(self):
        _check_inputs(self.epsilon, self.H0, self.charge, self.mass)
        if self.D_C < 0 or self.K < 0 or self.K_prime < 0:
            raise ValueError("`K`, `K_prime` and `D_C` must be nonnegative")
        if self.alpha is not None and self.alpha < 1:
            raise ValueError("`alpha` must be >= 1")
        if self.M is not None and self.M == 0:
            raise ValueError("`M` must be nonzero")

    @property
    def has_decomposition(self) -> bool:
        return self.M is not None and self.alpha is not None and self.C_f is not None

    @property
    def _proposition_inputs(self) -> tuple:
        return (
            self.p_s0, self.H0, self.charge, self.mass,
            self.epsilon, self.D_C, self.K_prime, self.N,
        )

    @property
    def C0(self) -> float:
        return proposition_constants(*self._proposition_inputs)[0]

    @property
    def C1(self) -> float:
        return proposition_constants(*self._proposition_inputs)[1]

    def theorem2(self, conservative: bool = False) -> tuple:
        if not self.has_decomposition:
            raise DecompositionError("Distance bound requires M, alpha and C_f")
        return theorem2_constants(
            *self._proposition_inputs, self.M, self.C_f, conservative=conservative
        )

    @property
    def D0(self) -> float:
        return self.theorem2()[0]

    @property
    def D1(self) -> float:
        return self.theorem2()[1]

    @property
    def D0_conservative(self) -> float:
        return self.theorem2(conservative=True)[0]

    def to_dict(self) -> dict:
        out = {
            "K": self.K, "K_prime": self.K_prime, "N": self.N,
            "epsilon": self.epsilon, "D_C": self.D_C, "H0": self.H0,
            "charge": self.charge, "mass": self.mass, "p_s0": self.p_s0,
            "C0": self.C0, "C1": self.C1,
        }
        if self.has_decomposition:
            out.update(
                M=self.M, alpha=self.alpha, C_f=self.C_f,
                D0=self.D0, D1=self.D1, D0_conservative=self.D0_conservative,
            )
        return out


def make_constants(
    chart: CollarChart,
    params: ParticleParams,
    H0: float,
    D_C: float,
    decomposition: Optional[CollarDecomposition] = None,
    p_s0: float = 0.0,
) -> ConfinementConstants:
    """ConfinementConstants from a chart, particle and optional decomposition."""

    kwargs = {}
    if decomposition is not None:
        kwargs = dict(M=decomposition.M, alpha=decomposition.alpha, C_f=decomposition.C_f)
    return ConfinementConstants(
        K=chart.K,
        K_prime=chart.K_prime,
        N=chart.width,
        epsilon=chart.epsilon,
        D_C=float(D_C),
        H0=float(H0),
        charge=params.charge,
        mass=params.mass,
        p_s0=float(p_s0),
        **kwargs,
    )


def distance_bound(N: float, alpha: float, d):
    """Returns (N^-(alpha-1) + (alpha-1) d)^(-1/(alpha-1)), written as
    N exp(-log1p((alpha-1) d N^(alpha-1)) / (alpha-1)) so that it tends to
    N exp(-d) as alpha -> 1.

    :param N: Collar width
    :type N: float
    :param alpha: Blow-up exponent, >= 1
    :type alpha: float
    :param d: d(T) = D0 + D1 T, >= 0
    :type d: float or np.ndarray

    :returns: Lower bound on n
    :rtype: float or np.ndarray
    """

    if alpha < 1:
        raise ValueError("`alpha` must be >= 1")
    d = np.asarray(d, dtype=float)
    if alpha == 1:
        out = N * np.exp(-d)
    else:
        a = alpha - 1
        out = N * np.exp(-np.log1p(a * d * N**a) / a)
    return float(out) if out.ndim == 0 else out


def theorem2_lower_bound(
    constants: ConfinementConstants, T, conservative: Optional[bool] = None
):
    """Returns the lower bound on the distance to the boundary after a time `T`
    spent in the collar.

    :param constants: Constants with a collar decomposition
    :type constants: ConfinementConstants
    :param T: Elapsed time, >= 0
    :type T: float or np.ndarray
    :param conservative: Use C_f N / |M| in D0, defaults to N > 1
    :type conservative: bool, optional

    :returns: Lower bound on n
    :rtype: float or np.ndarray
    """

    if np.any(np.asarray(T) < 0):
        raise ValueError("`T` must be nonnegative")
    if conservative is None:
        conservative = constants.N > 1
    D0, D1 = constants.theorem2(conservative=conservative)
    return distance_bound(constants.N, constants.alpha, D0 + D1 * np.asarray(T, dtype=float))


@dataclass(frozen=True, eq=False)
class BoundReport:
    """Per-sample margins of one bound along a trajectory. Margins are
    C0 + C1 t - |A| (potential) or n - bound (distance); `passed` holds iff
    every margin clears -tol * max(bound, 1) (potential) or n >= bound (1 - tol)
    (distance)."""

    kind: str
    component: int
    passed: bool
    times: np.ndarray = dc_field(repr=False)
    margins: np.ndarray = dc_field(repr=False)
    bound: np.ndarray = dc_field(repr=False)
    worst_margin: Optional[float] = None
    worst_time: Optional[float] = None
    segments: int = 0
    vacuous: bool = False
    note: str = ""
    bound_plain: Optional[np.ndarray] = dc_field(default=None, repr=False)
    bound_conservative: Optional[np.ndarray] = dc_field(default=None, repr=False)
    constants: list = dc_field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        out = {
            "kind": self.kind,
            "component": self.component,
            "passed": self.passed,
            "vacuous": self.vacuous,
            "segments": self.segments,
            "samples": int(self.times.size),
            "worst_margin": optional_float(self.worst_margin),
            "worst_time": optional_float(self.worst_time),
            "note": self.note,
            "constants": self.constants,
        }
        if self.bound_plain is not None and self.bound_plain.size:
            out["min_bound_plain"] = float(np.min(self.bound_plain))
            out["min_bound_conservative"] = float(np.min(self.bound_conservative))
        return out


def _segments(component: np.ndarray, index: int) -> list:
    """Contiguous runs [start, stop) of samples in collar `index`."""
    inside = np.concatenate([[False], component == index, [False]])
    edges = np.flatnonzero(np.diff(inside.astype(int)))
    return list(zip(edges[::2], edges[1::2]))


def _require_diagnostics(trajectory: Trajectory):
    if not trajectory.has_diagnostics:
        raise ValueError("Trajectory has no diagnostics; run `diagnostics_pass` first")


def _vacuous(kind: str, component: int) -> BoundReport:
    empty = np.array([])
    return BoundReport(
        kind, component, True, empty, empty, empty,
        vacuous=True, note="trajectory never enters the collar",
    )


def verify_potential_bound(
    trajectory: Trajectory,
    constants: ConfinementConstants,
    component: int = 0,
    tol_margin: float = TOL_MARGIN,
) -> BoundReport:
    """Check |A(t)| <= C0 + C1 t along every stay of the trajectory in collar
    `component`. At each entry p_s0 is taken from the entry sample and the
    clock restarts; H0 is the trajectory's energy.

    :param trajectory: Trajectory with diagnostics
    :type trajectory: Trajectory
    :param constants: Constants of the collar; p_s0 and H0 are replaced
    :type constants: ConfinementConstants
    :param component: Index of the collar, defaults to 0
    :type component: int, optional
    :param tol_margin: Relative margin tolerance, defaults to 1e-6
    :type tol_margin: float, optional

    :returns: Bound report
    :rtype: BoundReport
    """

    _require_diagnostics(trajectory)
    samples = trajectory.samples
    segments = _segments(samples["component"].values, component)
    if not segments:
        return _vacuous("potential", component)

    t_all = samples["t"].values
    A_all = samples["A"].values
    p_s_all = samples["p_s"].values

    times, margins, bounds, used = [], [], [], []
    for start, stop in segments:
        c = replace(constants, H0=trajectory.H0, p_s0=float(p_s_all[start]))
        tau = t_all[start:stop] - t_all[start]
        bound = c.C0 + c.C1 * tau
        times.append(t_all[start:stop])
        bounds.append(bound)
        margins.append(bound - np.abs(A_all[start:stop]))
        used.append({"t_entry": float(t_all[start]), "C0": c.C0, "C1": c.C1})

    times, margins, bounds = (np.concatenate(a) for a in (times, margins, bounds))
    ok = margins >= -tol_margin * np.maximum(bounds, 1.0)
    worst = int(np.argmin(margins))

    return BoundReport(
        "potential",
        component,
        bool(ok.all()),
        times,
        margins,
        bounds,
        worst_margin=float(margins[worst]),
        worst_time=float(times[worst]),
        segments=len(segments),
        constants=used,
    )


def verify_distance_bound(
    trajectory: Trajectory,
    constants: ConfinementConstants,
    component: int = 0,
    tol_margin: float = TOL_MARGIN,
    conservative: Optional[bool] = None,
    kind: str = "distance",
) -> BoundReport:
    """Check n(t) >= bound(t) (1 - tol) along every stay of the trajectory in
    collar `component`, restarting the clock and p_s0 at each entry. Both the
    bound with C_f / |M| and the conservative one with C_f N / |M| are
    reported; the check uses the conservative one when N > 1.

    :param trajectory: Trajectory with diagnostics
    :type trajectory: Trajectory
    :param constants: Constants with a collar decomposition
    :type constants: ConfinementConstants
    :param component: Index of the collar, defaults to 0
    :type component: int, optional
    :param tol_margin: Relative margin tolerance, defaults to 1e-6
    :type tol_margin: float, optional
    :param conservative: Override of the variant used for pass/fail, defaults
        to None
    :type conservative: bool, optional

    :returns: Bound report
    :rtype: BoundReport
    """

    if not constants.has_decomposition:
        raise DecompositionError(
            f"No collar decomposition (M, alpha, C_f) for component {component}"
        )
    _require_diagnostics(trajectory)

    samples = trajectory.samples
    segments = _segments(samples["component"].values, component)
    if not segments:
        return _vacuous(kind, component)

    if conservative is None:
        conservative = constants.N > 1

    t_all = samples["t"].values
    n_all = samples["n"].values
    p_s_all = samples["p_s"].values

    times, n_values, plain, safe, used = [], [], [], [], []
    for start, stop in segments:
        c = replace(constants, H0=trajectory.H0, p_s0=float(p_s_all[start]))
        tau = t_all[start:stop] - t_all[start]
        times.append(t_all[start:stop])
        n_values.append(n_all[start:stop])
        plain.append(np.atleast_1d(theorem2_lower_bound(c, tau, conservative=False)))
        safe.append(np.atleast_1d(theorem2_lower_bound(c, tau, conservative=True)))
        used.append(
            {"t_entry": float(t_all[start]), "D0": c.D0, "D1": c.D1,
             "D0_conservative": c.D0_conservative}
        )

    times, n_values, plain, safe = (np.concatenate(a) for a in (times, n_values, plain, safe))
    bound = safe if conservative else plain
    margins = n_values - bound
    ok = n_values >= bound * (1 - tol_margin)
    worst = int(np.argmin(margins))

    return BoundReport(
        kind,
        component,
        bool(ok.all()),
        times,
        margins,
        bound,
        worst_margin=float(margins[worst]),
        worst_time=float(times[worst]),
        segments=len(segments),
        note="conservative variant used" if conservative else "",
        bound_plain=plain,
        bound_conservative=safe,
        constants=used,
    )


def surrogate_distance_check(
    trajectory: Trajectory,
    constants: ConfinementConstants,
    component: int = 0,
    tol_margin: float = TOL_MARGIN,
) -> BoundReport:
    """Distance bound evaluated with the surrogate decomposition M = 1,
    alpha = 1, C_f = 0 for a collar whose field has no decomposition. A failing
    report shows that the trajectory gets closer to the boundary than any
    field of the quantitative form would allow."""

    surrogate = replace(constants, M=1.0, alpha=1.0, C_f=0.0)
    report = verify_distance_bound(
        trajectory, surrogate, component, tol_margin, conservative=False, kind="surrogate"
    )
    if not report.vacuous:
        note = (
            "min n below surrogate bound" if not report.passed
            else "min n above surrogate bound"
        )
        report = replace(report, note=note)
    return report


@dataclass(frozen=True)
class HypothesisReport:
    """Hypothesis checks of one collar, with the conclusion for the classical
    confinement theorem and the growth comparison |B| >= 1/n^2."""

    component: str
    blowup: object
    tangential: object
    devt: object

    @property
    def blowup_condition(self) -> str:
        return {"divergent": "holds", "integrable": "fails"}.get(
            self.blowup.verdict, "inconclusive"
        )

    @property
    def tangential_condition(self) -> str:
        return "holds" if self.tangential.satisfied else "violated"

    @property
    def confinement_theorem(self) -> str:
        if self.blowup_condition == "holds" and self.tangential_condition == "holds":
            return "satisfied"
        if self.blowup_condition == "inconclusive" and self.tangential_condition == "holds":
            return "inconclusive"
        return "not satisfied"

    @property
    def growth_comparison(self) -> str:
        return "meets" if self.devt.meets else "fails"

    def to_dict(self) -> dict:
        return {
            "component": self.component,
            "confinement_theorem": self.confinement_theorem,
            "blowup_condition": self.blowup_condition,
            "tangential_condition": self.tangential_condition,
            "growth_comparison": self.growth_comparison,
            "blowup": self.blowup.to_dict(),
            "tangential": self.tangential.to_dict(),
            "devt": self.devt.to_dict(),
        }


def hypothesis_report(field: FieldSpec, chart: CollarChart, **kwargs) -> HypothesisReport:
    """Run the blow-up, tangential and growth-comparison checks on one collar.

    Keyword arguments `blowup`, `tangential` and `devt` are forwarded as
    dictionaries to the respective checkers.

    :param field: Field specification
    :type field: FieldSpec
    :param chart: Collar chart
    :type chart: CollarChart

    :returns: Hypothesis report
    :rtype: HypothesisReport
    """

    return HypothesisReport(
        chart.name,
        check_blowup_hypothesis(field, chart, **kwargs.get("blowup", {})),
        check_tangential_hypothesis(field, chart, **kwargs.get("tangential", {})),
        devt_comparison(field, chart, **kwargs.get("devt", {})),
    )
