"""
This module contains the planar geometry used by `magconfine`: arc-length
parametrised boundary curves, the normal-coordinate (collar) chart

    x(n, s) = gamma(s) + n * nu(s),

its inverse, and the checks that make the chart valid.

The inward normal follows the convention gamma''(s) = kappa(s) nu(s) with nu
pointing into the domain, so the inner circle of an annulus has negative
curvature. Built-in curves are circles, parametrised counter-clockwise.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Literal, Optional, Sequence

import numpy as np
import shapely
from scipy.optimize import brentq, minimize_scalar

from ._utils import as_float_or_array, rotate90

log = logging.getLogger(__name__)

# Number of samples of kappa used to estimate K = sup|kappa| and K' = sup|kappa'|
CURVATURE_SAMPLES = 4096
# Coarse scan resolution of the nearest-point projection
PROJECTION_SAMPLES = 1024
# Normal segments tested pairwise for chart injectivity
INJECTIVITY_SAMPLES = 256


class ChartError(ValueError):
    """Point outside the collar chart, or collar chart failed validation."""


class NotInCollarError(ChartError):
    """State expected inside a collar lies outside it."""


@dataclass(frozen=True, eq=False)
class BoundaryCurve:
    """Arc-length parametrised closed curve with signed curvature.

    Callables accept a float or an array of arc-length positions `s` and are
    L-periodic. `point` and `tangent` return arrays with a trailing dimension of
    2. `inward` states on which side of the direction of travel the domain lies:
    the inward normal is J gamma' for "left" and -J gamma' for "right".
    """

    length: float
    point: Callable
    tangent: Callable
    curvature: Callable
    curvature_derivative: Callable
    inward: Literal["left", "right"] = "left"
    name: str = "boundary"
    center: Optional[tuple] = None
    radius: Optional[float] = None
    # exact (n, s) of a point, for curves with a closed-form inverse
    projector: Optional[Callable] = field(default=None, repr=False)

    def normal(self, s):
        """Inward unit normal nu(s)."""
        rotated = rotate90(self.tangent(s))
        return rotated if self.inward == "left" else -rotated

    @property
    def orientation(self) -> int:
        """Sign of det[nu, gamma'], i.e. of the chart Jacobian. -1 when the
        domain lies to the left of the direction of travel."""
        return -1 if self.inward == "left" else 1

    @property
    def is_circle(self) -> bool:
        return self.radius is not None and self.center is not None


@dataclass(frozen=True, eq=False)
class CollarChart:
    """Normal-coordinate chart of width N on one boundary component. Build with
    `make_chart`, which validates N against epsilon and the measured curvature
    bounds K, K'."""

    curve: BoundaryCurve
    width: float
    epsilon: float
    K: float
    K_prime: float

    @property
    def name(self) -> str:
        return self.curve.name

    def n_floor(self, ratio: float = 1e-6) -> float:
        return ratio * self.width


@dataclass(frozen=True, eq=False)
class Domain:
    """Bounded planar domain described by its named boundary components."""

    kind: str
    components: tuple
    center: tuple = (0.0, 0.0)
    radii: tuple = ()

    def component(self, name: str) -> BoundaryCurve:
        for curve in self.components:
            if curve.name == name:
                return curve
        raise KeyError(f"Domain has no boundary component named {name!r}")

    @property
    def component_names(self) -> tuple:
        return tuple(curve.name for curve in self.components)

    def contains(self, q) -> bool:
        """Exact membership test for the open domain."""
        q = np.asarray(q, dtype=float)
        r = float(np.hypot(q[0] - self.center[0], q[1] - self.center[1]))
        if self.kind == "disc":
            return r < self.radii[0]
        inner, outer = self.radii
        return inner < r < outer

    def describe(self) -> dict:
        if self.kind == "disc":
            return {"kind": "disc", "R": self.radii[0]}
        return {"kind": "annulus", "R1": self.radii[0], "R2": self.radii[1]}


def make_curve(
    length: float,
    point: Callable,
    tangent: Callable,
    curvature: Callable,
    curvature_derivative: Callable,
    inward: Literal["left", "right"] = "left",
    name: str = "boundary",
) -> BoundaryCurve:
    """Wrap user-supplied callables as a BoundaryCurve. Points are then inverted
    by nearest-point projection rather than in closed form.

    :param length: Total arc length L of the closed curve
    :type length: float
    :param point: gamma(s), arc-length parametrised
    :type point: Callable
    :param tangent: gamma'(s), unit length
    :type tangent: Callable
    :param curvature: Signed curvature kappa(s) with gamma'' = kappa nu
    :type curvature: Callable
    :param curvature_derivative: kappa'(s)
    :type curvature_derivative: Callable
    :param inward: Side of the direction of travel on which the domain lies,
        defaults to "left"
    :type inward: str, optional
    :param name: Component name, defaults to "boundary"
    :type name: str, optional

    :returns: Boundary curve
    :rtype: BoundaryCurve
    """

    if length <= 0:
        raise ValueError("`length` must be positive")
    if inward not in ("left", "right"):
        raise ValueError("`inward` must be 'left' or 'right'")

    return BoundaryCurve(
        length=float(length),
        point=point,
        tangent=tangent,
        curvature=curvature,
        curvature_derivative=curvature_derivative,
        inward=inward,
        name=name,
    )


def make_circle(
    center: Sequence[float],
    radius: float,
    orientation: Literal["toward_center", "away_from_center"] = "toward_center",
    name: Optional[str] = None,
) -> BoundaryCurve:
    """Returns a circle as an arc-length parametrised boundary curve,
    gamma(s) = c + R (cos(s/R), sin(s/R)). With the inward normal toward the
    centre (outer boundary of a disc or annulus) kappa = 1/R; with the inward
    normal away from the centre (inner boundary of an annulus) kappa = -1/R.

    :param center: Centre of the circle
    :type center: Sequence[float]
    :param radius: Radius R > 0
    :type radius: float
    :param orientation: Direction of the inward normal, either "toward_center"
        or "away_from_center", defaults to "toward_center"
    :type orientation: str, optional
    :param name: Component name, defaults to "outer" / "inner" following
        `orientation`
    :type name: str, optional

    :returns: Boundary curve
    :rtype: BoundaryCurve
    """

    if not radius > 0:
        raise ValueError("`radius` must be positive")
    if orientation not in ("toward_center", "away_from_center"):
        raise ValueError("`orientation` must be 'toward_center' or 'away_from_center'")

    cx, cy = (float(c) for c in center)
    R = float(radius)
    toward = orientation == "toward_center"
    kappa = 1.0 / R if toward else -1.0 / R

    def point(s):
        theta = np.asarray(s, dtype=float) / R
        return np.stack([cx + R * np.cos(theta), cy + R * np.sin(theta)], axis=-1)

    def tangent(s):
        theta = np.asarray(s, dtype=float) / R
        return np.stack([-np.sin(theta), np.cos(theta)], axis=-1)

    def curvature(s):
        return as_float_or_array(np.full(np.shape(s), kappa))

    def curvature_derivative(s):
        return as_float_or_array(np.zeros(np.shape(s)))

    def projector(q):
        dx, dy = float(q[0]) - cx, float(q[1]) - cy
        rho = float(np.hypot(dx, dy))
        s = (R * np.arctan2(dy, dx)) % (2 * np.pi * R)
        n = R - rho if toward else rho - R
        return n, float(s)

    return BoundaryCurve(
        length=2 * np.pi * R,
        point=point,
        tangent=tangent,
        curvature=curvature,
        curvature_derivative=curvature_derivative,
        inward="left" if toward else "right",
        name=name or ("outer" if toward else "inner"),
        center=(cx, cy),
        radius=R,
        projector=projector,
    )


def make_disc(radius: float, center: Sequence[float] = (0.0, 0.0)) -> Domain:
    """Disc of radius R, one boundary component named "outer"."""

    outer = make_circle(center, radius, "toward_center", name="outer")
    return Domain("disc", (outer,), tuple(float(c) for c in center), (float(radius),))


def make_annulus(
    inner_radius: float, outer_radius: float, center: Sequence[float] = (0.0, 0.0)
) -> Domain:
    """Annulus R1 < |q - c| < R2, components "outer" and "inner"."""

    if not 0 < inner_radius < outer_radius:
        raise ValueError("Annulus radii must satisfy 0 < R1 < R2")

    outer = make_circle(center, outer_radius, "toward_center", name="outer")
    inner = make_circle(center, inner_radius, "away_from_center", name="inner")
    return Domain(
        "annulus",
        (outer, inner),
        tuple(float(c) for c in center),
        (float(inner_radius), float(outer_radius)),
    )


def curvature_bounds(curve: BoundaryCurve, samples: int = CURVATURE_SAMPLES) -> tuple:
    """Estimate K = sup|kappa| and K' = sup|kappa'| by dense sampling.

    :param curve: Boundary curve
    :type curve: BoundaryCurve
    :param samples: Number of uniform samples of s, defaults to 4096
    :type samples: int, optional

    :returns: (K, K')
    :rtype: tuple
    """

    s = np.linspace(0.0, curve.length, samples, endpoint=False)
    K = float(np.max(np.abs(curve.curvature(s))))
    K_prime = float(np.max(np.abs(curve.curvature_derivative(s))))
    return K, K_prime


def _normal_segments_intersect(curve: BoundaryCurve, width: float, samples: int) -> bool:
    s = np.linspace(0.0, curve.length, samples, endpoint=False)
    start = curve.point(s)
    end = start + width * curve.normal(s)
    segments = shapely.linestrings(np.stack([start, end], axis=1))
    tree = shapely.STRtree(segments)
    left, right = tree.query(segments, predicate="intersects")
    return bool(np.any(left != right))


def validate_collar(curve: BoundaryCurve, width: float, epsilon: float) -> list:
    """Check that a collar of width N is admissible: N < epsilon/K, and the chart
    is injective (no two sampled normal segments of length N intersect).

    :param curve: Boundary curve
    :type curve: BoundaryCurve
    :param width: Collar width N
    :type width: float
    :param epsilon: Safety ratio, 0 < epsilon < 1
    :type epsilon: float

    :returns: Descriptions of the violated conditions; empty when the collar is
        valid
    :rtype: list
    """

    if not 0 < epsilon < 1:
        raise ValueError("`epsilon` must lie in (0, 1)")

    violations = []
    if not width > 0:
        violations.append(f"N must be positive (got {width!r})")
        return violations

    K, _ = curvature_bounds(curve)
    if K * width >= epsilon:
        violations.append(f"N >= epsilon/K ({width:.6g} >= {epsilon / K:.6g})")

    if _normal_segments_intersect(curve, width, INJECTIVITY_SAMPLES):
        violations.append(
            "chart not injective: normal segments of length N intersect"
        )

    return violations


def make_chart(
    curve: BoundaryCurve,
    width: Optional[float] = None,
    epsilon: float = 0.5,
) -> CollarChart:
    """Returns a validated collar chart on `curve`. The width defaults to, and is
    clipped at, 0.99 * epsilon / K.

    :param curve: Boundary curve
    :type curve: BoundaryCurve
    :param width: Requested collar width N, defaults to None
    :type width: float, optional
    :param epsilon: Safety ratio in (0, 1), defaults to 0.5
    :type epsilon: float, optional

    :returns: Collar chart
    :rtype: CollarChart
    """

    if not 0 < epsilon < 1:
        raise ValueError("`epsilon` must lie in (0, 1)")

    K, K_prime = curvature_bounds(curve)
    max_width = 0.99 * epsilon / K if K > 0 else np.inf

    if width is None:
        width = max_width
    elif not width > 0:
        raise ValueError("`width` must be positive")
    elif width > max_width:
        log.warning(
            "Collar width %.6g on %r exceeds 0.99*epsilon/K; clipped to %.6g",
            width,
            curve.name,
            max_width,
        )
        width = max_width

    if not np.isfinite(width):
        raise ValueError("`width` must be given for curves with zero curvature")

    violations = validate_collar(curve, width, epsilon)
    if violations:
        raise ChartError(f"Invalid collar on {curve.name!r}: " + "; ".join(violations))

    return CollarChart(curve, float(width), float(epsilon), K, K_prime)


def _check_depth(chart: CollarChart, n) -> None:
    n = np.asarray(n, dtype=float)
    if np.any(n <= 0) or np.any(n >= chart.width):
        raise ChartError(
            f"Normal coordinate n outside (0, N={chart.width:.6g}) on {chart.name!r}"
        )


def from_normal(chart: CollarChart, n, s) -> np.ndarray:
    """Map normal coordinates (n, s) to the plane, x = gamma(s) + n nu(s).

    :param chart: Collar chart
    :type chart: CollarChart
    :param n: Distance to the boundary, 0 < n < N
    :type n: float or np.ndarray
    :param s: Arc-length position
    :type s: float or np.ndarray

    :returns: Point(s) with trailing dimension 2
    :rtype: np.ndarray
    """

    _check_depth(chart, n)
    n = np.asarray(n, dtype=float)[..., None]
    return chart.curve.point(s) + n * chart.curve.normal(s)


def _nearest_point(curve: BoundaryCurve, q: np.ndarray) -> tuple:
    L = curve.length
    grid = np.linspace(0.0, L, PROJECTION_SAMPLES, endpoint=False)
    d2 = np.sum((q - curve.point(grid)) ** 2, axis=-1)
    i = int(np.argmin(d2))
    h = L / PROJECTION_SAMPLES
    a, b = grid[i] - h, grid[i] + h

    # d/ds |q - gamma|^2 = -2 <q - gamma, gamma'>, which changes sign at the minimum
    def slope(s):
        return float(np.dot(q - curve.point(s), curve.tangent(s)))

    if slope(a) * slope(b) < 0:
        s = brentq(slope, a, b, xtol=1e-12, rtol=4 * np.finfo(float).eps)
    else:
        res = minimize_scalar(
            lambda s: float(np.sum((q - curve.point(s)) ** 2)),
            bounds=(a, b),
            method="bounded",
            options={"xatol": 1e-12},
        )
        s = float(res.x)

    n = float(np.dot(q - curve.point(s), curve.normal(s)))
    return n, s % L


def to_normal(chart: CollarChart, q) -> Optional[tuple]:
    """Inverse of the collar chart. Returns the normal coordinates (n, s) of `q`
    when it lies in the open collar, where n is the distance from `q` to the
    curve, and None otherwise.

    :param chart: Collar chart
    :type chart: CollarChart
    :param q: Point in the plane
    :type q: Sequence[float]

    :returns: (n, s) with s in [0, L), or None if `q` is not in the collar
    :rtype: tuple or None
    """

    q = np.asarray(q, dtype=float)
    curve = chart.curve
    if curve.projector is not None:
        n, s = curve.projector(q)
    else:
        n, s = _nearest_point(curve, q)

    if not 0 < n < chart.width:
        return None
    return float(n), float(s)


def metric_factor(chart: CollarChart, n, s):
    """Tangential length distortion 1 - kappa(s) n of the chart; lies in
    (1 - epsilon, 1 + epsilon) on a valid collar.

    :param chart: Collar chart
    :type chart: CollarChart
    :param n: Distance to the boundary, 0 < n < N
    :type n: float or np.ndarray
    :param s: Arc-length position
    :type s: float or np.ndarray

    :returns: Metric factor
    :rtype: float or np.ndarray
    """

    _check_depth(chart, n)
    return as_float_or_array(1.0 - chart.curve.curvature(s) * np.asarray(n, dtype=float))


def jacobian(chart: CollarChart, n, s):
    """Signed Jacobian determinant of the chart, sigma * (1 - kappa n) with
    sigma = det[nu, gamma']. Negative on the outer boundary of a disc, matching
    dx^dy = (n - 1) dn^ds on the unit disc."""

    return chart.curve.orientation * metric_factor(chart, n, s)


def collars_overlap(domain: Domain, charts: Sequence[CollarChart]) -> bool:
    """True if the collars of an annulus reach each other."""

    if domain.kind != "annulus" or len(charts) < 2:
        return False
    inner, outer = domain.radii
    return sum(chart.width for chart in charts) >= outer - inner
