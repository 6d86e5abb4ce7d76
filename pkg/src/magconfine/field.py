"""
This module contains the magnetic field representations used by `magconfine`:
the cartesian scalar B(x, y), its density in collar coordinates

    B~(n, s) = B(x(n, s)) * J(n, s),   J = sigma * (1 - kappa(s) n),

the gauge potential A(n, s) = -int_n^N B~(m, s) dm, the decomposition
B~ = M / n^alpha + f(n, s) of fields of the quantitative confinement form, and
numerical checkers for the blow-up and tangential hypotheses.

Fields built from expressions carry their `sympy` form. On circular charts the
collar quantities are then obtained by exact substitution x = x(n, s), so that
nothing cancels catastrophically as n -> 0; other fields are evaluated through
the chart numerically.
"""

import logging
import math
from dataclasses import dataclass, field as dc_field
from functools import lru_cache
from typing import Callable, Mapping, Optional

import numpy as np
import sympy as sp
import xarray as xr

from ._expression import ExpressionError, exact_number, parse_expression, r, x, y
from ._utils import (
    QuadratureError,
    as_float_or_array,
    broadcast_callable,
    decade_grid,
    halving_grid,
    integrate,
)
from .geometry import CollarChart, _check_depth

log = logging.getLogger(__name__)

n_sym = sp.Symbol("n", positive=True)
s_sym = sp.Symbol("s", real=True)

# Remainders are sampled on this (n, s) grid to measure or check C_f
_REMAINDER_GRID = (257, 512)


class FieldSingularError(ArithmeticError):
    """The field is not finite at the requested point."""


class DecompositionError(ValueError):
    """Collar decomposition missing or inconsistent with the field."""


@dataclass(frozen=True)
class SingularTerm:
    """Template term c * (R - r)^-a (side "outer") or c * (r - R)^-a (side
    "inner") of an expression field."""

    radius: float
    side: str
    coefficient: float
    exponent: float
    expr: sp.Expr = dc_field(repr=False)


@dataclass(frozen=True, eq=False)
class FieldSpec:
    """Magnetic field B(x, y) dx^dy on a planar domain.

    `function` and `gradient` are vectorised over numpy arrays, `scalar` is a
    fast path for single points. `symbolic` holds the parsed expression in the
    symbols x, y, r for fields built with `build_field`.
    """

    function: Callable
    scalar: Callable
    gradient: Optional[Callable] = None
    expression: Optional[str] = None
    symbolic: Optional[sp.Expr] = dc_field(default=None, repr=False)
    singular_terms: tuple = ()


@dataclass(frozen=True, eq=False)
class CollarDecomposition:
    """B~(n, s) = M / n^alpha + f(n, s) with |f| <= C_f on one collar."""

    M: float
    alpha: float
    C_f: float
    remainder: Callable = dc_field(repr=False)
    source: str = "declared"

    def leading(self, n):
        return self.M * np.asarray(n, dtype=float) ** -self.alpha

    def to_dict(self) -> dict:
        return {"M": self.M, "alpha": self.alpha, "C_f": self.C_f, "source": self.source}


def _lambdify_xy(expr: sp.Expr, modules: str = "numpy") -> Callable:
    return sp.lambdify((x, y), expr, modules=modules)


def _singular_terms(raw: sp.Expr) -> tuple:
    terms = []
    for term in sp.Add.make_args(raw):
        coeff, dep = term.as_independent(x, y, r, as_Add=False)
        if not (isinstance(dep, sp.Pow) and dep.exp.is_number and dep.exp < 0):
            continue
        base = dep.base
        if base.free_symbols != {r}:
            continue
        poly = sp.Poly(base, r)
        if poly.degree() != 1:
            continue
        a1, a0 = poly.all_coeffs()
        radius = -a0 / a1
        if not radius > 0:
            continue
        a = -dep.exp
        if a1 < 0:
            side, c = "outer", coeff * (-a1) ** (-a)
        else:
            side, c = "inner", coeff * a1 ** (-a)
        terms.append(
            SingularTerm(float(radius), side, float(c), float(a), expr=term)
        )
    return tuple(terms)


def build_field(
    expression: str, parameters: Optional[Mapping[str, float]] = None
) -> FieldSpec:
    """Returns a FieldSpec from an expression over x, y, r (see
    `magconfine._expression` for the grammar). Partial derivatives are derived
    symbolically, and template terms M/(R-r)^a and M/(r-R)^a are recorded so
    that collar decompositions can be derived on matching circles.

    :param expression: Field expression, e.g. "1/(1-r) + 7*y + 5*x^2"
    :type expression: str
    :param parameters: Named constants used in the expression, defaults to None
    :type parameters: Mapping[str, float], optional

    :returns: Field specification
    :rtype: FieldSpec
    """

    raw = parse_expression(expression, parameters)
    cartesian = raw.subs(r, sp.sqrt(x**2 + y**2))

    dBdx = broadcast_callable(_lambdify_xy(sp.diff(cartesian, x)))
    dBdy = broadcast_callable(_lambdify_xy(sp.diff(cartesian, y)))

    def gradient(X, Y):
        return dBdx(X, Y), dBdy(X, Y)

    return FieldSpec(
        function=broadcast_callable(_lambdify_xy(cartesian)),
        scalar=_lambdify_xy(cartesian, modules="math"),
        gradient=gradient,
        expression=expression,
        symbolic=raw,
        singular_terms=_singular_terms(raw),
    )


def field_from_function(
    function: Callable, gradient: Optional[Callable] = None, name: Optional[str] = None
) -> FieldSpec:
    """Returns a FieldSpec from a vectorised python callable B(x, y), with an
    optional gradient (x, y) -> (dB/dx, dB/dy). Collar quantities of such fields
    are computed numerically through the chart."""

    def scalar(X, Y):
        return float(function(X, Y))

    return FieldSpec(function=function, scalar=scalar, gradient=gradient, expression=name)


def eval_cartesian(field: FieldSpec, q) -> float:
    """Evaluate B at a point.

    :param field: Field specification
    :type field: FieldSpec
    :param q: Point (x, y)
    :type q: Sequence[float]

    :returns: B(x, y)
    :rtype: float
    """

    try:
        value = field.scalar(float(q[0]), float(q[1]))
    except (ZeroDivisionError, ValueError, OverflowError) as exc:
        raise FieldSingularError(f"Field singular at q = ({q[0]!r}, {q[1]!r}): {exc}") from None
    if isinstance(value, complex) or not math.isfinite(value):
        raise FieldSingularError(f"Field not finite at q = ({q[0]!r}, {q[1]!r})")
    return float(value)


def _collar_substitution(chart: CollarChart) -> dict:
    curve = chart.curve
    R = exact_number(curve.radius)
    cx, cy = (exact_number(c) for c in curve.center)
    theta = s_sym / R
    rho = R - n_sym if curve.inward == "left" else R + n_sym
    X = cx + rho * sp.cos(theta)
    Y = cy + rho * sp.sin(theta)
    radius = rho if (cx == 0 and cy == 0) else sp.sqrt(X**2 + Y**2)
    return {x: X, y: Y, r: radius}


def _curvature_symbol(chart: CollarChart) -> sp.Expr:
    R = exact_number(chart.curve.radius)
    return 1 / R if chart.curve.inward == "left" else -1 / R


class CollarView:
    """Evaluators of a field in the collar coordinates of one chart:
    `cartesian(n, s)` = B(x(n, s)), `density(n, s)` = B~(n, s) and
    `density_ds(n, s)` = dB~/ds."""

    def __init__(self, field: FieldSpec, chart: CollarChart):
        self.field = field
        self.chart = chart
        self.symbolic_density = None
        self.substitution = None

        if field.symbolic is not None and chart.curve.is_circle:
            self._init_symbolic()
        else:
            self._init_numeric()

    def _lambdify(self, expr: sp.Expr) -> Callable:
        return broadcast_callable(sp.lambdify((n_sym, s_sym), expr, modules="numpy"))

    def _init_symbolic(self):
        chart = self.chart
        self.substitution = _collar_substitution(chart)
        B_ns = self.field.symbolic.subs(self.substitution, simultaneous=True)
        kappa = _curvature_symbol(chart)
        density = chart.curve.orientation * (1 - kappa * n_sym) * B_ns

        self.symbolic_density = density
        self.cartesian = self._lambdify(B_ns)
        self.density = self._lambdify(density)
        self.density_ds = self._lambdify(sp.diff(density, s_sym))

    def _init_numeric(self):
        chart, field = self.chart, self.field
        curve = chart.curve

        def position(n, s):
            n = np.asarray(n, dtype=float)
            return curve.point(s) + n[..., None] * curve.normal(s)

        def cartesian(n, s):
            q = position(n, s)
            return as_float_or_array(field.function(q[..., 0], q[..., 1]))

        def density(n, s):
            n = np.asarray(n, dtype=float)
            factor = 1.0 - curve.curvature(s) * n
            return as_float_or_array(curve.orientation * factor * cartesian(n, s))

        if field.gradient is not None:

            def density_ds(n, s):
                n = np.asarray(n, dtype=float)
                q = position(n, s)
                gx, gy = field.gradient(q[..., 0], q[..., 1])
                factor = 1.0 - curve.curvature(s) * n
                tangent = curve.tangent(s)
                along = np.asarray(gx) * tangent[..., 0] + np.asarray(gy) * tangent[..., 1]
                value = (
                    -curve.curvature_derivative(s) * n * cartesian(n, s)
                    + factor**2 * along
                )
                return as_float_or_array(curve.orientation * value)

        else:
            h = 1e-5 * curve.length

            def density_ds(n, s):
                s = np.asarray(s, dtype=float)
                return as_float_or_array((density(n, s + h) - density(n, s - h)) / (2 * h))

        self.cartesian = cartesian
        self.density = density
        self.density_ds = density_ds


@lru_cache(maxsize=64)
def collar_view(field: FieldSpec, chart: CollarChart) -> CollarView:
    """Cached CollarView of `field` on `chart`."""
    return CollarView(field, chart)


def eval_collar_density(field: FieldSpec, chart: CollarChart, n, s):
    """Returns the signed collar density B~(n, s) = B(x(n, s)) J(n, s), with
    J the signed Jacobian of the chart (negative on the outer boundary of a
    disc). |J| is the metric factor 1 - kappa n.

    :param field: Field specification
    :type field: FieldSpec
    :param chart: Collar chart
    :type chart: CollarChart
    :param n: Distance to the boundary, 0 < n < N
    :type n: float or np.ndarray
    :param s: Arc-length position
    :type s: float or np.ndarray

    :returns: B~(n, s)
    :rtype: float or np.ndarray
    """

    _check_depth(chart, n)
    return collar_view(field, chart).density(n, s)


def eval_collar_field(field: FieldSpec, chart: CollarChart, n, s):
    """Returns the cartesian field value B(x(n, s)) at collar coordinates."""

    _check_depth(chart, n)
    return collar_view(field, chart).cartesian(n, s)


def power_integral(n: float, N: float, alpha: float) -> float:
    """Closed form of int_n^N m^-alpha dm."""

    if alpha == 1:
        return math.log(N / n)
    return (n ** (1 - alpha) - N ** (1 - alpha)) / (alpha - 1)


def potential(
    field: FieldSpec,
    chart: CollarChart,
    n: float,
    s: float,
    decomposition: Optional[CollarDecomposition] = None,
) -> float:
    """Returns the gauge potential A(n, s) = -int_n^N B~(m, s) dm, so that
    dA/dn = B~. With a collar decomposition the singular part is integrated in
    closed form and only the bounded remainder goes through quadrature.

    :param field: Field specification
    :type field: FieldSpec
    :param chart: Collar chart
    :type chart: CollarChart
    :param n: Distance to the boundary, 0 < n < N
    :type n: float
    :param s: Arc-length position
    :type s: float
    :param decomposition: Collar decomposition of the field on this chart,
        defaults to None
    :type decomposition: CollarDecomposition, optional

    :returns: A(n, s)
    :rtype: float
    """

    _check_depth(chart, n)
    N = chart.width

    if decomposition is not None:
        singular = decomposition.M * power_integral(n, N, decomposition.alpha)
        remainder = integrate(lambda m: decomposition.remainder(m, s), n, N)
        return -(singular + remainder)

    view = collar_view(field, chart)
    return -integrate(lambda m: view.density(m, s), n, N)


def potential_s_derivative(field: FieldSpec, chart: CollarChart, n: float, s: float) -> float:
    """Returns dA/ds(n, s) = -int_n^N dB~/ds(m, s) dm. The s-derivative is
    analytic for expression fields and fields with a gradient, and a central
    difference (step 1e-5 L) otherwise."""

    _check_depth(chart, n)
    view = collar_view(field, chart)
    return -integrate(lambda m: view.density_ds(m, s), n, chart.width)


def _sample_remainder(remainder: Callable, chart: CollarChart, include_boundary: bool):
    n_count, s_count = _REMAINDER_GRID
    start = 0.0 if include_boundary else chart.width / n_count
    n = np.linspace(start, chart.width, n_count)
    s = np.linspace(0.0, chart.curve.length, s_count, endpoint=False)
    Nn, S = np.meshgrid(n, s, indexing="ij")
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        values = np.asarray(remainder(Nn, S), dtype=float)
    return values


def _template_decomposition(field: FieldSpec, chart: CollarChart) -> Optional[CollarDecomposition]:
    curve = chart.curve
    side = "outer" if curve.inward == "left" else "inner"
    if curve.center != (0.0, 0.0):
        return None

    matches = [
        term
        for term in field.singular_terms
        if term.side == side and math.isclose(term.radius, curve.radius, rel_tol=1e-12)
    ]
    if not matches:
        return None
    if len(matches) > 1:
        log.warning(
            "Several template terms blow up on %r; no decomposition derived", curve.name
        )
        return None

    term = matches[0]
    if term.exponent != 1:
        log.warning(
            "Template exponent %g on %r leaves an unbounded remainder on a curved "
            "boundary; declare M, alpha and C_f to use the quantitative bound",
            term.exponent,
            curve.name,
        )
        return None

    view = collar_view(field, chart)
    sigma = curve.orientation
    kappa = _curvature_symbol(chart)
    # exact c with term = c / |R - r|
    coefficient, dependent = term.expr.as_independent(x, y, r, as_Add=False)
    c = coefficient / abs(sp.Poly(dependent.base, r).all_coeffs()[0])

    rest = (field.symbolic - term.expr).subs(view.substitution, simultaneous=True)
    f_expr = sigma * (1 - kappa * n_sym) * rest - sigma * c * kappa
    remainder = broadcast_callable(sp.lambdify((n_sym, s_sym), f_expr, modules="numpy"))

    values = _sample_remainder(remainder, chart, include_boundary=True)
    if not np.all(np.isfinite(values)):
        log.warning("Template remainder on %r is not bounded; no decomposition", curve.name)
        return None

    return CollarDecomposition(
        M=float(sigma * c),
        alpha=1.0,
        C_f=float(np.max(np.abs(values))),
        remainder=remainder,
        source="template",
    )


def _declared_decomposition(
    field: FieldSpec, chart: CollarChart, M: float, alpha: float, C_f: Optional[float]
) -> CollarDecomposition:
    if M == 0:
        raise DecompositionError("Declared M must be nonzero")
    if alpha < 1:
        raise DecompositionError("Declared alpha must be >= 1")

    view = collar_view(field, chart)
    if view.symbolic_density is not None:
        f_expr = sp.cancel(
            sp.together(view.symbolic_density - exact_number(M) * n_sym ** (-exact_number(alpha)))
        )
        remainder = broadcast_callable(sp.lambdify((n_sym, s_sym), f_expr, modules="numpy"))
        include_boundary = True
    else:

        def remainder(n, s):
            return as_float_or_array(view.density(n, s) - M * np.asarray(n, dtype=float) ** -alpha)

        include_boundary = False

    values = _sample_remainder(remainder, chart, include_boundary=bool(include_boundary))
    if not np.all(np.isfinite(values)):
        raise DecompositionError(
            f"Remainder B~ - M/n^alpha is not bounded on {chart.name!r} "
            f"for M={M!r}, alpha={alpha!r}"
        )
    sampled = float(np.max(np.abs(values)))

    if C_f is None:
        C_f = sampled
    elif sampled > C_f * (1 + 1e-9) + 1e-12:
        raise DecompositionError(
            f"Declared C_f={C_f!r} on {chart.name!r} is below the sampled "
            f"sup|f| = {sampled!r}"
        )

    return CollarDecomposition(
        M=float(M), alpha=float(alpha), C_f=float(C_f), remainder=remainder, source="declared"
    )


def collar_decomposition(
    field: FieldSpec,
    chart: CollarChart,
    M: Optional[float] = None,
    alpha: Optional[float] = None,
    C_f: Optional[float] = None,
) -> Optional[CollarDecomposition]:
    """Returns the decomposition B~ = M/n^alpha + f of the field on a collar, or
    None when none is available. With declared `M` and `alpha` the remainder is
    f = B~ - M/n^alpha, checked against the declared `C_f` (or measured) by
    dense sampling. Without them, template terms c/(R - r) recorded by
    `build_field` give M = sigma c, alpha = 1 and a closed-form remainder.

    :param field: Field specification
    :type field: FieldSpec
    :param chart: Collar chart
    :type chart: CollarChart
    :param M: Declared leading coefficient, defaults to None
    :type M: float, optional
    :param alpha: Declared blow-up exponent (>= 1), defaults to None
    :type alpha: float, optional
    :param C_f: Declared bound on |f|, defaults to None
    :type C_f: float, optional

    :returns: Collar decomposition or None
    :rtype: CollarDecomposition
    """

    if (M is None) != (alpha is None):
        raise DecompositionError("`M` and `alpha` must be declared together")

    if M is not None:
        return _declared_decomposition(field, chart, M, alpha, C_f)

    if field.symbolic is None or not chart.curve.is_circle:
        return None

    decomposition = _template_decomposition(field, chart)
    if decomposition is not None and C_f is not None:
        if decomposition.C_f > C_f * (1 + 1e-9) + 1e-12:
            raise DecompositionError(
                f"Declared C_f={C_f!r} on {chart.name!r} is below the sampled "
                f"sup|f| = {decomposition.C_f!r}"
            )
        decomposition = CollarDecomposition(
            decomposition.M, decomposition.alpha, float(C_f), decomposition.remainder, "template"
        )
    return decomposition


@dataclass(frozen=True)
class BlowupVerdict:
    """Outcome of `check_blowup_hypothesis`. `table` holds
    I(n_k, s_j) = |int_{n_k}^N B~(m, s_j) dm|, `increments` the growth of
    min_j I per grid level."""

    verdict: str
    table: xr.DataArray
    increments: np.ndarray
    limit: Optional[float] = None
    levels: int = 0

    def to_dict(self) -> dict:
        g = self.table.min("s").values
        return {
            "verdict": self.verdict,
            "levels": self.levels,
            "limit": self.limit,
            "evidence": [
                {
                    "k": int(k),
                    "n": float(n),
                    "min_I": float(gk),
                    "increment": float(self.increments[k - 1]) if k > 0 else None,
                }
                for k, n, gk in zip(self.table["k"].values, self.table["n"].values, g)
            ],
        }


def check_blowup_hypothesis(
    field: FieldSpec,
    chart: CollarChart,
    decades: int = 64,
    growth_threshold: float = 1e3,
    s_samples: int = 32,
    window: int = 8,
    cauchy_tol: float = 1e-8,
) -> BlowupVerdict:
    """Heuristic test of the non-integrability of B~ along normal rays,
    lim_{n->0} |int_n^N B~(m, s) dm| = infinity.

    The integral is accumulated over the halving grid n_k = N 2^-k. The field
    is "divergent" when min_j I(n_k, s_j) grows monotonically over the last
    `window` levels and either exceeds `growth_threshold` or grows by
    non-vanishing increments; "integrable" when, for every sampled s, the last
    chunk plus its geometric tail projection is below `cauchy_tol`; otherwise
    "inconclusive".

    :param field: Field specification
    :type field: FieldSpec
    :param chart: Collar chart
    :type chart: CollarChart
    :param decades: Number of halvings of N, defaults to 64
    :type decades: int, optional
    :param growth_threshold: Divergence threshold on I, defaults to 1e3
    :type growth_threshold: float, optional
    :param s_samples: Number of uniform samples of s, defaults to 32
    :type s_samples: int, optional
    :param window: Number of trailing levels examined, defaults to 8
    :type window: int, optional
    :param cauchy_tol: Convergence tolerance, defaults to 1e-8
    :type cauchy_tol: float, optional

    :returns: Verdict with evidence table
    :rtype: BlowupVerdict
    """

    view = collar_view(field, chart)
    n_grid = halving_grid(chart.width, decades)
    s_grid = np.linspace(0.0, chart.curve.length, s_samples, endpoint=False)

    chunks = np.full((decades, s_samples), np.nan)
    levels = decades
    for j, s in enumerate(s_grid):
        for k in range(min(decades, levels)):
            try:
                with np.errstate(all="ignore"):
                    chunks[k, j] = integrate(
                        lambda m: view.density(m, s), n_grid[k + 1], n_grid[k]
                    )
            except (QuadratureError, FieldSingularError, ZeroDivisionError):
                levels = k
                break

    if levels < decades:
        log.warning(
            "Blow-up grid on %r truncated at level %d of %d", chart.name, levels, decades
        )

    chunks = chunks[:levels]
    cumulative = np.vstack([np.zeros((1, s_samples)), np.cumsum(chunks, axis=0)])
    table = xr.DataArray(
        np.abs(cumulative),
        dims=("k", "s"),
        coords={"k": np.arange(levels + 1), "n": ("k", n_grid[: levels + 1]), "s": s_grid},
        name="I",
    )
    g = np.abs(cumulative).min(axis=1)
    increments = np.diff(g)

    if levels < window + 1:
        return BlowupVerdict("inconclusive", table, increments, None, levels)

    tail = increments[-window:]
    divergent = bool(
        np.all(tail > 0)
        and (
            g[-1] > growth_threshold
            or (tail[-1] >= 0.5 * tail[0] and tail[-1] > cauchy_tol)
        )
    )
    if divergent:
        return BlowupVerdict("divergent", table, increments, None, levels)

    last, previous = chunks[-1], chunks[-2]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(previous != 0, np.abs(last / previous), 0.0)
    projected_tail = np.where(ratio < 1, last * ratio / (1 - ratio), np.inf)
    if np.all(np.abs(last) + np.abs(projected_tail) < cauchy_tol):
        limits = np.abs(cumulative[-1] + projected_tail)
        return BlowupVerdict("integrable", table, increments, float(np.max(limits)), levels)

    return BlowupVerdict("inconclusive", table, increments, None, levels)


@dataclass(frozen=True)
class TangentialEstimate:
    """Outcome of `check_tangential_hypothesis`. `value` estimates
    sup_s int_0^N |dB~/ds| dm and is the D_C used downstream; `growing` flags
    that the integral still grows at the floor, i.e. the condition fails."""

    value: float
    growing: bool
    s_at_max: float
    table: xr.DataArray

    @property
    def satisfied(self) -> bool:
        return not self.growing

    def to_dict(self) -> dict:
        return {
            "D_C": self.value,
            "growing": self.growing,
            "satisfied": self.satisfied,
            "s_at_max": self.s_at_max,
        }


def check_tangential_hypothesis(
    field: FieldSpec,
    chart: CollarChart,
    s_samples: int = 64,
    n_floor_ratio: float = 1e-10,
    growth_tol: float = 1e-6,
) -> TangentialEstimate:
    """Estimate sup_s int_0^N |dB~/ds(m, s)| dm by quadrature over the decades
    n_k = N 10^-k down to n_floor = `n_floor_ratio` N. The integral is flagged as
    still growing when the last decade contributes more than `growth_tol`
    relative to the total at any sampled s.

    :param field: Field specification
    :type field: FieldSpec
    :param chart: Collar chart
    :type chart: CollarChart
    :param s_samples: Number of uniform samples of s, defaults to 64
    :type s_samples: int, optional
    :param n_floor_ratio: Lower integration limit relative to N, defaults to 1e-10
    :type n_floor_ratio: float, optional
    :param growth_tol: Relative growth tolerance of the last decade, defaults
        to 1e-6
    :type growth_tol: float, optional

    :returns: Estimate of D_C and growth flag
    :rtype: TangentialEstimate
    """

    view = collar_view(field, chart)
    n_grid = decade_grid(chart.width, n_floor_ratio * chart.width)
    s_grid = np.linspace(0.0, chart.curve.length, s_samples, endpoint=False)

    chunks = np.zeros((len(n_grid) - 1, s_samples))
    for j, s in enumerate(s_grid):
        for k in range(len(n_grid) - 1):
            chunks[k, j] = integrate(
                lambda m: abs(view.density_ds(m, s)), n_grid[k + 1], n_grid[k]
            )

    totals = chunks.sum(axis=0)
    growing = bool(np.any(chunks[-1] > growth_tol * np.maximum(1.0, totals)))
    j_max = int(np.argmax(totals))

    table = xr.DataArray(
        np.vstack([np.zeros((1, s_samples)), np.cumsum(chunks, axis=0)]),
        dims=("k", "s"),
        coords={"k": np.arange(len(n_grid)), "n": ("k", n_grid), "s": s_grid},
        name="int_abs_dBds",
    )
    return TangentialEstimate(float(totals[j_max]), growing, float(s_grid[j_max]), table)


@dataclass(frozen=True)
class DevtComparison:
    """Outcome of `devt_comparison`: whether |B| n^2 >= 1 on the sampled grid,
    with the minimising sample as witness."""

    meets: bool
    min_value: float
    witness: dict

    def to_dict(self) -> dict:
        return {"meets": self.meets, "min_value": self.min_value, "witness": self.witness}


def devt_comparison(
    field: FieldSpec,
    chart: CollarChart,
    grid: tuple = (128, 64),
    n_min_ratio: float = 1e-6,
    slack: float = 1e-12,
) -> DevtComparison:
    """Sample |B(x, y)| n^2 over the collar and test the growth condition
    |B| >= 1/n^2 used in the quantum confinement literature.

    :param field: Field specification
    :type field: FieldSpec
    :param chart: Collar chart
    :type chart: CollarChart
    :param grid: Number of (n, s) samples; n is geometric between
        `n_min_ratio` N and N, defaults to (128, 64)
    :type grid: tuple, optional
    :param n_min_ratio: Smallest sampled n relative to N, defaults to 1e-6
    :type n_min_ratio: float, optional
    :param slack: Tolerance below 1, defaults to 1e-12
    :type slack: float, optional

    :returns: Comparison outcome
    :rtype: DevtComparison
    """

    view = collar_view(field, chart)
    n_count, s_count = grid
    n = chart.width * np.geomspace(n_min_ratio, 1.0, n_count, endpoint=False)
    s = np.linspace(0.0, chart.curve.length, s_count, endpoint=False)
    Nn, S = np.meshgrid(n, s, indexing="ij")

    with np.errstate(all="ignore"):
        values = np.abs(np.asarray(view.cartesian(Nn, S), dtype=float)) * Nn**2
    values = np.where(np.isfinite(values), values, np.inf)

    i, j = np.unravel_index(int(np.argmin(values)), values.shape)
    point = chart.curve.point(S[i, j]) + Nn[i, j] * chart.curve.normal(S[i, j])
    witness = {
        "n": float(Nn[i, j]),
        "s": float(S[i, j]),
        "x": float(point[0]),
        "y": float(point[1]),
        "value": float(values[i, j]),
    }
    min_value = float(values[i, j])
    return DevtComparison(min_value >= 1.0 - slack, min_value, witness)


__all__ = [
    "ExpressionError",
    "FieldSingularError",
    "DecompositionError",
    "FieldSpec",
    "CollarDecomposition",
    "build_field",
    "field_from_function",
    "eval_cartesian",
    "eval_collar_density",
    "eval_collar_field",
    "potential",
    "potential_s_derivative",
    "collar_decomposition",
    "check_blowup_hypothesis",
    "check_tangential_hypothesis",
    "devt_comparison",
]
