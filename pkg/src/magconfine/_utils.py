"""
This module contains simple numerical utility functions used in magconfine.
"""

import logging
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad

log = logging.getLogger(__name__)

# Fragments of the QUADPACK diagnostics returned by `quad(full_output=1)`.
# Roundoff warnings are not listed: the estimate is at machine precision then.
_QUAD_FAILURES = {
    "maximum number of subdivisions": "maximum number of subdivisions reached",
    "Extremely bad integrand": "extremely bad integrand behaviour",
    "does not converge": "the algorithm does not converge",
    "probably divergent": "the integral is probably divergent or slowly convergent",
}


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance."""

    def __init__(self, message: str, estimate: float, abserr: float):
        super().__init__(f"{message} (estimate {estimate!r}, abs. error {abserr:.3e})")
        self.estimate = estimate
        self.abserr = abserr


def rotate90(v: np.ndarray) -> np.ndarray:
    """Rotate planar vector(s) by +90 degrees, i.e. apply the standard complex
    structure J: (v_x, v_y) -> (-v_y, v_x). Operates on the last axis.

    :param v: Vector or stack of vectors with trailing dimension 2
    :type v: np.ndarray

    :returns: Rotated vector(s)
    :rtype: np.ndarray
    """

    v = np.asarray(v, dtype=float)
    return np.stack([-v[..., 1], v[..., 0]], axis=-1)


def integrate(
    func: Callable[[float], float],
    a: float,
    b: float,
    rel_tol: float = 1e-10,
    abs_tol: float = 1e-14,
    limit: int = 10_000,
) -> float:
    """Adaptive Gauss-Kronrod quadrature of `func` over [a, b], using QUADPACK
    through `scipy.integrate.quad`.

    :param func: Scalar integrand
    :type func: Callable
    :param a: Lower limit
    :type a: float
    :param b: Upper limit
    :type b: float
    :param rel_tol: Relative tolerance, defaults to 1e-10
    :type rel_tol: float, optional
    :param abs_tol: Absolute tolerance, defaults to 1e-14
    :type abs_tol: float, optional
    :param limit: Maximum number of subintervals, defaults to 10 000
    :type limit: int, optional

    :returns: Value of the integral
    :rtype: float
    """

    if a == b:
        return 0.0

    result = quad(
        func, a, b, epsabs=abs_tol, epsrel=rel_tol, limit=limit, full_output=1
    )
    value, abserr = result[0], result[1]

    if len(result) > 3:
        message = result[3]
        # A warning is only fatal when the error estimate is far off target
        slack = 1e3 * max(abs_tol, rel_tol * abs(value))
        for fragment, reason in _QUAD_FAILURES.items():
            if fragment in message and not abserr <= slack:
                raise QuadratureError(
                    f"Quadrature over [{a!r}, {b!r}] failed: {reason}", value, abserr
                )
        log.debug("Quadrature warning over [%r, %r]: %s", a, b, message)

    if not np.isfinite(value):
        raise QuadratureError(
            f"Quadrature over [{a!r}, {b!r}] returned a non-finite value", value, abserr
        )

    return float(value)


def halving_grid(width: float, levels: int) -> np.ndarray:
    """Return the geometric grid n_k = width * 2**-k, k = 0..levels."""

    return width * np.exp2(-np.arange(levels + 1, dtype=float))


def decade_grid(width: float, floor: float) -> np.ndarray:
    """Return n_k = width * 10**-k for k = 0.. until `floor` (inclusive)."""

    levels = int(np.ceil(np.log10(width / floor) - 1e-9))
    return width * 10.0 ** -np.arange(levels + 1, dtype=float)


def as_float_or_array(value: np.ndarray):
    """Unwrap 0-d arrays to python floats, leave arrays untouched."""

    value = np.asarray(value, dtype=float)
    if value.ndim == 0:
        return float(value)
    return value


def broadcast_callable(func: Callable) -> Callable:
    """Wrap a lambdified two-argument function so that constant expressions
    still broadcast against their inputs."""

    def wrapped(a, b):
        shape = np.broadcast(np.asarray(a), np.asarray(b)).shape
        out = np.asarray(func(a, b), dtype=float)
        if out.shape != shape:
            out = np.broadcast_to(out, shape).copy()
        return as_float_or_array(out)

    return wrapped


def relative_drift(values: np.ndarray, reference: float) -> float:
    """Maximum |values - reference| scaled by |reference| (or absolute when the
    reference is zero)."""

    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return 0.0
    scale = abs(reference) if reference != 0 else 1.0
    return float(np.max(np.abs(values - reference)) / scale)


def optional_float(value: Optional[float]) -> Optional[float]:
    """JSON-friendly float: NaN and infinities become None."""

    if value is None:
        return None
    value = float(value)
    if not np.isfinite(value):
        return None
    return value
