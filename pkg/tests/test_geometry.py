import math

import numpy as np
import pytest

from magconfine import (
    ChartError,
    curvature_bounds,
    from_normal,
    jacobian,
    make_chart,
    make_circle,
    make_curve,
    metric_factor,
    to_normal,
    validate_collar,
)
from magconfine.geometry import collars_overlap


def test_unit_circle_frame():
    curve = make_circle((0.0, 0.0), 1.0)
    np.testing.assert_allclose(curve.point(0.0), [1.0, 0.0])
    np.testing.assert_allclose(curve.normal(0.0), [-1.0, 0.0], atol=1e-15)
    assert curve.curvature(0.0) == 1.0
    assert curve.curvature_derivative(0.0) == 0.0
    assert curve.length == pytest.approx(2 * math.pi)


def test_circle_curvature_sign():
    assert make_circle((0, 0), 2.0).curvature(1.3) == pytest.approx(0.5)
    assert make_circle((0, 0), 1.0, "away_from_center").curvature(0.2) == pytest.approx(-1.0)


def test_circle_rejects_bad_radius():
    with pytest.raises(ValueError):
        make_circle((0, 0), 0.0)


@pytest.mark.parametrize("radius", [1.0, 2.0])
@pytest.mark.parametrize("orientation", ["toward_center", "away_from_center"])
def test_second_derivative_matches_curvature(radius, orientation):
    curve = make_circle((0.3, -0.1), radius, orientation)
    s = np.linspace(0.0, curve.length, 17)
    h = 1e-4
    second = (curve.point(s + h) - 2 * curve.point(s) + curve.point(s - h)) / h**2
    expected = curve.curvature(s)[:, None] * curve.normal(s)
    np.testing.assert_allclose(second, expected, atol=1e-6)
    np.testing.assert_allclose(np.linalg.norm(curve.tangent(s), axis=1), 1.0)
    np.testing.assert_allclose(np.sum(curve.tangent(s) * curve.normal(s), axis=1), 0.0, atol=1e-15)


def test_from_normal_examples(disc_chart, annulus_charts):
    np.testing.assert_allclose(from_normal(disc_chart, 0.5 - 1e-9, 0.0), [0.5 + 1e-9, 0.0])
    np.testing.assert_allclose(from_normal(disc_chart, 0.25, math.pi / 2), [0.0, 0.75], atol=1e-15)
    _, inner = annulus_charts
    np.testing.assert_allclose(from_normal(inner, 0.1, 0.0), [1.1, 0.0])


def test_from_normal_outside_chart(disc_chart):
    with pytest.raises(ChartError):
        from_normal(disc_chart, 0.5, 0.0)
    with pytest.raises(ChartError):
        from_normal(disc_chart, 0.0, 0.0)


def test_to_normal_examples(disc_chart):
    n, s = to_normal(disc_chart, (0.6, 0.0))
    assert n == pytest.approx(0.4)
    assert s == pytest.approx(0.0)

    n, s = to_normal(disc_chart, (0.0, 0.9))
    assert n == pytest.approx(0.1)
    assert s == pytest.approx(math.pi / 2)

    assert to_normal(disc_chart, (0.0, 0.0)) is None
    assert to_normal(disc_chart, (1.2, 0.0)) is None


def _round_trip(chart, rng, count):
    n = rng.uniform(1e-6, 1 - 1e-6, count) * chart.width
    s = rng.uniform(0.0, chart.curve.length, count)
    q = from_normal(chart, n, s)
    back = np.array([to_normal(chart, p) for p in q])
    ds = np.abs(back[:, 1] - s)
    ds = np.minimum(ds, chart.curve.length - ds)
    return np.abs(back[:, 0] - n), ds


def test_round_trip_disc_and_annulus(disc_chart, annulus_charts):
    rng = np.random.default_rng(8)
    for chart in (disc_chart, *annulus_charts):
        dn, ds = _round_trip(chart, rng, 10_000)
        assert dn.max() < 1e-10
        assert ds.max() < 1e-10


def test_round_trip_generic_curve():
    # unit circle without the closed-form projector
    curve = make_curve(
        2 * math.pi,
        point=lambda s: np.stack([np.cos(s), np.sin(s)], axis=-1),
        tangent=lambda s: np.stack([-np.sin(s), np.cos(s)], axis=-1),
        curvature=lambda s: np.ones_like(np.asarray(s, dtype=float)),
        curvature_derivative=lambda s: np.zeros_like(np.asarray(s, dtype=float)),
    )
    chart = make_chart(curve, 0.5, 0.6)
    dn, ds = _round_trip(chart, np.random.default_rng(3), 200)
    assert dn.max() < 1e-10
    assert ds.max() < 1e-10


def test_to_normal_is_distance(annulus_charts):
    rng = np.random.default_rng(11)
    for chart in annulus_charts:
        grid = chart.curve.point(np.linspace(0, chart.curve.length, 200_000, endpoint=False))
        for _ in range(20):
            n = rng.uniform(0.01, 0.99) * chart.width
            q = from_normal(chart, n, rng.uniform(0, chart.curve.length))
            distance = np.min(np.linalg.norm(grid - q, axis=1))
            assert to_normal(chart, q)[0] == pytest.approx(distance, abs=1e-8)


def test_metric_factor(disc_chart, annulus_charts):
    assert metric_factor(disc_chart, 0.3, 1.0) == pytest.approx(0.7)
    assert metric_factor(annulus_charts[1], 0.3, 1.0) == pytest.approx(1.3)
    assert metric_factor(disc_chart, 1e-12, 0.0) == pytest.approx(1.0)

    rng = np.random.default_rng(5)
    for chart in (disc_chart, *annulus_charts):
        n = rng.uniform(1e-9, 1, 10_000) * chart.width
        s = rng.uniform(0, chart.curve.length, 10_000)
        g = metric_factor(chart, n, s)
        assert np.all((g > 1 - chart.epsilon) & (g < 1 + chart.epsilon))


def test_jacobian_sign(disc_chart, annulus_charts):
    # dx^dy = (n - 1) dn^ds on the unit disc
    assert jacobian(disc_chart, 0.3, 2.0) == pytest.approx(-0.7)
    assert jacobian(annulus_charts[1], 0.3, 2.0) == pytest.approx(1.3)


def test_curvature_bounds(annulus):
    K, K_prime = curvature_bounds(annulus.component("outer"))
    assert K == pytest.approx(0.5)
    assert K_prime == 0.0


def test_validate_collar():
    circle = make_circle((0, 0), 1.0)
    assert validate_collar(circle, 0.5, 0.6) == []

    violations = validate_collar(circle, 0.5, 0.4)
    assert len(violations) == 1
    assert violations[0].startswith("N >= epsilon/K")

    violations = validate_collar(circle, 1.2, 0.9)
    assert any("not injective" in v for v in violations)


def test_make_chart_clips_width(caplog):
    circle = make_circle((0, 0), 1.0)
    with caplog.at_level("WARNING"):
        chart = make_chart(circle, 0.9, 0.5)
    assert chart.width == pytest.approx(0.495)
    assert "clipped" in caplog.text


def test_make_chart_default_width():
    chart = make_chart(make_circle((0, 0), 2.0))
    assert chart.width == pytest.approx(0.99 * 0.5 * 2.0)


def test_make_chart_rejects_bad_epsilon():
    with pytest.raises(ValueError):
        make_chart(make_circle((0, 0), 1.0), 0.5, 1.0)


def test_collars_overlap(annulus):
    outer = make_chart(annulus.component("outer"), 0.6, 0.5)
    inner = make_chart(annulus.component("inner"), 0.45, 0.5)
    assert collars_overlap(annulus, [outer, inner])


def test_domain_contains(unit_disc, annulus):
    assert unit_disc.contains((0.5, 0.5))
    assert not unit_disc.contains((1.0, 0.0))
    assert annulus.contains((1.5, 0.0))
    assert not annulus.contains((0.5, 0.0))
