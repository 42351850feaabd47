import json

import numpy as np
import pytest

from diffeolab import geometry as geo
from diffeolab.errors import ChartError, InvalidDensityError, InvalidMetricError


def test_grid_points_1d_box():
    chart = geo.make_box([(0.0, 1.0)], [3])
    pts = geo.grid_points(chart)
    assert np.allclose(pts[:, 0], [0.0, 0.5, 1.0])


def test_grid_points_torus_excludes_endpoint():
    chart = geo.make_torus([(0.0, 1.0)], [4])
    pts = geo.grid_points(chart)
    assert np.allclose(pts[:, 0], [0.0, 0.25, 0.5, 0.75])


def test_grid_points_2d_corners():
    chart = geo.make_box([(0.0, 1.0), (0.0, 1.0)], [2, 2])
    pts = geo.grid_points(chart)
    assert pts.shape == (4, 2)
    assert {tuple(p) for p in pts} == {(0, 0), (0, 1), (1, 0), (1, 1)}


def test_grid_count_is_product():
    chart = geo.make_box([(0.0, 1.0), (0.0, 2.0), (-1.0, 1.0)], [4, 5, 6])
    assert geo.grid_points(chart).shape == (120, 3)


def test_chart_validation():
    with pytest.raises(ChartError):
        geo.make_box([(1.0, 0.0)], [8])
    with pytest.raises(ChartError):
        geo.make_box([(0.0, 1.0)], [1])
    with pytest.raises(ChartError):
        geo.make_torus([(0.0, 1.0)], [8]).__class__(
            kind="flat_torus", extent=((0.0, 1.0),), resolution=(8,), boundary_margin=0.1
        )
    with pytest.raises(ChartError):
        geo.make_box([(0.0, 1.0)] * 4, [4] * 4)


def test_total_volume_unit_torus():
    chart = geo.unit_torus(2, 64)
    assert geo.total_volume(chart) == pytest.approx(1.0, abs=1e-12)


def test_total_volume_box():
    chart = geo.make_box([(0.0, 2.0), (0.0, 3.0)], [33, 49])
    assert geo.total_volume(chart) == pytest.approx(6.0, abs=1e-10)


def test_total_volume_linear_density_exact():
    # trapezoid quadrature integrates the linear density 2x exactly
    chart = geo.make_box([(0.0, 1.0)], [65])
    density = geo.VolumeDensity(lambda p: 2.0 * p[:, 0])
    with pytest.raises(InvalidDensityError):
        geo.total_volume(chart, density)
    shifted = geo.VolumeDensity(lambda p: 2.0 * p[:, 0] + 1e-9)
    assert geo.total_volume(chart, shifted) == pytest.approx(1.0, abs=1e-8)


def test_total_volume_convergence_order():
    # smooth curved density: trapezoid error must drop ~4x per halved spacing
    exact = np.e - 1.0
    errs = []
    for n in (17, 33, 65):
        chart = geo.make_box([(0.0, 1.0)], [n])
        density = geo.VolumeDensity(lambda p: np.exp(p[:, 0]))
        errs.append(abs(geo.total_volume(chart, density) - exact))
    assert errs[0] / errs[1] > 3.5
    assert errs[1] / errs[2] > 3.5


def test_metric_norm_examples():
    assert geo.metric_norm([3.0, 4.0], [0.0, 0.0]) == pytest.approx(5.0, abs=1e-12)
    g = geo.diagonal_metric([4.0, 1.0])
    assert geo.metric_norm([1.0, 0.0], [0.0, 0.0], g) == pytest.approx(2.0, abs=1e-12)
    assert geo.metric_norm([0.0, 0.0], [0.5, 0.5], g) == 0.0


def test_metric_norm_rejects_non_spd():
    bad = geo.MetricField(2, lambda p: np.tile(np.array([[1.0, 0.0], [0.0, -1.0]]), (p.shape[0], 1, 1)))
    with pytest.raises(InvalidMetricError):
        geo.metric_norm([1.0, 1.0], [0.0, 0.0], bad)


def test_metric_spd_sweep(torus2_128):
    g = geo.MetricField(2, lambda p: np.stack(
        [np.stack([2.0 + np.sin(p[:, 0]), 0.3 * np.cos(p[:, 1])], axis=-1),
         np.stack([0.3 * np.cos(p[:, 1]), 1.5 + 0.2 * p[:, 0]], axis=-1)], axis=1))
    mats = g.evaluate(torus2_128.nodes())
    eigs = np.linalg.eigvalsh(mats)
    assert eigs.min() > 0


def test_metric_triangle_inequality(rng):
    g = geo.diagonal_metric([3.0, 0.5])
    u = np.zeros(2)
    for _ in range(1000):
        v, w = rng.standard_normal(2), rng.standard_normal(2)
        lhs = geo.metric_norm(v + w, u, g)
        rhs = geo.metric_norm(v, u, g) + geo.metric_norm(w, u, g)
        assert lhs <= rhs + 1e-12


def test_torus_periodic_wrap(torus2_128):
    pts = np.array([[0.3, 0.7]])
    shifted = pts + torus2_128.periods
    assert np.allclose(torus2_128.wrap(shifted), pts)
    assert np.allclose(torus2_128.min_image(shifted, np.array([0.3, 0.7])), 0.0)


def test_chart_json_roundtrip():
    chart = geo.make_box([(0.0, 2.0), (-1.0, 1.0)], [16, 32], boundary_margin=0.1)
    again = geo.ChartDomain.from_json(chart.to_json())
    assert again == chart
    data = json.loads(chart.to_json())
    assert set(data) == {"kind", "dim", "extent", "resolution", "boundary_margin"}


def test_contains_ball():
    box = geo.make_box([(0.0, 1.0), (0.0, 1.0)], [16, 16], boundary_margin=0.1)
    assert box.contains_ball([0.5, 0.5], 0.3)
    assert not box.contains_ball([0.5, 0.5], 0.45)
    torus = geo.unit_torus(2, 16)
    assert torus.contains_ball([0.9, 0.1], 0.49)
    assert not torus.contains_ball([0.5, 0.5], 0.5)
