"""Computational charts: bounded boxes in R^d and flat tori.

A chart owns the grid every sampled field lives on, together with the metric
tensor and volume-form density used by the L^p machinery. Everything here is
immutable after construction and safe to share between threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ChartError, InvalidDensityError, InvalidMetricError

EUCLIDEAN_BOX = "euclidean_box"
FLAT_TORUS = "flat_torus"

# Slack (relative to the axis period) for accepting points that roundoff
# pushed infinitesimally outside a box chart.
_EDGE_TOL = 1e-9


@dataclass(frozen=True)
class ChartDomain:
    """A rectangular chart: either a bounded box or a periodic torus.

    extent: per-axis (lower, upper) bounds in chart units.
    resolution: per-axis node count. Box grids include both endpoints; torus
        grids exclude the identified upper endpoint.
    boundary_margin: width of the collar (box only) on which every supported
        field must vanish identically.
    """

    kind: str
    extent: tuple[tuple[float, float], ...]
    resolution: tuple[int, ...]
    boundary_margin: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "extent", tuple((float(a), float(b)) for a, b in self.extent))
        object.__setattr__(self, "resolution", tuple(int(n) for n in self.resolution))
        if self.kind not in (EUCLIDEAN_BOX, FLAT_TORUS):
            raise ChartError(f"unknown chart kind {self.kind!r}")
        d = len(self.extent)
        if not 1 <= d <= 3:
            raise ChartError(f"dimension {d} outside the supported range 1..3")
        if len(self.resolution) != d:
            raise ChartError("extent and resolution have different lengths")
        for (lo, hi), n in zip(self.extent, self.resolution):
            if not lo < hi:
                raise ChartError(f"extent lower bound {lo} must be below upper bound {hi}")
            if n < 2:
                raise ChartError(f"resolution {n} below the minimum of 2")
        if self.boundary_margin < 0:
            raise ChartError("boundary_margin must be >= 0")
        if self.kind == FLAT_TORUS and self.boundary_margin != 0:
            raise ChartError("a torus chart has no boundary margin")

    # -- basic descriptors -------------------------------------------------

    @property
    def dim(self) -> int:
        return len(self.extent)

    @property
    def periodic(self) -> bool:
        return self.kind == FLAT_TORUS

    @cached_property
    def lower(self) -> np.ndarray:
        return np.array([a for a, _ in self.extent])

    @cached_property
    def upper(self) -> np.ndarray:
        return np.array([b for _, b in self.extent])

    @cached_property
    def periods(self) -> np.ndarray:
        return self.upper - self.lower

    @cached_property
    def spacing(self) -> np.ndarray:
        n = np.array(self.resolution, dtype=np.float64)
        if self.periodic:
            return self.periods / n
        return self.periods / (n - 1.0)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.resolution

    @property
    def node_count(self) -> int:
        return int(np.prod(self.resolution))

    def axes(self) -> list[np.ndarray]:
        """Per-axis node coordinates."""
        out = []
        for (lo, _), n, h in zip(self.extent, self.resolution, self.spacing):
            out.append(lo + h * np.arange(n))
        return out

    @cached_property
    def _nodes(self) -> np.ndarray:
        grids = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=-1)

    def nodes(self) -> np.ndarray:
        """All grid nodes, row-major in axis order, shape (node_count, dim)."""
        return self._nodes

    # -- coordinate transforms ---------------------------------------------

    def wrap(self, points: np.ndarray) -> np.ndarray:
        """Map points into the fundamental domain (identity on a box)."""
        if not self.periodic:
            return points
        return self.lower + np.mod(points - self.lower, self.periods)

    def min_image(self, points: np.ndarray, center: np.ndarray) -> np.ndarray:
        """Displacement points - center, using the nearest periodic image."""
        disp = np.asarray(points, dtype=np.float64) - np.asarray(center, dtype=np.float64)
        if self.periodic:
            disp = disp - self.periods * np.round(disp / self.periods)
        return disp

    def to_index(self, points: np.ndarray) -> np.ndarray:
        """Fractional grid-index coordinates of points (no wrapping)."""
        return (points - self.lower) / self.spacing

    def inside(self, points: np.ndarray) -> np.ndarray:
        """Boolean mask of points within the chart (always True on a torus)."""
        points = np.atleast_2d(points)
        if self.periodic:
            return np.ones(points.shape[0], dtype=bool)
        tol = _EDGE_TOL * self.periods
        ok = (points >= self.lower - tol) & (points <= self.upper + tol)
        return np.all(ok, axis=1)

    def interior_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Bounds of the margin-free interior (box) or the full domain (torus)."""
        if self.periodic:
            return self.lower, self.upper
        return self.lower + self.boundary_margin, self.upper - self.boundary_margin

    def contains_ball(self, center: Sequence[float], radius: float) -> bool:
        """True when the closed ball sits inside the margin-free interior.

        On a torus the ball must be embeddable: radius below half the
        shortest period.
        """
        center = np.asarray(center, dtype=np.float64)
        if center.shape != (self.dim,):
            return False
        if radius <= 0:
            return False
        if self.periodic:
            return bool(radius < 0.5 * self.periods.min())
        lo, hi = self.interior_bounds()
        return bool(np.all(center - radius >= lo) and np.all(center + radius <= hi))

    # -- quadrature ----------------------------------------------------------

    def quad_weights_axis(self, axis: int) -> np.ndarray:
        """Composite quadrature weights along one axis.

        Midpoint-style uniform weights on the torus, trapezoid on the box.
        """
        n = self.resolution[axis]
        h = self.spacing[axis]
        if self.periodic:
            return np.full(n, h)
        w = np.full(n, h)
        w[0] = w[-1] = 0.5 * h
        return w

    @cached_property
    def quad_weights(self) -> np.ndarray:
        """Tensor-product quadrature weights for all nodes, shape (node_count,)."""
        w = self.quad_weights_axis(0)
        for axis in range(1, self.dim):
            w = np.multiply.outer(w, self.quad_weights_axis(axis))
        return w.ravel()

    # -- serialization -------------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind,
            "dim": self.dim,
            "extent": [list(ab) for ab in self.extent],
            "resolution": list(self.resolution),
            "boundary_margin": self.boundary_margin,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "ChartDomain":
        chart = cls(
            kind=data["kind"],
            extent=tuple(tuple(ab) for ab in data["extent"]),
            resolution=tuple(data["resolution"]),
            boundary_margin=float(data.get("boundary_margin", 0.0)),
        )
        if "dim" in data and int(data["dim"]) != chart.dim:
            raise ChartError("declared dim does not match extent length")
        return chart

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    @classmethod
    def from_json(cls, text: str) -> "ChartDomain":
        return cls.from_json_dict(json.loads(text))


def make_box(extent, resolution, boundary_margin: float = 0.0) -> ChartDomain:
    return ChartDomain(EUCLIDEAN_BOX, tuple(extent), tuple(resolution), boundary_margin)


def make_torus(extent, resolution) -> ChartDomain:
    return ChartDomain(FLAT_TORUS, tuple(extent), tuple(resolution), 0.0)


def unit_torus(dim: int, n: int) -> ChartDomain:
    return make_torus([(0.0, 1.0)] * dim, [n] * dim)


class MetricField:
    """Pointwise SPD matrix field; defaults to the Euclidean identity."""

    def __init__(self, dim: int, fn: Optional[Callable[[np.ndarray], np.ndarray]] = None):
        self.dim = dim
        self._fn = fn

    @property
    def is_identity(self) -> bool:
        return self._fn is None

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        if self._fn is None:
            out = np.zeros((points.shape[0], self.dim, self.dim))
            out[:, range(self.dim), range(self.dim)] = 1.0
            return out
        out = np.asarray(self._fn(points), dtype=np.float64)
        if out.shape != (points.shape[0], self.dim, self.dim):
            raise InvalidMetricError(f"metric callable returned shape {out.shape}")
        return out


def diagonal_metric(diag: Sequence[float]) -> MetricField:
    diag = np.asarray(diag, dtype=np.float64)

    def fn(points):
        out = np.zeros((points.shape[0], diag.size, diag.size))
        out[:, range(diag.size), range(diag.size)] = diag
        return out

    return MetricField(diag.size, fn)


class VolumeDensity:
    """Strictly positive density against the chart's Lebesgue measure."""

    def __init__(self, fn: Optional[Callable[[np.ndarray], np.ndarray]] = None):
        self._fn = fn

    @property
    def is_unit(self) -> bool:
        return self._fn is None

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        if self._fn is None:
            return np.ones(points.shape[0])
        return np.asarray(self._fn(points), dtype=np.float64).reshape(points.shape[0])


def grid_points(chart: ChartDomain) -> np.ndarray:
    """All grid nodes in row-major axis order; count equals node_count."""
    return chart.nodes()


def total_volume(chart: ChartDomain, density: Optional[VolumeDensity] = None) -> float:
    """Quadrature of the volume density over the chart."""
    density = density or VolumeDensity()
    vals = density.evaluate(chart.nodes())
    if np.any(vals <= 0):
        raise InvalidDensityError("volume density must be strictly positive at every node")
    return float(chart.quad_weights @ vals)


def metric_norm(v: np.ndarray, u: np.ndarray, g: Optional[MetricField] = None) -> float:
    """Riemannian length sqrt(v^T g(u) v) of a tangent vector at u."""
    v = np.asarray(v, dtype=np.float64)
    u = np.atleast_2d(np.asarray(u, dtype=np.float64))
    if not np.all(np.isfinite(v)):
        raise ValueError("vector has non-finite entries")
    if g is None or g.is_identity:
        return float(np.linalg.norm(v))
    mat = g.evaluate(u)[0]
    if not np.allclose(mat, mat.T, atol=1e-12):
        raise InvalidMetricError("metric matrix is not symmetric")
    try:
        np.linalg.cholesky(mat)
    except np.linalg.LinAlgError:
        raise InvalidMetricError("metric matrix is not positive definite") from None
    return float(np.sqrt(v @ mat @ v))
