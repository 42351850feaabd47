"""Sampled scalar and vector fields on a chart.

Fields are immutable: every operation returns a new field. Vector components
are stored in chart coordinates; on these flat charts the identification with
tangent vectors is the identity, so Jacobians act as plain matrices on the
component arrays.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from . import profiles
from .backend import interp_flat
from .errors import (
    ChartMismatchError,
    InvalidExponentError,
    OutOfDomainError,
    RegionError,
)
from .geometry import ChartDomain, MetricField, VolumeDensity

_ORDER_TAPS = {"linear": 1, "cubic": 3}


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=np.float64, copy=True)
    arr.setflags(write=False)
    return arr


def _collar_mask(chart: ChartDomain) -> np.ndarray:
    """Nodes strictly inside the boundary_margin collar of a box chart."""
    if chart.periodic or chart.boundary_margin == 0:
        return np.zeros(chart.node_count, dtype=bool)
    nodes = chart.nodes()
    m = chart.boundary_margin
    near = (nodes < chart.lower + m) | (nodes > chart.upper - m)
    return np.any(near, axis=1)


def _validate_values(chart: ChartDomain, values: np.ndarray, ncomp: int) -> None:
    expect = chart.shape if ncomp == 0 else chart.shape + (ncomp,)
    if values.shape != expect:
        raise ValueError(f"values shape {values.shape} does not match grid shape {expect}")
    if not np.all(np.isfinite(values)):
        raise ValueError("field values must all be finite")
    collar = _collar_mask(chart)
    if collar.any():
        flat = values.reshape(chart.node_count, -1)
        if np.any(flat[collar] != 0.0):
            raise ValueError("field does not vanish on the boundary_margin collar")


@dataclass(frozen=True)
class SampledScalarField:
    chart: ChartDomain
    values: np.ndarray
    interp_order: str = "cubic"

    def __post_init__(self):
        if self.interp_order not in _ORDER_TAPS:
            raise ValueError(f"unknown interp_order {self.interp_order!r}")
        object.__setattr__(self, "values", _freeze(self.values))
        _validate_values(self.chart, self.values, 0)

    @property
    def kind(self) -> str:
        return "scalar"

    def with_values(self, values: np.ndarray) -> "SampledScalarField":
        return SampledScalarField(self.chart, values, self.interp_order)

    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)


@dataclass(frozen=True)
class SampledVectorField:
    chart: ChartDomain
    values: np.ndarray
    interp_order: str = "cubic"

    def __post_init__(self):
        if self.interp_order not in _ORDER_TAPS:
            raise ValueError(f"unknown interp_order {self.interp_order!r}")
        object.__setattr__(self, "values", _freeze(self.values))
        _validate_values(self.chart, self.values, self.chart.dim)

    @property
    def kind(self) -> str:
        return "vector"

    def with_values(self, values: np.ndarray) -> "SampledVectorField":
        return SampledVectorField(self.chart, values, self.interp_order)

    def flat(self) -> np.ndarray:
        return self.values.reshape(-1, self.chart.dim)


Field = Union[SampledScalarField, SampledVectorField]


@dataclass(frozen=True)
class BallRegion:
    """Open metric ball in chart coordinates."""

    center: tuple[float, ...]
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if not self.radius > 0:
            raise RegionError(f"ball radius must be positive, got {self.radius}")

    def center_array(self) -> np.ndarray:
        return np.asarray(self.center)


def check_region(chart: ChartDomain, region: BallRegion) -> None:
    """Raise RegionError unless the closed ball embeds in the chart interior."""
    if not chart.contains_ball(region.center_array(), region.radius):
        raise RegionError(
            f"ball(center={region.center}, radius={region.radius}) does not fit "
            f"inside the chart interior"
        )


def region_mask(chart: ChartDomain, region: BallRegion) -> np.ndarray:
    """Boolean node mask of the open ball (strict interior test)."""
    disp = chart.min_image(chart.nodes(), region.center_array())
    return np.einsum("ij,ij->i", disp, disp) < region.radius**2


# -- construction -----------------------------------------------------------


def zero_scalar(chart: ChartDomain, interp_order: str = "cubic") -> SampledScalarField:
    return SampledScalarField(chart, np.zeros(chart.shape), interp_order)


def zero_vector(chart: ChartDomain, interp_order: str = "cubic") -> SampledVectorField:
    return SampledVectorField(chart, np.zeros(chart.shape + (chart.dim,)), interp_order)


def sample_scalar(
    chart: ChartDomain, fn: Callable[[np.ndarray], np.ndarray], interp_order: str = "cubic"
) -> SampledScalarField:
    vals = np.asarray(fn(chart.nodes()), dtype=np.float64).reshape(chart.shape)
    return SampledScalarField(chart, vals, interp_order)


def sample_vector(
    chart: ChartDomain, fn: Callable[[np.ndarray], np.ndarray], interp_order: str = "cubic"
) -> SampledVectorField:
    vals = np.asarray(fn(chart.nodes()), dtype=np.float64)
    vals = vals.reshape(chart.shape + (chart.dim,))
    return SampledVectorField(chart, vals, interp_order)


def make_bump(
    chart: ChartDomain,
    center: Sequence[float],
    radius: float,
    amplitude: float = 1.0,
    interp_order: str = "cubic",
) -> SampledScalarField:
    """C-infinity bump: amplitude * exp(1 - 1/(1 - q^2)), q = |u - center|/radius.

    Compactly supported in the open ball; peak value is exactly the amplitude.
    """
    region = BallRegion(tuple(center), radius)
    check_region(chart, region)
    disp = chart.min_image(chart.nodes(), region.center_array())
    q = np.sqrt(np.einsum("ij,ij->i", disp, disp)) / radius
    vals = amplitude * profiles.bump(q)
    return SampledScalarField(chart, vals.reshape(chart.shape), interp_order)


def make_vector_bump(
    chart: ChartDomain,
    center: Sequence[float],
    radius: float,
    direction: Sequence[float],
    interp_order: str = "cubic",
) -> SampledVectorField:
    """Bump-profiled vector field pointing along a fixed chart direction."""
    scalar = make_bump(chart, center, radius, 1.0, interp_order)
    direction = np.asarray(direction, dtype=np.float64)
    vals = scalar.values[..., None] * direction
    return SampledVectorField(chart, vals, interp_order)


# -- evaluation ----------------------------------------------------------------


def eval_field(f: Field, points: np.ndarray) -> np.ndarray:
    """Interpolate the field at arbitrary chart points.

    Exact at grid nodes. Points outside a box chart raise OutOfDomainError;
    torus points are wrapped.
    """
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    chart = f.chart
    if not chart.periodic:
        bad = ~chart.inside(points)
        if bad.any():
            raise OutOfDomainError(f"{int(bad.sum())} query points outside the box chart")
    idx = chart.to_index(points)
    order = _ORDER_TAPS[f.interp_order]
    if f.kind == "scalar":
        vals = np.ascontiguousarray(f.values).reshape(-1)
        return interp_flat(vals, chart.shape, idx, order, chart.periodic)
    out = np.empty((points.shape[0], chart.dim))
    for k in range(chart.dim):
        vals = np.ascontiguousarray(f.values[..., k]).reshape(-1)
        out[:, k] = interp_flat(vals, chart.shape, idx, order, chart.periodic)
    return out


def eval_scalar_at(f: SampledScalarField, point: Sequence[float]) -> float:
    return float(eval_field(f, np.asarray(point)[None, :])[0])


# -- algebra ------------------------------------------------------------------


def field_axpy(a: float, f: Field, b: float, h: Field) -> Field:
    """Pointwise a*f + b*h for fields on the same chart and of the same kind."""
    if f.chart != h.chart:
        raise ChartMismatchError("fields live on different charts")
    if f.kind != h.kind:
        raise ChartMismatchError(f"cannot combine {f.kind} and {h.kind} fields")
    return f.with_values(a * f.values + b * h.values)


def scale_field(a: float, f: Field) -> Field:
    return f.with_values(a * f.values)


def mask_field(f: Field, region: BallRegion) -> Field:
    """Multiply by the indicator of the open ball (strict node-interior test)."""
    check_region(f.chart, region)
    keep = region_mask(f.chart, region)
    flat = f.values.reshape(f.chart.node_count, -1).copy()
    flat[~keep] = 0.0
    return f.with_values(flat.reshape(f.values.shape))


def mask_field_nodes(f: Field, keep: np.ndarray) -> Field:
    """Multiply by the indicator of an explicit node set."""
    flat = f.values.reshape(f.chart.node_count, -1).copy()
    flat[~keep] = 0.0
    return f.with_values(flat.reshape(f.values.shape))


def vector_magnitude(f: SampledVectorField) -> SampledScalarField:
    """Pointwise Euclidean magnitude of a vector field, as a scalar field."""
    mag = np.sqrt(np.einsum("...i,...i->...", f.values, f.values))
    return SampledScalarField(f.chart, mag, f.interp_order)


# -- norms ---------------------------------------------------------------------


def _check_p(p: float) -> float:
    p = float(p)
    if not (p >= 1.0 and np.isfinite(p)):
        raise InvalidExponentError(f"norm exponent must satisfy 1 <= p < inf, got {p}")
    return p


def lp_norm_scalar(
    f: SampledScalarField, p: float, density: Optional[VolumeDensity] = None
) -> float:
    """(integral of |f|^p against the volume form)^(1/p)."""
    p = _check_p(p)
    w = f.chart.quad_weights
    if density is not None and not density.is_unit:
        w = w * density.evaluate(f.chart.nodes())
    total = w @ np.abs(f.flat()) ** p
    return float(total ** (1.0 / p))


def lp_norm_vector(
    f: SampledVectorField,
    p: float,
    metric: Optional[MetricField] = None,
    density: Optional[VolumeDensity] = None,
) -> float:
    """(integral of g(f,f)^(p/2) against the volume form)^(1/p)."""
    p = _check_p(p)
    chart = f.chart
    flat = f.flat()
    if metric is None or metric.is_identity:
        sq = np.einsum("ij,ij->i", flat, flat)
    else:
        g = metric.evaluate(chart.nodes())
        sq = np.einsum("ij,ijk,ik->i", flat, g, flat)
        if np.any(sq < -1e-12):
            from .errors import InvalidMetricError

            raise InvalidMetricError("metric produced negative squared lengths")
        sq = np.maximum(sq, 0.0)
    w = chart.quad_weights
    if density is not None and not density.is_unit:
        w = w * density.evaluate(chart.nodes())
    total = w @ sq ** (p / 2.0)
    return float(total ** (1.0 / p))


def lp_norm(f: Field, p: float, metric=None, density=None) -> float:
    if f.kind == "scalar":
        return lp_norm_scalar(f, p, density)
    return lp_norm_vector(f, p, metric, density)


# -- serialization ---------------------------------------------------------------

_MAGIC = b"DIFFEOLAB-FIELD-V1\n"


def save_field(f: Field, path: str) -> None:
    """Binary layout: magic, one-line JSON header, then raw little-endian f8."""
    header = {
        "chart": f.chart.to_json_dict(),
        "kind": f.kind,
        "interp_order": f.interp_order,
        "shape": list(f.values.shape),
    }
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        fh.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes())


def load_field(path: str) -> Field:
    with open(path, "rb") as fh:
        magic = fh.read(len(_MAGIC))
        if magic != _MAGIC:
            raise ValueError(f"{path}: not a diffeolab field file")
        header = json.loads(fh.readline().decode("utf-8"))
        raw = fh.read()
    chart = ChartDomain.from_json_dict(header["chart"])
    values = np.frombuffer(raw, dtype="<f8").reshape(header["shape"]).astype(np.float64)
    cls = SampledScalarField if header["kind"] == "scalar" else SampledVectorField
    return cls(chart, values, header["interp_order"])


def field_to_csv(f: Field, path: str) -> None:
    """Plot-ready CSV: one row per node, coordinates then value columns."""
    nodes = f.chart.nodes()
    flat = f.values.reshape(f.chart.node_count, -1)
    ncomp = flat.shape[1]
    coord_names = ["x", "y", "z"][: f.chart.dim]
    if ncomp == 1:
        val_names = ["value"]
    else:
        val_names = [f"v{k}" for k in range(ncomp)]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(coord_names + val_names) + "\n")
        for i in range(nodes.shape[0]):
            cols = [format(c, ".12g") for c in nodes[i]] + [
                format(v, ".12g") for v in flat[i]
            ]
            fh.write(",".join(cols) + "\n")
