"""The candidate-operator zoo.

Members are either predicted to commute with every chart diffeomorphism
(pointwise scalar nonlinearities, scalar multiples of vector fields) or built
to be falsified (blurs, local averages, vector gains). A few demo members
exercise edge cases: the global sup operator, the phase map f -> e^{if}
realized as a pair of real fields, and the square root with its unbounded
local Lipschitz constant.

A discontinuous operator that separates almost-everywhere-equal
representatives cannot be expressed on sampled grids at all, so no such
member exists here; grids identify fields with their node values.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import ndimage

from .errors import ChartMismatchError
from .fields import (
    Field,
    SampledVectorField,
    lp_norm,
    make_bump,
    zero_scalar,
    zero_vector,
)
from .geometry import ChartDomain

_NAMED_RHO: dict[str, tuple[Callable[[np.ndarray], np.ndarray], float]] = {
    "relu": (lambda x: np.maximum(x, 0.0), 1.0),
    "tanh": (np.tanh, 1.0),
    "abs": (np.abs, 1.0),
    "identity": (lambda x: x, 1.0),
    "sin": (np.sin, 1.0),
}


@dataclass(frozen=True)
class OperatorSpec:
    """Tagged description of a candidate operator M."""

    kind: str
    label: str
    rho: Optional[Callable[[np.ndarray], np.ndarray]] = None
    rho_name: Optional[str] = None
    lipschitz_const: Optional[float] = None
    lam: Optional[float] = None
    sigma: Optional[float] = None
    radius: Optional[float] = None

    @property
    def acts_on(self) -> str:
        """'scalar', 'vector', or 'both'."""
        if self.kind in ("pointwise_scalar", "sup", "exp_phase", "sqrt_pointwise"):
            return "scalar"
        if self.kind in ("scalar_multiple", "vector_gain"):
            return "vector"
        return "both"

    @property
    def is_pointwise(self) -> bool:
        return self.kind in ("pointwise_scalar", "scalar_multiple", "vector_gain")


def pointwise_scalar(rho, lipschitz_const: Optional[float] = None, label: Optional[str] = None):
    if isinstance(rho, str):
        fn, lip = _NAMED_RHO[rho]
        return OperatorSpec(
            kind="pointwise_scalar",
            label=label or rho,
            rho=fn,
            rho_name=rho,
            lipschitz_const=lipschitz_const if lipschitz_const is not None else lip,
        )
    if lipschitz_const is None:
        raise ValueError("a custom rho needs a declared Lipschitz constant")
    return OperatorSpec(
        kind="pointwise_scalar",
        label=label or "pointwise",
        rho=rho,
        lipschitz_const=lipschitz_const,
    )


def scalar_multiple(lam: float, label: Optional[str] = None) -> OperatorSpec:
    return OperatorSpec(
        kind="scalar_multiple",
        label=label or f"lambda={lam:g}",
        lam=float(lam),
        lipschitz_const=abs(float(lam)),
    )


def vector_gain(rho="tanh", lipschitz_const: Optional[float] = None, label=None) -> OperatorSpec:
    """Pointwise magnitude gain rho(|f|) f/|f| with 0 mapped to 0.

    No equivariance holds for this kind; it exists to be falsified on vector fields.
    """
    if isinstance(rho, str):
        fn, lip = _NAMED_RHO[rho]
        return OperatorSpec(
            kind="vector_gain",
            label=label or f"gain({rho})",
            rho=fn,
            rho_name=rho,
            lipschitz_const=lipschitz_const if lipschitz_const is not None else 2 * lip,
        )
    if lipschitz_const is None:
        raise ValueError("a custom gain needs a declared Lipschitz constant")
    return OperatorSpec(kind="vector_gain", label=label or "gain", rho=rho,
                        lipschitz_const=lipschitz_const)


def gaussian_blur(sigma: float, label=None) -> OperatorSpec:
    return OperatorSpec(
        kind="gaussian_blur",
        label=label or f"blur(sigma={sigma:g})",
        sigma=float(sigma),
        lipschitz_const=1.0,
    )


def local_average(radius: float, label=None) -> OperatorSpec:
    return OperatorSpec(
        kind="local_average",
        label=label or f"avg(r={radius:g})",
        radius=float(radius),
        lipschitz_const=1.0,
    )


def sup_operator() -> OperatorSpec:
    return OperatorSpec(kind="sup", label="sup")


def exp_phase() -> OperatorSpec:
    return OperatorSpec(kind="exp_phase", label="exp_phase", lipschitz_const=1.0)


def sqrt_pointwise() -> OperatorSpec:
    return OperatorSpec(kind="sqrt_pointwise", label="sqrt")


# -- application -----------------------------------------------------------------


def _blur_values(chart: ChartDomain, values: np.ndarray, sigma: float) -> np.ndarray:
    """Gaussian filter with sigma in chart units, periodic or zero-padded."""
    if chart.periodic:
        freq = np.meshgrid(
            *[np.fft.fftfreq(n, d=h) for n, h in zip(chart.resolution, chart.spacing)],
            indexing="ij",
        )
        mult = np.ones(chart.shape)
        for fr in freq:
            mult = mult * np.exp(-0.5 * (2.0 * np.pi * fr * sigma) ** 2)
        return np.real(np.fft.ifftn(np.fft.fftn(values) * mult))
    cells = [sigma / h for h in chart.spacing]
    return ndimage.gaussian_filter(values, sigma=cells, mode="constant", cval=0.0)


def _disc_kernel(chart: ChartDomain, radius: float) -> np.ndarray:
    """Normalized indicator of a ball around the grid origin (wrapped layout)."""
    axes = []
    for n, h, period in zip(chart.resolution, chart.spacing, chart.periods):
        x = h * np.arange(n)
        if chart.periodic:
            x = x - period * np.round(x / period)
        else:
            x = x - x[n // 2]
        axes.append(x)
    grids = np.meshgrid(*axes, indexing="ij")
    dist2 = sum(g**2 for g in grids)
    kern = (dist2 < radius**2).astype(np.float64)
    total = kern.sum()
    if total == 0:
        raise ValueError("averaging radius below the grid spacing")
    return kern / total


def _average_values(chart: ChartDomain, values: np.ndarray, radius: float) -> np.ndarray:
    kern = _disc_kernel(chart, radius)
    if chart.periodic:
        return np.real(np.fft.ifftn(np.fft.fftn(values) * np.fft.fftn(kern)))
    from scipy.signal import fftconvolve

    return fftconvolve(values, kern, mode="same")


def apply(op: OperatorSpec, f: Field):
    """Evaluate the operator on a sampled field.

    exp_phase returns a pair (real part, imaginary part) of scalar fields;
    everything else returns a field of the input kind.
    """
    if op.acts_on != "both" and op.acts_on != f.kind:
        raise ChartMismatchError(
            f"operator {op.label!r} acts on {op.acts_on} fields, got {f.kind}"
        )
    if op.kind == "pointwise_scalar":
        return f.with_values(op.rho(f.values))
    if op.kind == "scalar_multiple":
        return f.with_values(op.lam * f.values)
    if op.kind == "vector_gain":
        mag = np.sqrt(np.einsum("...i,...i->...", f.values, f.values))
        gain = np.zeros_like(mag)
        nz = mag > 0
        gain[nz] = op.rho(mag[nz]) / mag[nz]
        return f.with_values(gain[..., None] * f.values)
    if op.kind == "gaussian_blur":
        if f.kind == "scalar":
            return f.with_values(_blur_values(f.chart, f.values, op.sigma))
        comps = [
            _blur_values(f.chart, f.values[..., k], op.sigma) for k in range(f.chart.dim)
        ]
        return f.with_values(np.stack(comps, axis=-1))
    if op.kind == "local_average":
        if f.kind == "scalar":
            return f.with_values(_average_values(f.chart, f.values, op.radius))
        comps = [
            _average_values(f.chart, f.values[..., k], op.radius) for k in range(f.chart.dim)
        ]
        return f.with_values(np.stack(comps, axis=-1))
    if op.kind == "sup":
        peak = float(np.max(np.abs(f.values))) if f.values.size else 0.0
        return f.with_values(np.full_like(f.values, peak))
    if op.kind == "exp_phase":
        return (
            f.with_values(np.cos(f.values)),
            f.with_values(np.sin(f.values)),
        )
    if op.kind == "sqrt_pointwise":
        if np.any(f.values < 0):
            warnings.warn(
                f"sqrt applied to a field with negative samples "
                f"(min {f.values.min():.3g}); they are clamped to 0",
                stacklevel=2,
            )
        return f.with_values(np.sqrt(np.maximum(f.values, 0.0)))
    raise ValueError(f"unknown operator kind {op.kind!r}")


def m_zero_image(op: OperatorSpec, chart: ChartDomain):
    """The image of the zero field (constant for every equivariant member)."""
    zero = zero_vector(chart) if op.acts_on == "vector" else zero_scalar(chart)
    return apply(op, zero)


def verify_declared_lipschitz(op: OperatorSpec, samples: int = 10_000, seed: int = 0) -> float:
    """Measured sup of |rho(a)-rho(b)|/|a-b| over random real pairs."""
    if op.rho is None:
        raise ValueError("operator has no scalar profile to verify")
    rng = np.random.default_rng(seed)
    a = rng.uniform(-4.0, 4.0, samples)
    b = rng.uniform(-4.0, 4.0, samples)
    keep = np.abs(a - b) > 1e-12
    ratios = np.abs(op.rho(a[keep]) - op.rho(b[keep])) / np.abs(a[keep] - b[keep])
    return float(ratios.max())


def lipschitz_estimate(
    op: OperatorSpec,
    p: float,
    trials: int,
    chart: ChartDomain,
    seed: int = 0,
    pair_scale: Optional[float] = None,
) -> float:
    """Seeded lower-bound estimate of the operator's Lipschitz constant.

    pair_scale concentrates the random field pairs near zero (both fields
    O(pair_scale), separation O(pair_scale)), which exposes profiles whose
    local constant blows up at the origin, like the square root.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    lo, hi = chart.interior_bounds()
    min_period = float(chart.periods.min())
    best = 0.0
    for _ in range(trials):
        radius = rng.uniform(0.1, 0.2) * min_period
        c_lo = lo + radius if not chart.periodic else lo
        c_hi = hi - radius if not chart.periodic else hi
        center = rng.uniform(c_lo, c_hi)
        if pair_scale is None:
            amp_f = rng.uniform(0.3, 1.5)
            amp_h = amp_f + rng.uniform(-0.2, 0.2)
        else:
            amp_f = pair_scale * rng.uniform(1.0, 2.0)
            amp_h = amp_f + pair_scale * rng.uniform(0.05, 0.2)
        base = make_bump(chart, center, radius, 1.0)
        if op.acts_on == "vector":
            direction = rng.standard_normal(chart.dim)
            direction /= np.linalg.norm(direction)
            vals_f = base.values[..., None] * (amp_f * direction)
            vals_h = base.values[..., None] * (amp_h * direction)
            f = SampledVectorField(chart, vals_f)
            h = SampledVectorField(chart, vals_h)
        else:
            f = base.with_values(amp_f * base.values)
            h = base.with_values(amp_h * base.values)
        sep = lp_norm(
            f.with_values(f.values - h.values), p
        )
        if sep < 1e-300:
            continue
        mf, mh = apply(op, f), apply(op, h)
        if isinstance(mf, tuple):
            gaps = [lp_norm(a.with_values(a.values - b.values), p) for a, b in zip(mf, mh)]
            gap = float(np.sqrt(sum(g**2 for g in gaps)))
        else:
            gap = lp_norm(mf.with_values(mf.values - mh.values), p)
        best = max(best, gap / sep)
    return best


# -- config records -----------------------------------------------------------------


def operator_from_record(rec: dict) -> OperatorSpec:
    kind = rec["kind"]
    if kind == "pointwise_scalar":
        return pointwise_scalar(rec["rho"], rec.get("lipschitz_const"), rec.get("label"))
    if kind == "scalar_multiple":
        return scalar_multiple(rec["lam"], rec.get("label"))
    if kind == "vector_gain":
        return vector_gain(rec.get("rho", "tanh"), rec.get("lipschitz_const"), rec.get("label"))
    if kind == "gaussian_blur":
        return gaussian_blur(rec["sigma"], rec.get("label"))
    if kind == "local_average":
        return local_average(rec["radius"], rec.get("label"))
    if kind == "sup":
        return sup_operator()
    if kind == "exp_phase":
        return exp_phase()
    if kind == "sqrt_pointwise":
        return sqrt_pointwise()
    raise ValueError(f"unknown operator kind {kind!r}")


def operator_to_record(op: OperatorSpec) -> dict:
    rec = {"kind": op.kind, "label": op.label}
    if op.kind in ("pointwise_scalar", "vector_gain"):
        if op.rho_name is None:
            raise ValueError(f"{op.label}: custom profiles are not serializable")
        rec["rho"] = op.rho_name
        rec["lipschitz_const"] = op.lipschitz_const
    if op.lam is not None:
        rec["lam"] = op.lam
    if op.sigma is not None:
        rec["sigma"] = op.sigma
    if op.radius is not None:
        rec["radius"] = op.radius
    return rec
