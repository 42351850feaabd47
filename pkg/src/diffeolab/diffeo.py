"""Diffeomorphism constructors with exact or finite-difference Jacobians.

Every constructor returns a :class:`Diffeo` bound to a chart. Radial
constructions act through displacement updates that are forced to exact zero
outside the declared support, so points there are fixed bitwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg

from . import profiles
from .errors import (
    ChartMismatchError,
    ConstructionError,
    DegenerateFieldError,
    SingularJacobianError,
    StepBudgetError,
)
from .fields import (
    BallRegion,
    SampledVectorField,
    check_region,
    eval_field,
    region_mask,
    vector_magnitude,
)
from .geometry import ChartDomain


@dataclass
class Diffeo:
    """A chart diffeomorphism: forward and inverse maps plus the Jacobian.

    support is the declared ball outside which the map is the identity
    (None means no such ball is declared). params, when present, is a JSON
    round-trippable constructor record.
    """

    chart: ChartDomain
    forward_fn: Callable[[np.ndarray], np.ndarray]
    inverse_fn: Callable[[np.ndarray], np.ndarray]
    jacobian_fn: Callable[[np.ndarray], np.ndarray]
    support: Optional[BallRegion]
    label: str
    params: Optional[dict] = field(default=None, repr=False)

    def forward(self, points: np.ndarray) -> np.ndarray:
        return self.forward_fn(np.atleast_2d(np.asarray(points, dtype=np.float64)))

    def inverse(self, points: np.ndarray) -> np.ndarray:
        return self.inverse_fn(np.atleast_2d(np.asarray(points, dtype=np.float64)))

    def jacobian(self, points: np.ndarray) -> np.ndarray:
        return self.jacobian_fn(np.atleast_2d(np.asarray(points, dtype=np.float64)))

    def inverted(self) -> "Diffeo":
        """The inverse diffeomorphism (forward and inverse swapped)."""

        def jac(pts):
            back = self.inverse_fn(pts)
            return np.linalg.inv(self.jacobian_fn(back))

        params = {"kind": "inverse", "of": self.params} if self.params else None
        return Diffeo(
            chart=self.chart,
            forward_fn=self.inverse_fn,
            inverse_fn=self.forward_fn,
            jacobian_fn=jac,
            support=self.support,
            label=f"inv({self.label})",
            params=params,
        )


# -- small shared helpers ------------------------------------------------------


def _norms(disp: np.ndarray) -> np.ndarray:
    return np.sqrt(np.einsum("ij,ij->i", disp, disp))


def _outer(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.einsum("ni,nj->nij", a, b)


def _eye(npts: int, d: int) -> np.ndarray:
    out = np.zeros((npts, d, d))
    out[:, range(d), range(d)] = 1.0
    return out


def _newton_inverse(phi_forward, phi_jacobian, targets, x0, tol=1e-10, max_iter=50):
    """Vectorized Newton solve of forward(x) = target."""
    x = x0.copy()
    for _ in range(max_iter):
        res = phi_forward(x) - targets
        err = np.max(np.abs(res)) if res.size else 0.0
        if err < tol:
            break
        jac = phi_jacobian(x)
        x = x - np.linalg.solve(jac, res[..., None])[..., 0]
    return x


# -- identity and translation ----------------------------------------------------


def identity(chart: ChartDomain) -> Diffeo:
    eye = lambda pts: pts.copy()
    return Diffeo(
        chart=chart,
        forward_fn=eye,
        inverse_fn=eye,
        jacobian_fn=lambda pts: _eye(pts.shape[0], chart.dim),
        support=None,
        label="identity",
        params={"kind": "identity"},
    )


def make_translation(chart: ChartDomain, offset: Sequence[float]) -> Diffeo:
    """Rigid translation; only a torus admits it as a diffeomorphism."""
    if not chart.periodic:
        raise ConstructionError("translations are only defined on torus charts")
    offset = np.asarray(offset, dtype=np.float64)
    if offset.shape != (chart.dim,):
        raise ConstructionError("offset dimension mismatch")

    def fwd(pts):
        return chart.wrap(pts + offset)

    def inv(pts):
        return chart.wrap(pts - offset)

    return Diffeo(
        chart=chart,
        forward_fn=fwd,
        inverse_fn=inv,
        jacobian_fn=lambda pts: _eye(pts.shape[0], chart.dim),
        support=None,
        label=f"translate({tuple(np.round(offset, 6))})",
        params={"kind": "translation", "offset": offset.tolist()},
    )


# -- contraction family ------------------------------------------------------------


def make_contraction(
    chart: ChartDomain,
    n: int,
    eps: float,
    center: Sequence[float],
    scale: float = 1.0,
) -> Diffeo:
    """Radial contraction squeezing B(center, scale) onto B(center, scale/n).

    The radial gain is 1/n up to radius scale, 1 beyond scale*(1+eps), and a
    C-infinity monotone ramp between, so the map is supported in the ball of
    radius scale*(1+eps) and its Jacobian has operator norm exactly 1/n on the
    inner ball.
    """
    n = int(n)
    if n < 1:
        raise ConstructionError("contraction index n must be >= 1")
    if eps <= 0:
        raise ConstructionError("transition width eps must be positive")
    center = np.asarray(center, dtype=np.float64)
    outer = scale * (1.0 + eps)
    support = BallRegion(tuple(center), outer)
    check_region(chart, support)

    lo_gain = 1.0 / n

    def gain(r):
        # radial multiplier: exactly lo_gain for r <= scale, exactly 1 beyond
        s = profiles.smooth_step((r / scale - 1.0) / eps)
        g = lo_gain + (1.0 - lo_gain) * s
        g[r >= outer] = 1.0
        g[r <= scale] = lo_gain
        return g

    def dgain(r):
        return (1.0 - lo_gain) * profiles.smooth_step_deriv((r / scale - 1.0) / eps) / (
            eps * scale
        )

    def fwd(pts):
        disp = chart.min_image(pts, center)
        r = _norms(disp)
        out = pts.copy()
        m = r < outer
        if m.any():
            out[m] = chart.wrap(center + gain(r[m])[:, None] * disp[m])
        return out

    def inv(pts):
        disp = chart.min_image(pts, center)
        t = _norms(disp)
        out = pts.copy()
        m = (t < outer) & (t > 0)
        if m.any():
            tm = t[m]
            # solve r*gain(r) = t by bisection on the monotone radial map
            lo = tm.copy()
            hi = np.minimum(n * tm, np.full_like(tm, outer))
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                too_small = mid * gain(mid) < tm
                lo = np.where(too_small, mid, lo)
                hi = np.where(too_small, hi, mid)
            r = 0.5 * (lo + hi)
            out[m] = chart.wrap(center + (r / tm)[:, None] * disp[m])
        return out

    def jac(pts):
        disp = chart.min_image(pts, center)
        r = _norms(disp)
        out = _eye(pts.shape[0], chart.dim)
        m = r < outer
        if m.any():
            g = gain(r[m])
            out[m] = g[:, None, None] * _eye(int(m.sum()), chart.dim)
            blend = m.copy()
            blend[m] = (r[m] > scale) & (r[m] < outer)
            if blend.any():
                rb = r[blend]
                db = disp[blend]
                out[blend] += (dgain(rb) / rb)[:, None, None] * _outer(db, db)
        return out

    return Diffeo(
        chart=chart,
        forward_fn=fwd,
        inverse_fn=inv,
        jacobian_fn=jac,
        support=support,
        label=f"contraction(n={n})",
        params={
            "kind": "contraction",
            "n": n,
            "eps": eps,
            "center": center.tolist(),
            "scale": scale,
        },
    )


# -- compactly supported point transport -----------------------------------------


def transport_min_steps(x0, x1, rho) -> int:
    """Smallest step count satisfying the per-step displacement bound."""
    x0 = np.asarray(x0, dtype=np.float64)
    x1 = np.asarray(x1, dtype=np.float64)
    length = float(np.linalg.norm(x1 - x0))
    if length == 0.0:
        return 1
    eta = _transport_eta(length, rho)
    bound = eta / (4.0 * profiles.BUMP_OF_SQUARE_DERIV_SUP)
    return int(np.ceil(length / bound))


def _transport_eta(length: float, rho: float) -> float:
    eta = 0.98 * (rho - 0.5 * length)
    if eta <= 0:
        raise ConstructionError("endpoints too far apart for the ambient ball radius rho")
    return eta


def make_point_transport(
    chart: ChartDomain,
    x0: Sequence[float],
    x1: Sequence[float],
    rho: float,
    steps: int,
) -> Diffeo:
    """Compactly supported map carrying x0 exactly onto x1.

    Composition of small moves x -> x + (w_{i+1} - w_i) * b(|x - w_i|^2/eta^2)
    along the segment from x0 to x1, where b is a smooth bump with b(0) = 1.
    Each step displacement is bounded by eta / (4 sup|b'|), which keeps every
    step a diffeomorphism; violating the bound raises StepBudgetError.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    x1 = np.asarray(x1, dtype=np.float64)
    steps = int(steps)
    if steps < 1:
        raise ConstructionError("steps must be >= 1")
    center = 0.5 * (x0 + x1)
    support = BallRegion(tuple(center), rho)
    check_region(chart, support)
    length = float(np.linalg.norm(x1 - x0))
    if length == 0.0:
        return identity(chart)
    eta = _transport_eta(length, rho)
    delta = length / steps
    bound = eta / (4.0 * profiles.BUMP_OF_SQUARE_DERIV_SUP)
    if delta > bound:
        raise StepBudgetError(
            f"per-step displacement {delta:.3e} exceeds the bound {bound:.3e}; "
            f"need at least {transport_min_steps(x0, x1, rho)} steps"
        )

    waypoints = [x0 + (k / steps) * (x1 - x0) for k in range(steps + 1)]
    inv_eta2 = 1.0 / (eta * eta)

    def step_tau(k, local):
        # local: coordinates relative to nothing (absolute, unwrapped)
        d = local - waypoints[k]
        q = np.einsum("ij,ij->i", d, d) * inv_eta2
        amp = profiles.bump_of_square(q)
        return amp, d, q

    def fwd(pts):
        # work in unwrapped coordinates near the segment
        local = pts.copy()
        if chart.periodic:
            local = center + chart.min_image(pts, center)
        moved = np.zeros(pts.shape[0], dtype=bool)
        for k in range(steps):
            amp, _, _ = step_tau(k, local)
            hot = amp > 0
            if hot.any():
                local[hot] = local[hot] + amp[hot, None] * (waypoints[k + 1] - waypoints[k])
                moved |= hot
        out = pts.copy()
        if moved.any():
            out[moved] = chart.wrap(local[moved])
        return out

    def step_jacobian(k, local):
        amp, d, q = step_tau(k, local)
        dait = profiles.bump_of_square_deriv(q) * 2.0 * inv_eta2
        jk = _eye(local.shape[0], chart.dim)
        hot = amp > 0
        if hot.any():
            delta_vec = waypoints[k + 1] - waypoints[k]
            dh = d[hot]
            jk[hot] += _outer(np.broadcast_to(delta_vec, dh.shape), dh) * dait[hot, None, None]
        return jk, hot

    def jac(pts):
        local = pts.copy()
        if chart.periodic:
            local = center + chart.min_image(pts, center)
        total = _eye(pts.shape[0], chart.dim)
        for k in range(steps):
            jk, hot = step_jacobian(k, local)
            if hot.any():
                total[hot] = np.einsum("nij,njk->nik", jk[hot], total[hot])
                amp, _, _ = step_tau(k, local)
                local[hot] = local[hot] + amp[hot, None] * (waypoints[k + 1] - waypoints[k])
        return total

    def inv(pts):
        local = pts.copy()
        if chart.periodic:
            local = center + chart.min_image(pts, center)
        touched = np.zeros(pts.shape[0], dtype=bool)
        for k in range(steps - 1, -1, -1):
            delta_vec = waypoints[k + 1] - waypoints[k]
            y = local.copy()
            # fixed-point iteration: contraction rate < 1/2 by the step bound
            for _ in range(48):
                amp, _, _ = step_tau(k, y)
                y = local - amp[:, None] * delta_vec
            amp, _, _ = step_tau(k, y)
            hot = amp > 0
            if hot.any():
                local[hot] = y[hot]
                touched |= hot
        out = pts.copy()
        if touched.any():
            out[touched] = chart.wrap(local[touched])
        return out

    return Diffeo(
        chart=chart,
        forward_fn=fwd,
        inverse_fn=inv,
        jacobian_fn=jac,
        support=support,
        label=f"transport({tuple(np.round(x0, 3))}->{tuple(np.round(x1, 3))})",
        params={
            "kind": "point_transport",
            "x0": x0.tolist(),
            "x1": x1.tolist(),
            "rho": rho,
            "steps": steps,
        },
    )


# -- blended linear conjugations ---------------------------------------------------


def _real_matrix_log(w: np.ndarray) -> np.ndarray:
    a = scipy.linalg.logm(w)
    if np.iscomplexobj(a):
        if np.max(np.abs(a.imag)) > 1e-10:
            raise ConstructionError(
                "matrix has no real logarithm (not on a one-parameter subgroup); "
                "decompose it into such factors first"
            )
        a = a.real
    if np.max(np.abs(scipy.linalg.expm(a) - w)) > 1e-9:
        raise ConstructionError("matrix logarithm verification failed")
    return np.asarray(a, dtype=np.float64)


def _make_blended_linear(
    chart: ChartDomain,
    w: np.ndarray,
    region: BallRegion,
    eps_blend: float,
    label: str,
    params: dict,
) -> Diffeo:
    """phi(u) = center + exp(s(r) A) (u - center), A = log W.

    Exactly W inside radius (region.radius - eps_blend), exactly the identity
    outside region.radius, blended along the one-parameter subgroup between.
    """
    d = chart.dim
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (d, d):
        raise ConstructionError("matrix dimension mismatch")
    check_region(chart, region)
    if not 0 < eps_blend < region.radius:
        raise ConstructionError("eps_blend must lie strictly between 0 and the region radius")
    center = region.center_array()
    r_out = region.radius
    r_in = region.radius - eps_blend

    if np.max(np.abs(w - np.eye(d))) < 1e-14:
        return identity(chart)

    a = _real_matrix_log(w)
    # A is normal (skew for rotations, symmetric for stretches), so a complex
    # eigenbasis diagonalizes exp(tA) for all t simultaneously.
    lam, pmat = np.linalg.eig(a)
    pinv = np.linalg.inv(pmat)

    def apply_exp(t, vecs):
        """exp(t A) @ vecs, vectorized over rows (t per row)."""
        y = np.einsum("ij,nj->ni", pinv, vecs.astype(np.complex128))
        y = y * np.exp(np.multiply.outer(t, lam))
        return np.real(np.einsum("ij,nj->ni", pmat, y))

    def blend(r):
        s = profiles.smooth_step((r_out - r) / eps_blend)
        s[r <= r_in] = 1.0
        s[r >= r_out] = 0.0
        return s

    def dblend(r):
        return -profiles.smooth_step_deriv((r_out - r) / eps_blend) / eps_blend

    def fwd(pts):
        disp = chart.min_image(pts, center)
        r = _norms(disp)
        out = pts.copy()
        m = r < r_out
        if m.any():
            t = blend(r[m])
            out[m] = chart.wrap(center + apply_exp(t, disp[m]))
        return out

    def jac(pts):
        disp = chart.min_image(pts, center)
        r = _norms(disp)
        out = _eye(pts.shape[0], chart.dim)
        m = r < r_out
        if m.any():
            t = blend(r[m])
            # R(t) columns: apply exp(tA) to each basis vector
            rs = np.empty((int(m.sum()), d, d))
            for j in range(d):
                basis = np.zeros((int(m.sum()), d))
                basis[:, j] = 1.0
                rs[:, :, j] = apply_exp(t, basis)
            out[m] = rs
            bz = m.copy()
            bz[m] = (r[m] > r_in) & (r[m] < r_out)
            if bz.any():
                rb = r[bz]
                db = disp[bz]
                tb = blend(rb)
                ar_disp = np.einsum("ij,nj->ni", a, apply_exp(tb, db))
                sel = (r[m] > r_in) & (r[m] < r_out)
                out[bz] = rs[sel] + dblend(rb)[:, None, None] * _outer(ar_disp, db / rb[:, None])
        return out

    def inv(pts):
        disp = chart.min_image(pts, center)
        t_norm = _norms(disp)
        out = pts.copy()
        # preimages of the support ball stay in the support ball
        m = t_norm < r_out
        if m.any():
            target = pts[m]
            guess = chart.wrap(center + apply_exp(-blend(t_norm[m]), disp[m]))
            sol = _newton_inverse(
                lambda x: fwd(x),
                lambda x: jac(x),
                target,
                guess,
                tol=1e-12,
                max_iter=40,
            )
            out[m] = sol
        return out

    phi = Diffeo(
        chart=chart,
        forward_fn=fwd,
        inverse_fn=inv,
        jacobian_fn=jac,
        support=region,
        label=label,
        params=params,
    )
    _validate_orientation(phi, region)
    return phi


def _validate_orientation(phi: Diffeo, region: BallRegion) -> None:
    """Reject blended maps that fold (non-positive Jacobian determinant)."""
    chart = phi.chart
    rng = np.random.default_rng(7)
    d = chart.dim
    radii = np.linspace(0.0, region.radius, 64)
    dirs = rng.standard_normal((16, d))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    pts = region.center_array() + (radii[:, None, None] * dirs[None, :, :]).reshape(-1, d)
    pts = chart.wrap(pts)
    dets = np.linalg.det(phi.jacobian(pts))
    if np.min(dets) <= 1e-9:
        raise ConstructionError(
            f"map folds: min Jacobian determinant {np.min(dets):.3e} <= 0 "
            f"(widen the blend collar or weaken the matrix)"
        )


def make_rotation_conjugation(
    chart: ChartDomain,
    w: np.ndarray,
    region: BallRegion,
    eps_blend: float,
) -> Diffeo:
    """Exact rotation by an orthogonal W inside the region's inner ball,
    blended to the identity along the rotation's one-parameter subgroup."""
    w = np.asarray(w, dtype=np.float64)
    d = chart.dim
    if w.shape != (d, d) or np.max(np.abs(w.T @ w - np.eye(d))) > 1e-12:
        raise ConstructionError("W must be orthogonal to 1e-12")
    return _make_blended_linear(
        chart,
        w,
        region,
        eps_blend,
        label="rotation_conjugation",
        params={
            "kind": "rotation_conjugation",
            "w": w.tolist(),
            "center": list(region.center),
            "radius": region.radius,
            "eps_blend": eps_blend,
        },
    )


def make_stretch(
    chart: ChartDomain,
    scales: Sequence[float],
    region: BallRegion,
    eps_blend: float,
) -> Diffeo:
    """Anisotropic axis-aligned stretch inside the region, blended to identity."""
    scales = np.asarray(scales, dtype=np.float64)
    if scales.shape != (chart.dim,) or np.any(scales <= 0):
        raise ConstructionError("scales must be positive, one per axis")
    w = np.diag(scales)
    return _make_blended_linear(
        chart,
        w,
        region,
        eps_blend,
        label=f"stretch({tuple(np.round(scales, 4))})",
        params={
            "kind": "stretch",
            "scales": scales.tolist(),
            "center": list(region.center),
            "radius": region.radius,
            "eps_blend": eps_blend,
        },
    )


def rotation_matrix_2d(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


# -- composition ------------------------------------------------------------------


def _bounding_ball(chart: ChartDomain, b1: BallRegion, b2: BallRegion) -> Optional[BallRegion]:
    c1, c2 = b1.center_array(), b2.center_array()
    delta = chart.min_image(c2[None, :], c1)[0]
    dist = float(np.linalg.norm(delta))
    if dist + b2.radius <= b1.radius:
        ball = b1
    elif dist + b1.radius <= b2.radius:
        ball = b2
    else:
        radius = 0.5 * (dist + b1.radius + b2.radius)
        center = c1 + (radius - b1.radius) * (delta / dist if dist > 0 else 0.0)
        ball = BallRegion(tuple(chart.wrap(center[None, :])[0]), radius)
    if not chart.contains_ball(ball.center_array(), ball.radius):
        return None
    return ball


def compose(psi: Diffeo, phi: Diffeo) -> Diffeo:
    """compose(psi, phi).forward(u) = psi.forward(phi.forward(u))."""
    if psi.chart != phi.chart:
        raise ChartMismatchError("cannot compose diffeos on different charts")
    chart = psi.chart

    def fwd(pts):
        return psi.forward_fn(phi.forward_fn(pts))

    def inv(pts):
        return phi.inverse_fn(psi.inverse_fn(pts))

    def jac(pts):
        inner = phi.forward_fn(pts)
        return np.einsum("nij,njk->nik", psi.jacobian_fn(inner), phi.jacobian_fn(pts))

    if psi.support is None or phi.support is None:
        support = None
    else:
        support = _bounding_ball(chart, psi.support, phi.support)

    params = None
    if psi.params is not None and phi.params is not None:
        params = {"kind": "compose", "parts": [psi.params, phi.params]}
    return Diffeo(
        chart=chart,
        forward_fn=fwd,
        inverse_fn=inv,
        jacobian_fn=jac,
        support=support,
        label=f"{psi.label}∘{phi.label}",
        params=params,
    )


# -- flowbox straightening -----------------------------------------------------------


def _rk4_flow(field: SampledVectorField, seeds: np.ndarray, times: np.ndarray, steps: int):
    chart = field.chart
    h = (times / steps)[:, None]
    y = seeds.copy()
    for _ in range(steps):
        k1 = eval_field(field, chart.wrap(y))
        k2 = eval_field(field, chart.wrap(y + 0.5 * h * k1))
        k3 = eval_field(field, chart.wrap(y + 0.5 * h * k2))
        k4 = eval_field(field, chart.wrap(y + h * k3))
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return y


def _fd_jacobian(forward, pts: np.ndarray, steps: np.ndarray) -> np.ndarray:
    npts, d = pts.shape
    out = np.empty((npts, d, d))
    for a in range(d):
        e = np.zeros(d)
        e[a] = steps[a]
        plus = forward(pts + e)
        minus = forward(pts - e)
        out[:, :, a] = (plus - minus) / (2.0 * steps[a])
    return out


def flowbox_straighten(
    f: SampledVectorField,
    m: Sequence[float],
    radius: float,
    integrator_steps: int = 64,
) -> Diffeo:
    """Local straightening chart for a nonvanishing sampled vector field.

    Seeds the flow of f on the hyperplane through m transverse to f(m) and
    maps (transverse coords, flow time) to chart points with fixed-step RK4.
    Pulling f back through the returned map yields, on a ball around m, a
    field close to the constant field f(m); the gap is reported by
    :func:`straightening_residual`, never hidden.
    """
    chart = f.chart
    m = np.asarray(m, dtype=np.float64)
    d = chart.dim
    fm = eval_field(f, m[None, :])[0]
    speed = float(np.linalg.norm(fm))
    if speed <= 0:
        raise DegenerateFieldError("field vanishes at the base point")
    ball_nodes = region_mask(chart, BallRegion(tuple(m), radius))
    mags = vector_magnitude(f).flat()[ball_nodes]
    if mags.size and float(mags.min()) <= 0:
        raise DegenerateFieldError(
            "field vanishes inside the straightening ball; perturb it away from "
            "zero first (perturb_away_from_zero)"
        )

    # orthonormal frame with first axis along f(m)
    basis = np.eye(d)
    basis[:, 0] = fm / speed
    q, _ = np.linalg.qr(basis)
    if q[:, 0] @ fm < 0:
        q[:, 0] *= -1.0

    def fwd(pts):
        disp = chart.min_image(pts, m)
        z = disp @ q
        times = z[:, 0] / speed
        seeds = m + z[:, 1:] @ q[:, 1:].T
        return chart.wrap(_rk4_flow(f, seeds, times, integrator_steps))

    fd_steps = 0.5 * chart.spacing

    def jac(pts):
        return _fd_jacobian(fwd, pts, fd_steps)

    def inv(pts):
        return _newton_inverse(fwd, jac, pts, pts.copy(), tol=1e-10, max_iter=50)

    return Diffeo(
        chart=chart,
        forward_fn=fwd,
        inverse_fn=inv,
        jacobian_fn=jac,
        support=None,
        label=f"flowbox(m={tuple(np.round(m, 3))}, r={radius})",
        params=None,
    )


def straightening_residual(
    phi: Diffeo,
    f: SampledVectorField,
    m: Sequence[float],
    radius: float,
    p: float = 2.0,
) -> float:
    """L^p distance, over the ball around m, between the pulled-back field and
    the constant field f(m)."""
    chart = f.chart
    m = np.asarray(m, dtype=np.float64)
    keep = region_mask(chart, BallRegion(tuple(m), radius))
    pts = chart.nodes()[keep]
    fm = eval_field(f, m[None, :])[0]
    mapped = phi.forward(pts)
    jac = phi.jacobian(pts)
    dets = np.linalg.det(jac)
    if np.min(dets) <= 1e-12:
        raise SingularJacobianError("straightening Jacobian is singular on the ball")
    vals = eval_field(f, mapped)
    transported = np.linalg.solve(jac, vals[..., None])[..., 0]
    err = transported - fm
    w = chart.quad_weights[keep]
    total = w @ np.einsum("ij,ij->i", err, err) ** (p / 2.0)
    return float(total ** (1.0 / p))


# -- zero-set perturbation ------------------------------------------------------------


def perturb_away_from_zero(
    f: SampledVectorField, eps: float, region: BallRegion
) -> SampledVectorField:
    """Push a vector field away from zero on a region.

    Adds 2*eps*chi(u)*e where chi is a smooth cutoff equal to 1 where |f| <= eps
    and 0 where |f| >= 2*eps, with the direction e chosen per connected
    near-zero component (mean field direction on the surrounding shell, first
    axis when that degenerates).
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    chart = f.chart
    check_region(chart, region)
    in_region = region_mask(chart, region)
    mag = vector_magnitude(f).flat()
    if float(mag[in_region].min(initial=np.inf)) > 2.0 * eps:
        return f

    cutoff = profiles.TransitionProfile(1.0, 0.0)
    chi = cutoff.evaluate((mag - eps) / eps)
    chi[~in_region] = 0.0

    from scipy import ndimage

    near_zero = (mag <= eps) & in_region
    labels, count = ndimage.label(near_zero.reshape(chart.shape))
    labels = labels.reshape(-1)
    flat = f.flat().copy()
    shell = (mag > eps) & (mag < 2.0 * eps) & in_region

    structure = np.ones((3,) * chart.dim, dtype=bool)
    for comp in range(1, count + 1):
        comp_mask = labels == comp
        grown = ndimage.binary_dilation(
            comp_mask.reshape(chart.shape), structure=structure, iterations=3
        ).reshape(-1)
        ring = grown & shell
        direction = flat[ring].mean(axis=0) if ring.any() else np.zeros(chart.dim)
        nrm = np.linalg.norm(direction)
        if nrm < 1e-12:
            direction = np.zeros(chart.dim)
            direction[0] = 1.0
        else:
            direction = direction / nrm
        local = comp_mask | (grown & (chi > 0))
        flat[local] += (2.0 * eps * chi[local])[:, None] * direction

    # nodes in the transition shell not attached to any labeled component
    loose = (chi > 0) & ~near_zero
    for comp in range(1, count + 1):
        grown = ndimage.binary_dilation(
            (labels == comp).reshape(chart.shape), structure=structure, iterations=3
        ).reshape(-1)
        loose &= ~grown
    if loose.any():
        e1 = np.zeros(chart.dim)
        e1[0] = 1.0
        flat[loose] += (2.0 * eps * chi[loose])[:, None] * e1

    return f.with_values(flat.reshape(f.values.shape))


# -- serialization ---------------------------------------------------------------------


def diffeo_from_json_dict(chart: ChartDomain, data: dict) -> Diffeo:
    kind = data["kind"]
    if kind == "identity":
        return identity(chart)
    if kind == "translation":
        return make_translation(chart, data["offset"])
    if kind == "contraction":
        return make_contraction(
            chart, data["n"], data["eps"], data["center"], data.get("scale", 1.0)
        )
    if kind == "point_transport":
        return make_point_transport(chart, data["x0"], data["x1"], data["rho"], data["steps"])
    if kind == "rotation_conjugation":
        region = BallRegion(tuple(data["center"]), data["radius"])
        return make_rotation_conjugation(chart, np.asarray(data["w"]), region, data["eps_blend"])
    if kind == "stretch":
        region = BallRegion(tuple(data["center"]), data["radius"])
        return make_stretch(chart, data["scales"], region, data["eps_blend"])
    if kind == "compose":
        parts = [diffeo_from_json_dict(chart, part) for part in data["parts"]]
        out = parts[0]
        for nxt in parts[1:]:
            out = compose(out, nxt)
        return out
    if kind == "inverse":
        return diffeo_from_json_dict(chart, data["of"]).inverted()
    raise ConstructionError(f"unknown diffeo kind {kind!r}")


def diffeo_to_json_dict(phi: Diffeo) -> dict:
    if phi.params is None:
        raise ConstructionError(f"{phi.label}: not serializable (no constructor record)")
    return phi.params
