import numpy as np
import pytest

from diffeolab import diffeo as df
from diffeolab import fields as fl
from diffeolab import geometry as geo
from diffeolab import transport as tp
from diffeolab.banks import standard_diffeo_bank
from diffeolab.errors import MarginViolationError


def test_identity_pullback_bitexact(torus2_128, rng):
    ident = df.identity(torus2_128)
    f = fl.make_bump(torus2_128, (0.5, 0.5), 0.3, 1.0)
    out = tp.pullback_scalar(ident, f)
    assert np.array_equal(out.field.values, f.values)
    v = fl.SampledVectorField(torus2_128, rng.standard_normal(torus2_128.shape + (2,)))
    outv = tp.pullback_vector(ident, v)
    assert np.allclose(outv.field.values, v.values, atol=1e-15)


def test_translation_shifts_samples(torus2_128):
    phi = df.make_translation(torus2_128, (0.25, 0.0))
    f = fl.sample_scalar(torus2_128, lambda p: np.sin(2 * np.pi * p[:, 0]))
    out = tp.pullback_scalar(phi, f).field
    # output at 0 equals the input at 0.25 (grid-aligned, hence exact)
    i0 = 0
    i_shift = 32 * 128
    assert out.flat()[i0] == f.flat()[i_shift]


def test_scalar_support_expands_through_contraction(torus2_256):
    # the output support is the preimage of the input support, one cell slack
    phi = df.make_contraction(torus2_256, 4, 0.4, (0.5, 0.5), 0.2)
    f = fl.make_bump(torus2_256, (0.5, 0.5), 0.04, 1.0)
    out = tp.pullback_scalar(phi, f).field
    dist = np.linalg.norm(torus2_256.min_image(torus2_256.nodes(), np.array([0.5, 0.5])), axis=1)
    support = np.abs(out.flat()) > 1e-12
    h = 1.0 / 256
    # forward maps B(c, 4*0.04) onto B(c, 0.04), so the support quadruples;
    # the preimage also stretches the 2-cell interpolation stencil by 4
    assert dist[support].max() <= 4 * (0.04 + 2.5 * h)
    assert dist[support].max() >= 4 * (0.04 - 2.5 * h)


def test_vector_pullback_scales_by_inverse_jacobian(torus2_128):
    # inside the inner ball the inverted contraction has jacobian n, so the
    # transported constant field is divided by n
    n = 2
    phi = df.make_contraction(torus2_128, n, 0.5, (0.5, 0.5), 0.2).inverted()
    f = fl.sample_vector(
        torus2_128, lambda p: np.stack([np.full(len(p), 0.6), np.zeros(len(p))], axis=-1)
    )
    out = tp.pullback_vector(phi, f).field
    center_idx = np.argmin(
        np.linalg.norm(torus2_128.nodes() - np.array([0.5, 0.5]), axis=1)
    )
    got = out.flat()[center_idx]
    assert np.allclose(got, [0.6 / n, 0.0], atol=1e-12)


def test_vector_pullback_rotation_at_center(torus2_128):
    w = df.rotation_matrix_2d(np.pi / 2)
    phi = df.make_rotation_conjugation(torus2_128, w, fl.BallRegion((0.5, 0.5), 0.3), 0.15)
    f = fl.sample_vector(
        torus2_128,
        lambda p: np.stack([np.sin(2 * np.pi * p[:, 1]) + 0.5, np.cos(2 * np.pi * p[:, 0])], axis=-1),
    )
    out = tp.pullback_vector(phi, f).field
    center = np.array([[0.5, 0.5]])
    expected = w.T @ fl.eval_field(f, phi.forward(center))[0]
    center_idx = np.argmin(np.linalg.norm(torus2_128.nodes() - center[0], axis=1))
    assert np.allclose(out.flat()[center_idx], expected, atol=1e-10)


def test_locality_disjoint_supports_exact(torus2_256):
    phi = df.make_contraction(torus2_256, 3, 0.5, (0.25, 0.25), 0.1)
    f = fl.make_bump(torus2_256, (0.7, 0.7), 0.15, 1.0)
    out = tp.pullback_scalar(phi, f).field
    assert np.array_equal(out.values, f.values)


def test_margin_violation_raises():
    box = geo.make_box([(0.0, 1.0), (0.0, 1.0)], [64, 64], boundary_margin=0.0)
    # a translation is not a box diffeomorphism; emulate margin breakage with
    # a contraction whose support pokes past nothing -- use clip mode instead
    chart = geo.make_box([(0.0, 1.0), (0.0, 1.0)], [64, 64])
    f = fl.make_bump(chart, (0.5, 0.5), 0.2, 1.0)

    shift = df.Diffeo(
        chart=chart,
        forward_fn=lambda pts: pts + 0.2,
        inverse_fn=lambda pts: pts - 0.2,
        jacobian_fn=lambda pts: np.tile(np.eye(2), (pts.shape[0], 1, 1)),
        support=None,
        label="raw-shift",
    )
    with pytest.raises(MarginViolationError):
        tp.pullback_scalar(shift, f)
    res = tp.pullback_scalar(shift, f, on_clip="zero")
    assert res.clipped_nodes > 0


def test_clipped_zero_on_torus(torus2_128):
    phi = df.make_translation(torus2_128, (0.4, 0.4))
    f = fl.make_bump(torus2_128, (0.5, 0.5), 0.3, 1.0)
    assert tp.pullback_scalar(phi, f).clipped_nodes == 0


def test_contravariance_identity_zero(torus2_128):
    ident = df.identity(torus2_128)
    f = fl.make_bump(torus2_128, (0.5, 0.5), 0.3, 1.0)
    assert tp.check_contravariance(ident, ident, f, 2.0) == 0.0


def test_contravariance_scalar_and_vector(torus2_256):
    bank = dict(standard_diffeo_bank(torus2_256))
    psi, phi = bank["rot90"], bank["contract3"]
    fs = fl.make_bump(torus2_256, (0.5, 0.5), 0.3, 1.0)
    fv = fl.make_vector_bump(torus2_256, (0.5, 0.5), 0.3, (0.8, 0.5))
    assert tp.check_contravariance(psi, phi, fs, 2.0) <= 5e-3
    assert tp.check_contravariance(psi, phi, fv, 2.0) <= 5e-3


def test_contravariance_refines_at_order_two():
    vals = []
    for n in (64, 128, 256):
        chart = geo.unit_torus(2, n)
        psi = df.make_rotation_conjugation(
            chart, df.rotation_matrix_2d(0.8), fl.BallRegion((0.5, 0.5), 0.3), 0.15
        )
        phi = df.make_contraction(chart, 2, 0.5, (0.52, 0.5), 0.16)
        f = fl.make_vector_bump(chart, (0.5, 0.5), 0.3, (0.8, 0.5))
        vals.append(tp.check_contravariance(psi, phi, f, 2.0))
    assert np.log2(vals[0] / vals[1]) >= 2.0
    assert np.log2(vals[1] / vals[2]) >= 2.0


def test_operator_norm_identity(torus2_128):
    est = tp.operator_norm_estimate(df.identity(torus2_128), 8, 2.0, "vector", seed=1)
    assert est.estimate == pytest.approx(1.0, abs=1e-9)
    assert est.analytic_bound == pytest.approx(np.sqrt(2.0), abs=1e-9)


def test_operator_norm_below_bound(torus2_256):
    for name, phi in standard_diffeo_bank(torus2_256)[:4]:
        est = tp.operator_norm_estimate(phi, 16, 2.0, "vector", seed=2)
        assert est.estimate <= est.analytic_bound * 1.01, name


def test_scalar_norm_grows_with_contraction_strength(torus2_256):
    # scalar pullback through a contraction inflates mass like the volume change
    ratios = []
    for n in (2, 3, 4):
        phi = df.make_contraction(torus2_256, n, 0.4, (0.5, 0.5), 0.2)
        f = fl.make_bump(torus2_256, (0.5, 0.5), 0.2 / n, 1.0)
        out = tp.pullback_scalar(phi, f).field
        ratios.append(fl.lp_norm(out, 2.0) / fl.lp_norm(f, 2.0))
    assert ratios[0] < ratios[1] < ratios[2]
    assert ratios[0] > 1.1


def test_interp_residual_reported(torus2_128):
    phi = df.make_contraction(torus2_128, 3, 0.5, (0.5, 0.5), 0.18)
    f = fl.make_bump(torus2_128, (0.5, 0.5), 0.3, 1.0)
    res = tp.pullback_scalar(phi, f, compute_residual=True)
    assert res.interp_residual > 0
    res_id = tp.pullback_scalar(df.identity(torus2_128), f, compute_residual=True)
    assert res_id.interp_residual == 0.0
