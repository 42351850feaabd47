import numpy as np
import pytest

from diffeolab import analysis as an
from diffeolab import diffeo as df
from diffeolab import fields as fl
from diffeolab import geometry as geo
from diffeolab import operators as ops
from diffeolab.banks import scalar_field_bank
from diffeolab.errors import BudgetError, CoverError, RegionError, UnderResolvedError


@pytest.fixture(scope="module")
def t128():
    return geo.unit_torus(2, 128)


@pytest.fixture(scope="module")
def contraction(t128):
    return df.make_contraction(t128, 3, 0.5, (0.5, 0.5), 0.18)


def test_defect_identity_exact(t128):
    f = fl.make_bump(t128, (0.5, 0.5), 0.3, 1.0)
    rep = an.equivariance_defect(ops.pointwise_scalar("tanh"), df.identity(t128), f, 2.0)
    assert rep.defect_abs == 0.0
    assert rep.defect_rel == 0.0


def test_defect_pointwise_small_blur_large(t128, contraction):
    f, _ = scalar_field_bank(t128)[1][1], None
    rep_tanh = an.equivariance_defect(ops.pointwise_scalar("tanh"), contraction, f, 2.0)
    rep_blur = an.equivariance_defect(ops.gaussian_blur(0.05), contraction, f, 2.0)
    assert rep_tanh.defect_rel < 5e-3
    assert rep_blur.defect_rel > 0.1
    assert rep_tanh.defect_rel <= 10 * rep_tanh.interp_residual
    assert rep_blur.defect_rel > 10 * rep_blur.interp_residual


def test_scalar_suite_verdicts():
    consistent = an.falsification_suite_scalar(
        ops.pointwise_scalar("relu"), budget=24, levels=(64, 128)
    )
    assert consistent.status == "consistent-with-pointwise"
    assert consistent.witness is None

    falsified = an.falsification_suite_scalar(
        ops.gaussian_blur(0.05), budget=24, levels=(64, 128)
    )
    assert falsified.status == "falsified"
    assert falsified.witness is not None
    assert falsified.witness.defect_rel > 0.1


def test_sup_consistent_but_nonlocal(t128):
    verdict = an.falsification_suite_scalar(ops.sup_operator(), budget=12, levels=(64, 128))
    assert verdict.status == "consistent-with-pointwise"
    # the locality probe still separates it from pointwise operators
    f = fl.make_bump(t128, (0.5, 0.5), 0.3, 1.0)
    gap = an.localization_check(ops.sup_operator(), f, fl.BallRegion((0.3, 0.3), 0.15), 2.0)
    assert gap > 0.1


def test_vector_suite_lambda_fit():
    verdict = an.falsification_suite_vector(
        ops.scalar_multiple(-1.5), budget=24, levels=(64, 128)
    )
    assert verdict.status == "consistent-with-scalar-multiple"
    assert verdict.fitted_lambda == pytest.approx(-1.5, abs=1e-6)
    assert verdict.lambda_residual < 1e-9


def test_vector_suite_falsifies_gain_and_blur():
    gain = an.falsification_suite_vector(ops.vector_gain("tanh"), budget=24, levels=(64, 128))
    assert gain.falsified
    blur = an.falsification_suite_vector(ops.gaussian_blur(0.05), budget=24, levels=(64, 128))
    assert blur.falsified


def test_decay_identity_profile(t128):
    f = fl.make_vector_bump(t128, (0.5, 0.5), 0.3, (0.7, 0.7))
    curve = an.contraction_decay_test(f, (0.5, 0.5), [1], 2.0, scale=0.3)
    base = fl.lp_norm(fl.mask_field(f, fl.BallRegion((0.5, 0.5), 0.3)), 2.0) ** 2
    assert curve.norms[0] == pytest.approx(base, rel=1e-12)
    assert np.isnan(curve.fitted_rate)


def test_decay_bound_and_slope():
    chart = geo.unit_torus(2, 256)
    f = fl.make_vector_bump(chart, (0.5, 0.5), 0.3, (0.7, 0.7))
    curve = an.contraction_decay_test(f, (0.5, 0.5), [2, 4, 8], 2.0, scale=0.3)
    for val, bound in zip(curve.norms, curve.bounds):
        assert val <= bound * 1.05
    assert curve.fitted_rate <= -(2 + 1) + 0.3


def test_decay_under_resolved():
    chart = geo.unit_torus(2, 64)
    f = fl.make_vector_bump(chart, (0.5, 0.5), 0.3, (0.7, 0.7))
    with pytest.raises(UnderResolvedError):
        an.contraction_decay_test(f, (0.5, 0.5), [2, 4, 64], 2.0, scale=0.3)


def test_localization_values(t128):
    f = fl.make_bump(t128, (0.5, 0.5), 0.3, 1.0)
    u = fl.BallRegion((0.45, 0.5), 0.2)
    assert an.localization_check(ops.pointwise_scalar("tanh"), f, u, 2.0) == 0.0
    fv = fl.make_vector_bump(t128, (0.5, 0.5), 0.3, (1.0, 0.2))
    assert an.localization_check(ops.scalar_multiple(2.0), fv, u, 2.0) == 0.0
    blur_gap = an.localization_check(ops.gaussian_blur(0.05), f, u, 2.0)
    assert blur_gap >= 0.05 * fl.lp_norm(f, 2.0) * 0.2


def test_disjoint_union_values(t128):
    f = fl.sample_scalar(t128, lambda p: np.sin(2 * np.pi * p[:, 0]) + 0.3)
    regions = [
        fl.BallRegion((0.25, 0.25), 0.1),
        fl.BallRegion((0.7, 0.3), 0.12),
        fl.BallRegion((0.4, 0.7), 0.1),
    ]
    assert an.disjoint_union_check(ops.pointwise_scalar("relu"), f, regions, 2.0) == 0.0
    assert an.disjoint_union_check(ops.pointwise_scalar("tanh"), f, regions[:1], 2.0) == 0.0
    close = [fl.BallRegion((0.4, 0.5), 0.1), fl.BallRegion((0.62, 0.5), 0.1)]
    assert an.disjoint_union_check(ops.gaussian_blur(0.05), f, close, 2.0) > 0.0
    with pytest.raises(RegionError):
        an.disjoint_union_check(
            ops.pointwise_scalar("relu"), f,
            [fl.BallRegion((0.4, 0.5), 0.15), fl.BallRegion((0.6, 0.5), 0.15)], 2.0,
        )


def test_inclusion_exclusion_values(t128):
    f = fl.make_bump(t128, (0.5, 0.5), 0.25, 1.0)
    one = [fl.BallRegion((0.5, 0.5), 0.3)]
    assert an.inclusion_exclusion_reconstruct(ops.pointwise_scalar("tanh"), f, one, 2.0) == 0.0
    two = [fl.BallRegion((0.42, 0.5), 0.28), fl.BallRegion((0.6, 0.5), 0.28)]
    assert an.inclusion_exclusion_reconstruct(ops.pointwise_scalar("relu"), f, two, 2.0) == 0.0
    assert an.inclusion_exclusion_reconstruct(ops.gaussian_blur(0.05), f, two, 2.0) > 0.0


def test_inclusion_exclusion_guards(t128):
    f = fl.make_bump(t128, (0.5, 0.5), 0.25, 1.0)
    with pytest.raises(CoverError):
        an.inclusion_exclusion_reconstruct(
            ops.pointwise_scalar("tanh"), f, [fl.BallRegion((0.2, 0.2), 0.05)] * 13, 2.0
        )
    with pytest.raises(CoverError):
        an.inclusion_exclusion_reconstruct(
            ops.pointwise_scalar("tanh"), f, [fl.BallRegion((0.2, 0.2), 0.1)], 2.0
        )


def test_vitali_empty_when_eps_large(t128):
    f = fl.make_bump(t128, (0.5, 0.5), 0.2, 1.0)
    u = fl.BallRegion((0.5, 0.5), 0.35)
    big = 10.0
    res = an.vitali_approximate(f, u, big, 100)
    assert res.pieces == []
    assert res.achieved_error < big


def test_vitali_constant_field_cheap(t128):
    const = fl.SampledScalarField(t128, np.full(t128.shape, 0.7))
    u = fl.BallRegion((0.5, 0.5), 0.3)
    keep = fl.region_mask(t128, u)
    norm_u = np.sqrt(t128.quad_weights[keep] @ const.flat()[keep] ** 2)
    res = an.vitali_approximate(const, u, 0.25 * norm_u, 400)
    assert len(res.pieces) <= 60
    assert res.achieved_error < 0.25 * norm_u


def test_vitali_budget_error(t128):
    f = fl.make_bump(t128, (0.5, 0.5), 0.2, 1.0)
    u = fl.BallRegion((0.5, 0.5), 0.35)
    with pytest.raises(BudgetError) as err:
        an.vitali_approximate(f, u, 1e-9, 10)
    assert err.value.achieved_error > 0


def test_vitali_pieces_disjoint_and_inside(t128):
    f = fl.make_bump(t128, (0.5, 0.5), 0.14, 1.0)
    u = fl.BallRegion((0.5, 0.5), 0.4)
    keep = fl.region_mask(t128, u)
    norm_u = np.sqrt(t128.quad_weights[keep] @ f.flat()[keep] ** 2)
    res = an.vitali_approximate(f, u, 0.1 * norm_u, 3000)
    assert res.achieved_error < 0.1 * norm_u
    cs = np.array([b.center for b, _ in res.pieces])
    rs = np.array([b.radius for b, _ in res.pieces])
    dist = np.sqrt(((cs[:, None, :] - cs[None, :, :]) ** 2).sum(-1))
    np.fill_diagonal(dist, np.inf)
    assert (dist > rs[:, None] + rs[None, :]).all()
    assert (np.linalg.norm(cs - 0.5, axis=1) + rs <= u.radius + 1e-12).all()


def test_rotation_fit_identity_map():
    box = geo.make_box([(-1.0, 1.0), (-1.0, 1.0)], [128, 128])
    F = fl.sample_vector(box, lambda p: p.copy())
    fit = an.rotation_invariance_fit(F, 6, seed=1, bins=16)
    assert fit.max_violation < 1e-9
    assert np.max(np.abs(fit.bin_gains - 1.0)) < 1e-12
    assert fit.orth_residual < 1e-12


def test_rotation_fit_radial_gain():
    box = geo.make_box([(-1.0, 1.0), (-1.0, 1.0)], [192, 192])
    F = fl.sample_vector(box, lambda p: np.linalg.norm(p, axis=1)[:, None] * p)
    fit = an.rotation_invariance_fit(F, 6, seed=1, bins=24)
    assert np.max(np.abs(fit.bin_gains - fit.bin_radii)) <= 1e-3
    assert fit.orth_residual <= 1e-3


def test_rotation_fit_detects_rotational_part():
    box = geo.make_box([(-1.0, 1.0), (-1.0, 1.0)], [128, 128])
    F = fl.sample_vector(box, lambda p: p + 0.1 * np.stack([-p[:, 1], p[:, 0]], axis=-1))
    with_refl = an.rotation_invariance_fit(F, 8, seed=1, bins=16, include_reflections=True)
    assert with_refl.max_violation >= 0.05
    only_rot = an.rotation_invariance_fit(F, 8, seed=1, bins=16, include_reflections=False)
    assert only_rot.max_violation < 1e-6
    assert only_rot.orth_residual >= 0.05


def test_constant_image_pointwise(t128):
    u = fl.BallRegion((0.5, 0.5), 0.25)
    dev = an.constant_image_check(ops.pointwise_scalar("tanh"), 1.0, u, t128, transports=2)
    assert dev <= 1e-12
    dev0 = an.constant_image_check(ops.pointwise_scalar("relu"), 0.0, u, t128, transports=1)
    assert dev0 == 0.0
    dev_blur = an.constant_image_check(ops.gaussian_blur(0.05), 1.0, u, t128, transports=1)
    assert dev_blur > 1e-3


def test_vitali_rejects_rough_field(t128, rng):
    noisy = fl.SampledScalarField(t128, rng.standard_normal(t128.shape))
    with pytest.raises(ValueError, match="smooth"):
        an.vitali_approximate(noisy, fl.BallRegion((0.5, 0.5), 0.3), 0.01, 100)
