import numpy as np
import pytest

from diffeolab import diffeo as df
from diffeolab import fields as fl
from diffeolab import geometry as geo
from diffeolab.errors import DegenerateFieldError


@pytest.fixture(scope="module")
def box256():
    return geo.make_box([(0.0, 1.0), (0.0, 1.0)], [256, 256])


def test_constant_field_already_straight(box256):
    f = fl.sample_vector(
        box256, lambda p: np.stack([np.full(len(p), 0.8), np.full(len(p), 0.6)], axis=-1)
    )
    phi = df.flowbox_straighten(f, (0.5, 0.5), 0.2, integrator_steps=16)
    res = df.straightening_residual(phi, f, (0.5, 0.5), 0.2)
    assert res < 1e-6


def test_shear_field_residual(box256):
    f = fl.sample_vector(box256, lambda p: np.stack([np.ones(len(p)), 0.5 * p[:, 0]], axis=-1))
    phi = df.flowbox_straighten(f, (0.5, 0.5), 0.2, integrator_steps=64)
    res = df.straightening_residual(phi, f, (0.5, 0.5), 0.2)
    assert res <= 1e-3


def test_halving_radius_halves_residual(box256):
    # needs a genuinely curved field: affine fields straighten to roundoff,
    # leaving no residual for the trend to act on
    f = fl.sample_vector(
        box256,
        lambda p: np.stack(
            [
                1.0 + 0.5 * np.sin(2.5 * p[:, 1]) * np.cos(2 * p[:, 0]),
                0.6 * np.cos(3 * p[:, 0]) + 0.8,
            ],
            axis=-1,
        ),
    )
    phi = df.flowbox_straighten(f, (0.5, 0.5), 0.3, integrator_steps=64)
    res_full = df.straightening_residual(phi, f, (0.5, 0.5), 0.3)
    res_half = df.straightening_residual(phi, f, (0.5, 0.5), 0.15)
    assert res_full >= 2.0 * res_half


def test_flowbox_fixes_base_point(box256):
    f = fl.sample_vector(box256, lambda p: np.stack([np.ones(len(p)), 0.5 * p[:, 0]], axis=-1))
    phi = df.flowbox_straighten(f, (0.5, 0.5), 0.2)
    assert np.max(np.abs(phi.forward(np.array([[0.5, 0.5]]))[0] - [0.5, 0.5])) < 1e-12


def test_flowbox_inverse_roundtrip(box256):
    f = fl.sample_vector(
        box256,
        lambda p: np.stack([1.2 + 0.3 * np.cos(3 * p[:, 1]), 0.5 * p[:, 0]], axis=-1),
    )
    phi = df.flowbox_straighten(f, (0.5, 0.5), 0.2)
    pts = np.array([[0.52, 0.48], [0.45, 0.55], [0.57, 0.5]])
    assert np.max(np.abs(phi.inverse(phi.forward(pts)) - pts)) < 1e-5


def test_flowbox_rejects_vanishing_field(box256):
    f = fl.sample_vector(box256, lambda p: np.stack([p[:, 0] - 0.5, p[:, 1] - 0.5], axis=-1))
    with pytest.raises(DegenerateFieldError):
        df.flowbox_straighten(f, (0.5, 0.5), 0.2)


def test_perturb_away_from_zero_noop_when_far(torus2_128):
    f = fl.sample_vector(
        torus2_128, lambda p: np.stack([np.full(len(p), 1.0), np.full(len(p), 0.5)], axis=-1)
    )
    u = fl.BallRegion((0.5, 0.5), 0.3)
    out = df.perturb_away_from_zero(f, 0.01, u)
    assert out is f


def test_perturb_removes_zero(torus2_128):
    f = fl.sample_vector(
        torus2_128,
        lambda p: np.stack([p[:, 0] - 0.5, p[:, 1] - 0.5], axis=-1),
    )
    u = fl.BallRegion((0.5, 0.5), 0.3)
    eps = 0.01
    out = df.perturb_away_from_zero(f, eps, u)
    inside = fl.region_mask(torus2_128, u)
    mags = fl.vector_magnitude(out).flat()[inside]
    assert mags.min() > 0


def test_perturb_norm_bound(torus2_128):
    f = fl.sample_vector(
        torus2_128,
        lambda p: np.stack([p[:, 0] - 0.5, p[:, 1] - 0.5], axis=-1),
    )
    u = fl.BallRegion((0.5, 0.5), 0.3)
    eps = 0.02
    out = df.perturb_away_from_zero(f, eps, u)
    gap = fl.field_axpy(1.0, out, -1.0, f)
    omega_u = np.pi * u.radius**2
    for p in (1.0, 2.0):
        assert fl.lp_norm(gap, p) <= 2 * eps * omega_u ** (1.0 / p) + 1e-9
