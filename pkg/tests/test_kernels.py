"""Backend parity: the numba kernels and the numpy fallback must agree."""

import numpy as np
import pytest

from diffeolab import _interp_numpy

try:
    from diffeolab import _interp_numba

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

needs_numba = pytest.mark.skipif(not HAVE_NUMBA, reason="numba not installed")


def cases(rng):
    for d in (1, 2, 3):
        shape = {1: (64,), 2: (32, 24), 3: (12, 10, 14)}[d]
        vals = rng.standard_normal(int(np.prod(shape)))
        pts = rng.uniform(-1.0, max(shape) + 1.0, (500, d))
        for order in (1, 3):
            for periodic in (True, False):
                q = pts if periodic else np.clip(pts, 0, np.array(shape) - 1)
                yield vals, shape, q, order, periodic


@needs_numba
def test_backends_agree(rng):
    for vals, shape, pts, order, periodic in cases(rng):
        a = _interp_numpy.interp_flat(vals, shape, pts, order, periodic)
        b = _interp_numba.interp_flat(vals, shape, pts, order, periodic)
        assert np.max(np.abs(a - b)) < 1e-14, (shape, order, periodic)


def test_numpy_kernel_exact_at_nodes(rng):
    shape = (17, 13)
    vals = rng.standard_normal(17 * 13)
    ii, jj = np.meshgrid(np.arange(17), np.arange(13), indexing="ij")
    pts = np.stack([ii.ravel(), jj.ravel()], axis=-1).astype(float)
    for order in (1, 3):
        got = _interp_numpy.interp_flat(vals, shape, pts, order, True)
        assert np.array_equal(got, vals)


def test_numpy_kernel_snaps_near_nodes(rng):
    shape = (33,)
    vals = rng.standard_normal(33)
    pts = np.array([[5.0 + 4e-10], [5.0 - 4e-10]])
    for order in (1, 3):
        got = _interp_numpy.interp_flat(vals, shape, pts, order, False)
        assert np.all(got == vals[5])


def test_numpy_kernel_periodic_wrap(rng):
    shape = (16,)
    vals = rng.standard_normal(16)
    a = _interp_numpy.interp_flat(vals, shape, np.array([[3.3]]), 3, True)
    b = _interp_numpy.interp_flat(vals, shape, np.array([[3.3 + 16.0]]), 3, True)
    c = _interp_numpy.interp_flat(vals, shape, np.array([[3.3 - 32.0]]), 3, True)
    assert a == pytest.approx(b, abs=1e-12)
    assert a == pytest.approx(c, abs=1e-12)


def test_numpy_kernel_reproduces_quadratics():
    # Catmull-Rom weights are exact on quadratic data
    shape = (32,)
    x = np.arange(32, dtype=float)
    vals = 0.5 * x**2 - 2.0 * x + 3.0
    pts = np.linspace(4.0, 27.0, 77)[:, None]
    got = _interp_numpy.interp_flat(vals, shape, pts, 3, False)
    want = 0.5 * pts[:, 0] ** 2 - 2.0 * pts[:, 0] + 3.0
    assert np.max(np.abs(got - want)) < 1e-10


def test_env_flag_selects_numpy(monkeypatch):
    import importlib

    import diffeolab.backend as backend

    monkeypatch.setenv("DIFFEOLAB_NO_NUMBA", "1")
    importlib.reload(backend)
    assert backend.backend_name() == "numpy"
    monkeypatch.delenv("DIFFEOLAB_NO_NUMBA")
    importlib.reload(backend)
