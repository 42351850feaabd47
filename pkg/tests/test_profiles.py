import numpy as np

from diffeolab import profiles


def test_smooth_step_plateaus_exact():
    x = np.array([-1.0, -1e-12, 0.0, 1.0, 1.0 + 1e-12, 5.0])
    s = profiles.smooth_step(x)
    assert s[0] == 0.0 and s[1] == 0.0 and s[2] == 0.0
    assert s[3] == 1.0 and s[4] == 1.0 and s[5] == 1.0


def test_smooth_step_monotone():
    x = np.linspace(-0.5, 1.5, 401)
    s = profiles.smooth_step(x)
    assert np.all(np.diff(s) >= 0)


def test_transition_profile_derivative_matches_fd():
    prof = profiles.TransitionProfile(2.0, -1.0)
    x = np.linspace(-0.2, 1.2, 141)
    h = 1e-5
    fd = (prof.evaluate(x + h) - prof.evaluate(x - h)) / (2 * h)
    assert np.max(np.abs(prof.derivative(x) - fd)) < 1e-6


def test_transition_profile_endpoints():
    prof = profiles.TransitionProfile(3.0, 7.0)
    assert prof.evaluate(np.array([-2.0]))[0] == 3.0
    assert prof.evaluate(np.array([2.0]))[0] == 7.0


def test_bump_peak_and_support():
    q = np.array([0.0, 0.5, 1.0, 2.0])
    b = profiles.bump(q)
    assert b[0] == 1.0
    assert 0 < b[1] < 1
    assert b[2] == 0.0 and b[3] == 0.0


def test_bump_of_square_derivative_sup():
    # the transport step bound uses sup|b'| = 4/e, attained at q = 1/2
    q = np.linspace(0.0, 0.999, 4001)
    sup = np.max(np.abs(profiles.bump_of_square_deriv(q)))
    assert abs(sup - profiles.BUMP_OF_SQUARE_DERIV_SUP) < 1e-4


def test_bump_deriv_matches_fd():
    q = np.linspace(-0.95, 0.95, 201)
    h = 1e-6
    fd = (profiles.bump(q + h) - profiles.bump(q - h)) / (2 * h)
    assert np.max(np.abs(profiles.bump_deriv(q) - fd)) < 1e-6
