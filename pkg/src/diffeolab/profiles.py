"""Smooth compactly-supported building blocks.

All transitions are built from psi(x) = exp(-1/x) on x > 0, the standard
non-analytic C-infinity germ, so plateaus are reached exactly (bitwise) and
every profile has certifiable derivatives.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def psi(x):
    """exp(-1/x) for x > 0, exactly 0 otherwise. Array-safe."""
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = np.exp(-1.0 / x[pos])
    return out


def psi_deriv(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros_like(x)
    pos = x > 0
    xp = x[pos]
    out[pos] = np.exp(-1.0 / xp) / (xp * xp)
    return out


def smooth_step(x):
    """C-infinity monotone step: exactly 0 for x <= 0, exactly 1 for x >= 1."""
    x = np.asarray(x, dtype=np.float64)
    p = psi(x)
    q = psi(1.0 - x)
    out = np.zeros_like(x)
    out[x >= 1.0] = 1.0
    mid = (x > 0.0) & (x < 1.0)
    out[mid] = p[mid] / (p[mid] + q[mid])
    return out


def smooth_step_deriv(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros_like(x)
    mid = (x > 0.0) & (x < 1.0)
    xm = x[mid]
    p, q = psi(xm), psi(1.0 - xm)
    dp, dq = psi_deriv(xm), psi_deriv(1.0 - xm)
    out[mid] = (dp * q + p * dq) / (p + q) ** 2
    return out


@dataclass(frozen=True)
class TransitionProfile:
    """Monotone C-infinity ramp from value a (r <= 0) to value b (r >= 1)."""

    a: float
    b: float

    def evaluate(self, r):
        return self.a + (self.b - self.a) * smooth_step(r)

    def derivative(self, r):
        return (self.b - self.a) * smooth_step_deriv(r)

    def __call__(self, r):
        return self.evaluate(r)


def bump(q):
    """Normalized bump exp(1 - 1/(1 - q^2)) for |q| < 1, exactly 0 outside.

    Peak value is exactly 1 at q = 0.
    """
    q = np.asarray(q, dtype=np.float64)
    out = np.zeros_like(q)
    inside = np.abs(q) < 1.0
    qi = q[inside]
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - qi * qi))
    return out


def bump_deriv(q):
    q = np.asarray(q, dtype=np.float64)
    out = np.zeros_like(q)
    inside = np.abs(q) < 1.0
    qi = q[inside]
    s = 1.0 - qi * qi
    out[inside] = np.exp(1.0 - 1.0 / s) * (-2.0 * qi / (s * s))
    return out


def bump_of_square(q):
    """exp(1 - 1/(1 - q)) on q in [0, 1), exactly 0 for q >= 1.

    Used with q = |x|^2 / eta^2 so the composite stays smooth at x = 0.
    """
    q = np.asarray(q, dtype=np.float64)
    out = np.zeros_like(q)
    inside = q < 1.0
    qi = q[inside]
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - qi))
    return out


def bump_of_square_deriv(q):
    q = np.asarray(q, dtype=np.float64)
    out = np.zeros_like(q)
    inside = q < 1.0
    qi = q[inside]
    s = 1.0 - qi
    out[inside] = -np.exp(1.0 - 1.0 / s) / (s * s)
    return out


# sup |d/dq exp(1 - 1/(1-q))| over q in [0, 1); attained at q = 1/2 where the
# derivative equals -4 e^{-1}. Used by the point-transport step bound.
BUMP_OF_SQUARE_DERIV_SUP = 4.0 / np.e
