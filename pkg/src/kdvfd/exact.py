"""Closed-form KdV solutions and the singular L^2 initial profile.

All functions are vectorised over ``x`` and refer to ``u_t + u u_x + u_xxx = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# u = 3c sech^2(sqrt(c)/2 (x - ct)) solves u_t + u u_x + u_xxx = 0; c = 3 gives
# the amplitude-9, speed-3 bump.
ONE_SOLITON_SPEED = 3.0
ONE_SOLITON_WIDTH = np.sqrt(ONE_SOLITON_SPEED) / 2.0

L2_PERIOD = 10.0


def _sech2(z):
    e = np.exp(-2.0 * np.abs(z))
    return 4.0 * e / (1.0 + e) ** 2


def one_soliton(x, t: float):
    """``9 sech^2(sqrt(3)/2 (x - 3t))``, the soliton of height 9 moving right with speed 3."""
    return 9.0 * _sech2(ONE_SOLITON_WIDTH * (np.asarray(x, dtype=float) - ONE_SOLITON_SPEED * t))


@dataclass(frozen=True)
class TwoSolitonParams:
    a: float = 0.5
    b: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.a < self.b):
            raise ValueError(f"two-soliton needs 0 < a < b, got a={self.a}, b={self.b}")


def two_soliton(x, t: float, p: TwoSolitonParams = TwoSolitonParams()):
    """Two-soliton solution with speeds ``2a`` (slow) and ``2b`` (fast).

    The textbook form has ``csch^2`` and ``coth`` of ``zb = sqrt(b/2)(x - 2bt)``
    in the numerator and denominator. Multiplying both by ``tanh^2(zb)``
    gives

        6(b-a) (b sech^2 zb + a sech^2 za tanh^2 zb) / (sqrt(a) tanh za tanh zb - sqrt(b))^2

    which is regular everywhere: ``|tanh za tanh zb| < 1 <= sqrt(b/a)`` keeps
    the denominator away from zero.
    """
    a, b = p.a, p.b
    x = np.asarray(x, dtype=float)
    za = np.sqrt(a / 2.0) * (x - 2.0 * a * t)
    zb = np.sqrt(b / 2.0) * (x - 2.0 * b * t)
    ta, tb = np.tanh(za), np.tanh(zb)
    num = b * _sech2(zb) + a * _sech2(za) * tb**2
    den = (np.sqrt(a) * ta * tb - np.sqrt(b)) ** 2
    return 6.0 * (b - a) * num / den


def two_soliton_textbook(x, t: float, p: TwoSolitonParams = TwoSolitonParams()):
    """Unregularised csch/coth form; singular (0/0) on the line ``x = 2bt``."""
    a, b = p.a, p.b
    x = np.asarray(x, dtype=float)
    za = np.sqrt(a / 2.0) * (x - 2.0 * a * t)
    zb = np.sqrt(b / 2.0) * (x - 2.0 * b * t)
    num = b / np.sinh(zb) ** 2 + a / np.cosh(za) ** 2
    den = (np.sqrt(a) * np.tanh(za) - np.sqrt(b) / np.tanh(zb)) ** 2
    return 6.0 * (b - a) * num / den


def l2_singular_init(x):
    """``x^(-1/3)`` on ``(0, 1)``, zero elsewhere in ``[-5, 5]``, extended with period 10."""
    x = np.asarray(x, dtype=float)
    xr = np.mod(x + 5.0, L2_PERIOD) - 5.0
    inside = (xr > 0.0) & (xr < 1.0)
    out = np.zeros_like(xr)
    out[inside] = xr[inside] ** (-1.0 / 3.0)
    return out if out.ndim else float(out)
