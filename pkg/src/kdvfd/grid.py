"""Grid functions on a uniform grid and the difference calculus acting on them.

Two boundary modes are supported. ``PERIODIC`` wraps indices modulo the
number of stored samples. ``LINE`` treats the stored window as a piece of
the real line with zero extension outside it.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np


class Boundary(str, enum.Enum):
    PERIODIC = "periodic"
    LINE = "line"


@dataclass(frozen=True)
class GridFunction:
    """Samples ``u_j = u(x0 + j*dx)`` with a boundary mode.

    ``values[0]`` sits at the left edge ``x0`` of the window. In periodic
    mode the period is ``J = len(values)``.
    """

    values: np.ndarray
    dx: float
    boundary: Boundary = Boundary.LINE
    x0: float = 0.0

    def __post_init__(self):
        vals = np.array(self.values, dtype=float, copy=True).reshape(-1)
        if vals.size == 0:
            raise ValueError("grid function needs at least one sample")
        if not np.all(np.isfinite(vals)):
            raise ValueError("grid function values must be finite")
        if not (self.dx > 0 and np.isfinite(self.dx)):
            raise ValueError(f"dx must be positive, got {self.dx!r}")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "boundary", Boundary(self.boundary))
        object.__setattr__(self, "dx", float(self.dx))
        object.__setattr__(self, "x0", float(self.x0))

    def __len__(self) -> int:
        return self.values.size

    @property
    def periodic(self) -> bool:
        return self.boundary is Boundary.PERIODIC

    @property
    def x(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(self.values.size)

    def with_values(self, values) -> "GridFunction":
        return GridFunction(values, self.dx, self.boundary, self.x0)

    def same_grid(self, other: "GridFunction") -> bool:
        return (
            len(self) == len(other)
            and self.boundary is other.boundary
            and np.isclose(self.dx, other.dx, rtol=1e-14, atol=0.0)
            and np.isclose(self.x0, other.x0, rtol=1e-14, atol=1e-14)
        )


@dataclass(frozen=True)
class WeightFunction:
    """Sampled weight ``p_j >= 1`` together with its ramp half-width ``R``."""

    samples: np.ndarray
    R: float
    grid: GridFunction = field(repr=False)


# -- array level kernels ------------------------------------------------------
# These are used directly by the time stepper; the GridFunction wrappers below
# only add validation and metadata.


def shifted(a: np.ndarray, k: int, periodic: bool) -> np.ndarray:
    """Return ``b`` with ``b_j = a_{j+k}``, zero-extended unless periodic."""
    if k == 0:
        return a.copy()
    if periodic:
        return np.roll(a, -k)
    n = a.size
    out = np.zeros_like(a)
    if abs(k) >= n:
        return out
    if k > 0:
        out[: n - k] = a[k:]
    else:
        out[-k:] = a[: n + k]
    return out


def dplus(a: np.ndarray, dx: float, periodic: bool) -> np.ndarray:
    return (shifted(a, 1, periodic) - a) / dx


def dminus(a: np.ndarray, dx: float, periodic: bool) -> np.ndarray:
    return (a - shifted(a, -1, periodic)) / dx


def dcentral(a: np.ndarray, dx: float, periodic: bool) -> np.ndarray:
    return (shifted(a, 1, periodic) - shifted(a, -1, periodic)) / (2.0 * dx)


def avg(a: np.ndarray, periodic: bool) -> np.ndarray:
    return 0.5 * (shifted(a, 1, periodic) + shifted(a, -1, periodic))


def airy(a: np.ndarray, dx: float, periodic: bool) -> np.ndarray:
    """``D+^2 D- a``, i.e. ``(a_{j+2} - 3a_{j+1} + 3a_j - a_{j-1}) / dx^3``."""
    return (
        shifted(a, 2, periodic)
        - 3.0 * shifted(a, 1, periodic)
        + 3.0 * a
        - shifted(a, -1, periodic)
    ) / dx**3


# -- public operator calculus -------------------------------------------------


class Difference(str, enum.Enum):
    FORWARD = "forward"
    BACKWARD = "backward"
    CENTRAL = "central"


_KERNELS = {
    Difference.FORWARD: dplus,
    Difference.BACKWARD: dminus,
    Difference.CENTRAL: dcentral,
}


def difference(kind: Difference | str, u: GridFunction) -> GridFunction:
    """Apply ``D+``, ``D-`` or ``D = (D+ + D-)/2`` to ``u``."""
    kernel = _KERNELS[Difference(kind)]
    return u.with_values(kernel(u.values, u.dx, u.periodic))


def average(u: GridFunction) -> GridFunction:
    """Neighbour average ``<u>_j = (u_{j+1} + u_{j-1}) / 2``."""
    return u.with_values(avg(u.values, u.periodic))


def shift(sign: int, u: GridFunction) -> GridFunction:
    """``S+ u_j = u_{j+1}`` for ``sign=+1`` and ``S- u_j = u_{j-1}`` for ``sign=-1``."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    return u.with_values(shifted(u.values, sign, u.periodic))


def inner(u: GridFunction, v: GridFunction, weight: Optional[WeightFunction] = None) -> float:
    """Discrete inner product ``dx * sum(p_j u_j v_j)`` (``p = 1`` without weight)."""
    if not u.same_grid(v):
        raise ValueError("inner product of grid functions on different grids")
    if weight is None:
        return float(u.dx * np.dot(u.values, v.values))
    if not u.same_grid(weight.grid):
        raise ValueError("weight lives on a different grid")
    return float(u.dx * np.sum(weight.samples * u.values * v.values))


def norms(u: GridFunction) -> dict:
    """Return ``{"l2": ||u||, "sup": max |u_j|}``."""
    vals = u.values
    return {
        "l2": float(np.sqrt(u.dx * np.dot(vals, vals))),
        "sup": float(np.max(np.abs(vals))),
    }


def l2_norm(a: np.ndarray, dx: float) -> float:
    return float(np.sqrt(dx * np.dot(a, a)))


# -- weight function ----------------------------------------------------------


def _ramp(x: np.ndarray, R: float) -> np.ndarray:
    return np.clip(1.0 + x + R, 1.0, 1.0 + 2.0 * R)


def _hat(y: np.ndarray) -> np.ndarray:
    return np.maximum(0.0, 1.0 - np.abs(y))


def build_weight(R: float, grid: GridFunction, refine: int = 10) -> WeightFunction:
    """Sample the mollified ramp ``p = ramp * hat`` on the nodes of ``grid``.

    The ramp is ``max(1, min(1 + x + R, 1 + 2R))`` and the mollifier is the
    unit hat on ``[-1, 1]``. The convolution is done with composite Simpson
    on a sub-grid ``refine`` times finer than ``grid.dx``; the node count is
    a multiple of four so the hat's kinks at -1, 0, 1 are panel boundaries.
    """
    if not R > 1:
        raise ValueError(f"weight ramp half-width R must exceed 1, got {R!r}")
    h_target = grid.dx / refine
    m = int(np.ceil(2.0 / h_target))
    m += (-m) % 4
    m = max(m, 4)
    y = np.linspace(-1.0, 1.0, m + 1)
    h = 2.0 / m
    wts = np.ones(m + 1)
    wts[1:-1:2] = 4.0
    wts[2:-1:2] = 2.0
    wts *= h / 3.0
    kern = wts * _hat(y)
    kern /= kern.sum()

    x = grid.x
    # away from the ramp's kinks the ramp is affine on the mollifier support,
    # and a symmetric mollifier reproduces affine functions exactly
    p = _ramp(x, R)
    near = np.flatnonzero((np.abs(x + R) < 1.0) | (np.abs(x - R) < 1.0))
    for start in range(0, near.size, 256):
        idx = near[start : start + 256]
        p[idx] = _ramp(x[idx, None] - y[None, :], R) @ kern
    p = np.clip(p, 1.0, 1.0 + 2.0 * R)
    p.flags.writeable = False
    return WeightFunction(samples=p, R=float(R), grid=grid)
