"""Implicit finite-difference stepper for ``u_t + u u_x + u_xxx = 0``.

One step is a Lax-Friedrichs update of the convective part followed by a
backward-Euler solve of the dispersive part:

    w        = <u^n> - dt <u^n> D u^n
    u^{n+1}  = (I + dt D+^2 D-)^{-1} w
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import _kernels, banded
from .diagnostics import EnergyLedger, StepDiagnostics
from .grid import Boundary, GridFunction, l2_norm

SAFETY = 0.99


class DtRule(str, enum.Enum):
    CFL_LAMBDA = "cfl"  # dt = lambda dx^{3/2}, lambda from the two stability constraints
    QUADRATIC_K = "k2"  # dt = K dx^2
    COURANT = "courant"  # dt = c dx / max|u0|, the Lax-Friedrichs Courant limit for c <= 1


class SchemeInstability(FloatingPointError):
    def __init__(self, step: int, t: float):
        super().__init__(f"non-finite values after step {step} (t={t!r})")
        self.step = step
        self.t = t


@dataclass(frozen=True)
class SchemeConfig:
    window: tuple
    n_cells: int
    boundary: Boundary = Boundary.LINE
    t_end: float = 1.0
    cfl_delta: float = 0.5
    cfl_delta_tilde: float = 0.5
    dt_rule: DtRule = DtRule.CFL_LAMBDA
    k: Optional[float] = None
    courant: float = 1.0
    record_every: int = 1
    check: bool = True

    def __post_init__(self):
        object.__setattr__(self, "boundary", Boundary(self.boundary))
        object.__setattr__(self, "dt_rule", DtRule(self.dt_rule))
        object.__setattr__(self, "window", (float(self.window[0]), float(self.window[1])))
        errors = []
        if not self.window[0] < self.window[1]:
            errors.append(f"window: need x_left < x_right, got {self.window}")
        if int(self.n_cells) != self.n_cells or self.n_cells < 8:
            errors.append(f"n_cells: need an integer >= 8, got {self.n_cells!r}")
        if not (self.t_end >= 0 and math.isfinite(self.t_end)):
            errors.append(f"t_end: need a finite T >= 0, got {self.t_end!r}")
        for name in ("cfl_delta", "cfl_delta_tilde"):
            val = getattr(self, name)
            if not 0.0 < val < 1.0:
                errors.append(f"{name}: must lie in (0, 1), got {val!r}")
        if self.dt_rule is DtRule.QUADRATIC_K and not (self.k is not None and self.k > 0):
            errors.append(f"k: must be positive for dt_rule=k2, got {self.k!r}")
        if self.dt_rule is DtRule.COURANT and not self.courant > 0:
            errors.append(f"courant: must be positive, got {self.courant!r}")
        if int(self.record_every) != self.record_every or self.record_every < 1:
            errors.append(f"record_every: need a positive integer, got {self.record_every!r}")
        if errors:
            raise ValueError("; ".join(errors))
        object.__setattr__(self, "n_cells", int(self.n_cells))
        object.__setattr__(self, "record_every", int(self.record_every))

    @property
    def dx(self) -> float:
        return (self.window[1] - self.window[0]) / self.n_cells

    @property
    def x(self) -> np.ndarray:
        return self.window[0] + self.dx * np.arange(self.n_cells)

    def sample(self, f: Callable) -> GridFunction:
        """Pointwise initial data ``u0_j = f(x_j)`` on this configuration's grid."""
        return GridFunction(f(self.x), self.dx, self.boundary, self.window[0])


@dataclass
class Trajectory:
    times: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    dt_used: float = 0.0
    steps_taken: int = 0
    record_every: int = 1
    lam: float = 0.0

    @property
    def final(self) -> GridFunction:
        return self.snapshots[-1]


# -- time-step selection ----------------------------------------------------------


def _positive_root(a: float, b: float, c: float) -> float:
    # larger root of a s^2 + b s - c = 0 with a, b, c > 0
    return (-b + math.sqrt(b * b + 4.0 * a * c)) / (2.0 * a)


def max_lambda(u0_norm: float, delta: float, delta_tilde: float) -> float:
    """Largest ``lambda = dt / dx^{3/2}`` (times 0.99) obeying both stability constraints.

    ``lambda q (1/3 + lambda q / 2) < (1 - delta)/2`` and
    ``6 q^2 lambda^2 + q lambda < (1 - delta_tilde)/2`` with ``q = ||u0||``.
    Returns ``inf`` for ``q = 0``.
    """
    for name, d in (("delta", delta), ("delta_tilde", delta_tilde)):
        if not 0.0 < d < 1.0:
            raise ValueError(f"{name} must lie in (0, 1), got {d!r}")
    if u0_norm < 0:
        raise ValueError("u0_norm must be non-negative")
    if u0_norm == 0:
        return math.inf
    s1 = _positive_root(0.5, 1.0 / 3.0, (1.0 - delta) / 2.0)
    s2 = _positive_root(6.0, 1.0, (1.0 - delta_tilde) / 2.0)
    return SAFETY * min(s1, s2) / u0_norm


def cfl_l2_holds(lam: float, u0_norm: float, delta: float) -> bool:
    s = lam * u0_norm
    return s * (1.0 / 3.0 + 0.5 * s) < (1.0 - delta) / 2.0


def cfl_alpha_holds(lam: float, u0_norm: float, delta_tilde: float) -> bool:
    s = lam * u0_norm
    return 6.0 * s * s + s < (1.0 - delta_tilde) / 2.0


def time_step(config: SchemeConfig, u0: GridFunction) -> float:
    dx = config.dx
    if config.dt_rule is DtRule.QUADRATIC_K:
        return config.k * dx * dx
    if config.dt_rule is DtRule.COURANT:
        top = float(np.max(np.abs(u0.values)))
        return config.courant * dx / top if top > 0 else dx
    lam = max_lambda(l2_norm(u0.values, dx), config.cfl_delta, config.cfl_delta_tilde)
    # zero data leaves lambda unconstrained; cap at dt = dx
    return lam * dx**1.5 if math.isfinite(lam) else dx


# -- single-step kernels ----------------------------------------------------------


def _burgers(u: np.ndarray, dt: float, dx: float, periodic: bool) -> np.ndarray:
    return _kernels.lax_friedrichs(u, dt, dx, periodic)


def burgers_substep(u: GridFunction, dt: float) -> GridFunction:
    """Lax-Friedrichs update ``w = <u> - dt <u> Du``."""
    return u.with_values(_burgers(u.values, dt, u.dx, u.periodic))


def step(u: GridFunction, dt: float, f: banded.Factorization) -> GridFunction:
    op = f.op
    if op.n != len(u) or op.boundary is not u.boundary or not math.isclose(op.mu3, dt / u.dx**3, rel_tol=1e-12):
        raise ValueError("factorization was assembled for a different grid or time step")
    return u.with_values(banded.solve(f, _burgers(u.values, dt, u.dx, u.periodic)))


# -- driver -------------------------------------------------------------------------

Observer = Callable[[int, float, float, np.ndarray, np.ndarray], None]


def run(
    config: SchemeConfig,
    u0: GridFunction,
    observers: Sequence[Observer] = (),
) -> tuple:
    """Integrate from ``t = 0`` to ``config.t_end``.

    Returns ``(Trajectory, [StepDiagnostics, ...])``. The last step is
    shortened to land on ``t_end`` exactly and the implicit matrix is
    refactored for it. Observers are called after each step as
    ``obs(step, t_prev, dt, u_prev, u_next)``.
    """
    dx, periodic = config.dx, config.boundary is Boundary.PERIODIC
    if len(u0) != config.n_cells or u0.boundary is not config.boundary or not math.isclose(u0.dx, dx, rel_tol=1e-12):
        raise ValueError("initial data does not live on the configured grid")

    T = float(config.t_end)
    dt = time_step(config, u0)
    u0_norm = l2_norm(u0.values, dx)
    lam = dt / dx**1.5
    ledger = EnergyLedger(
        dx,
        periodic,
        config.cfl_delta,
        check_l2=config.check and cfl_l2_holds(lam, u0_norm, config.cfl_delta),
        check_alpha=config.check and cfl_alpha_holds(lam, u0_norm, config.cfl_delta_tilde),
    )

    traj = Trajectory(dt_used=dt, record_every=config.record_every, lam=lam)
    traj.times.append(0.0)
    traj.snapshots.append(u0)
    diags = [ledger.record(0, 0.0, u0.values)]
    for obs in observers:
        start = getattr(obs, "start", None)
        if start is not None:
            start(u0.values)
    if T == 0.0:
        return traj, diags

    nsteps = max(1, math.ceil(T / dt - 1e-9))
    last_dt = T - (nsteps - 1) * dt
    if abs(last_dt - dt) <= 1e-12 * dt:
        last_dt = dt
    fact = banded.factor(banded.assemble(dx, dt, config.n_cells, config.boundary))

    u = np.array(u0.values)
    t = 0.0
    for n in range(1, nsteps + 1):
        h = dt
        if n == nsteps and last_dt != dt:
            h = last_dt
            fact = banded.factor(banded.assemble(dx, h, config.n_cells, config.boundary))
        v = banded.solve(fact, _burgers(u, h, dx, periodic))
        t_next = T if n == nsteps else n * dt
        if not math.isfinite(float(v.sum())):
            raise SchemeInstability(n, t_next)
        ledger.observe(h, u, v)
        for obs in observers:
            obs(n, t, h, u, v)
        if n % config.record_every == 0 or n == nsteps:
            traj.times.append(t_next)
            traj.snapshots.append(u0.with_values(v))
            diags.append(ledger.record(n, t_next, v))
        u, t = v, t_next
    traj.steps_taken = nsteps
    return traj, diags


# -- space-time reconstruction ----------------------------------------------------


def interpolate(traj: Trajectory, x, t: float):
    """Piecewise bilinear space-time interpolant of a trajectory.

    On ``[x_j, x_{j+1}) x [t_n, t_{n+1})`` the value is
    ``u_j + (x - x_j) D+u_j + (t - t_n) Dt u_j + (x - x_j)(t - t_n) Dt D+u_j``.
    With ``record_every > 1`` the recorded snapshots bracketing ``t`` are
    used instead of consecutive steps, and a warning is emitted.
    """
    times = traj.times
    if not times[0] <= t <= times[-1]:
        raise ValueError(f"t={t!r} outside trajectory span [{times[0]}, {times[-1]}]")
    if traj.record_every != 1:
        warnings.warn(
            f"trajectory recorded every {traj.record_every} steps; interpolating between recorded snapshots",
            stacklevel=2,
        )
    g = traj.snapshots[0]
    n_pts = len(g)
    L = n_pts * g.dx
    xa = np.asarray(x, dtype=float)
    xi = xa - g.x0
    if g.periodic:
        xi = np.mod(xi, L)
    elif np.any((xi < -1e-12 * L) | (xi > L * (1 + 1e-12))):
        raise ValueError("x outside the stored window")
    r = xi / g.dx
    # snap points within rounding of a node so nodal values come back exactly
    on_node = np.abs(r - np.rint(r)) < 1e-9
    j = np.clip(np.where(on_node, np.rint(r), np.floor(r)).astype(int), 0, n_pts - 1)
    xi_loc = np.where(on_node & (np.rint(r) < n_pts), 0.0, xi - j * g.dx)

    k = int(np.searchsorted(times, t, side="right")) - 1
    k = min(max(k, 0), len(times) - 2) if len(times) > 1 else 0
    a = traj.snapshots[k].values
    if len(times) == 1:
        b, tau, span = a, 0.0, 1.0
    else:
        b = traj.snapshots[k + 1].values
        tau, span = t - times[k], times[k + 1] - times[k]
        if tau == span:
            a, tau = b, 0.0

    def node(arr, idx):
        if g.periodic:
            return arr[idx % n_pts]
        return np.where(idx < n_pts, arr[np.minimum(idx, n_pts - 1)], 0.0)

    ua, ua1 = node(a, j), node(a, j + 1)
    ub, ub1 = node(b, j), node(b, j + 1)
    dxa = (ua1 - ua) / g.dx
    dta = (ub - ua) / span
    dtdx = ((ub1 - ub) / g.dx - dxa) / span
    out = ua + xi_loc * dxa + tau * dta + xi_loc * tau * dtdx
    return float(out) if out.ndim == 0 else out
