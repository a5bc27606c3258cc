"""Energy ledger, error metrics, convergence tables and local smoothing budgets."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable, Iterable, Optional, Sequence

import numpy as np

from . import _kernels
from .grid import (
    GridFunction,
    WeightFunction,
    avg,
    dcentral,
    dminus,
    dplus,
    airy,
    inner,
    l2_norm,
    shifted,
)

if TYPE_CHECKING:  # pragma: no cover
    from .scheme import Trajectory

L2_TOL = 1e-10
MONOTONE_TOL = 1e-12
ENTROPY_TOL = 1e-10
ALPHA_TOL = 1e-8
INTERP_TOL = 1e-10

# zero-extended (line) differences of order <= 3 are supported within 3 ghost cells
_GHOSTS = 3


@dataclass
class StepDiagnostics:
    step: int
    t: float
    l2: float
    sup: float
    mass: float
    dissipation: Optional[float] = None
    ineq_L2_ok: Optional[bool] = None
    ineq_cell_entropy_ok: Optional[bool] = None
    alpha_l2: Optional[float] = None
    ineq_alpha_ok: Optional[bool] = None

    @property
    def failed(self) -> bool:
        return any(flag is False for flag in (self.ineq_L2_ok, self.ineq_cell_entropy_ok, self.ineq_alpha_ok))


@dataclass
class ConvergenceRow:
    n_cells: int
    error_E: float
    rate: Optional[float] = None


# -- pointwise and summed inequalities -----------------------------------------


def _extended(a: np.ndarray, periodic: bool) -> np.ndarray:
    if periodic:
        return a
    return np.pad(a, _GHOSTS)


def cell_entropy_slack(u: np.ndarray, dt: float, dx: float, delta: float, periodic: bool) -> np.ndarray:
    """Right minus left side of the per-cell entropy inequality for the averaging substep.

    With ``w = <u> - dt <u> Du`` the inequality reads
    ``w^2/2 <= <u^2>/2 - (dt/3) D(u^3) - delta dx^2 (Du)^2 / 2``; a
    non-negative return value means it holds at that node.
    """
    ua = avg(u, periodic)
    du = dcentral(u, dx, periodic)
    w = ua - dt * ua * du
    rhs = 0.5 * avg(u * u, periodic) - dt / 3.0 * dcentral(u**3, dx, periodic) - 0.5 * delta * dx**2 * du**2
    return rhs - 0.5 * w * w


def dissipation_terms(u: np.ndarray, v: np.ndarray, dt: float, dx: float, delta: float, periodic: bool) -> float:
    """Bracketed dissipation of the one-step L^2 estimate, multiplied out.

    ``dt^2 ||D+^2 D- v||^2 + dt dx ||D+ D- v||^2 + delta dx^2 ||D u||^2``.
    On the line the second and third norms run over the zero-extended
    sequence; the dispersive residual only over the stored window where the
    implicit equations are imposed.
    """
    ue, ve = _extended(u, periodic), _extended(v, periodic)
    d3 = airy(v, dx, periodic)
    d2 = dplus(dminus(ve, dx, periodic), dx, periodic)
    d1 = dcentral(ue, dx, periodic)
    return dt * dt * dx * np.dot(d3, d3) + dt * dx * dx * np.dot(d2, d2) + delta * dx**2 * dx * np.dot(d1, d1)


def sup_central_difference(u: np.ndarray, dx: float, periodic: bool) -> float:
    return float(np.max(np.abs(dcentral(_extended(u, periodic), dx, periodic))))


class EnergyLedger:
    """Per-step bookkeeping of the stability inequalities.

    Flags are only evaluated when the run satisfies the corresponding
    time-step hypothesis (``check_l2`` for the L^2 and cell entropy bounds,
    ``check_alpha`` for the time-difference bound); otherwise they stay None.
    Between two recorded rows the flags are AND-ed over every step.
    """

    def __init__(self, dx: float, periodic: bool, delta: float, check_l2: bool, check_alpha: bool):
        self.dx = dx
        self.periodic = periodic
        self.delta = delta
        self.check_l2 = check_l2
        self.check_alpha = check_alpha and check_l2
        self._reset()
        self._alpha = None
        self._alpha_dt = None
        self._alpha_l2 = None

    def _reset(self):
        self._l2_ok = True if self.check_l2 else None
        self._entropy_ok = True if self.check_l2 else None
        self._alpha_ok = True if self.check_alpha else None
        self._dissipation = 0.0 if self.check_l2 else None

    def observe(self, dt: float, u: np.ndarray, v: np.ndarray) -> None:
        dx, periodic = self.dx, self.periodic
        if self.check_l2:
            nu2 = dx * np.dot(u, u)
            nv2 = dx * np.dot(v, v)
            diss = dissipation_terms(u, v, dt, dx, self.delta, periodic)
            self._dissipation = diss
            ok = nv2 + diss <= nu2 * (1.0 + L2_TOL) and math.sqrt(nv2) <= math.sqrt(nu2) * (1.0 + MONOTONE_TOL)
            self._l2_ok = self._l2_ok and bool(ok)
            slack = cell_entropy_slack(u, dt, dx, self.delta, periodic)
            self._entropy_ok = self._entropy_ok and bool(slack.min() >= -ENTROPY_TOL)
        if self.check_alpha:
            alpha = (v - u) / dt
            if self._alpha is not None and self._alpha_dt == dt:
                growth = 1.0 + 3.0 * dt * sup_central_difference(u, dx, periodic)
                lhs = dx * np.dot(alpha, alpha)
                rhs = growth * dx * np.dot(self._alpha, self._alpha)
                self._alpha_ok = self._alpha_ok and bool(lhs <= rhs * (1.0 + ALPHA_TOL))
            self._alpha, self._alpha_dt = alpha, dt
            self._alpha_l2 = l2_norm(alpha, dx)

    def record(self, step: int, t: float, u: np.ndarray) -> StepDiagnostics:
        row = StepDiagnostics(
            step=step,
            t=t,
            l2=l2_norm(u, self.dx),
            sup=float(np.max(np.abs(u))),
            mass=float(self.dx * np.sum(u)),
            dissipation=None if self._dissipation is None else float(self._dissipation),
        )
        if step > 0:
            row.ineq_L2_ok = self._l2_ok
            row.ineq_cell_entropy_ok = self._entropy_ok
            row.ineq_alpha_ok = self._alpha_ok
            row.alpha_l2 = self._alpha_l2
        self._reset()
        return row


# -- error metrics --------------------------------------------------------------


def relative_error(u_num: GridFunction, exact: Callable, t_exact: float) -> float:
    """Percent relative l^1 error ``100 sum|exact - u| / sum exact`` at the grid nodes."""
    ref = np.asarray(exact(u_num.x, t_exact), dtype=float)
    denom = float(np.sum(ref))
    if denom == 0.0 or not math.isfinite(denom):
        raise ValueError("exact solution has zero (or non-finite) sum on this grid")
    return 100.0 * float(np.sum(np.abs(ref - u_num.values))) / denom


def rates(errors: Sequence[float]) -> list:
    """Observed orders ``log2(E_prev / E)`` between consecutive grid doublings."""
    out = [None]
    for prev, cur in zip(errors[:-1], errors[1:]):
        out.append(math.log2(prev / cur) if prev > 0 and cur > 0 else None)
    return out


def convergence_rows(n_list: Sequence[int], errors: Sequence[float]) -> list:
    return [ConvergenceRow(int(n), float(e), r) for n, e, r in zip(n_list, errors, rates(errors))]


def convergence_table(preset, n_list: Iterable[int], oracle: bool = False, max_workers: Optional[int] = None) -> list:
    """Run ``preset`` at every resolution in ``n_list`` and tabulate E with observed rates.

    ``n_list`` must be ascending with each entry double its predecessor.
    ``oracle=True`` substitutes exact samples for the numerical solution.
    """
    from .presets import sweep_errors

    n_list = [int(n) for n in n_list]
    for a, b in zip(n_list[:-1], n_list[1:]):
        if b != 2 * a:
            raise ValueError(f"resolutions must double: {a} -> {b}")
    errors = sweep_errors(preset, n_list, oracle=oracle, max_workers=max_workers)
    return convergence_rows(n_list, errors)


# -- local smoothing (weighted) estimates --------------------------------------


def weighted_energy(u: GridFunction, p: WeightFunction) -> float:
    return inner(u, u, p)


def _budget_mask(grid: GridFunction, R: float) -> np.ndarray:
    x = grid.x
    half = R - 1.0
    if half <= 0:
        raise ValueError("kato budget needs R > 1")
    if not grid.periodic and (x[0] > -half or x[-1] + grid.dx < half):
        raise ValueError(f"window [{x[0]}, {x[-1] + grid.dx}] does not contain [-{half}, {half}]")
    return np.abs(x) <= half


def kato_increment(u: np.ndarray, grid: GridFunction, mask: np.ndarray) -> float:
    du = dplus(u, grid.dx, grid.periodic)
    return float(grid.dx * np.dot(du[mask], du[mask]))


def kato_budget(traj: "Trajectory", R: float) -> float:
    """``sum_n dt_n dx sum_{|x_j| <= R-1} (D+ u^n_j)^2`` over all but the last snapshot.

    With sparse recording each snapshot is weighted by the time to the next
    one, which reduces to the plain sum when every step is recorded.
    """
    snaps = traj.snapshots
    mask = _budget_mask(snaps[0], R)
    total = 0.0
    for k in range(len(snaps) - 1):
        total += (traj.times[k + 1] - traj.times[k]) * kato_increment(snaps[k].values, snaps[k], mask)
    return total


class KatoAccumulator:
    """Streaming form of :func:`kato_budget` for runs too long to store."""

    def __init__(self, grid: GridFunction, R: float):
        self.grid = grid
        self.mask = _budget_mask(grid, R)
        idx = np.flatnonzero(self.mask)
        # |x| <= R - 1 is one contiguous block of nodes
        self._lo, self._hi = int(idx[0]), int(idx[-1]) + 1
        self.total = 0.0

    def __call__(self, step, t, dt, u_prev, u_next):
        s = _kernels.forward_diff_sq_sum(u_prev, self._lo, self._hi, self.grid.periodic)
        self.total += dt * s / self.grid.dx


class TimeSampler:
    """Capture the solution at prescribed times, linear in time between steps.

    At grid nodes this is exactly the bilinear space-time interpolant.
    """

    def __init__(self, times: Sequence[float]):
        self.times = np.asarray(sorted(times), dtype=float)
        self.samples = [None] * len(self.times)
        self._next = 0

    def start(self, u0: np.ndarray) -> None:
        while self._next < len(self.times) and self.times[self._next] <= 0.0:
            self.samples[self._next] = u0.copy()
            self._next += 1

    def __call__(self, step, t, dt, u_prev, u_next):
        t_end = t + dt
        while self._next < len(self.times) and self.times[self._next] <= t_end * (1 + 1e-14):
            s = min(max((self.times[self._next] - t) / dt, 0.0), 1.0)
            self.samples[self._next] = (1.0 - s) * u_prev + s * u_next
            self._next += 1


def l2_time_difference(coarse: Sequence[np.ndarray], fine: Sequence[np.ndarray], times, dx_coarse: float) -> float:
    """``L^2(0,T; L^2)`` distance between a run and its 2x refinement on the coarse nodes."""
    sq = [dx_coarse * float(np.sum((c - f[::2]) ** 2)) for c, f in zip(coarse, fine)]
    t = np.asarray(times, dtype=float)
    sq = np.asarray(sq)
    return math.sqrt(float(np.sum(0.5 * (sq[1:] + sq[:-1]) * np.diff(t))))


# -- interpolant bounds ---------------------------------------------------------


def interpolant_l2_sq(w: np.ndarray, dx: float, periodic: bool) -> float:
    """Exact ``int |u|^2 dx`` of the piecewise-linear interpolant of nodal values ``w``."""
    return float((2.0 / 3.0) * dx * np.dot(w, w) + dx / 3.0 * np.dot(w, shifted(w, 1, periodic)))


@dataclass
class InterpolantReport:
    times: np.ndarray
    l2: np.ndarray
    bound: float
    ok: bool


def check_interpolant_bounds(traj: "Trajectory", samples_per_step: int = 2) -> InterpolantReport:
    """Check ``||u_dx(., t)||_{L^2} <= ||u^0||`` at nodes and interior times of every step."""
    if traj.record_every != 1:
        raise ValueError("interpolant bounds need every step recorded (record_every=1)")
    snaps = traj.snapshots
    g = snaps[0]
    u0 = snaps[0].values
    bound = l2_norm(u0, g.dx)
    times, vals = [], []
    fracs = np.arange(samples_per_step) / samples_per_step
    for k in range(len(snaps) - 1):
        a, b = snaps[k].values, snaps[k + 1].values
        t0, t1 = traj.times[k], traj.times[k + 1]
        for s in fracs:
            w = (1.0 - s) * a + s * b
            times.append(t0 + s * (t1 - t0))
            vals.append(math.sqrt(interpolant_l2_sq(w, g.dx, g.periodic)))
    times.append(traj.times[-1])
    vals.append(math.sqrt(interpolant_l2_sq(snaps[-1].values, g.dx, g.periodic)))
    vals = np.asarray(vals)
    ok = bool(np.all(vals <= bound * (1.0 + INTERP_TOL)))
    return InterpolantReport(times=np.asarray(times), l2=vals, bound=bound, ok=ok)
