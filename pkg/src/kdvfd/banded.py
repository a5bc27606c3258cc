"""Banded assembly and solution of the implicit dispersive system.

The matrix is ``M = I + dt * D+^2 D-`` with row stencil
``(-mu3, 1 + 3 mu3, -3 mu3, mu3)`` on offsets ``(-1, 0, +1, +2)`` where
``mu3 = dt / dx**3``. On the line the band is used as is (zero extension).
In the periodic case the wrap-around entries are split off as a rank-3
correction and handled with the Sherman-Morrison-Woodbury formula on top
of a banded LU of the truncated band, so every solve stays O(n).
The Woodbury terms are ~mu3^(2/3) times larger than the solution and cancel,
so the periodic route adds one step of iterative refinement.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import lapack

from . import _kernels
from .grid import Boundary

OFFSETS = (-1, 0, 1, 2)
KL, KU = 1, 2
CORR_CUTOFF = 1e-20


class SingularOperatorError(ArithmeticError):
    """Raised when the banded LU meets a zero pivot."""


@dataclass(frozen=True)
class BandedOperator:
    n: int
    mu3: float
    boundary: Boundary

    @property
    def coefficients(self) -> dict:
        m = self.mu3
        return {-1: -m, 0: 1.0 + 3.0 * m, 1: -3.0 * m, 2: m}

    def wrap_entries(self) -> list:
        """``(row, col, value)`` of the periodic corner entries (empty on the line)."""
        if self.boundary is not Boundary.PERIODIC or self.mu3 == 0.0:
            return []
        n, c = self.n, self.coefficients
        entries = []
        for i in range(n):
            for k in OFFSETS:
                j = i + k
                if j < 0 or j >= n:
                    entries.append((i, j % n, c[k]))
        return entries

    def banded_storage(self) -> np.ndarray:
        """Truncated band in LAPACK ``gbtrf`` layout (``2*KL + KU + 1`` rows)."""
        ab = np.zeros((2 * KL + KU + 1, self.n))
        for k, val in self.coefficients.items():
            row = KL + KU - k
            if k >= 0:
                ab[row, k:] = val
            else:
                ab[row, : self.n + k] = val
        return ab

    def to_dense(self) -> np.ndarray:
        n = self.n
        a = np.zeros((n, n))
        for k, val in self.coefficients.items():
            idx = np.arange(max(0, -k), min(n, n - k))
            a[idx, idx + k] = val
        for i, j, val in self.wrap_entries():
            a[i, j] += val
        return a

    def matvec(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape != (self.n,):
            raise ValueError(f"expected vector of length {self.n}, got shape {v.shape}")
        periodic = self.boundary is Boundary.PERIODIC
        out = np.zeros(self.n)
        for k, val in self.coefficients.items():
            if periodic:
                out += val * np.roll(v, -k)
            elif k >= 0:
                out[: self.n - k] += val * v[k:]
            else:
                out[-k:] += val * v[: self.n + k]
        return out


def assemble(dx: float, dt: float, n: int, boundary: Boundary | str) -> BandedOperator:
    if n < 4:
        raise ValueError(f"need n >= 4 unknowns, got {n}")
    if not dx > 0:
        raise ValueError("dx must be positive")
    if dt < 0:
        raise ValueError("dt must be non-negative")
    dx3 = float(dx) ** 3
    if dx3 == 0.0 or not np.isfinite(float(dt) / dx3):
        raise ValueError(f"dt/dx^3 is not representable for dx={dx!r}, dt={dt!r}")
    return BandedOperator(n=int(n), mu3=float(dt) / dx3, boundary=Boundary(boundary))


@dataclass(frozen=True)
class Factorization:
    op: BandedOperator
    lu: np.ndarray
    piv: np.ndarray
    # contiguous copies for the compiled substitution
    lut: np.ndarray = None
    inv_diag: np.ndarray = None
    # Woodbury data for the periodic wrap: x[corr_rows] = y[corr_rows] - corr @ y[wrap_cols]
    wrap_cols: Optional[np.ndarray] = None
    corr: Optional[np.ndarray] = None
    corr_rows: Optional[np.ndarray] = None

    @property
    def n(self) -> int:
        return self.op.n


def _band_solve(lu, piv, rhs):
    x, info = lapack.dgbtrs(lu, KL, KU, rhs, piv)
    if info != 0:
        raise ValueError(f"dgbtrs failed with info={info}")
    return x


def factor(op: BandedOperator) -> Factorization:
    lu, piv, info = lapack.dgbtrf(op.banded_storage(), KL, KU)
    if info > 0:
        raise SingularOperatorError(
            f"zero pivot at row {info - 1}; the operator should be coercive, "
            "check dx/dt for overflow"
        )
    if info < 0:
        raise ValueError(f"dgbtrf rejected argument {-info}")
    lut = np.ascontiguousarray(lu.T)
    inv_diag = 1.0 / lut[:, KL + KU]
    for arr in (lu, piv, lut, inv_diag):
        arr.flags.writeable = False

    wraps = op.wrap_entries()
    if not wraps:
        return Factorization(op, lu, piv, lut, inv_diag)

    rows = sorted({i for i, _, _ in wraps})
    cols = sorted({j for _, j, _ in wraps})
    # M = A + U K V^T with U = I[:, rows], V = I[:, cols]
    K = np.zeros((len(rows), len(cols)))
    for i, j, val in wraps:
        K[rows.index(i), cols.index(j)] += val
    U = np.zeros((op.n, len(rows)))
    U[rows, np.arange(len(rows))] = 1.0
    Z = _band_solve(lu, piv, U)
    cap = np.eye(len(rows)) + K @ Z[cols, :]
    corr = Z @ np.linalg.solve(cap, K)
    # the columns decay geometrically away from both ends; rows far below round-off are dropped
    size = np.abs(corr).max(axis=1)
    corr_rows = np.flatnonzero(size > CORR_CUTOFF * size.max())
    corr = np.ascontiguousarray(corr[corr_rows])
    cols_arr = np.asarray(cols)
    for arr in (corr, corr_rows, cols_arr):
        arr.flags.writeable = False
    return Factorization(op, lu, piv, lut, inv_diag, wrap_cols=cols_arr, corr=corr, corr_rows=corr_rows)


def solve(f: Factorization, rhs) -> np.ndarray:
    """Solve ``M x = rhs`` with a precomputed factorization."""
    b = np.asarray(rhs, dtype=float)
    if b.shape != (f.n,):
        raise ValueError(f"rhs has shape {b.shape}, operator has n={f.n}")
    y = _woodbury_solve(f, b)
    if f.corr is not None:
        c = f.op.coefficients
        r = _kernels.periodic_residual(y, b, c[-1], c[0], c[1], c[2])
        y += _woodbury_solve(f, r)
    return y


def _woodbury_solve(f: Factorization, b: np.ndarray) -> np.ndarray:
    y = _kernels.band_lu_solve(f.lut, f.inv_diag, f.piv, b)
    if f.corr is not None:
        _kernels.low_rank_correct(y, f.corr, f.corr_rows, f.wrap_cols)
    return y
