"""Compiled inner-loop kernels for the time stepper."""

import numpy as np
from numba import njit


@njit(cache=True)
def band_lu_solve(lut, inv_diag, piv, rhs):
    """Forward/back substitution with ``gbtrf`` factors for ``kl=1, ku=2`` (0-based pivots).

    ``lut[j, r]`` is band row ``r`` of column ``j`` (the transposed LAPACK
    layout, diagonal in row 3) and ``inv_diag`` holds ``1 / lut[:, 3]``.
    ``rhs`` is not modified.
    """
    n = rhs.shape[0]
    b = rhs.copy()
    for j in range(n - 1):
        p = piv[j]
        if p != j:
            t = b[p]
            b[p] = b[j]
            b[j] = t
        b[j + 1] -= lut[j, 4] * b[j]
    for j in range(n - 1, -1, -1):
        x = b[j] * inv_diag[j]
        b[j] = x
        if j >= 1:
            b[j - 1] -= lut[j, 2] * x
        if j >= 2:
            b[j - 2] -= lut[j, 1] * x
        if j >= 3:
            b[j - 3] -= lut[j, 0] * x
    return b


@njit(cache=True)
def low_rank_correct(y, corr, rows, cols):
    """In place ``y[rows] -= corr @ y[cols]``."""
    m = cols.shape[0]
    c = np.empty(m)
    for k in range(m):
        c[k] = y[cols[k]]
    for r in range(rows.shape[0]):
        s = 0.0
        for k in range(m):
            s += corr[r, k] * c[k]
        y[rows[r]] -= s
    return y


@njit(cache=True)
def lax_friedrichs(u, dt, dx, periodic):
    """``w_j = <u>_j - dt <u>_j (u_{j+1} - u_{j-1}) / (2 dx)``."""
    n = u.shape[0]
    w = np.empty(n)
    for j in range(n):
        if periodic:
            up = u[j + 1] if j + 1 < n else u[0]
            um = u[j - 1] if j > 0 else u[n - 1]
        else:
            up = u[j + 1] if j + 1 < n else 0.0
            um = u[j - 1] if j > 0 else 0.0
        a = 0.5 * (up + um)
        w[j] = a - dt * a * (up - um) / (2.0 * dx)
    return w


@njit(cache=True)
def forward_diff_sq_sum(u, lo, hi, periodic):
    """``sum_{lo <= j < hi} (u_{j+1} - u_j)^2`` with wrap or zero extension past the end."""
    n = u.shape[0]
    s = 0.0
    for j in range(lo, hi):
        if j + 1 < n:
            nxt = u[j + 1]
        else:
            nxt = u[0] if periodic else 0.0
        d = nxt - u[j]
        s += d * d
    return s


@njit(cache=True)
def periodic_residual(x, b, cm1, c0, c1, c2):
    """``b - M x`` for the periodic stencil ``(cm1, c0, c1, c2)`` on offsets ``(-1, 0, 1, 2)``."""
    n = x.shape[0]
    r = np.empty(n)
    for i in range(n):
        im = i - 1 if i > 0 else n - 1
        i1 = i + 1 if i + 1 < n else i + 1 - n
        i2 = i + 2 if i + 2 < n else i + 2 - n
        r[i] = b[i] - (cm1 * x[im] + c0 * x[i] + c1 * x[i1] + c2 * x[i2])
    return r
