"""Red-black relaxation kernels.

Within one colour every update reads only nodes of the other colour, so rows
can be processed in parallel without changing a single bit of the result.
Per-row maxima are reduced serially afterwards.
"""

import warnings

import numba
import numpy as np
from numba import njit, prange

# the sandbox TBB is too old; numba falls back to OpenMP/workqueue on its own
warnings.filterwarnings("ignore", message=".*TBB threading layer.*")


def set_threads(n):
    """Use ``n`` numba threads (capped at what the runtime was started with)."""
    n = max(1, min(int(n), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(n)
    return n


@njit(parallel=True, cache=True)
def _sor_color(u, coef, rhs, inside, shift, omega, color, rowmax):
    nx, ny = u.shape
    for i in prange(1, nx - 1):
        m = 0.0
        for j in range(1 + (i + 1 + color) % 2, ny - 1, 2):
            if not inside[i, j]:
                continue
            s = (coef[i, j, 0] * u[i + 1, j] + coef[i, j, 1] * u[i - 1, j]
                 + coef[i, j, 2] * u[i, j + 1] + coef[i, j, 3] * u[i, j - 1])
            gs = (rhs[i, j] - s) / (coef[i, j, 4] - shift)
            d = gs - u[i, j]
            u[i, j] += omega * d
            if abs(d) > m:
                m = abs(d)
        rowmax[i] = max(rowmax[i], m)


def sor_solve(u, coef, rhs, inside, shift, omega, tol, maxsweeps):
    """Red-black SOR for ``(L - shift) u = rhs`` on interior nodes.

    ``L`` is given by ``coef`` (E, W, N, S, center) with boundary terms
    already moved into ``rhs``; non-interior entries of ``u`` must be zero.
    Stops once the largest Gauss-Seidel correction is below ``tol``.
    Returns the sweep count and the last correction.
    """
    rowmax = np.zeros(u.shape[0])
    for sweep in range(1, maxsweeps + 1):
        rowmax[:] = 0.0
        _sor_color(u, coef, rhs, inside, shift, omega, 0, rowmax)
        _sor_color(u, coef, rhs, inside, shift, omega, 1, rowmax)
        corr = rowmax.max()
        if corr <= tol:
            return sweep, corr
    return maxsweeps, corr


@njit(parallel=True, cache=True)
def _psor_color(u, coef, rhs, inside, f0, mu, eps, lower, omega, color, rowmax):
    nx, ny = u.shape
    k = (1.0 - f0) / eps
    for i in prange(1, nx - 1):
        m = 0.0
        for j in range(1 + (i + 1 + color) % 2, ny - 1, 2):
            if not inside[i, j]:
                continue
            s = (coef[i, j, 0] * u[i + 1, j] + coef[i, j, 1] * u[i - 1, j]
                 + coef[i, j, 2] * u[i, j + 1] + coef[i, j, 3] * u[i, j - 1]) - rhs[i, j]
            c0 = coef[i, j, 4]
            # root of s + c0 v - g(v) = 0, decreasing in v, g piecewise linear
            if s + c0 * mu - f0 <= 0.0:
                gs = (f0 - s) / c0
            elif s + c0 * (mu + eps) - 1.0 >= 0.0:
                gs = (1.0 - s) / c0
            else:
                gs = (f0 - k * mu - s) / (c0 - k)
            new = u[i, j] + omega * (gs - u[i, j])
            if new < lower:
                new = lower
            d = abs(new - u[i, j])
            u[i, j] = new
            if d > m:
                m = d
        rowmax[i] = max(rowmax[i], m)


def psor_solve(u, coef, rhs, inside, f0, mu, eps, lower, omega, tol, maxsweeps):
    """Projected nonlinear SOR for ``L u = g_eps(u)``, ``u >= lower``.

    ``g_eps`` ramps from ``f0`` below ``mu`` to 1 above ``mu + eps``; each
    node solves its scalar equation exactly before relaxing and clamping.
    """
    rowmax = np.zeros(u.shape[0])
    for sweep in range(1, maxsweeps + 1):
        rowmax[:] = 0.0
        _psor_color(u, coef, rhs, inside, f0, mu, eps, lower, omega, 0, rowmax)
        _psor_color(u, coef, rhs, inside, f0, mu, eps, lower, omega, 1, rowmax)
        corr = rowmax.max()
        if corr <= tol:
            return sweep, corr
    return maxsweeps, corr
