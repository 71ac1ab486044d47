"""Independent reference computations.

None of these touch the package's closed forms or Newton solvers: the radial
problems are integrated as ODEs with scipy and bracketed by bisection.  The
frozen numbers in ``FROZEN`` were produced by these functions; the tests
compare the package against the frozen values and (in test_oracles.py)
check that the oracles still reproduce them.
"""

import numpy as np
from scipy.integrate import solve_bvp, solve_ivp
from scipy.optimize import brentq


def _rhs(lam, mu, dim):
    mu = np.asarray(mu, float)

    def f(r, y):
        count = float(np.sum(y[0] >= mu))
        return [y[1], lam * count - (dim - 1) / r * y[1]]

    return f


def shoot_radial(dim, r0, R, lam, mu, q, max_step=1e-3):
    """Integrate inward from ``u(R) = 0, u'(R) = q``; returns (u(r0), crossings)."""
    events = []
    for m in mu:
        ev = (lambda mm: (lambda r, y: y[0] - mm))(m)
        ev.terminal = False
        events.append(ev)
    sol = solve_ivp(_rhs(lam, mu, dim), (R, r0), [0.0, q], events=events,
                    rtol=1e-12, atol=1e-14, max_step=max_step)
    radii = [float(t[0]) if len(t) else np.nan for t in sol.t_events]
    return float(sol.y[0, -1]), radii


def radial_scan(dim, r0, R, lam, mu, M=1.0):
    """Bisection on the outer slope so that ``u(r0) = M``; returns the radii."""
    # u'(R) < 0 for a decreasing profile; bracket the slope
    lo, hi = -1e3, 0.0
    f = lambda q: shoot_radial(dim, r0, R, lam, mu, q)[0] - M
    q = brentq(f, lo, hi, xtol=1e-14, rtol=1e-14)
    return shoot_radial(dim, r0, R, lam, mu, q)[1], q


def regularized_bvp(r0, R, lam, mu, eps, M=1.0, n=801):
    """solve_bvp for ``u'' + u'/r = lam sum ramp_eps(u - mu_i)`` on ``(r0, R)``."""
    mu = np.asarray(mu, float)
    eps = np.asarray(eps, float)

    def f(r, y):
        ramp = np.clip((y[0][None, :] - mu[:, None]) / eps[:, None], 0.0, 1.0).sum(0)
        return np.vstack((y[1], lam * ramp - y[1] / r))

    def bc(ya, yb):
        return np.array([ya[0] - M, yb[0]])

    r = np.linspace(r0, R, n)
    guess = np.vstack((M * np.log(R / r) / np.log(R / r0), -M / (r * np.log(R / r0))))
    sol = solve_bvp(f, bc, r, guess, tol=1e-8, max_nodes=1_000_000)
    assert sol.success, sol.message
    return sol


def obstacle_shoot(a, R, c, mu, f0, dim=2):
    """Integrate from the contact radius ``a`` outward; returns (u(R), b)."""
    def f(r, y):
        load = f0 + (1.0 - f0) * (y[0] >= mu)
        return [y[1], load - (dim - 1) / r * y[1]]

    ev = lambda r, y: y[0] - mu
    sol = solve_ivp(f, (a, R), [c, 0.0], events=[ev], rtol=1e-12, atol=1e-14, max_step=1e-3)
    b = float(sol.t_events[0][0]) if len(sol.t_events[0]) else np.nan
    return float(sol.y[0, -1]), b


def obstacle_scan(R, u0, c, mu, f0):
    """Scan ``a`` on a coarse grid, then bisect the bracket where ``u(R) = u0``."""
    grid = np.linspace(1e-3, R * 0.999, 40)
    vals = [obstacle_shoot(a, R, c, mu, f0)[0] - u0 for a in grid]
    for k in range(len(grid) - 1):
        if np.sign(vals[k]) != np.sign(vals[k + 1]):
            a = brentq(lambda t: obstacle_shoot(t, R, c, mu, f0)[0] - u0,
                       grid[k], grid[k + 1], xtol=1e-13)
            return a, obstacle_shoot(a, R, c, mu, f0)[1]
    raise ValueError("no contact radius in range")


FROZEN = {
    # radial_scan(2, 0.25, 1, lam=2, mu=(0.3, 0.6))
    "radial_2d": (0.5989959189787355, 0.39088729525930366),
    # radial_scan(2, 0.25, 1, lam=1, mu=(0.5,))
    "radial_2d_single": (0.4873931292436378,),
    # radial_scan(3, 0.25, 1, lam=2, mu=(0.3, 0.6))
    "radial_3d": (0.496762425663888, 0.3423144978475272),
    # obstacle_scan(R=4, u0=1, c=0.1, mu=0.5, f0=0.25) -> (a, b)
    "obstacle_disk4": (1.1711064813488907, 3.251549604964398),
    # regularized_bvp(0.25, 1, 2, (0.3, 0.6), (0.05, 0.05)) at r = 0.3, 0.4, ..., 0.9
    "bvp_r": (0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9),
    "bvp_u": (0.8298123228328849, 0.5875009275767015, 0.42303417869565707,
              0.3063837784720298, 0.2139258226205994, 0.1338366167531237,
              0.06319293061331542),
}


def scan_single(r0, R, lam, mu, M=1.0, step=1e-5):
    """Scan ``s`` in steps of ``step`` with a 4x4 matching solve at each point.

    Two shells (planar): ``A0 ln r + B0`` outside ``s`` and
    ``lam r^2 / 4 + A1 ln r + B1`` inside.  Returns the ``s`` where
    ``u(s) - mu`` changes sign, refined linearly between scan points.
    """
    s = np.arange(r0 + step, R, step)
    c1 = lam / 4.0
    n = s.size
    A = np.zeros((n, 4, 4))
    b = np.zeros((n, 4))
    # unknowns: A0, B0, A1, B1
    A[:, 0, 0], A[:, 0, 1] = np.log(R), 1.0                   # u(R) = 0
    A[:, 1, 2], A[:, 1, 3] = np.log(r0), 1.0                  # u(r0) = M
    b[:, 1] = M - c1 * r0 ** 2
    A[:, 2, 0], A[:, 2, 1] = np.log(s), 1.0                   # value match
    A[:, 2, 2], A[:, 2, 3] = -np.log(s), -1.0
    b[:, 2] = c1 * s ** 2
    A[:, 3, 0], A[:, 3, 2] = 1.0 / s, -1.0 / s                # slope match
    b[:, 3] = 2 * c1 * s
    x = np.linalg.solve(A, b[..., None])[..., 0]
    f = x[:, 0] * np.log(s) + x[:, 1] - mu
    k = np.nonzero(np.sign(f[:-1]) != np.sign(f[1:]))[0]
    if not k.size:
        raise ValueError("no sign change")
    k = k[0]
    return float(s[k] - f[k] * (s[k + 1] - s[k]) / (f[k + 1] - f[k]))
