"""Closed-form radial solutions on annuli and disks.

In ``N`` dimensions a radial function with constant Laplacian ``2 N c`` on a
shell has the form ``u(r) = c r**2 + A psi(r) + B`` where ``psi`` is the
fundamental solution (``ln r`` in the plane, ``r**(2-N)`` otherwise).  A
solution of the staircase problem is therefore fixed by the radii where it
crosses each threshold; these radii are found by Newton iteration on the
interface residuals ``u(s_i) - mu_i``, with the shell coefficients obtained
from the linear C1 matching system.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import (EmptyContactSet, NewtonDivergence, NonmonotoneSolution,
                     OutOfDomain, ValidationError)
from .nonlinearity import ThresholdLadder


def psi(r, dim):
    r = np.asarray(r, dtype=float)
    return np.log(r) if dim == 2 else r ** (2.0 - dim)


def dpsi(r, dim):
    r = np.asarray(r, dtype=float)
    return 1.0 / r if dim == 2 else (2.0 - dim) * r ** (1.0 - dim)


def ddpsi(r, dim):
    r = np.asarray(r, dtype=float)
    return -1.0 / r**2 if dim == 2 else (2.0 - dim) * (1.0 - dim) * r ** (-dim)


@dataclass(frozen=True)
class RadialProblem:
    dim: int
    r0: float
    R: float
    ladder: ThresholdLadder
    phi_const: float = 1.0

    def __post_init__(self):
        if self.dim < 2:
            raise ValidationError("dimension must be at least 2")
        if not 0.0 < self.r0 < self.R:
            raise ValidationError("need 0 < r0 < R")
        if not self.phi_const > 0:
            raise ValidationError("phi_const must be positive")

    def shell_curvature(self, j):
        """Coefficient ``c_j`` of ``r**2`` on a shell where ``j`` thresholds are exceeded."""
        return self.ladder.lam * self.phi_const * j / (2.0 * self.dim)


@dataclass(frozen=True)
class RadialSolution:
    """Piecewise closed form. ``shells[j]`` holds ``(c_j, A_j, B_j)`` for the
    shell where exactly ``j`` thresholds are exceeded, so ``shells[0]`` touches
    the outer sphere and ``shells[k]`` the inner one."""

    problem: RadialProblem
    s: tuple
    shells: tuple
    k: int
    inactive: tuple = ()
    newton_iterations: int = 0
    residual: float = 0.0

    def shell_index(self, r):
        # s is decreasing; count interfaces strictly inside r, so that an
        # interface radius itself falls in the inner shell
        r = np.asarray(r, dtype=float)
        s = np.asarray(self.s, dtype=float)
        return np.sum(r[..., None] <= s, axis=-1) if s.size else np.zeros(r.shape, int)


def _shell_values(coef, r, dim):
    c, A, B = coef
    return c * r**2 + A * psi(r, dim) + B


def _shell_slopes(coef, r, dim):
    c, A, _ = coef
    return 2.0 * c * r + A * dpsi(r, dim)


def shell_coefficients(problem: RadialProblem, s, M=None):
    """Solve the linear matching system for interface radii ``s``.

    Boundary conditions ``u(r0) = M`` and ``u(R) = 0`` plus continuity of
    ``u`` and ``u'`` across every interface give ``2k + 2`` equations for the
    ``2k + 2`` unknowns ``(A_j, B_j)``.
    """
    M = problem.ladder.M if M is None else M
    dim = problem.dim
    k = len(s)
    size = 2 * k + 2
    mat = np.zeros((size, size))
    rhs = np.zeros(size)
    c = [problem.shell_curvature(j) for j in range(k + 1)]

    mat[0, 0], mat[0, 1] = psi(problem.R, dim), 1.0
    rhs[0] = -c[0] * problem.R**2
    mat[1, 2 * k], mat[1, 2 * k + 1] = psi(problem.r0, dim), 1.0
    rhs[1] = M - c[k] * problem.r0**2
    for i in range(1, k + 1):
        r = s[i - 1]
        row = 2 * i
        # value continuity between shell i-1 (outside) and shell i (inside)
        mat[row, 2 * (i - 1)] = psi(r, dim)
        mat[row, 2 * (i - 1) + 1] = 1.0
        mat[row, 2 * i] = -psi(r, dim)
        mat[row, 2 * i + 1] = -1.0
        rhs[row] = (c[i] - c[i - 1]) * r**2
        mat[row + 1, 2 * (i - 1)] = dpsi(r, dim)
        mat[row + 1, 2 * i] = -dpsi(r, dim)
        rhs[row + 1] = 2.0 * (c[i] - c[i - 1]) * r
    sol = np.linalg.solve(mat, rhs)
    return tuple((c[j], sol[2 * j], sol[2 * j + 1]) for j in range(k + 1))


def interface_residual(problem: RadialProblem, s):
    shells = shell_coefficients(problem, s)
    mu = problem.ladder.mu
    return np.array([_shell_values(shells[i], s[i], problem.dim) - mu[i]
                     for i in range(len(s))])


def harmonic_radii(problem: RadialProblem):
    """Level radii of the harmonic (lambda = 0) profile."""
    dim, M = problem.dim, problem.ladder.M
    pR, p0 = psi(problem.R, dim), psi(problem.r0, dim)
    levels = pR + np.asarray(problem.ladder.mu) / M * (p0 - pR)
    if dim == 2:
        return np.exp(levels)
    return levels ** (1.0 / (2.0 - dim))


def _ordered(problem, s):
    bounds = np.concatenate(([problem.R], s, [problem.r0]))
    return bool(np.all(np.diff(bounds) < 0))


def _newton(problem, s, tol, maxiter):
    step = 1e-7 * (problem.R - problem.r0)
    F = interface_residual(problem, s)
    for it in range(1, maxiter + 1):
        if np.max(np.abs(F)) <= tol:
            return s, F, it - 1
        J = np.empty((len(s), len(s)))
        for j in range(len(s)):
            sp = s.copy()
            sp[j] += step
            J[:, j] = (interface_residual(problem, sp) - F) / step
        try:
            delta = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            return None
        # full steps are taken whenever they keep the radii ordered; shorter
        # ones must also reduce the residual
        t = 1.0
        while t > 1e-6:
            trial = s + t * delta
            if _ordered(problem, trial):
                Ft = interface_residual(problem, trial)
                if t == 1.0 or np.max(np.abs(Ft)) < np.max(np.abs(F)):
                    break
            t *= 0.5
        else:
            return None
        s, F = trial, Ft
    if np.max(np.abs(F)) <= tol:
        return s, F, maxiter
    return None


def _shoot(problem: RadialProblem, q):
    """Integrate inward from ``R`` with ``u(R) = 0`` and ``u'(R) = -q``.

    Returns the crossing radii found and ``u(r0)``.
    """
    dim, mu = problem.dim, problem.ladder.mu
    r_hi, val, slope = problem.R, 0.0, -q
    radii = []
    for j in range(problem.ladder.n + 1):
        c = problem.shell_curvature(j)
        A = (slope - 2.0 * c * r_hi) / dpsi(r_hi, dim)
        B = val - c * r_hi**2 - A * psi(r_hi, dim)
        coef = (c, A, B)
        if j == problem.ladder.n:
            break
        target = mu[j]
        grid = np.linspace(r_hi, problem.r0, 400)
        vals = _shell_values(coef, grid, dim) - target
        hit = np.nonzero(vals >= 0)[0]
        if hit.size == 0:
            break
        idx = hit[0]
        if idx == 0:
            r_cross = r_hi
        else:
            r_cross = brentq(lambda r: _shell_values(coef, r, dim) - target,
                             grid[idx], grid[idx - 1], xtol=1e-15, rtol=1e-15)
        radii.append(r_cross)
        r_hi, val, slope = r_cross, target, _shell_slopes(coef, r_cross, dim)
    return np.array(radii), float(_shell_values(coef, problem.r0, dim))


def _shooting_fallback(problem: RadialProblem):
    M = problem.ladder.M

    def miss(q):
        radii, u0 = _shoot(problem, q)
        return u0 - M if len(radii) == problem.ladder.n else -M - 1.0

    lo, hi = 0.0, 1.0
    while miss(hi) < 0:
        hi *= 2.0
        if hi > 1e12:
            raise NewtonDivergence("shooting could not bracket the outer slope")
    q = brentq(miss, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=500)
    return _shoot(problem, q)[0]


def solve_radial(problem: RadialProblem, tol: float = 1e-12,
                 maxiter: int = 100) -> RadialSolution:
    """Solve the radial staircase problem on the annulus ``r0 < r < R``.

    Raises :class:`NonmonotoneSolution` if the computed profile is not
    strictly decreasing and :class:`NewtonDivergence` if neither Newton nor the
    shooting fallback converges.
    """
    if tol <= 0:
        raise ValidationError("tol must be positive")
    n = problem.ladder.n
    iterations = 0
    if n == 0:
        s = np.zeros(0)
        F = np.zeros(0)
    else:
        out = _newton(problem, harmonic_radii(problem), tol, maxiter)
        if out is None:
            s0 = _shooting_fallback(problem)
            out = _newton(problem, s0, tol, maxiter)
            if out is None:
                raise NewtonDivergence("interface Newton iteration did not converge")
        s, F, iterations = out
    shells = shell_coefficients(problem, s)
    sol = RadialSolution(problem=problem, s=tuple(float(v) for v in s), shells=shells,
                         k=len(s), inactive=(), newton_iterations=iterations,
                         residual=float(np.max(np.abs(F))) if len(F) else 0.0)
    _check_monotone(sol)
    return sol


def _check_monotone(sol: RadialSolution, samples: int = 1000):
    p = sol.problem
    edges = (p.R,) + sol.s + (p.r0,)
    for j in range(sol.k + 1):
        r = np.linspace(edges[j + 1], edges[j], samples)
        if np.any(_shell_slopes(sol.shells[j], r, p.dim) >= 0):
            raise NonmonotoneSolution(f"profile is not decreasing on shell {j}")


def eval_radial(sol: RadialSolution, r):
    r = np.asarray(r, dtype=float)
    p = sol.problem
    if np.any((r < p.r0 * (1 - 1e-14)) | (r > p.R * (1 + 1e-14))):
        raise OutOfDomain("radius outside [r0, R]")
    idx = sol.shell_index(r)
    out = np.zeros_like(r)
    for j, coef in enumerate(sol.shells):
        sel = idx == j
        out[sel] = _shell_values(coef, r[sel], p.dim)
    return out if out.ndim else float(out)


def eval_radial_deriv(sol: RadialSolution, r):
    r = np.asarray(r, dtype=float)
    p = sol.problem
    if np.any((r < p.r0 * (1 - 1e-14)) | (r > p.R * (1 + 1e-14))):
        raise OutOfDomain("radius outside [r0, R]")
    idx = sol.shell_index(r)
    out = np.zeros_like(r)
    for j, coef in enumerate(sol.shells):
        sel = idx == j
        out[sel] = _shell_slopes(coef, r[sel], p.dim)
    return out if out.ndim else float(out)


def eval_radial_deriv2(sol: RadialSolution, r):
    r = np.asarray(r, dtype=float)
    idx = sol.shell_index(r)
    out = np.zeros_like(r)
    for j, (c, A, _) in enumerate(sol.shells):
        sel = idx == j
        out[sel] = 2.0 * c + A * ddpsi(r[sel], sol.problem.dim)
    return out if out.ndim else float(out)


def matching_jumps(sol: RadialSolution):
    """Largest value and slope jumps across the interfaces."""
    dim = sol.problem.dim
    dv = ds = 0.0
    for i, r in enumerate(sol.s, start=1):
        outer, inner = sol.shells[i - 1], sol.shells[i]
        dv = max(dv, abs(_shell_values(outer, r, dim) - _shell_values(inner, r, dim)))
        ds = max(ds, abs(_shell_slopes(outer, r, dim) - _shell_slopes(inner, r, dim)))
    return dv, ds


# ---------------------------------------------------------------- obstacle

@dataclass(frozen=True)
class RadialObstacleSolution:
    """Contact radius ``a``, load switch radius ``b`` (``None`` when the
    threshold is never crossed) and shell coefficients ``(c, A, B)`` for the
    inner ``(a, b)`` and outer ``(b, R)`` regimes."""

    dim: int
    R: float
    u0: float
    c: float
    mu: float
    f0: float
    a: float
    b: float | None
    inner: tuple
    outer: tuple | None
    crossing: bool = True
    info: dict = field(default_factory=dict)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        out = np.full_like(r, self.c)
        inner = (r > self.a) & ((r <= self.b) if self.b is not None else True)
        out[inner] = _shell_values(self.inner, r[inner], self.dim)
        if self.b is not None:
            sel = r > self.b
            out[sel] = _shell_values(self.outer, r[sel], self.dim)
        return out if out.ndim else float(out)

    def deriv(self, r):
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        inner = (r > self.a) & ((r <= self.b) if self.b is not None else True)
        out[inner] = _shell_slopes(self.inner, r[inner], self.dim)
        if self.b is not None:
            sel = r > self.b
            out[sel] = _shell_slopes(self.outer, r[sel], self.dim)
        return out if out.ndim else float(out)


def _contact_shell(a, c, load, dim):
    cc = load / (2.0 * dim)
    A = -2.0 * cc * a / dpsi(a, dim)
    B = c - cc * a**2 - A * psi(a, dim)
    return (cc, A, B)


def _continue_shell(r, val, slope, load, dim):
    cc = load / (2.0 * dim)
    A = (slope - 2.0 * cc * r) / dpsi(r, dim)
    B = val - cc * r**2 - A * psi(r, dim)
    return (cc, A, B)


def _obstacle_profile(a, dim, R, c, mu, f0):
    """Build the profile for contact radius ``a``; returns (b, inner, outer)."""
    inner = _contact_shell(a, c, f0, dim)
    if not mu > c or f0 >= 1.0:
        load = 1.0 if f0 >= 1.0 or mu <= c else f0
        return None, _contact_shell(a, c, load, dim), None
    # u is increasing past a, so the threshold crossing is unique
    if _shell_values(inner, R, dim) <= mu:
        return None, inner, None
    b = brentq(lambda r: _shell_values(inner, r, dim) - mu, a, R, xtol=1e-15, rtol=1e-15)
    outer = _continue_shell(b, mu, _shell_slopes(inner, b, dim), 1.0, dim)
    return b, inner, outer


def _outer_value(a, dim, R, c, mu, f0):
    b, inner, outer = _obstacle_profile(a, dim, R, c, mu, f0)
    shell = inner if outer is None else outer
    return _shell_values(shell, R, dim)


def solve_radial_obstacle(dim, R, u0, c, mu, f0, tol=1e-12, maxiter=50):
    """Radial obstacle problem on the ball ``B_R``.

    The contact set is the ball of radius ``a``; on ``(a, b)`` the load is
    ``f0`` and on ``(b, R)`` it is 1.  ``a`` is bracketed on the scalar
    outer-boundary residual and the pair ``(a, b)`` is then polished by Newton
    on the two matching residuals.
    """
    if not u0 > c > 0:
        raise ValidationError("need u0 > c > 0")
    if not 0.0 < f0 <= 1.0:
        raise ValidationError("f0 must lie in (0, 1]")
    if dim < 2:
        raise ValidationError("dimension must be at least 2")

    a_lo = R * 1e-12
    miss = lambda a: _outer_value(a, dim, R, c, mu, f0) - u0
    if miss(a_lo) < 0:
        raise EmptyContactSet(
            "boundary value too large for contact: the solution stays above c")
    a = brentq(miss, a_lo, R, xtol=1e-15, rtol=1e-15, maxiter=500)
    b, inner, outer = _obstacle_profile(a, dim, R, c, mu, f0)
    crossing = b is not None
    iterations = 0
    if crossing:
        a, b, iterations = _polish_obstacle(a, b, dim, R, u0, c, mu, f0, tol, maxiter)
        inner = _contact_shell(a, c, f0, dim)
        outer = _continue_shell(b, _shell_values(inner, b, dim),
                                _shell_slopes(inner, b, dim), 1.0, dim)
    return RadialObstacleSolution(dim=dim, R=R, u0=u0, c=c, mu=mu, f0=f0, a=float(a),
                                  b=None if b is None else float(b), inner=inner,
                                  outer=outer, crossing=crossing,
                                  info={"newton_iterations": iterations})


def _obstacle_residual(a, b, dim, R, u0, c, mu, f0):
    inner = _contact_shell(a, c, f0, dim)
    outer = _continue_shell(b, _shell_values(inner, b, dim),
                            _shell_slopes(inner, b, dim), 1.0, dim)
    return np.array([_shell_values(inner, b, dim) - mu,
                     _shell_values(outer, R, dim) - u0])


def _polish_obstacle(a, b, dim, R, u0, c, mu, f0, tol, maxiter):
    x = np.array([a, b])
    step = 1e-7 * R
    for it in range(maxiter):
        F = _obstacle_residual(*x, dim, R, u0, c, mu, f0)
        if np.max(np.abs(F)) <= tol:
            return x[0], x[1], it
        J = np.empty((2, 2))
        for j in range(2):
            xp = x.copy()
            xp[j] += step
            J[:, j] = (_obstacle_residual(*xp, dim, R, u0, c, mu, f0) - F) / step
        dx = np.linalg.solve(J, -F)
        if not 0 < x[0] + dx[0] < x[1] + dx[1] < R:
            raise NewtonDivergence("obstacle Newton left the admissible radii")
        x = x + dx
    F = _obstacle_residual(*x, dim, R, u0, c, mu, f0)
    if np.max(np.abs(F)) <= max(tol, 1e-11):
        return x[0], x[1], maxiter
    raise NewtonDivergence("obstacle Newton did not converge")
