"""Finite-difference solver for the regularized staircase problem on convex rings.

The discrete problem is ``L_h u = lam * phi * H_eps(u)`` at interior nodes,
``u = 0`` on the outer curve and ``u = M`` on the inner one.  Two outer
iterations are available:

``"picard"``
    the order-preserving shifted iteration
    ``(L_h - K) u_new = lam phi H_eps(u_old) - K u_old`` with ``K`` the
    Lipschitz bound of the right-hand side; linear solves by red-black SOR
    (``linear="sor"``) or a sparse factorization kept for the whole stage.
``"newton"``
    semismooth Newton on the same equation with a residual line search.
    The regularized right-hand side is monotone, so the discrete problem has
    a unique solution and both methods converge to it; Newton needs a handful
    of linear solves per stage where the shifted iteration needs thousands
    once ``eps`` is small.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import kernels
from .errors import MonotonicityViolation, NonConvergence, ValidationError
from .grid import ScalarField, stencil
from .nonlinearity import (RegularizationSchedule, ThresholdLadder, lipschitz_bound,
                           staircase, staircase_reg, staircase_reg_slope)

log = logging.getLogger(__name__)

SOR_OMEGA = 1.9
DIRECT_LIMIT = 40_000
MONOTONE_SLACK = 1e-8


@dataclass
class StageInfo:
    eps: tuple
    iterations: int
    update: float
    residual: float
    linear_iterations: int = 0


@dataclass
class SolveReport:
    stages: list = field(default_factory=list)
    monotonicity: list = field(default_factory=list)
    violations: list = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def final_residual(self):
        return self.stages[-1].residual if self.stages else float("nan")

    @property
    def eps_trace(self):
        return [s.eps for s in self.stages]

    def as_dict(self):
        """Deterministic summary (no timings)."""
        return {
            "stages": len(self.stages),
            "iterations": [s.iterations for s in self.stages],
            "eps_trace": [list(s.eps) for s in self.stages],
            "final_residual": self.final_residual,
            "final_update": self.stages[-1].update if self.stages else None,
            "monotonicity_max": [float(m) for m in self.monotonicity],
            "monotonicity_ok": not self.violations,
        }


def _phi_vector(fld, phi):
    if np.isscalar(phi):
        if phi < 0:
            raise ValidationError("phi must be nonnegative")
        return np.full(int(fld.interior.sum()), float(phi))
    phi = np.asarray(phi, dtype=float)
    if phi.shape != fld.shape:
        raise ValidationError("phi field must match the grid shape")
    vec = phi[fld.interior]
    if np.any(vec < 0) or not np.all(np.isfinite(vec)):
        raise ValidationError("phi must be finite and nonnegative")
    return vec


class _Linear:
    """Solves ``(A - diag(d)) x = r`` by sparse LU or preconditioned Krylov.

    The Krylov path reuses one algebraic multigrid hierarchy built from
    ``A`` for every diagonal shift ``d >= 0``; the shifted matrices stay
    M-matrices and the shift is confined to thin bands, so the hierarchy
    remains an effective preconditioner.
    """

    def __init__(self, A, method="auto", cache=None):
        self.A = A
        n = A.shape[0]
        if method == "auto":
            method = "direct" if n <= DIRECT_LIMIT else "amg"
        self.method = method
        self.cache = {} if cache is None else cache
        self.iterations = 0

    def _preconditioner(self):
        if "amg" not in self.cache:
            import pyamg

            self.cache["amg"] = pyamg.ruge_stuben_solver((-self.A).tocsr(), max_coarse=500)
        return self.cache["amg"].aspreconditioner()

    def solve(self, d, rhs, x0=None, rtol=1e-7):
        J = (self.A - sp.diags(d)).tocsr() if d is not None else self.A
        if self.method == "direct":
            return spla.spsolve(J.tocsc(), rhs)
        from pyamg.krylov import bicgstab

        M = self._preconditioner()
        x = np.zeros_like(rhs) if x0 is None else x0
        residuals = []
        x, _ = bicgstab(-J, -rhs, x0=x, tol=rtol, maxiter=500, M=M, residuals=residuals)
        self.iterations += len(residuals)
        return x


def _newton(A, b, phi, ladder, eps, u, tol, lin_tol, maxiter, linear):
    lam_slope = lambda v: phi * staircase_reg_slope(v, ladder, eps)
    rhs_fn = lambda v: phi * staircase_reg(v, ladder, eps)
    diag = A.diagonal()
    F = A @ u + b - rhs_fn(u)
    update = np.inf
    for it in range(1, maxiter + 1):
        d = lam_slope(u)
        scaled = np.max(np.abs(F) / np.abs(diag - d)) if F.size else 0.0
        if update <= tol and scaled <= lin_tol:
            return u, it - 1, update, scaled
        delta = linear.solve(d, -F, x0=np.zeros_like(u))
        if not np.all(np.isfinite(delta)):
            raise NonConvergence("linear solve produced non-finite values")
        norm0 = np.linalg.norm(F)
        t = 1.0
        for _ in range(12):
            trial = u + t * delta
            Ft = A @ trial + b - rhs_fn(trial)
            if np.linalg.norm(Ft) <= (1.0 - 1e-4 * t) * norm0 or norm0 == 0.0:
                break
            t *= 0.5
        u, F = trial, Ft
        update = t * np.max(np.abs(delta)) if delta.size else 0.0
    d = lam_slope(u)
    scaled = np.max(np.abs(F) / np.abs(diag - d)) if F.size else 0.0
    if update <= tol and scaled <= lin_tol:
        return u, maxiter, update, scaled
    raise NonConvergence(f"Newton did not converge in {maxiter} iterations "
                         f"(update {update:.3e}, residual {scaled:.3e})")


def shifted_step(fld: ScalarField, u_old, ladder, eps, phi=1.0, shift=None):
    """One exact step of the shifted monotone iteration, returned on the grid.

    Solves ``(L_h - K) u_new = lam phi H_eps(u_old) - K u_old`` directly.
    With ``K`` at least the Lipschitz bound of the right-hand side the map
    ``u_old -> u_new`` is order preserving.
    """
    st = stencil(fld)
    inside = fld.interior
    pv = _phi_vector(fld, phi)
    K = lipschitz_bound(ladder, eps) * (pv.max() if pv.size else 0.0) if shift is None else shift
    uo = np.asarray(u_old, dtype=float)[inside]
    rhs = pv * staircase_reg(uo, ladder, eps) - K * uo - st.b
    un = spla.spsolve((st.A - K * sp.identity(st.A.shape[0])).tocsc(), rhs)
    out = fld.boundary_values()
    out[inside] = un
    return out


def _picard(fld, st, phi, ladder, eps, u, tol, lin_tol, maxiter, linear):
    inside = fld.interior
    K = lipschitz_bound(ladder, eps) * (phi.max() if phi.size else 0.0)
    n = st.A.shape[0]
    lin_iters = 0
    if linear == "sor":
        ug = np.zeros(fld.shape)
        ug[inside] = u
        rhs_grid = np.zeros(fld.shape)
    else:
        lu = spla.splu((st.A - K * sp.identity(n)).tocsc())
    for it in range(1, maxiter + 1):
        rhs = phi * staircase_reg(u, ladder, eps) - K * u - st.b
        if linear == "sor":
            rhs_grid[inside] = rhs
            sweeps, _ = kernels.sor_solve(ug, st.coef, rhs_grid, inside, K, SOR_OMEGA,
                                          lin_tol, 1_000_000)
            lin_iters += sweeps
            new = ug[inside].copy()
        else:
            new = lu.solve(rhs)
        update = np.max(np.abs(new - u)) if n else 0.0
        u = new
        if update <= tol:
            F = st.A @ u + st.b - phi * staircase_reg(u, ladder, eps)
            scaled = np.max(np.abs(F) / np.abs(st.A.diagonal())) if n else 0.0
            return u, it, update, scaled, lin_iters
    raise NonConvergence(f"shifted iteration did not converge in {maxiter} steps")


def harmonic_start(fld: ScalarField, linear="auto"):
    """Discrete harmonic function with the field's Dirichlet data."""
    st = stencil(fld)
    out = fld.boundary_values()
    out[fld.interior] = _Linear(st.A, linear, fld._cache).solve(None, -st.b, rtol=1e-13)
    return out


def _stage(fld, ladder, eps, phi, tol, lin_tol, method, linear, maxiter, u0):
    st = stencil(fld)
    inside = fld.interior
    u = u0[inside].copy()
    if method == "newton":
        lin = _Linear(st.A, "direct" if linear == "sor" else linear, fld._cache)
        u, its, upd, res = _newton(st.A, st.b, phi, ladder, eps, u, tol, lin_tol,
                                   maxiter, lin)
        lits = lin.iterations
    elif method == "picard":
        lin = "sor" if linear in ("sor", "auto") else "direct"
        u, its, upd, res, lits = _picard(fld, st, phi, ladder, eps, u, tol, lin_tol,
                                         maxiter, lin)
    else:
        raise ValidationError(f"unknown method {method!r}")
    if not np.all(np.isfinite(u)):
        raise NonConvergence("NaN detected in solution")
    out = fld.boundary_values()
    out[inside] = u
    return out, StageInfo(tuple(float(e) for e in eps), its, float(upd), float(res), lits)


def _defaults(ladder, tol, lin_tol):
    tol = 1e-8 * ladder.M if tol is None else tol
    lin_tol = tol / 10.0 if lin_tol is None else lin_tol
    return tol, lin_tol


def solve_regularized(fld: ScalarField, ladder: ThresholdLadder, sched, phi=1.0,
                      tol=None, *, method="newton", linear="auto", warm=False,
                      lin_tol=None, maxiter=None, info=None) -> ScalarField:
    """Solve the regularized problem for one set of ramp widths.

    ``sched`` is a :class:`RegularizationSchedule` (its current widths are
    used) or a sequence of widths.  Without ``warm`` the iteration starts
    from the discrete harmonic function, a supersolution; with ``warm`` it
    starts from ``fld.values``.
    """
    eps = sched.eps if isinstance(sched, RegularizationSchedule) else tuple(sched)
    RegularizationSchedule(eps).validate(ladder)
    tol, lin_tol = _defaults(ladder, tol, lin_tol)
    if maxiter is None:
        maxiter = 60 if method == "newton" else 200_000
    pv = _phi_vector(fld, phi)
    start = fld.boundary_values() if warm else harmonic_start(fld, "auto" if linear == "sor" else linear)
    if warm:
        start[fld.interior] = fld.values[fld.interior]
    values, stage = _stage(fld, ladder, eps, pv, tol, lin_tol, method, linear, maxiter, start)
    if info is not None:
        info.append(stage)
    return fld.with_values(values)


def continuation_solve(fld: ScalarField, ladder: ThresholdLadder,
                       sched: RegularizationSchedule, phi=1.0, tol=None, *,
                       method="newton", linear="auto", lin_tol=None, strict=False,
                       keep_stages=False):
    """Shrink every ramp width by ``sched.decay`` until all are below
    ``sched.floor``, warm-starting each stage from the previous one.

    Consecutive stages are audited for the ordering ``u_eps <= u_eps_prev``;
    violations beyond ``1e-8`` are logged in the report (and raised when
    ``strict``).  Returns ``(field, report)``; with ``keep_stages`` the
    report also carries every stage's field under ``report.fields``.
    """
    sched.validate(ladder)
    t0 = time.perf_counter()
    report = SolveReport()
    fields = []
    cur = None
    for k, eps in enumerate(sched.stages()):
        info = []
        src = fld if cur is None else cur
        nxt = solve_regularized(src, ladder, eps, phi, tol, method=method, linear=linear,
                                warm=cur is not None, lin_tol=lin_tol, info=info)
        report.stages.append(info[0])
        if cur is not None:
            inside = fld.interior
            gap = float(np.max(nxt.values[inside] - cur.values[inside])) if inside.any() else 0.0
            report.monotonicity.append(gap)
            if gap > MONOTONE_SLACK:
                msg = f"stage {k}: u_eps exceeds previous stage by {gap:.3e}"
                report.violations.append(msg)
                log.warning(msg)
                if strict:
                    raise MonotonicityViolation(msg)
        cur = nxt
        if keep_stages:
            fields.append(cur)
    report.wall_time = time.perf_counter() - t0
    if keep_stages:
        report.fields = fields
    return cur, report


@dataclass
class ResidualAudit:
    residual: np.ndarray
    scaled: np.ndarray
    keep: np.ndarray
    h: float

    def _sel(self, region):
        return self.keep if region is None else self.keep & region

    def max(self, region=None):
        sel = self._sel(region)
        return float(np.max(np.abs(self.residual[sel]))) if sel.any() else 0.0

    def scaled_max(self, region=None):
        sel = self._sel(region)
        return float(np.max(np.abs(self.scaled[sel]))) if sel.any() else 0.0

    def l2(self, region=None):
        sel = self._sel(region)
        return float(np.sqrt(self.h**2 * np.sum(self.residual[sel] ** 2)))

    def summary(self):
        return {"max": self.max(), "l2": self.l2(), "scaled_max": self.scaled_max(),
                "nodes": int(self.keep.sum())}


def residual_audit(fld: ScalarField, ladder: ThresholdLadder, phi=1.0, collar=2.0,
                   levels=None) -> ResidualAudit:
    """Residual of the exact staircase equation ``L_h u - lam phi f(u)``.

    Interior nodes within ``collar * h`` of an extracted free boundary are
    excluded: the discrete solution carries the ramp there.  ``scaled`` is
    the residual divided by the magnitude of the stencil's diagonal, i.e. the
    correction a Jacobi sweep would make.
    """
    from .level import distance_to_levels

    st = stencil(fld)
    inside = fld.interior
    pv = np.zeros(fld.shape)
    pv[inside] = _phi_vector(fld, phi)
    res = np.zeros(fld.shape)
    lap = st.A @ fld.values[inside] + st.b
    res[inside] = lap - pv[inside] * staircase(fld.values[inside], ladder)
    scaled = np.zeros(fld.shape)
    scaled[inside] = res[inside] / np.abs(st.A.diagonal())
    levels = ladder.mu if levels is None else levels
    keep = inside.copy()
    if len(levels):
        dist = distance_to_levels(fld, levels)
        keep &= dist > collar * fld.h
    return ResidualAudit(res, scaled, keep, fld.h)
