"""Obstacle problem with a discontinuous load on a convex planar domain.

Find ``u >= c`` with ``u = u0`` on the boundary such that
``L_h u = g(u)`` wherever ``u > c`` and ``L_h u <= g(u)`` on the contact set,
``g(u) = f0 + (1 - f0) H(u - mu)``.  The step is replaced by the ramp
``g_eps`` and the widths are driven to zero by continuation; each stage is
solved by projected nonlinear SOR, whose clamp at ``c`` enforces both
``u = c`` and the vanishing normal derivative on the contact boundary.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DegenerateRegion, EmptyContactSet, NonConvergence, ValidationError
from .grid import INTERIOR, build_domain, stencil
from .level import convexity_defect, marching_squares, polygon_area
from .nonlinearity import RegularizationSchedule, obstacle_ramp

PSOR_OMEGA = 1.9


@dataclass(frozen=True)
class ObstacleProblem:
    domain: object
    u0: float
    c: float
    mu: float
    f0: float
    sched: RegularizationSchedule = None

    def __post_init__(self):
        if not self.u0 > self.c > 0:
            raise ValidationError("need u0 > c > 0")
        if not 0.0 < self.f0 < 1.0:
            raise ValidationError("f0 must lie in (0, 1)")
        if not self.c < self.mu < self.u0:
            raise ValidationError("mu must lie in (c, u0)")
        if self.sched is None:
            object.__setattr__(self, "sched",
                               RegularizationSchedule((0.1 * (self.u0 - self.mu),), 0.5, 1e-4))
        if len(self.sched.eps) != 1:
            raise ValidationError("the obstacle load has a single ramp")


@dataclass
class ContactSet:
    """Clamped nodes and the polygon bounding them (largest component)."""

    nodes: np.ndarray
    polygon: np.ndarray
    components: int

    @property
    def count(self):
        return int(self.nodes.sum())


@dataclass
class ObstacleReport:
    stages: list = field(default_factory=list)
    monotonicity: list = field(default_factory=list)
    complementarity: dict = field(default_factory=dict)
    wall_time: float = 0.0

    def as_dict(self):
        return {"stages": len(self.stages),
                "sweeps": [s["sweeps"] for s in self.stages],
                "eps_trace": [float(s["eps"]) for s in self.stages],
                "monotonicity_max": self.monotonicity,
                "complementarity": self.complementarity}


def contact_set(fld, c):
    nodes = fld.interior & (fld.values <= c)
    curves = marching_squares(nodes.astype(float), 0.5, fld.origin, fld.h)
    closed = sorted((p for p, k in curves if k), key=lambda p: -abs(polygon_area(p)))
    poly = closed[0] if closed else np.zeros((0, 2))
    if len(poly) and polygon_area(poly) < 0:
        poly = poly[::-1]
    return ContactSet(nodes, poly, len(closed))


def complementarity(fld, prob: ObstacleProblem, eps=None):
    """Scaled residual ``(g(u) - L_h u) / |diag|`` split by contact status.

    Returns the largest ``|r|`` off the contact set and the most negative
    ``r`` on it (which must not fall below ``-tol``).
    """
    st = stencil(fld)
    inside = fld.interior
    u = fld.values[inside]
    load = (obstacle_ramp(u, prob.f0, prob.mu, eps) if eps is not None
            else prob.f0 + (1.0 - prob.f0) * (u >= prob.mu))
    r = (load - (st.A @ u + st.b)) / np.abs(st.A.diagonal())
    free = u > prob.c
    return {"free_max_abs": float(np.max(np.abs(r[free]))) if free.any() else 0.0,
            "contact_min": float(np.min(r[~free])) if (~free).any() else 0.0}


def solve_obstacle(prob: ObstacleProblem, h: float, tol: float = 1e-10,
                   maxsweeps: int = 2_000_000):
    """Solve on a lattice of spacing ``h``; returns ``(field, contact, report)``.

    Sweeps stop once the largest correction is below ``tol / 10``, which
    leaves the scaled complementarity residual below ``tol``.  Raises
    :class:`EmptyContactSet` when no node touches ``c``.
    """
    t0 = time.perf_counter()
    fld = build_domain(prob.domain, None, h, prob.u0, 0.0)
    fld.geometry = prob.domain
    st = stencil(fld)
    inside = fld.interior
    u = np.where(inside, prob.u0, 0.0)
    rhs = -st.bgrid
    report = ObstacleReport()
    prev = None
    sweep_tol = 0.1 * tol
    for eps in prob.sched.stages():
        e = eps[0]
        sweeps, corr = kernels.psor_solve(u, st.coef, rhs, inside, prob.f0, prob.mu, e,
                                          prob.c, PSOR_OMEGA, sweep_tol, maxsweeps)
        if corr > sweep_tol:
            raise NonConvergence(f"projected SOR stalled at correction {corr:.3e}")
        report.stages.append({"eps": e, "sweeps": sweeps, "correction": float(corr)})
        if prev is not None:
            report.monotonicity.append(float(np.max(u[inside] - prev[inside])))
        prev = u.copy()
    out = fld.with_values(np.where(inside, u, prob.u0))
    out.mask = fld.mask
    report.complementarity = complementarity(out, prob, e)
    report.wall_time = time.perf_counter() - t0
    lam = contact_set(out, prob.c)
    if lam.count == 0:
        raise EmptyContactSet("no node reached the contact value")
    return out, lam, report


def audit_lambda_convexity(lam: ContactSet) -> float:
    """Hull defect of the contact polygon."""
    if lam.count < 3 or len(lam.polygon) < 3:
        raise DegenerateRegion("contact set has fewer than three nodes")
    return convexity_defect(lam.polygon)


def radial_contact_error(lam: ContactSet, center, a):
    """Largest deviation of the contact polygon from the circle of radius ``a``."""
    d = np.hypot(lam.polygon[:, 0] - center[0], lam.polygon[:, 1] - center[1])
    return float(np.max(np.abs(d - a)))
