"""Acceptance criteria, one test per criterion.

Each test records a ``[criterion N] PASS/FAIL`` line (printed in the
terminal summary) before asserting.  Grid solves shared between criteria
run once per module.
"""

import os
import subprocess
import sys
import time

import numpy as np
import pytest

from oracles import FROZEN, radial_scan
from stairfbp.conformal import MoebiusInvolution, build_family, certify_family, patch_phi
from stairfbp.grid import Circle, ConvexRing, Polygon, build_field
from stairfbp.level import certify_levels, extract_level, gradient_floor
from stairfbp.nonlinearity import RegularizationSchedule, ThresholdLadder
from stairfbp.obstacle import (ObstacleProblem, audit_lambda_convexity, radial_contact_error,
                               solve_obstacle)
from stairfbp.radial import RadialProblem, eval_radial, matching_jumps, solve_radial
from stairfbp.ring_fd import continuation_solve, residual_audit

LADDER = ThresholdLadder((0.3, 0.6), 2.0, 1.0)
LEVELS = [0.1 * k for k in range(1, 10)]
SCHED = RegularizationSchedule((0.01, 0.01), 0.1, 1e-6)
ANNULUS = ConvexRing(Circle((0, 0), 1.0), Circle((0, 0), 0.25))
ECCENTRIC = ConvexRing(Circle((0, 0), 1.0), Circle((0.2, 0), 0.25))
SQUARE = ConvexRing(Polygon(((-1, -1), (1, -1), (1, 1), (-1, 1))), Circle((0.2, 0), 0.3))
H_LEVEL = 1 / 128


def _timed(fn, *args, **kw):
    t0 = time.perf_counter()
    out = fn(*args, **kw)
    return out, time.perf_counter() - t0


def _radial_error(u, sol):
    X, Y = u.coords()
    ins = u.interior
    r = np.clip(np.hypot(X[ins], Y[ins]), 0.25, 1.0)
    return float(np.max(np.abs(u.values[ins] - eval_radial(sol, r))))


@pytest.fixture(scope="module")
def radial_sol():
    return solve_radial(RadialProblem(2, 0.25, 1.0, LADDER))


@pytest.fixture(scope="module")
def concentric(radial_sol):
    """Criterion 2 runs at h = 1/256 and 1/512 with their wall times."""
    runs = {}
    for n in (256, 512):
        (u, rep), dt = _timed(continuation_solve, build_field(ANNULUS, 1 / n, 1.0), LADDER, SCHED)
        runs[n] = (u, rep, dt, _radial_error(u, radial_sol))
    return runs


@pytest.fixture(scope="module")
def rings():
    """Criterion 4 geometries at h = 1/128."""
    out = {}
    for name, ring in (("eccentric", ECCENTRIC), ("square", SQUARE)):
        t0 = time.perf_counter()
        u, rep = continuation_solve(build_field(ring, H_LEVEL, 1.0), LADDER, SCHED)
        levels = certify_levels(u, LADDER, LEVELS)
        out[name] = (u, rep, levels, time.perf_counter() - t0)
    return out


def test_criterion_1_radial_oracle(criterion):
    t0 = time.perf_counter()
    sol = solve_radial(RadialProblem(2, 0.25, 1.0, LADDER))
    dv, ds = matching_jumps(sol)
    dt = time.perf_counter() - t0
    scan, _ = radial_scan(2, 0.25, 1.0, 2.0, (0.3, 0.6))
    err = max(abs(a - b) for a, b in zip(sol.s, scan))
    frozen = max(abs(a - b) for a, b in zip(sol.s, FROZEN["radial_2d"]))
    jumps = max(abs(float(dv)), abs(float(ds)))
    ok = sol.residual <= 1e-10 and jumps <= 1e-10 and max(err, frozen) <= 1e-4 and dt < 1.0
    criterion(1, ok, f"residual={sol.residual:.1e} jumps={jumps:.1e} "
                     f"scan_err={err:.1e} runtime={dt:.3f}s")
    assert ok


def test_criterion_2_grid_matches_oracle(concentric, criterion):
    e256, e512 = concentric[256][3], concentric[512][3]
    dt = concentric[256][2] + concentric[512][2]
    ratio = e256 / e512
    ok = e256 <= 1e-2 and ratio >= 3 and dt < 60
    criterion(2, ok, f"err(1/256)={e256:.2e} err(1/512)={e512:.2e} ratio={ratio:.2f} "
                     f"runtime={dt:.1f}s")
    assert ok


def test_criterion_3_monotone_family(concentric, rings, criterion):
    gaps = {"concentric": concentric[256][1].monotonicity,
            "concentric_512": concentric[512][1].monotonicity,
            "eccentric": rings["eccentric"][1].monotonicity}
    worst = {k: max(v) for k, v in gaps.items()}
    ok = all(len(v) >= 1 for v in gaps.values()) and all(w <= 1e-8 for w in worst.values())
    criterion(3, ok, " ".join(f"{k}_max_gap={w:.1e}" for k, w in worst.items()))
    assert ok


@pytest.mark.parametrize("name", ["eccentric", "square"])
def test_criterion_4_convex_level_sets(rings, name, criterion):
    u, rep, levels, dt = rings[name]
    tol = max(2 * H_LEVEL, 1e-3)
    defects = [e.defect for e in levels.entries]
    covered = {round(e.level, 12) for e in levels.entries}
    wanted = {round(s, 12) for s in LEVELS + list(LADDER.mu)}
    ok = (wanted <= covered and all(e.error is None for e in levels.entries)
          and all(d is not None and d <= tol for d in defects) and levels.nested and dt < 120)
    criterion(4, ok, f"{name}: max_defect={max(d or np.inf for d in defects):.1e} "
                     f"tol={tol:.1e} nested={levels.nested} runtime={dt:.1f}s")
    assert ok


def test_criterion_5_gradient_floor(concentric, rings, criterion):
    floors = []
    fields = [concentric[256][0], concentric[512][0], rings["eccentric"][0], rings["square"][0]]
    for u in fields:
        for mu in LADDER.mu:
            floors.append(gradient_floor(u, extract_level(u, mu)))
    h = 1 / 128
    harm = ThresholdLadder((0.3, 0.6), 0.0, 1.0)
    u0, _ = continuation_solve(build_field(ANNULUS, h, 1.0), harm, SCHED)
    f0 = gradient_floor(u0, extract_level(u0, 0.5))
    exact = 1 / (0.5 * np.log(4))
    ok = min(floors) > 0 and abs(f0 - exact) <= 5 * h
    criterion(5, ok, f"min_floor={min(floors):.3f} harmonic_floor={f0:.4f} "
                     f"exact={exact:.4f} tol={5 * h:.3f}")
    assert ok


def test_criterion_6_harmonic_below_first_threshold(concentric, rings, criterion):
    lin_tol = 1e-8 * LADDER.M / 10
    worst = {}
    for name, u in (("concentric", concentric[256][0]), ("eccentric", rings["eccentric"][0]),
                    ("square", rings["square"][0])):
        audit = residual_audit(u, LADDER, collar=2.0, levels=[LADDER.mu[0]])
        below = u.interior & (u.values < LADDER.mu[0])
        worst[name] = audit.scaled_max(below)
    ok = all(w <= 10 * lin_tol for w in worst.values())
    criterion(6, ok, " ".join(f"{k}={w:.1e}" for k, w in worst.items())
              + f" tol={10 * lin_tol:.0e}")
    assert ok


def test_criterion_7_multiplicity(criterion):
    t0 = time.perf_counter()
    lad = ThresholdLadder((0.85, 0.93), 2.0, 1.0)
    b = solve_radial(RadialProblem(2, 0.1, 1.0, lad))
    fam = build_family(b, MoebiusInvolution(1.0, 0.2), 3, 1 / 512)
    cert = certify_family(fam, patch_phi(fam))
    flat = build_family(b, MoebiusInvolution(1.0, 0.0), 3, 1 / 512)
    flat_cert = certify_family(flat, patch_phi(flat))
    dt = time.perf_counter() - t0
    geo = max(cert.involution_error, cert.circle_error)
    ok = (cert.distinct == 3 and cert.distinct_ok and cert.free_boundaries == 6
          and cert.residual_ok and flat_cert.distinct == 1 and geo <= 1e-12 and dt < 120)
    criterion(7, ok, f"distinct={cert.distinct} curves={cert.free_boundaries} "
                     f"residual={cert.residual:.2e}/{cert.res_tol:.2e} "
                     f"h2_ratio={cert.h2_ratio:.2f} alpha0_distinct={flat_cert.distinct} "
                     f"geometry_err={geo:.1e} runtime={dt:.1f}s")
    assert ok


def test_criterion_8_obstacle(criterion):
    h, tol = 1 / 32, 1e-10
    t0 = time.perf_counter()
    disk = ObstacleProblem(Circle((0, 0), 4.0), 1.0, 0.1, 0.5, 0.25)
    _, lam_d, rep_d = solve_obstacle(disk, h, tol)
    err = radial_contact_error(lam_d, (0, 0), FROZEN["obstacle_disk4"][0])
    defect_d = audit_lambda_convexity(lam_d)
    square = ObstacleProblem(Polygon(((-4, -4), (4, -4), (4, 4), (-4, 4))), 1.0, 0.1, 0.5, 0.25)
    _, lam_s, rep_s = solve_obstacle(square, h, tol)
    defect_s = audit_lambda_convexity(lam_s)
    dt = time.perf_counter() - t0
    comp = [rep_d.complementarity, rep_s.complementarity]
    comp_ok = all(c["free_max_abs"] <= tol and c["contact_min"] >= -tol for c in comp)
    ok = (err <= 2 * h and defect_d <= 2 * h and defect_s <= max(2 * h, 1e-3)
          and comp_ok and dt < 120)
    criterion(8, ok, f"radius_err={err:.3f} disk_defect={defect_d:.4f} "
                     f"square_defect={defect_s:.4f} "
                     f"complementarity={max(c['free_max_abs'] for c in comp):.1e} "
                     f"runtime={dt:.1f}s")
    assert ok


OBSTACLE_CFG = """kind = obstacle
outer = polygon
outer_vertices = -4,-4, 4,-4, 4,4, -4,4
u0 = 1
c = 0.1
mu = 0.5
f0 = 0.25
h = 0.0625
tol = 1e-9
"""

RING_CFG = """kind = ring2d
outer = circle
outer_center = 0, 0
outer_radius = 1
inner = circle
inner_center = 0.2, 0
inner_radius = 0.25
lam = 2
mu = 0.3, 0.6
eps = 0.02, 0.02
decay = 0.5
floor = 1e-4
h = 0.015625
"""


def test_criterion_9_thread_determinism(tmp_path, criterion):
    env = dict(os.environ, NUMBA_NUM_THREADS="8")
    same = {}
    for verb, text in (("solve-obstacle", OBSTACLE_CFG), ("solve-ring", RING_CFG)):
        cfg = tmp_path / f"{verb}.cfg"
        cfg.write_text(text)
        reports = []
        for threads in (1, 8):
            out = tmp_path / f"{verb}-{threads}"
            proc = subprocess.run([sys.executable, "-m", "stairfbp.cli", verb, "--config",
                                   str(cfg), "--out", str(out), "--threads", str(threads)],
                                  env=env, capture_output=True, text=True)
            assert proc.returncode == 0, proc.stderr
            reports.append((out / "report.json").read_bytes())
        same[verb] = reports[0] == reports[1]
    ok = all(same.values())
    criterion(9, ok, " ".join(f"{k}_identical={v}" for k, v in same.items()))
    assert ok
