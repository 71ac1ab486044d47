import numpy as np
import pytest

from oracles import FROZEN
from stairfbp.errors import DegenerateRegion, EmptyContactSet, ValidationError
from stairfbp.grid import Circle, Polygon
from stairfbp.level import extract_level, gradient_floor, nested, polygon_area
from stairfbp.nonlinearity import RegularizationSchedule
from stairfbp.obstacle import (ContactSet, ObstacleProblem, audit_lambda_convexity,
                               radial_contact_error, solve_obstacle)

DISK = Circle((0, 0), 4.0)


@pytest.fixture(scope="module")
def disk_run():
    prob = ObstacleProblem(DISK, 1.0, 0.1, 0.5, 0.25)
    return prob, solve_obstacle(prob, 1 / 16, 1e-9)


def test_invalid_inputs():
    with pytest.raises(ValidationError):
        ObstacleProblem(DISK, 0.1, 1.0, 0.5, 0.25)
    with pytest.raises(ValidationError):
        ObstacleProblem(DISK, 1.0, 0.1, 0.05, 0.25)
    with pytest.raises(ValidationError):
        ObstacleProblem(DISK, 1.0, 0.1, 0.5, 1.5)
    with pytest.raises(ValidationError):
        ObstacleProblem(DISK, 1.0, 0.1, 0.5, 0.25, RegularizationSchedule((0.1, 0.1)))


def test_default_schedule():
    prob = ObstacleProblem(DISK, 1.0, 0.1, 0.5, 0.25)
    assert prob.sched.eps == pytest.approx((0.05,))
    assert prob.sched.decay == 0.5 and prob.sched.floor == 1e-4


def test_contact_radius_matches_oracle(disk_run):
    prob, (fld, lam, rep) = disk_run
    a, b = FROZEN["obstacle_disk4"]
    h = fld.h
    assert radial_contact_error(lam, (0, 0), a) <= 2 * h
    assert audit_lambda_convexity(lam) <= 2 * h
    gamma = extract_level(fld, 0.5, top=1.0)
    assert len(gamma) == 1
    assert np.max(np.abs(np.hypot(*gamma.vertices.T) - b)) <= 2 * h


def test_complementarity_and_bounds(disk_run):
    prob, (fld, lam, rep) = disk_run
    comp = rep.complementarity
    assert comp["free_max_abs"] <= 1e-9 and comp["contact_min"] >= -1e-9
    assert fld.values[fld.interior].min() >= prob.c
    assert all(m <= 1e-8 for m in rep.monotonicity)


def test_free_boundaries_nested(disk_run):
    prob, (fld, lam, rep) = disk_run
    gamma = extract_level(fld, prob.mu, top=prob.u0)
    region = gamma.components[0]
    if polygon_area(region) < 0:
        region = region[::-1]
    assert nested(lam.polygon, region)
    assert gradient_floor(fld, gamma) > 0


def test_square_domain_convex_contact():
    sq = Polygon(((-4, -4), (4, -4), (4, 4), (-4, 4)))
    fld, lam, rep = solve_obstacle(ObstacleProblem(sq, 1.0, 0.1, 0.5, 0.25), 1 / 16, 1e-9)
    assert lam.components == 1
    assert audit_lambda_convexity(lam) <= max(2 / 16, 1e-3)


def test_constant_load_limit():
    # f0 close to 1: classical obstacle problem, contact radius from the
    # closed form c + (r^2 - a^2)/4 - a^2/2 ln(r/a) = u0 at r = R
    from scipy.optimize import brentq

    R, u0, c = 4.0, 1.0, 0.1
    f = lambda a: c + (R * R - a * a) / 4 - a * a / 2 * np.log(R / a) - u0
    a = brentq(f, 1e-6, R - 1e-6)
    fld, lam, rep = solve_obstacle(ObstacleProblem(DISK, u0, c, 0.5, 0.999999), 1 / 16, 1e-9)
    assert radial_contact_error(lam, (0, 0), a) <= 2 / 16


def test_empty_contact():
    sq = Polygon(((-1, -1), (1, -1), (1, 1), (-1, 1)))
    with pytest.raises(EmptyContactSet):
        solve_obstacle(ObstacleProblem(sq, 1.0, 0.1, 0.5, 0.25), 1 / 8, 1e-8)


def test_single_node_contact_is_degenerate():
    nodes = np.zeros((5, 5), bool)
    nodes[2, 2] = True
    poly = np.array([(0.5, 0.0), (1.0, 0.5), (0.5, 1.0), (0.0, 0.5)])
    with pytest.raises(DegenerateRegion):
        audit_lambda_convexity(ContactSet(nodes, poly, 1))
