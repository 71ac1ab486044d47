"""The independent oracles still reproduce the frozen reference values."""

import numpy as np
import pytest

from oracles import FROZEN, obstacle_scan, radial_scan, regularized_bvp, scan_single


@pytest.mark.parametrize("dim, lam, mu, key", [
    (2, 2.0, (0.3, 0.6), "radial_2d"),
    (2, 1.0, (0.5,), "radial_2d_single"),
    (3, 2.0, (0.3, 0.6), "radial_3d"),
])
def test_radial_shooting(dim, lam, mu, key):
    radii, _ = radial_scan(dim, 0.25, 1.0, lam, mu)
    assert np.allclose(radii, FROZEN[key], atol=1e-9, rtol=0)


def test_single_threshold_scan_agrees_with_shooting():
    s = scan_single(0.25, 1.0, 1.0, 0.5)
    assert abs(s - FROZEN["radial_2d_single"][0]) < 1e-6


def test_obstacle_shooting():
    a, b = obstacle_scan(4.0, 1.0, 0.1, 0.5, 0.25)
    assert np.allclose((a, b), FROZEN["obstacle_disk4"], atol=1e-8, rtol=0)


def test_regularized_bvp():
    sol = regularized_bvp(0.25, 1.0, 2.0, (0.3, 0.6), (0.05, 0.05))
    assert np.allclose(sol.sol(np.array(FROZEN["bvp_r"]))[0], FROZEN["bvp_u"], atol=1e-7)
