import numpy as np
import pytest
import scipy.sparse.linalg as spla

from stairfbp import kernels
from stairfbp.errors import ResolutionTooCoarse, ValidationError
from stairfbp.grid import (INNER, INTERIOR, OUTER, THETA_MIN, Circle, ConvexRing, Polygon, build_domain,
                           build_field, laplacian, stencil)

SQUARE = Polygon(((-1, -1), (1, -1), (1, 1), (-1, 1)))


def test_polygon_orientation_and_convexity():
    cw = Polygon(((-1, 1), (1, 1), (1, -1), (-1, -1)))
    assert cw.area() == pytest.approx(4.0)
    with pytest.raises(ValidationError):
        Polygon(((0, 0), (2, 0), (1, 0.2), (2, 2), (0, 2)))


def test_crossings():
    c = Circle((0, 0), 1.0)
    assert c.crossing(0.5, 0.0, 1.0, 0.0) == pytest.approx(0.5)
    assert SQUARE.crossing(0.5, 0.0, 1.0, 0.0) == pytest.approx(0.5)
    assert np.isinf(c.crossing(2.0, 0.0, 1.0, 0.0))


def test_ring_validation():
    ConvexRing(SQUARE, Circle((0.2, 0.0), 0.3))
    with pytest.raises(ValidationError):
        ConvexRing(Circle((0, 0), 1), Circle((0.8, 0), 0.3))


def test_coarse_resolution_rejected():
    ring = ConvexRing(Circle((0, 0), 1), Circle((0.6, 0), 0.35))
    with pytest.raises(ResolutionTooCoarse):
        build_field(ring, 0.05, 1.0)


def test_annulus_node_count_and_tags():
    h = 1 / 128
    fld = build_field(ConvexRing(Circle((0, 0), 1), Circle((0, 0), 0.25)), h, 1.0)
    n = int(fld.interior.sum())
    expected = np.pi * (1 - 0.25 ** 2) / h ** 2
    assert abs(n - expected) < 2 * np.pi * 1.25 / h
    X, Y = fld.coords()
    r = np.hypot(X, Y)
    assert np.all(r[fld.mask == INNER] <= 0.25)
    assert np.all(r[fld.mask == OUTER] >= 1.0)
    assert np.all((r[fld.interior] > 0.25) & (r[fld.interior] < 1.0))
    bv = fld.boundary_values()
    assert np.all(bv[fld.mask == OUTER] == 0) and np.all(bv[fld.mask == INNER] == 1)
    # every leg is a fraction in (0, 1]
    legs = fld.legs[fld.interior]
    assert legs.min() > 0 and legs.max() <= 1


def test_legs_reach_the_boundary():
    h = 0.1
    c = Circle((0, 0), 1.0)
    fld = build_domain(c, None, h, 0.0, 0.0)
    X, Y = fld.coords()
    ii, jj = np.nonzero(fld.interior & (fld.legs[..., 0] < 1))
    x = X[ii, jj] + h * fld.legs[ii, jj, 0]
    assert np.allclose(np.hypot(x, Y[ii, jj]), 1.0, atol=1e-12)


@pytest.mark.parametrize("h", [1 / 16, 1 / 37])
def test_shortley_weller_exact_on_quadratics(h):
    # u = r^2 is constant on both circles, so the Dirichlet data are constants
    fld = build_domain(Circle((0, 0), 1.0), Circle((0.0, 0.0), 0.3), h, 1.0, 0.09)
    X, Y = fld.coords()
    inside = fld.interior
    fld = fld.with_values(np.where(inside, X ** 2 + Y ** 2, 0.0))
    lap = laplacian(fld)[inside]
    legs = fld.legs[inside].min(axis=1)
    # pointwise exact wherever the legs are not clamped at THETA_MIN
    assert np.allclose(lap[legs > 1e-6], 4.0, atol=1e-8)
    # and the discrete solution of Lap u = 4 reproduces r^2 up to the leg clamp
    st = stencil(fld)
    u = spla.spsolve(st.A.tocsc(), 4.0 - st.b)
    assert np.max(np.abs(u - (X ** 2 + Y ** 2)[inside])) < 10 * THETA_MIN * h * 2.0


def test_stencil_rows_and_cache():
    fld = build_field(ConvexRing(SQUARE, Circle((0.2, 0), 0.3)), 1 / 32, 1.0)
    st = stencil(fld)
    assert stencil(fld) is st
    # row sums of the full stencil vanish (constants are harmonic)
    full = np.asarray(st.A.sum(axis=1)).ravel()
    assert np.all(full <= 1e-9)
    assert np.all(st.A.diagonal() < 0)


def test_sor_matches_direct_solve_and_is_thread_invariant():
    fld = build_field(ConvexRing(SQUARE, Circle((0.2, 0), 0.3)), 1 / 32, 1.0)
    st = stencil(fld)
    inside = fld.interior
    exact = np.zeros(fld.shape)
    exact[inside] = spla.spsolve(st.A.tocsc(), -st.b)
    runs = []
    for threads in (1, 4):
        kernels.set_threads(threads)
        u = np.zeros(fld.shape)
        sweeps, corr = kernels.sor_solve(u, st.coef, -st.bgrid, inside, 0.0, 1.9, 1e-13, 100000)
        runs.append(u)
    kernels.set_threads(1)
    assert np.max(np.abs(runs[0] - exact)) < 1e-10
    assert np.array_equal(runs[0], runs[1])


def test_interior_tag_is_zero():
    assert INTERIOR == 0
