"""Convex curves, convex rings and the masked Cartesian field that carries u.

Nodes are indexed ``values[i, j]`` at ``(x0 + i h, y0 + j h)``.  Interior
nodes that sit next to a curved boundary use Shortley-Weller legs: the
fraction ``theta`` of a grid step after which the segment to the neighbour
leaves the domain.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ResolutionTooCoarse, ValidationError

INTERIOR, OUTER, INNER, EXTERIOR = 0, 1, 2, 3
MASK_CODES = "IONX"

# E, W, N, S
DIRECTIONS = ((1, 0), (-1, 0), (0, 1), (0, -1))

THETA_MIN = 1e-6


@dataclass(frozen=True)
class Circle:
    center: tuple
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "radius", float(self.radius))
        if not self.radius > 0:
            raise ValidationError("circle radius must be positive")

    def contains(self, x, y, closed=False):
        d2 = (np.asarray(x) - self.center[0]) ** 2 + (np.asarray(y) - self.center[1]) ** 2
        r2 = self.radius**2
        return d2 <= r2 if closed else d2 < r2

    def crossing(self, x, y, dx, dy):
        """Smallest ``t > 0`` with ``(x, y) + t (dx, dy)`` on the circle (``inf`` if none)."""
        px = np.asarray(x, dtype=float) - self.center[0]
        py = np.asarray(y, dtype=float) - self.center[1]
        a = dx * dx + dy * dy
        b = 2.0 * (px * dx + py * dy)
        c = px * px + py * py - self.radius**2
        disc = b * b - 4 * a * c
        ok = disc >= 0
        sq = np.sqrt(np.where(ok, disc, 0.0))
        t1 = (-b - sq) / (2 * a)
        t2 = (-b + sq) / (2 * a)
        t = np.where(t1 > 0, t1, np.where(t2 > 0, t2, np.inf))
        return np.where(ok, t, np.inf)

    def bbox(self):
        cx, cy = self.center
        r = self.radius
        return cx - r, cy - r, cx + r, cy + r

    def boundary_points(self, n=2048):
        t = np.linspace(0.0, 2 * np.pi, n, endpoint=False)
        return np.column_stack((self.center[0] + self.radius * np.cos(t),
                                self.center[1] + self.radius * np.sin(t)))

    def centroid(self):
        return self.center

    def area(self):
        return np.pi * self.radius**2

    def describe(self):
        return {"kind": "circle", "center": list(self.center), "radius": self.radius}


@dataclass(frozen=True)
class Polygon:
    """Convex polygon; vertices are stored counter-clockwise."""

    vertices: tuple

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise ValidationError("a polygon needs at least three (x, y) vertices")
        if _signed_area(v) < 0:
            v = v[::-1]
        e = np.roll(v, -1, axis=0) - v
        cross = e[:, 0] * np.roll(e[:, 1], -1) - e[:, 1] * np.roll(e[:, 0], -1)
        if np.any(cross <= 0):
            raise ValidationError("polygon is not strictly convex")
        object.__setattr__(self, "vertices", tuple(map(tuple, v)))

    @property
    def array(self):
        return np.asarray(self.vertices)

    def _edges(self):
        v = self.array
        return v, np.roll(v, -1, axis=0) - v

    def contains(self, x, y, closed=False):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        v, e = self._edges()
        inside = np.ones(np.broadcast(x, y).shape, dtype=bool)
        for (vx, vy), (ex, ey) in zip(v, e):
            side = ex * (y - vy) - ey * (x - vx)
            inside &= side >= 0 if closed else side > 0
        return inside

    def crossing(self, x, y, dx, dy):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        dx = np.asarray(dx, dtype=float)
        dy = np.asarray(dy, dtype=float)
        v, e = self._edges()
        best = np.full(np.broadcast(x, y, dx, dy).shape, np.inf)
        for (vx, vy), (ex, ey) in zip(v, e):
            den = dx * ey - dy * ex
            safe = np.where(den == 0, 1.0, den)
            wx, wy = vx - x, vy - y
            t = (wx * ey - wy * ex) / safe
            u = (wx * dy - wy * dx) / safe
            hit = (den != 0) & (t > 0) & (u >= 0) & (u <= 1)
            best = np.where(hit & (t < best), t, best)
        return best

    def bbox(self):
        v = self.array
        return v[:, 0].min(), v[:, 1].min(), v[:, 0].max(), v[:, 1].max()

    def boundary_points(self, n=2048):
        v = self.array
        closed = np.vstack((v, v[:1]))
        seg = np.hypot(*np.diff(closed, axis=0).T)
        s = np.concatenate(([0.0], np.cumsum(seg)))
        t = np.linspace(0.0, s[-1], n, endpoint=False)
        return np.column_stack((np.interp(t, s, closed[:, 0]), np.interp(t, s, closed[:, 1])))

    def centroid(self):
        v = self.array
        w = np.roll(v, -1, axis=0)
        cr = v[:, 0] * w[:, 1] - w[:, 0] * v[:, 1]
        a = cr.sum() / 2.0
        return (float(((v[:, 0] + w[:, 0]) * cr).sum() / (6 * a)),
                float(((v[:, 1] + w[:, 1]) * cr).sum() / (6 * a)))

    def area(self):
        return abs(_signed_area(self.array))

    def describe(self):
        return {"kind": "polygon", "vertices": [list(p) for p in self.vertices]}


def _signed_area(v):
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _curve_points(curve):
    if isinstance(curve, Polygon):
        # vertices plus a dense edge sampling
        return np.vstack((curve.array, curve.boundary_points(1024)))
    return curve.boundary_points(4096)


def boundary_separation(outer, inner):
    """Smallest distance between the two boundary curves."""
    from shapely.geometry import LinearRing, Point

    if isinstance(outer, Circle) and isinstance(inner, Circle):
        d = np.hypot(outer.center[0] - inner.center[0], outer.center[1] - inner.center[1])
        return outer.radius - inner.radius - d
    o = LinearRing(_curve_points(outer) if isinstance(outer, Circle) else outer.array)
    if isinstance(inner, Circle):
        # distance from the inner circle's center to the outer boundary, minus radius
        return o.distance(Point(inner.center)) - inner.radius
    return o.distance(LinearRing(inner.array))


@dataclass(frozen=True)
class ConvexRing:
    """``outer \\ closure(inner)`` for nested convex curves."""

    outer: object
    inner: object

    def __post_init__(self):
        pts = _curve_points(self.inner)
        if not np.all(self.outer.contains(pts[:, 0], pts[:, 1])):
            raise ValidationError("inner curve is not strictly inside the outer curve")
        if boundary_separation(self.outer, self.inner) <= 0:
            raise ValidationError("inner curve touches the outer curve")

    def describe(self):
        return {"outer": self.outer.describe(), "inner": self.inner.describe()}


@dataclass
class ScalarField:
    """Masked uniform grid sample of a scalar function.

    ``legs[i, j, d]`` is the Shortley-Weller fraction for direction ``d``
    (E, W, N, S) at interior nodes and 1 elsewhere.  Nodes inside the closed
    inner curve are tagged INNER, nodes outside the outer curve that touch an
    interior node are OUTER, every other outside node is EXTERIOR.
    """

    origin: tuple
    h: float
    mask: np.ndarray
    values: np.ndarray
    legs: np.ndarray
    outer_value: float = 0.0
    inner_value: float = 0.0
    geometry: object = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def shape(self):
        return self.mask.shape

    @property
    def interior(self):
        return self.mask == INTERIOR

    def coords(self):
        nx, ny = self.shape
        x = self.origin[0] + self.h * np.arange(nx)
        y = self.origin[1] + self.h * np.arange(ny)
        return np.meshgrid(x, y, indexing="ij")

    def with_values(self, values):
        """Copy sharing geometry (and cached stencils) with new values."""
        out = ScalarField(self.origin, self.h, self.mask, np.asarray(values, dtype=float),
                          self.legs, self.outer_value, self.inner_value, self.geometry)
        out._cache = self._cache
        return out

    def boundary_values(self):
        """Values with Dirichlet data written into the boundary nodes."""
        v = self.values.copy()
        v[self.mask == OUTER] = self.outer_value
        v[self.mask == INNER] = self.inner_value
        v[self.mask == EXTERIOR] = self.outer_value
        return v

    def extended(self):
        """Values with ghost extrapolation at boundary nodes.

        Each OUTER/INNER node adjacent to the interior receives the linear
        extrapolation, averaged over its interior neighbours, of the line
        through the interior value and the boundary datum at the true boundary
        crossing.  Linear interpolation along a cut edge therefore reaches the
        boundary value exactly where the boundary is.
        """
        v = self.boundary_values()
        acc = np.zeros_like(v)
        cnt = np.zeros_like(v)
        inside = self.interior
        nx, ny = self.shape
        for d, (di, dj) in enumerate(DIRECTIONS):
            th = self.legs[..., d]
            cut = inside & (th < 1.0)
            ii, jj = np.nonzero(cut)
            qi, qj = ii + di, jj + dj
            qmask = self.mask[qi, qj]
            bval = np.where(qmask == INNER, self.inner_value, self.outer_value)
            t = np.maximum(th[ii, jj], 1e-3)
            up = self.values[ii, jj]
            np.add.at(acc, (qi, qj), up + (bval - up) / t)
            np.add.at(cnt, (qi, qj), 1.0)
        touched = cnt > 0
        v[touched] = acc[touched] / cnt[touched]
        return v


def _first_crossing(curve, x, y, dx, dy, h):
    t = curve.crossing(x, y, dx * h, dy * h)
    return np.clip(np.where(np.isfinite(t), t, 1.0), THETA_MIN, 1.0)


def build_domain(outer, inner, h, outer_value, inner_value, margin=2):
    """Classify a lattice covering ``outer`` and compute cut-cell legs.

    ``inner`` may be ``None`` for a simply connected domain.
    """
    if not h > 0:
        raise ValidationError("grid spacing must be positive")
    xmin, ymin, xmax, ymax = outer.bbox()
    nx = int(np.ceil((xmax - xmin) / h)) + 1 + 2 * margin
    ny = int(np.ceil((ymax - ymin) / h)) + 1 + 2 * margin
    # center the lattice on the bounding box so symmetric domains stay symmetric
    x0 = 0.5 * (xmin + xmax) - 0.5 * (nx - 1) * h
    y0 = 0.5 * (ymin + ymax) - 0.5 * (ny - 1) * h
    X, Y = np.meshgrid(x0 + h * np.arange(nx), y0 + h * np.arange(ny), indexing="ij")

    in_outer = outer.contains(X, Y)
    in_inner = inner.contains(X, Y, closed=True) if inner is not None else np.zeros_like(in_outer)
    inside = in_outer & ~in_inner

    mask = np.full((nx, ny), EXTERIOR, dtype=np.int8)
    mask[inside] = INTERIOR
    mask[in_inner] = INNER
    legs = np.ones((nx, ny, 4))
    for d, (di, dj) in enumerate(DIRECTIONS):
        nb_inside = np.roll(inside, (-di, -dj), axis=(0, 1))
        cut = inside & ~nb_inside
        ii, jj = np.nonzero(cut)
        if ii.size == 0:
            continue
        nb_inner = np.roll(in_inner, (-di, -dj), axis=(0, 1))[ii, jj]
        th = np.empty(ii.size)
        px, py = X[ii, jj], Y[ii, jj]
        if inner is not None and nb_inner.any():
            th[nb_inner] = _first_crossing(inner, px[nb_inner], py[nb_inner], di, dj, h)
        out_sel = ~nb_inner
        th[out_sel] = _first_crossing(outer, px[out_sel], py[out_sel], di, dj, h)
        legs[ii, jj, d] = th
        qi, qj = ii + di, jj + dj
        outer_nb = ~nb_inner
        mask[qi[outer_nb], qj[outer_nb]] = OUTER

    values = np.where(mask == INNER, inner_value, outer_value).astype(float)
    return ScalarField((float(x0), float(y0)), float(h), mask, values, legs,
                       float(outer_value), float(inner_value))


def build_field(ring: ConvexRing, h: float, M: float) -> ScalarField:
    """Lattice for ``ring`` with ``u = 0`` outside and ``u = M`` on the hole.

    Interior values start from the ray interpolant: linear in distance from
    the hole's centroid, equal to M on the inner curve and 0 on the outer.
    """
    if boundary_separation(ring.outer, ring.inner) < 3 * h:
        raise ResolutionTooCoarse("boundaries are closer than three grid steps")
    fld = build_domain(ring.outer, ring.inner, h, 0.0, M)
    fld.geometry = ring
    cx, cy = ring.inner.centroid()
    X, Y = fld.coords()
    inside = fld.interior
    px, py = X[inside] - cx, Y[inside] - cy
    rho = np.hypot(px, py)
    dx = np.where(rho > 0, px / np.where(rho > 0, rho, 1.0), 1.0)
    dy = np.where(rho > 0, py / np.where(rho > 0, rho, 1.0), 0.0)
    t_in = ring.inner.crossing(np.full_like(px, cx), np.full_like(py, cy), dx, dy)
    t_out = ring.outer.crossing(np.full_like(px, cx), np.full_like(py, cy), dx, dy)
    frac = np.clip((t_out - rho) / (t_out - t_in), 0.0, 1.0)
    fld.values[inside] = M * frac
    return fld


# ------------------------------------------------------------ discrete operator

@dataclass
class Stencil:
    """Five-point Shortley-Weller coefficients restricted to interior nodes.

    ``A @ u[interior] + b`` equals the discrete Laplacian at interior nodes.
    ``coef`` holds (E, W, N, S, center) coefficients on the full lattice with
    cut neighbours folded into ``bgrid``.
    """

    A: sp.csr_matrix
    b: np.ndarray
    index: np.ndarray
    coef: np.ndarray
    bgrid: np.ndarray


def stencil(fld: ScalarField) -> Stencil:
    key = ("stencil", fld.outer_value, fld.inner_value)
    if key in fld._cache:
        return fld._cache[key]
    h = fld.h
    inside = fld.interior
    nx, ny = fld.shape
    index = -np.ones((nx, ny), dtype=np.int64)
    index[inside] = np.arange(int(inside.sum()))
    legs = fld.legs
    coef = np.zeros((nx, ny, 5))
    bgrid = np.zeros((nx, ny))
    bval = fld.boundary_values()
    for axis, (d_plus, d_minus) in enumerate(((0, 1), (2, 3))):
        tp = legs[..., d_plus]
        tm = legs[..., d_minus]
        cp = 2.0 / (h * h * tp * (tp + tm))
        cm = 2.0 / (h * h * tm * (tp + tm))
        coef[..., d_plus] = np.where(inside, cp, 0.0)
        coef[..., d_minus] = np.where(inside, cm, 0.0)
        coef[..., 4] -= np.where(inside, cp + cm, 0.0)
    rows, cols, vals = [index[inside]], [index[inside]], [coef[inside, 4]]
    for d, (di, dj) in enumerate(DIRECTIONS):
        nb_inside = np.roll(inside, (-di, -dj), axis=(0, 1))
        reg = inside & nb_inside
        cut = inside & ~nb_inside
        ii, jj = np.nonzero(reg)
        rows.append(index[ii, jj])
        cols.append(index[ii + di, jj + dj])
        vals.append(coef[ii, jj, d])
        ii, jj = np.nonzero(cut)
        bgrid[ii, jj] += coef[ii, jj, d] * bval[ii + di, jj + dj]
        coef[ii, jj, d] = 0.0
    n = int(inside.sum())
    A = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n, n))
    A.sum_duplicates()
    A.sort_indices()
    st = Stencil(A=A, b=bgrid[inside], index=index, coef=coef, bgrid=bgrid)
    fld._cache[key] = st
    return st


def laplacian(fld: ScalarField) -> np.ndarray:
    """Discrete Laplacian on interior nodes (zero elsewhere)."""
    st = stencil(fld)
    out = np.zeros(fld.shape)
    out[fld.interior] = st.A @ fld.values[fld.interior] + st.b
    return out
