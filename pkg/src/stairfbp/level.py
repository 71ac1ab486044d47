"""Level sets, superlevel regions and their convexity certificates."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import map_coordinates
from scipy.spatial import cKDTree

from .errors import DegenerateRegion, LevelOutOfRange
from .grid import ScalarField

# cell edges: bottom, right, top, left
_B, _R, _T, _L = range(4)
# corner pairs spanned by each edge, corners numbered (i,j), (i+1,j), (i+1,j+1), (i,j+1)
_EDGE_CORNERS = ((0, 1), (1, 2), (3, 2), (0, 3))


@dataclass
class FreeBoundaryCurve:
    level: float
    components: list = field(default_factory=list)
    closed: list = field(default_factory=list)

    def __len__(self):
        return len(self.components)

    @property
    def vertices(self):
        if not self.components:
            return np.zeros((0, 2))
        return np.vstack(self.components)

    def length(self):
        total = 0.0
        for comp, closed in zip(self.components, self.closed):
            pts = np.vstack((comp, comp[:1])) if closed else comp
            total += float(np.sum(np.hypot(*np.diff(pts, axis=0).T)))
        return total


def polygon_area(pts):
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def marching_squares(values, level, origin=(0.0, 0.0), h=1.0):
    """Contour ``values == level`` on a uniform lattice.

    Nodes with ``value >= level`` count as inside.  Crossing points are
    linear interpolants along cell edges; in saddle cells the four corners
    are joined according to the cell average.  Returns a list of
    ``(vertices, closed)`` pairs.
    """
    F = np.asarray(values, dtype=float)
    nx, ny = F.shape
    above = F >= level
    c = [above[:-1, :-1], above[1:, :-1], above[1:, 1:], above[:-1, 1:]]
    case = c[0] * 1 + c[1] * 2 + c[2] * 4 + c[3] * 8
    ci, cj = np.nonzero((case != 0) & (case != 15))
    if ci.size == 0:
        return []
    cs = case[ci, cj]

    bits = np.stack([(cs >> k) & 1 for k in range(4)], axis=1)
    crosses = np.stack([bits[:, a] != bits[:, b] for a, b in _EDGE_CORNERS], axis=1)
    seg_a, seg_b, seg_cell = [], [], []
    saddle = (cs == 5) | (cs == 10)
    normal = ~saddle
    # exactly two crossing edges in a non-saddle cell
    order = np.argsort(~crosses[normal], axis=1, kind="stable")[:, :2]
    seg_a.append(order[:, 0])
    seg_b.append(order[:, 1])
    seg_cell.append(np.nonzero(normal)[0])
    if saddle.any():
        idx = np.nonzero(saddle)[0]
        i, j = ci[idx], cj[idx]
        avg = 0.25 * (F[i, j] + F[i + 1, j] + F[i + 1, j + 1] + F[i, j + 1])
        center_up = avg >= level
        is5 = cs[idx] == 5
        # cut off corners 1 and 3 when the center joins corners 0 and 2, etc.
        cut13 = np.where(is5, center_up, ~center_up)
        first_a = np.where(cut13, _B, _B)
        first_b = np.where(cut13, _R, _L)
        second_a = np.where(cut13, _L, _R)
        second_b = np.where(cut13, _T, _T)
        seg_a += [first_a, second_a]
        seg_b += [first_b, second_b]
        seg_cell += [idx, idx]
    seg_a = np.concatenate(seg_a)
    seg_b = np.concatenate(seg_b)
    seg_cell = np.concatenate(seg_cell)
    si, sj = ci[seg_cell], cj[seg_cell]

    def ids(e):
        out = np.empty(e.size, dtype=np.int64)
        for k in range(4):
            sel = e == k
            out[sel] = _vec_edge_id(k, si[sel], sj[sel], nx, ny)
        return out

    ea, eb = ids(seg_a), ids(seg_b)
    points = _edge_points(np.unique(np.concatenate((ea, eb))), F, level, nx, ny, origin, h)
    return _link(ea, eb, points)


def _vec_edge_id(e, i, j, nx, ny):
    if e == _B:
        return i * ny + j
    if e == _T:
        return i * ny + j + 1
    if e == _L:
        return nx * ny + i * (ny - 1) + j
    return nx * ny + (i + 1) * (ny - 1) + j


def _edge_points(ids, F, level, nx, ny, origin, h):
    horiz = ids < nx * ny
    pts = {}
    hi = ids[horiz]
    i, j = hi // ny, hi % ny
    fa, fb = F[i, j], F[i + 1, j]
    t = (level - fa) / (fb - fa)
    xs = origin[0] + (i + t) * h
    ys = origin[1] + j * h
    for k, x, y in zip(hi.tolist(), xs.tolist(), ys.tolist()):
        pts[k] = (x, y)
    vi = ids[~horiz] - nx * ny
    i, j = vi // (ny - 1), vi % (ny - 1)
    fa, fb = F[i, j], F[i, j + 1]
    t = (level - fa) / (fb - fa)
    xs = origin[0] + i * h
    ys = origin[1] + (j + t) * h
    for k, x, y in zip(ids[~horiz].tolist(), xs.tolist(), ys.tolist()):
        pts[k] = (x, y)
    return pts


def _link(ea, eb, points):
    adj = {}
    for s, (a, b) in enumerate(zip(ea.tolist(), eb.tolist())):
        adj.setdefault(a, []).append(s)
        adj.setdefault(b, []).append(s)
    used = np.zeros(len(ea), dtype=bool)
    ea, eb = ea.tolist(), eb.tolist()

    def walk(start_edge, seg):
        chain = [start_edge]
        edge = start_edge
        while seg is not None:
            used[seg] = True
            edge = eb[seg] if ea[seg] == edge else ea[seg]
            chain.append(edge)
            seg = next((t for t in adj[edge] if not used[t]), None)
        return chain

    out = []
    # open chains start at edges used by a single segment
    starts = sorted(e for e, segs in adj.items() if len(segs) == 1)
    for e in starts:
        seg = adj[e][0]
        if used[seg]:
            continue
        out.append((walk(e, seg), False))
    for s in range(len(ea)):
        if used[s]:
            continue
        chain = walk(ea[s], s)
        out.append((chain[:-1], True))
    curves = []
    for chain, closed in out:
        pts = np.array([points[e] for e in chain])
        keep = np.ones(len(pts), dtype=bool)
        keep[1:] = np.any(pts[1:] != pts[:-1], axis=1)
        pts = pts[keep]
        if closed and len(pts) > 1 and np.all(pts[0] == pts[-1]):
            pts = pts[:-1]
        if len(pts) >= 2:
            curves.append((pts, closed))
    return curves


def _field_top(fld: ScalarField):
    if fld.inner_value > 0:
        return fld.inner_value
    return float(np.max(fld.values))


def extract_level(fld: ScalarField, s: float, top=None) -> FreeBoundaryCurve:
    """Contour ``{u = s}`` of ``fld`` (ghost-extended at cut cells).

    Components are ordered by descending enclosed area.
    """
    top = _field_top(fld) if top is None else top
    if not 0.0 < s < top:
        raise LevelOutOfRange(f"level {s} outside (0, {top})")
    curves = marching_squares(fld.extended(), s, fld.origin, fld.h)
    curves.sort(key=lambda c: -abs(polygon_area(c[0])))
    return FreeBoundaryCurve(float(s), [c[0] for c in curves], [c[1] for c in curves])


def superlevel_region(fld: ScalarField, s: float) -> np.ndarray:
    """Polygon bounding ``{u >= s}`` together with the filled hole.

    Returned counter-clockwise; empty ``(0, 2)`` array when no contour exists.
    """
    curve = extract_level(fld, s)
    closed = [c for c, k in zip(curve.components, curve.closed) if k]
    if not closed:
        return np.zeros((0, 2))
    region = closed[0]
    return region if polygon_area(region) > 0 else region[::-1]


def convex_hull(points):
    """Andrew's monotone chain; returns hull vertices counter-clockwise."""
    pts = np.unique(np.asarray(points, dtype=float), axis=0)
    if len(pts) < 3:
        return pts

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(tuple(p))
    for p in pts[::-1]:
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(tuple(p))
    return np.array(lower[:-1] + upper[:-1])


def convexity_defect(region) -> float:
    """``1 - area(region) / area(hull(region))``; zero for convex regions."""
    region = np.asarray(region, dtype=float)
    if region.ndim != 2 or len(region) < 3:
        raise DegenerateRegion("a region needs at least three vertices")
    hull = convex_hull(region)
    hull_area = abs(polygon_area(hull)) if len(hull) >= 3 else 0.0
    if hull_area == 0.0:
        raise DegenerateRegion("region has zero area")
    return max(0.0, 1.0 - abs(polygon_area(region)) / hull_area)


def gradient_field(fld: ScalarField):
    v = fld.extended()
    gx = np.zeros_like(v)
    gy = np.zeros_like(v)
    gx[1:-1, :] = (v[2:, :] - v[:-2, :]) / (2 * fld.h)
    gy[:, 1:-1] = (v[:, 2:] - v[:, :-2]) / (2 * fld.h)
    return gx, gy


def sample_bilinear(fld: ScalarField, array, pts):
    pts = np.asarray(pts, dtype=float)
    ci = (pts[:, 0] - fld.origin[0]) / fld.h
    cj = (pts[:, 1] - fld.origin[1]) / fld.h
    return map_coordinates(array, [ci, cj], order=1, mode="nearest")


def gradient_floor(fld: ScalarField, curve: FreeBoundaryCurve) -> float:
    """Smallest central-difference gradient norm sampled on the curve."""
    pts = curve.vertices
    if len(pts) == 0:
        raise DegenerateRegion("empty curve")
    gx, gy = gradient_field(fld)
    g = np.hypot(sample_bilinear(fld, gx, pts), sample_bilinear(fld, gy, pts))
    return float(g.min())


def _densify(comp, closed, step):
    pts = np.vstack((comp, comp[:1])) if closed else comp
    out = [pts[:1]]
    for a, b in zip(pts[:-1], pts[1:]):
        k = max(1, int(np.ceil(np.hypot(*(b - a)) / step)))
        t = np.arange(1, k + 1)[:, None] / k
        out.append(a + t * (b - a))
    return np.vstack(out)


def distance_to_levels(fld: ScalarField, levels, cap=None):
    """Distance from every node to the nearest contour at ``levels``.

    Contours are resampled at ``h / 10`` and queried through a k-d tree;
    distances beyond ``cap`` (default ``4 h``) are reported as ``inf``.
    """
    cap = 4 * fld.h if cap is None else cap
    clouds = []
    top = _field_top(fld)
    for s in levels:
        if not 0.0 < s < top:
            continue
        curve = extract_level(fld, s)
        for comp, closed in zip(curve.components, curve.closed):
            clouds.append(_densify(comp, closed, fld.h / 10))
    dist = np.full(fld.shape, np.inf)
    if not clouds:
        return dist
    tree = cKDTree(np.vstack(clouds))
    X, Y = fld.coords()
    d, _ = tree.query(np.column_stack((X.ravel(), Y.ravel())), distance_upper_bound=cap)
    return d.reshape(fld.shape)


def nested(inner_region, outer_region, slack=1e-12) -> bool:
    """True when every vertex of ``inner_region`` lies in ``outer_region``."""
    import shapely
    from shapely.geometry import Polygon as SPolygon

    if len(inner_region) == 0:
        return True
    if len(outer_region) < 3:
        return False
    poly = SPolygon(outer_region).buffer(slack)
    return bool(np.all(shapely.contains_xy(poly, inner_region[:, 0], inner_region[:, 1])))


@dataclass
class LevelEntry:
    level: float
    threshold: bool
    defect: float | None
    components: int
    grad_floor: float | None
    length: float
    error: str | None = None

    def as_dict(self):
        return {"level": self.level, "threshold": self.threshold, "defect": self.defect,
                "components": self.components, "grad_floor": self.grad_floor,
                "length": self.length, "error": self.error}


@dataclass
class LevelReport:
    entries: list = field(default_factory=list)
    nested: bool = True
    defect_tol: float = 0.0
    grad_floor_min: float = 0.0

    @property
    def passed(self):
        return self.nested and all(
            e.error is None and e.defect is not None and e.defect <= self.defect_tol
            and e.grad_floor is not None and e.grad_floor > self.grad_floor_min
            for e in self.entries)

    def as_dict(self):
        return {"defect_tol": self.defect_tol, "grad_floor_min": self.grad_floor_min,
                "nested": self.nested, "passed": self.passed,
                "levels": [e.as_dict() for e in self.entries]}


def default_defect_tol(h):
    return max(2.0 * h, 1e-3)


def certify_levels(fld: ScalarField, ladder, levels, defect_tol=None,
                   grad_floor_min=0.0) -> LevelReport:
    """Convexity, component count and gradient floor at each level and threshold."""
    defect_tol = default_defect_tol(fld.h) if defect_tol is None else defect_tol
    report = LevelReport(defect_tol=defect_tol, grad_floor_min=grad_floor_min)
    levels = [float(s) for s in levels]
    if not levels:
        return report
    thresholds = set(ladder.mu) if ladder is not None else set()
    regions = []
    for s in sorted(set(levels) | thresholds):
        try:
            curve = extract_level(fld, s)
            region = superlevel_region(fld, s)
            entry = LevelEntry(s, s in thresholds, convexity_defect(region),
                               sum(curve.closed), gradient_floor(fld, curve), curve.length())
            regions.append(region)
        except (LevelOutOfRange, DegenerateRegion) as exc:
            entry = LevelEntry(s, s in thresholds, None, 0, None, 0.0, str(exc))
        report.entries.append(entry)
    report.nested = all(nested(b, a) for a, b in zip(regions[:-1], regions[1:]))
    return report
