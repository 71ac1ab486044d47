"""Multiplicity construction through an involutive disk automorphism.

A radial solution ``u`` on the annulus ``r0 < |z| < R`` is pulled back by
``g(z) = R (alpha - w) / (1 - alpha w)``, ``w = z / R``, and by the rotations
of angle ``2 pi (k - 1) / m``: ``v_k(z) = u(|g(rot_k^{-1} z)|)`` solves the
same staircase equation with coefficient ``phi_k = |g'|^2``.  Because ``g``
maps circles to circles, every level set of ``v_k`` (free boundaries, the
image of the hole) is an explicit eccentric circle.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BandOverlap, LevelOutOfRange, PoleProximity, ValidationError
from .grid import EXTERIOR, INNER, INTERIOR, OUTER, ScalarField
from .level import extract_level
from .nonlinearity import staircase
from .radial import RadialSolution, eval_radial

POLE_MIN = 1e-9


def _as_complex(z):
    z = np.asarray(z)
    if np.iscomplexobj(z):
        return z
    if z.shape and z.shape[-1] == 2:
        return z[..., 0] + 1j * z[..., 1]
    return z.astype(complex)


@dataclass(frozen=True)
class MoebiusInvolution:
    R: float
    alpha: float

    def __post_init__(self):
        if not self.R > 0:
            raise ValidationError("R must be positive")
        if not -1.0 < self.alpha < 1.0:
            raise ValidationError("alpha must lie in (-1, 1)")

    @property
    def center_image(self):
        """Image of the origin, ``(R alpha, 0)``."""
        return (self.R * self.alpha, 0.0)

    def _den(self, z):
        den = 1.0 - self.alpha * z / self.R
        if np.any(np.abs(den) < POLE_MIN):
            raise PoleProximity("point too close to the pole R / alpha")
        return den

    def __call__(self, z):
        return moebius_eval(self, z)

    def image_circle(self, rho):
        """Center (on the real axis) and radius of ``g({|z| = rho})``."""
        t = rho / self.R
        a = self.alpha
        p = self.R * (a - t) / (1.0 - a * t)
        q = self.R * (a + t) / (1.0 + a * t)
        return 0.5 * (p + q), 0.5 * abs(q - p)


def moebius_eval(map: MoebiusInvolution, z):
    """``g(z)`` for complex ``z`` or ``(..., 2)`` real pairs (complex result)."""
    z = _as_complex(z)
    return map.R * (map.alpha - z / map.R) / map._den(z)


def moebius_jacobian(map: MoebiusInvolution, z):
    """``|g'(z)|^2 = (1 - alpha^2)^2 / |1 - alpha w|^4``."""
    z = _as_complex(z)
    return (1.0 - map.alpha ** 2) ** 2 / np.abs(map._den(z)) ** 4


def involution_errors(map: MoebiusInvolution, samples=10_000, seed=0):
    """Max ``|g(g(z)) - z|`` over the disk and ``||g(z)| - R|`` over the circle."""
    rng = np.random.default_rng(seed)
    r = map.R * np.sqrt(rng.random(samples))
    t = 2 * np.pi * rng.random(samples)
    z = r * np.exp(1j * t)
    inv = float(np.max(np.abs(moebius_eval(map, moebius_eval(map, z)) - z)))
    zc = map.R * np.exp(1j * t)
    circ = float(np.max(np.abs(np.abs(moebius_eval(map, zc)) - map.R)))
    return inv, circ


@dataclass(frozen=True)
class Disk:
    center: complex
    radius: float

    def distance(self, z):
        """Distance from ``z`` to the circle."""
        return np.abs(np.abs(z - self.center) - self.radius)

    def polygon(self, n=720):
        t = np.linspace(0, 2 * np.pi, n, endpoint=False)
        p = self.center + self.radius * np.exp(1j * t)
        return np.column_stack((p.real, p.imag))


@dataclass
class Member:
    """One rotated solution ``v_k`` with its coefficient and band circles."""

    k: int
    angle: float
    field: ScalarField
    phi: np.ndarray
    outer: Disk                # image of the outermost free boundary
    disks: list                # images of the free boundaries, outermost first
    hole: Disk                 # image of the inner circle

    def bands(self):
        """Band ``i`` is the region between ``disks[i]`` and the next circle."""
        rims = self.disks + [self.hole]
        return [(rims[i], rims[i + 1]) for i in range(len(self.disks))]


@dataclass
class RotatedSolutionFamily:
    base: RadialSolution
    map: MoebiusInvolution
    m: int
    h: float
    members: list
    hole_discrepancy: float
    involution_error: float
    circle_error: float
    audit: dict = field(default_factory=dict)

    @property
    def M(self):
        return self.base.problem.ladder.M


def _rotate(z, angle):
    return z * np.exp(1j * angle)


def _lattice(R, h):
    n = int(np.ceil(R / h)) + 1
    x = h * np.arange(-n, n + 1)
    X, Y = np.meshgrid(x, x, indexing="ij")
    return (float(x[0]), float(x[0])), X + 1j * Y


def _member(base, map, k, m, h):
    prob = base.problem
    R, r0, M = prob.R, prob.r0, prob.ladder.M
    origin, Z = _lattice(R, h)
    angle = 2 * np.pi * (k - 1) / m
    inside_disk = np.abs(Z) < R
    W = _rotate(Z, -angle)
    rho = np.full(Z.shape, np.inf)
    rho[inside_disk] = np.abs(moebius_eval(map, W[inside_disk]))
    hole = inside_disk & (rho <= r0)
    interior = inside_disk & ~hole
    mask = np.full(Z.shape, EXTERIOR, dtype=np.int8)
    mask[interior] = INTERIOR
    mask[hole] = INNER
    ring = np.zeros(Z.shape, bool)
    ring[1:-1, 1:-1] = ~inside_disk[1:-1, 1:-1] & (
        inside_disk[2:, 1:-1] | inside_disk[:-2, 1:-1]
        | inside_disk[1:-1, 2:] | inside_disk[1:-1, :-2])
    mask[ring] = OUTER
    values = np.zeros(Z.shape)
    values[interior] = eval_radial(base, np.clip(rho[interior], r0, R))
    values[hole] = M
    fld = ScalarField(origin, h, mask, values, np.ones(Z.shape + (4,)), 0.0, M)
    phi = np.zeros(Z.shape)
    phi[inside_disk] = moebius_jacobian(map, W[inside_disk])

    def circle(r):
        c, rad = map.image_circle(r)
        return Disk(complex(_rotate(c, angle)), rad)

    disks = [circle(s) for s in base.s]
    return Member(k, angle, fld, phi, disks[0], disks, circle(r0))


def _shape(d: Disk):
    from shapely.geometry import Polygon as SPolygon
    return SPolygon(d.polygon())


def band_overlap(map, members):
    """Largest band intersection area between different members.

    Also returns the largest coefficient mismatch ``|phi_j - phi_k|`` sampled
    on the intersections; coinciding bands with equal coefficients (the
    collapsed family ``alpha = 0``) are consistent and not an overlap.
    """
    shapes = []
    for mem in members:
        shapes.append([_shape(a).difference(_shape(b)) for a, b in mem.bands()])
    worst, mismatch = 0.0, 0.0
    for j in range(len(members)):
        for k in range(j + 1, len(members)):
            for sj in shapes[j]:
                for sk in shapes[k]:
                    inter = sj.intersection(sk)
                    if inter.is_empty or inter.area <= 0.0:
                        continue
                    worst = max(worst, inter.area)
                    pts = [np.asarray(inter.representative_point().coords)]
                    for g in getattr(inter, "geoms", [inter]):
                        if hasattr(g, "exterior"):
                            pts.append(np.asarray(g.exterior.coords))
                    z = _as_complex(np.vstack(pts))
                    pj = moebius_jacobian(map, _rotate(z, -members[j].angle))
                    pk = moebius_jacobian(map, _rotate(z, -members[k].angle))
                    mismatch = max(mismatch, float(np.max(np.abs(pj - pk))))
    return worst, mismatch


def build_family(base: RadialSolution, map: MoebiusInvolution, m: int, grid: float,
                 overlap_tol: float = 1e-12) -> RotatedSolutionFamily:
    """Sample ``v_k``, ``phi_k`` for ``k = 1..m`` on a lattice of spacing ``grid``.

    Raises :class:`BandOverlap` when bands of different members intersect.
    """
    if m < 1:
        raise ValidationError("m must be at least 1")
    if not np.isclose(map.R, base.problem.R):
        raise ValidationError("map and base solution use different outer radii")
    if base.problem.dim != 2:
        raise ValidationError("the conformal construction is planar")
    members = [_member(base, map, k, m, grid) for k in range(1, m + 1)]
    area, mismatch = band_overlap(map, members) if m > 1 else (0.0, 0.0)
    if area > overlap_tol and mismatch > 1e-12:
        raise BandOverlap(f"bands of different members overlap (area {area:.3e})", area)
    c, rad = map.image_circle(base.problem.r0)
    inv, circ = involution_errors(map)
    return RotatedSolutionFamily(base, map, m, float(grid), members,
                                 hole_discrepancy=abs(c) + abs(rad - base.problem.r0),
                                 involution_error=inv, circle_error=circ,
                                 audit={"band_overlap_area": area,
                                        "band_phi_mismatch": mismatch})


@dataclass
class PatchedPhi:
    """Coefficient equal to ``phi_k`` on the support of member ``k``.

    Off every support it is the inverse-distance blend of the member
    coefficients with weights ``d_k^-power``.
    """

    family: RotatedSolutionFamily
    power: float = 2.0
    values: np.ndarray = None
    jump: float = 0.0
    bounds: tuple = (0.0, 0.0)

    def _support_distance(self, mem, z):
        a = np.abs(z - mem.outer.center) - mem.outer.radius
        b = mem.hole.radius - np.abs(z - mem.hole.center)
        return np.maximum(np.maximum(a, b), 0.0)

    def __call__(self, z):
        z = _as_complex(z)
        fam = self.family
        phis = np.stack([moebius_jacobian(fam.map, _rotate(z, -mem.angle)) for mem in fam.members])
        dist = np.stack([self._support_distance(mem, z) for mem in fam.members])
        out = np.empty(z.shape)
        on = dist == 0.0
        hit = on.any(axis=0)
        # first member whose support contains z; supports are disjoint
        first = np.argmax(on, axis=0)
        out[hit] = np.take_along_axis(phis, first[None], 0)[0][hit]
        if (~hit).any():
            w = dist[:, ~hit] ** -self.power
            out[~hit] = (w * phis[:, ~hit]).sum(0) / w.sum(0)
        return np.clip(out, *self.bounds)


def patch_phi(family: RotatedSolutionFamily, power: float = 2.0, probes: int = 256,
              delta: float = 1e-9) -> PatchedPhi:
    """Build the patched coefficient and measure its jump across support edges."""
    if (family.audit.get("band_overlap_area", 0.0) > 1e-12
            and family.audit.get("band_phi_mismatch", 0.0) > 1e-12):
        raise BandOverlap("bands overlap", family.audit["band_overlap_area"])
    lo = min(float(mem.phi[mem.field.mask != EXTERIOR].min()) for mem in family.members)
    hi = max(float(mem.phi.max()) for mem in family.members)
    out = PatchedPhi(family, power, bounds=(lo, hi))
    _, Z = _lattice(family.base.problem.R, family.h)
    inside = np.abs(Z) < family.base.problem.R
    vals = np.zeros(Z.shape)
    vals[inside] = out(Z[inside])
    out.values = vals
    t = np.exp(2j * np.pi * np.arange(probes) / probes)
    jump = 0.0
    for mem in family.members:
        for rim in (mem.outer, mem.hole):
            edge = rim.center + rim.radius * t
            jump = max(jump, float(np.max(np.abs(out(edge + delta * t) - out(edge - delta * t)))))
    out.jump = jump
    return out


def _member_residual(mem: Member, phi_vals, ladder, collar, h):
    """Max ``|Delta_h v - phi staircase(v)|`` away from every circle of ``mem``."""
    fld = mem.field
    v = fld.values
    full = np.zeros(v.shape, bool)
    ins = fld.interior
    full[1:-1, 1:-1] = (ins[1:-1, 1:-1] & ins[2:, 1:-1] & ins[:-2, 1:-1]
                        & ins[1:-1, 2:] & ins[1:-1, :-2])
    X, Y = fld.coords()
    Z = X + 1j * Y
    far = np.ones(v.shape, bool)
    for rim in mem.disks + [mem.hole]:
        far = far & (rim.distance(Z) > collar * h)
    sel = full & far
    lap = np.zeros(v.shape)
    lap[1:-1, 1:-1] = (v[2:, 1:-1] + v[:-2, 1:-1] + v[1:-1, 2:] + v[1:-1, :-2]
                       - 4 * v[1:-1, 1:-1]) / h ** 2
    rhs = phi_vals * staircase(v, ladder)
    r = np.abs(lap - rhs)[sel]
    return float(r.max()) if r.size else 0.0


def family_residual(family: RotatedSolutionFamily, phi: PatchedPhi, collar=2.0):
    ladder = family.base.problem.ladder
    worst = 0.0
    for mem in family.members:
        X, Y = mem.field.coords()
        Z = X + 1j * Y
        vals = np.zeros(Z.shape)
        ins = mem.field.interior
        vals[ins] = phi(Z[ins])
        worst = max(worst, _member_residual(mem, vals, ladder, collar, family.h))
    return worst


def _clusters(dist, tol):
    """Number of classes when members closer than ``tol`` are identified."""
    m = len(dist)
    parent = list(range(m))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for j in range(m):
        for k in range(j + 1, m):
            if dist[j][k] < tol:
                parent[find(k)] = find(j)
    return len({find(a) for a in range(m)})


@dataclass
class FamilyCertificate:
    m: int
    n: int
    residual: float
    residual_refined: float
    res_tol: float
    h2_ratio: float
    distances: list
    distinct_min: float
    distinct: int
    curve_counts: list
    free_boundaries: int
    hole_discrepancy: float
    involution_error: float
    circle_error: float
    phi_jump: float

    @property
    def residual_ok(self):
        return self.residual <= self.res_tol and self.h2_ratio >= 3.0

    @property
    def distinct_ok(self):
        return all(self.distances[j][k] >= self.distinct_min
                   for j in range(self.m) for k in range(j + 1, self.m))

    @property
    def curves_ok(self):
        return all(c == self.n for c in self.curve_counts)

    @property
    def passed(self):
        return self.residual_ok and self.distinct_ok and self.curves_ok

    def as_dict(self):
        return {"members": self.m, "thresholds": self.n,
                "distinct_solutions": self.distinct,
                "free_boundaries": self.free_boundaries,
                "curve_counts": self.curve_counts,
                "pairwise_distance": self.distances, "distinct_min": self.distinct_min,
                "residual": self.residual, "residual_refined": self.residual_refined,
                "h2_ratio": self.h2_ratio, "res_tol": self.res_tol,
                "hole_discrepancy": self.hole_discrepancy,
                "involution_error": self.involution_error,
                "circle_error": self.circle_error, "phi_jump": self.phi_jump,
                "residual_ok": self.residual_ok, "distinct_ok": self.distinct_ok,
                "curves_ok": self.curves_ok, "passed": self.passed}


def certify_family(family: RotatedSolutionFamily, phi: PatchedPhi, ladder=None,
                   distinct_min=None, res_tol=None, collar=2.0) -> FamilyCertificate:
    """Residual, pairwise distinctness and free-boundary counts of a family.

    The residual is also measured on the lattice of spacing ``h / 2``; the
    default tolerance is ``10 C h^2`` with ``C`` fitted from that refinement.
    """
    ladder = family.base.problem.ladder if ladder is None else ladder
    M = ladder.M
    distinct_min = 0.05 * M if distinct_min is None else distinct_min
    h = family.h
    res = family_residual(family, phi, collar)
    fine = build_family(family.base, family.map, family.m, h / 2)
    res_fine = family_residual(fine, PatchedPhi(fine, phi.power, bounds=phi.bounds), collar)
    ratio = res / res_fine if res_fine > 0 else (np.inf if res > 0 else 4.0)
    if res_tol is None:
        res_tol = 10.0 * (res_fine / (h / 2) ** 2) * h ** 2
    m = family.m
    dist = [[0.0] * m for _ in range(m)]
    for j in range(m):
        for k in range(j + 1, m):
            a, b = family.members[j].field, family.members[k].field
            both = a.interior & b.interior
            d = float(np.max(np.abs(a.values - b.values)[both])) if both.any() else 0.0
            dist[j][k] = dist[k][j] = d
    counts = []
    for mem in family.members:
        c = 0
        for mu in ladder.mu:
            try:
                c += sum(extract_level(mem.field, mu).closed)
            except LevelOutOfRange:
                pass
        counts.append(c)
    return FamilyCertificate(m, ladder.n, res, res_fine, float(res_tol), float(ratio), dist,
                             float(distinct_min), _clusters(dist, distinct_min), counts,
                             int(sum(counts)), family.hole_discrepancy,
                             family.involution_error, family.circle_error, phi.jump)
