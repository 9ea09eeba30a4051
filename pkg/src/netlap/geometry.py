"""Catalog of exactly computable model spaces and their metric primitives.

Every space is assembled from flat parts (segments, circles, rectangles,
flat tori) glued along codimension-1 loci, so part distances, reflected
distances, mirror images and volumes all have closed forms.  Charts:

* segment  -- arclength in [0, L]
* circle   -- arclength in [0, L), wrapping
* rectangle / torus / book page -- (x, y) in [0, a] x [0, b]

The reflected distance between interior points p, q of one part is the
infimum of d(p, z) + d(z, q) over boundary points z of that part.  Parts
without boundary (circles, tori) report an infinite sentinel.  By default
reflection also occurs at boundary portions lying inside a gluing locus;
``reflect_at_gluing=False`` restricts it to the free boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

INF = math.inf

SEGMENT = "segment"
CIRCLE = "circle"
RECTANGLE = "rectangle"
TORUS = "torus"

# rectangle edge tags: edge "x0" is the line x=0, "y1" the line y=b, etc.
RECT_EDGES = ("x0", "x1", "y0", "y1")


class GeometryError(ValueError):
    """Raised on misuse of the metric primitives (wrong part, boundary point...)."""


@dataclass(frozen=True)
class PointRef:
    """A point of the space: part id plus chart coordinates."""

    part_id: int
    coords: tuple[float, ...]


@dataclass(frozen=True)
class BranchEnd:
    """One branch of a gluing vertex inside a part.

    For 1-d parts ``location`` is the chart coordinate of the vertex and
    ``direction`` is +1/-1 for the side on which the branch runs.  For book
    pages ``location`` is the shared-edge tag and ``direction`` is +1.
    """

    part_id: int
    location: float | str
    direction: int


@dataclass(frozen=True)
class GluingVertex:
    vertex_id: int
    branch_ends: tuple[BranchEnd, ...]

    def parts(self) -> tuple[int, ...]:
        seen = []
        for be in self.branch_ends:
            if be.part_id not in seen:
                seen.append(be.part_id)
        return tuple(seen)

    def branches_of(self, part_id: int) -> tuple[BranchEnd, ...]:
        return tuple(be for be in self.branch_ends if be.part_id == part_id)


@dataclass(frozen=True)
class PartDescriptor:
    part_id: int
    shape: str                    # segment | circle | rectangle | torus
    extent: tuple[float, ...]     # (L,) or (a, b)

    @property
    def dim(self) -> int:
        return 1 if self.shape in (SEGMENT, CIRCLE) else 2

    @property
    def volume(self) -> float:
        if self.dim == 1:
            return self.extent[0]
        return self.extent[0] * self.extent[1]


@dataclass(frozen=True)
class SpaceModel:
    """Immutable model space; all metric operations are pure functions of it."""

    kind: str
    dim: int
    parts: tuple[PartDescriptor, ...]
    gluings: tuple[GluingVertex, ...]
    reflect_at_gluing: bool = True
    # minimal separation between distinct gluing/boundary features and the
    # reach within which branch selection near a locus is unambiguous; both
    # bound the admissible rho (see check_rho) and are computed on build
    _separation: float = field(default=INF, repr=False)
    _reach: float = field(default=INF, repr=False)

    def part(self, part_id: int) -> PartDescriptor:
        return self.parts[part_id]

    def total_volume(self) -> float:
        return sum(p.volume for p in self.parts)

    def part_volume(self, part_id: int) -> float:
        return self.parts[part_id].volume

    def gluing_separation(self) -> float:
        return self._separation

    def scale_guard(self) -> float:
        """Largest radius at which balls stay metrically simple (single arc /
        no wrap collision)."""
        guard = INF
        for p in self.parts:
            if p.shape == CIRCLE:
                guard = min(guard, p.extent[0] / 2.0)
            elif p.shape == SEGMENT:
                guard = min(guard, p.extent[0])
            else:
                guard = min(guard, min(p.extent) / 2.0)
        return guard

    def glued_neighbors(self, part_id: int):
        """Yield (vertex, other_part_id) for every locus the part touches."""
        for g in self.gluings:
            mine = g.branches_of(part_id)
            if not mine:
                continue
            for other in g.parts():
                if other != part_id:
                    yield g, other

    def part_loci(self, part_id: int) -> list[BranchEnd]:
        """Branch ends of all gluing vertices lying in this part (one entry
        per (vertex, branch))."""
        out = []
        for g in self.gluings:
            out.extend(g.branches_of(part_id))
        return out


# ---------------------------------------------------------------------------
# catalog constructors


def _space(kind, dim, parts, gluings, reflect_at_gluing=True) -> SpaceModel:
    parts = tuple(parts)
    gluings = tuple(gluings)
    for p in parts:
        if min(p.extent) <= 0:
            raise GeometryError(f"part {p.part_id} has nonpositive extent {p.extent}")
    for g in gluings:
        if len(g.branch_ends) < 2:
            raise GeometryError(f"gluing vertex {g.vertex_id} has fewer than 2 branches")
        keys = {(be.part_id, be.location, be.direction) for be in g.branch_ends}
        if len(keys) != len(g.branch_ends):
            raise GeometryError(f"gluing vertex {g.vertex_id} repeats a branch end")
    sep, reach = _feature_scales(parts, gluings)
    return SpaceModel(kind, dim, parts, gluings, reflect_at_gluing, sep, reach)


def _feature_scales(parts, gluings) -> tuple[float, float]:
    """(separation, reach): minimal within-part distance between distinct
    metric features (locus points, true boundary points) and the wrap scale
    within which the branch nearest a locus is unambiguous."""
    sep = INF
    reach = INF
    for p in parts:
        if p.dim != 1:
            # 2-d catalog gluings use a full edge of each page; the relevant
            # scale is the page width
            if any(g.branches_of(p.part_id) for g in gluings):
                sep = min(sep, p.extent[0])
            continue
        locs = sorted(
            {be.location for g in gluings for be in g.branches_of(p.part_id)}
        )
        if not locs:
            continue
        if p.shape == SEGMENT:
            feats = sorted(set(locs) | {0.0, p.extent[0]})
            for a, b in zip(feats[:-1], feats[1:]):
                sep = min(sep, b - a)
        else:
            L = p.extent[0]
            if len(locs) >= 2:
                ext = locs + [locs[0] + L]
                for a, b in zip(ext[:-1], ext[1:]):
                    sep = min(sep, b - a)
            else:
                reach = min(reach, L / 2.0)
    return sep, reach


def interval(L: float) -> SpaceModel:
    return _space("interval", 1, [PartDescriptor(0, SEGMENT, (float(L),))], [])


def circle(L: float) -> SpaceModel:
    return _space("circle", 1, [PartDescriptor(0, CIRCLE, (float(L),))], [])


def rectangle(a: float, b: float) -> SpaceModel:
    return _space("rectangle", 2, [PartDescriptor(0, RECTANGLE, (float(a), float(b)))], [])


def flat_torus(a: float, b: float) -> SpaceModel:
    return _space("flat_torus", 2, [PartDescriptor(0, TORUS, (float(a), float(b)))], [])


def glued_circles(*lengths: float, reflect_at_gluing: bool = True) -> SpaceModel:
    """Circles of the given perimeters glued at a single common point (their
    chart origin)."""
    if len(lengths) < 2:
        raise GeometryError("need at least two circles to glue")
    parts = [PartDescriptor(i, CIRCLE, (float(L),)) for i, L in enumerate(lengths)]
    ends = []
    for i in range(len(lengths)):
        ends.append(BranchEnd(i, 0.0, +1))
        ends.append(BranchEnd(i, 0.0, -1))
    return _space("metric_graph", 1, parts, [GluingVertex(0, tuple(ends))],
                  reflect_at_gluing)


def circle_with_segment(circle_len: float, segment_len: float,
                        reflect_at_gluing: bool = True) -> SpaceModel:
    """A circle and a segment glued at one point; the segment attaches by its
    endpoint L, leaving a free Neumann end at 0."""
    parts = [
        PartDescriptor(0, CIRCLE, (float(circle_len),)),
        PartDescriptor(1, SEGMENT, (float(segment_len),)),
    ]
    ends = (
        BranchEnd(0, 0.0, +1),
        BranchEnd(0, 0.0, -1),
        BranchEnd(1, float(segment_len), -1),
    )
    return _space("metric_graph", 1, parts, [GluingVertex(0, ends)], reflect_at_gluing)


def metric_graph(part_specs, vertex_specs, reflect_at_gluing: bool = True) -> SpaceModel:
    """General 1-d glued space.

    part_specs: list of (shape, length) with shape "segment" or "circle".
    vertex_specs: list of vertices, each a list of (part_id, location);
    a circle location contributes both sides of the marked point, a segment
    location must be an endpoint and contributes its single inward side.
    """
    parts = []
    for i, (shape, L) in enumerate(part_specs):
        if shape not in (SEGMENT, CIRCLE):
            raise GeometryError(f"metric graph part {i}: unsupported shape {shape!r}")
        parts.append(PartDescriptor(i, shape, (float(L),)))
    gluings = []
    for vid, ends_spec in enumerate(vertex_specs):
        ends = []
        for part_id, loc in ends_spec:
            p = parts[part_id]
            loc = float(loc)
            if p.shape == CIRCLE:
                ends.append(BranchEnd(part_id, loc % p.extent[0], +1))
                ends.append(BranchEnd(part_id, loc % p.extent[0], -1))
            else:
                if loc == 0.0:
                    ends.append(BranchEnd(part_id, 0.0, +1))
                elif loc == p.extent[0]:
                    ends.append(BranchEnd(part_id, p.extent[0], -1))
                else:
                    raise GeometryError(
                        f"segment part {part_id}: gluing location {loc} is not an endpoint")
        gluings.append(GluingVertex(vid, tuple(ends)))
    return _space("metric_graph", 1, parts, gluings, reflect_at_gluing)


def book_pages(m: int, a: float, b: float, reflect_at_gluing: bool = True) -> SpaceModel:
    """m rectangular pages [0,a]x[0,b] glued along their full edge x=0."""
    if m < 2:
        raise GeometryError("book needs at least two pages")
    parts = [PartDescriptor(i, RECTANGLE, (float(a), float(b))) for i in range(m)]
    ends = tuple(BranchEnd(i, "x0", +1) for i in range(m))
    return _space("book_pages", 2, parts, [GluingVertex(0, ends)], reflect_at_gluing)


# ---------------------------------------------------------------------------
# within-part distances (vectorized kernels; q may be an (m, dim) array)


def _seg_dist(x: float, ys: np.ndarray) -> np.ndarray:
    return np.abs(ys - x)


def _circ_dist(L: float, x: float, ys: np.ndarray) -> np.ndarray:
    d = np.abs(ys - x)
    return np.minimum(d, L - d)


def _rect_dist(x: np.ndarray, ys: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum((ys - x) ** 2, axis=-1))


def _torus_dist(ab, x: np.ndarray, ys: np.ndarray) -> np.ndarray:
    d = np.abs(ys - x)
    d = np.minimum(d, np.asarray(ab) - d)
    return np.sqrt(np.sum(d**2, axis=-1))


def dist_in_part(part: PartDescriptor, p_coords, q_coords) -> np.ndarray:
    """Intrinsic distance within one part; q_coords may be a batch."""
    q = np.asarray(q_coords, dtype=float)
    if part.shape == SEGMENT:
        return _seg_dist(float(np.ravel(p_coords)[0]), q.reshape(-1))
    if part.shape == CIRCLE:
        return _circ_dist(part.extent[0], float(np.ravel(p_coords)[0]), q.reshape(-1))
    p = np.asarray(p_coords, dtype=float)
    q2 = q.reshape(-1, 2)
    if part.shape == RECTANGLE:
        return _rect_dist(p, q2)
    return _torus_dist(part.extent, p, q2)


def reflecting_edges(space: SpaceModel, part_id: int) -> list:
    """Boundary components at which the reflected distance reflects.

    Segments: list of endpoint coordinates.  Rectangles: list of edge tags.
    Circles/tori: empty.
    """
    part = space.part(part_id)
    glued = _glued_boundary(space, part_id)
    if part.shape == SEGMENT:
        out = []
        for z in (0.0, part.extent[0]):
            if z in glued and not space.reflect_at_gluing:
                continue
            out.append(z)
        return out
    if part.shape == RECTANGLE:
        out = []
        for tag in RECT_EDGES:
            if tag in glued and not space.reflect_at_gluing:
                continue
            out.append(tag)
        return out
    return []


def _glued_boundary(space: SpaceModel, part_id: int) -> set:
    """Boundary features of the part that lie inside a gluing locus."""
    part = space.part(part_id)
    out = set()
    for g in space.gluings:
        for be in g.branches_of(part_id):
            if part.shape == SEGMENT and be.location in (0.0, part.extent[0]):
                out.add(be.location)
            elif part.shape == RECTANGLE:
                out.add(be.location)
    return out


def _rect_edge_geometry(part: PartDescriptor, tag: str):
    """(axis, level, corner lo, corner hi) of a rectangle edge."""
    a, b = part.extent
    if tag == "x0":
        return 0, 0.0, (0.0, 0.0), (0.0, b)
    if tag == "x1":
        return 0, a, (a, 0.0), (a, b)
    if tag == "y0":
        return 1, 0.0, (0.0, 0.0), (a, 0.0)
    return 1, b, (0.0, b), (a, b)


def _rect_reflected(part: PartDescriptor, edges, p, qs) -> np.ndarray:
    """min over single-touch boundary paths inside a rectangle, vectorized
    over qs.  Candidates: mirror across each included edge when the straight
    mirrored path crosses that edge's extent, plus paths through the included
    corners.  All expressions are symmetric in (p, q) so the value is exactly
    symmetric in floating point.
    """
    a, b = part.extent
    p = np.asarray(p, dtype=float).reshape(2)
    qs = np.asarray(qs, dtype=float).reshape(-1, 2)
    best = np.full(qs.shape[0], INF)
    corners = set()
    for tag in edges:
        axis, level, c_lo, c_hi = _rect_edge_geometry(part, tag)
        corners.add(c_lo)
        corners.add(c_hi)
        dp = abs(p[axis] - level)
        dq = np.abs(qs[:, axis] - level)
        span = dp + dq
        cand = np.hypot(span, np.abs(qs[:, 1 - axis] - p[1 - axis]))
        # crossing coordinate of the unfolded straight path with the edge line
        with np.errstate(divide="ignore", invalid="ignore"):
            cross = (p[1 - axis] * dq + qs[:, 1 - axis] * dp) / span
        hi = b if axis == 0 else a
        ok = (span > 0) & (cross >= 0.0) & (cross <= hi)
        best = np.where(ok, np.minimum(best, cand), best)
    for c in corners:
        c = np.asarray(c, dtype=float)
        leg = math.hypot(c[0] - p[0], c[1] - p[1])
        cand = leg + np.hypot(qs[:, 0] - c[0], qs[:, 1] - c[1])
        best = np.minimum(best, cand)
    return best


def refl_dist_in_part(space: SpaceModel, part_id: int, p_coords, q_coords) -> np.ndarray:
    """Reflected distance within one part, vectorized over q_coords.

    Infinite where the part has no reflecting boundary.
    """
    part = space.part(part_id)
    q = np.asarray(q_coords, dtype=float)
    if part.shape in (CIRCLE, TORUS):
        n = q.reshape(-1, part.dim).shape[0] if q.ndim else 1
        return np.full(n, INF)
    if part.shape == SEGMENT:
        x = float(np.ravel(p_coords)[0])
        ys = q.reshape(-1)
        ends = reflecting_edges(space, part_id)
        if not ends:
            return np.full(ys.shape[0], INF)
        best = np.full(ys.shape[0], INF)
        for z in ends:
            best = np.minimum(best, abs(x - z) + np.abs(ys - z))
        return best
    edges = reflecting_edges(space, part_id)
    if not edges:
        return np.full(q.reshape(-1, 2).shape[0], INF)
    return _rect_reflected(part, edges, p_coords, q.reshape(-1, 2))


# ---------------------------------------------------------------------------
# public scalar operations


def _check_same_part(p: PointRef, q: PointRef):
    if p.part_id != q.part_id:
        raise GeometryError(f"points lie in different parts ({p.part_id} vs {q.part_id})")


def part_distance(space: SpaceModel, p: PointRef, q: PointRef) -> float:
    _check_same_part(p, q)
    return float(dist_in_part(space.part(p.part_id), p.coords, q.coords)[0])


def on_part_boundary(space: SpaceModel, p: PointRef, tol: float = 0.0) -> bool:
    part = space.part(p.part_id)
    if part.shape in (CIRCLE, TORUS):
        return False
    if part.shape == SEGMENT:
        x = p.coords[0]
        return x <= tol or x >= part.extent[0] - tol
    x, y = p.coords
    a, b = part.extent
    return x <= tol or x >= a - tol or y <= tol or y >= b - tol


def reflected_part_distance(space: SpaceModel, p: PointRef, q: PointRef) -> float:
    _check_same_part(p, q)
    part = space.part(p.part_id)
    if part.shape not in (CIRCLE, TORUS):
        if on_part_boundary(space, p) or on_part_boundary(space, q):
            raise GeometryError("reflected distance is defined for interior points only")
    return float(refl_dist_in_part(space, p.part_id, p.coords, q.coords)[0])


def boundary_offsets(space: SpaceModel, p: PointRef) -> tuple[float, float]:
    """(distance within the part to the free boundary, distance to the gluing
    locus); infinite where the set is empty."""
    part = space.part(p.part_id)
    glued = _glued_boundary(space, p.part_id)
    d_bnd = INF
    d_glue = INF
    if part.shape == SEGMENT:
        x = p.coords[0]
        for z in (0.0, part.extent[0]):
            d = abs(x - z)
            if z in glued:
                d_glue = min(d_glue, d)
            else:
                d_bnd = min(d_bnd, d)
    elif part.shape == CIRCLE:
        for g in space.gluings:
            for be in g.branches_of(p.part_id):
                if be.direction != +1:
                    continue
                d_glue = min(d_glue, float(
                    _circ_dist(part.extent[0], be.location, np.array([p.coords[0]]))[0]))
    elif part.shape == RECTANGLE:
        x, y = p.coords
        a, b = part.extent
        edge_dist = {"x0": x, "x1": a - x, "y0": y, "y1": b - y}
        for tag, d in edge_dist.items():
            if tag in glued:
                d_glue = min(d_glue, d)
            else:
                d_bnd = min(d_bnd, d)
    return d_bnd, d_glue


def dist_to_gluing(space: SpaceModel, part_id: int, coords) -> float:
    """Distance within the part to its gluing locus (infinite if none)."""
    return boundary_offsets(space, PointRef(part_id, tuple(np.ravel(coords))))[1]


def refl_boundary_distance(space: SpaceModel, part_id: int, coords) -> np.ndarray:
    """Distance within the part to its reflecting boundary, vectorized.
    Infinite where the part reflects nowhere."""
    part = space.part(part_id)
    q = np.asarray(coords, dtype=float)
    if part.shape == SEGMENT:
        ys = q.reshape(-1)
        ends = reflecting_edges(space, part_id)
        if not ends:
            return np.full(ys.shape[0], INF)
        return np.min(np.abs(ys[:, None] - np.asarray(ends)[None, :]), axis=1)
    if part.shape == RECTANGLE:
        q2 = q.reshape(-1, 2)
        edges = reflecting_edges(space, part_id)
        if not edges:
            return np.full(q2.shape[0], INF)
        a, b = part.extent
        dist = {"x0": q2[:, 0], "x1": a - q2[:, 0], "y0": q2[:, 1], "y1": b - q2[:, 1]}
        return np.min(np.column_stack([dist[t] for t in edges]), axis=1)
    n = q.reshape(-1, part.dim).shape[0]
    return np.full(n, INF)


def locus_distance(space: SpaceModel, part_id: int, coords) -> np.ndarray:
    """Distance within the part to the gluing locus, vectorized; infinite
    where the part is not glued."""
    part = space.part(part_id)
    q = np.asarray(coords, dtype=float)
    if part.dim == 1:
        ys = q.reshape(-1)
        out = np.full(ys.shape[0], INF)
        for g in space.gluings:
            for be in g.branches_of(part_id):
                if be.direction != +1 and part.shape == CIRCLE:
                    continue
                if part.shape == CIRCLE:
                    d = _circ_dist(part.extent[0], be.location, ys)
                else:
                    d = np.abs(ys - be.location)
                out = np.minimum(out, d)
        return out
    q2 = q.reshape(-1, 2)
    out = np.full(q2.shape[0], INF)
    glued = _glued_boundary(space, part_id)
    a, b = part.extent
    dist = {"x0": q2[:, 0], "x1": a - q2[:, 0], "y0": q2[:, 1], "y1": b - q2[:, 1]}
    for tag in glued:
        out = np.minimum(out, dist[tag])
    return out


# ---------------------------------------------------------------------------
# mirror images


def check_rho(space: SpaceModel, rho: float):
    """Validate that collars of width rho^(3/4) + rho around distinct gluing
    features cannot interact and branch selection stays unambiguous."""
    thr = rho**0.75
    if 2.0 * thr + 2.0 * rho >= space._separation:
        raise GeometryError(
            f"rho={rho} too large: mirror collars of width {thr:.4g} interact "
            f"(gluing separation {space._separation:.4g})")
    if thr >= space._reach:
        raise GeometryError(
            f"rho={rho} too large: the mirror threshold {thr:.4g} wraps around "
            f"a glued circle (reach {space._reach:.4g})")
    if rho >= space.scale_guard():
        raise GeometryError(
            f"rho={rho} exceeds the metric scale guard {space.scale_guard():.4g}")


def _nearest_branch_1d(part: PartDescriptor, branches, x: float):
    """Branch of a 1-d vertex realizing the distance from x to the vertex,
    together with that distance.  Ties go to the first listed branch."""
    L = part.extent[0]
    best = None
    for idx, be in enumerate(branches):
        if part.shape == SEGMENT:
            if be.direction == +1:
                d = x - be.location
            else:
                d = be.location - x
            if d < 0:
                continue
        else:
            off = (x - be.location) % L
            d = off if be.direction == +1 else (L - off) % L
        if best is None or d < best[0] - 1e-15:
            best = (d, idx, be)
    return best


def _image_on_branch(part: PartDescriptor, be: BranchEnd, s: float) -> tuple[float, ...]:
    if part.shape == CIRCLE:
        return ((be.location + be.direction * s) % part.extent[0],)
    return (be.location + be.direction * s,)


def mirror_images(space: SpaceModel, p: PointRef, rho: float) -> list[tuple[int, PointRef]]:
    """All mirror images of p for the radius parameter rho, the point itself
    first.  A part glued to p's part contributes one image when p lies within
    rho^(3/4) of the locus; the branch pairing is fixed by listing order so
    two-sided targets resolve deterministically.
    """
    check_rho(space, rho)
    thr = rho**0.75
    part = space.part(p.part_id)
    images = [(p.part_id, p)]
    for g in space.gluings:
        mine = g.branches_of(p.part_id)
        if not mine:
            continue
        if part.shape == RECTANGLE:
            s = p.coords[0]       # book pages glue along x=0
            if s >= thr:
                continue
            for other in g.parts():
                if other == p.part_id:
                    continue
                images.append((other, PointRef(other, (s, p.coords[1]))))
            continue
        hit = _nearest_branch_1d(part, mine, p.coords[0])
        if hit is None:
            continue
        s, my_idx, _ = hit
        if s >= thr:
            continue
        for other in g.parts():
            if other == p.part_id:
                continue
            theirs = g.branches_of(other)
            be = theirs[min(my_idx, len(theirs) - 1)]
            images.append((other, PointRef(other, _image_on_branch(space.part(other), be, s))))
    return images
