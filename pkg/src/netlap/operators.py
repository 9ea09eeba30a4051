"""Discretization, lifting, smoothing kernel and energy functionals.

The smoothing kernel at radius r averages with the profile
phi(t) = (n+2)/(2 nu_n) (1 - t^2) over the plain ball and the reflected
ball of a point; near a gluing locus the kernel additionally averages the
balls around the point's mirror images, weighted by the linear ramp
alpha_l = max(0, 1 - dist_to_locus / r^(3/4)) and normalized by
1 + sum(alpha_l), which makes the smoothed function continuous across the
locus.  The gluing ramp needs r < rho so that every point with a positive
ramp weight actually owns mirror images.

All 1-d integrals split the line at kink and cutoff points and apply
three-point Gauss-Legendre per piece, which is exact for the piecewise
quadratic kernel integrands; 2-d integrals tile the (clipped) kernel
support with an exactly fitting midpoint grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import geometry as geo
from .geometry import GeometryError, PointRef, SpaceModel
from .laplacian import UNIT_BALL_VOLUME
from .sampling import Net

GL3_NODES = np.array([-math.sqrt(0.6), 0.0, math.sqrt(0.6)])
GL3_WEIGHTS = np.array([5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0])


@dataclass
class DiscreteFunction:
    net: Net
    values: np.ndarray


def _values(u) -> np.ndarray:
    return u.values if isinstance(u, DiscreteFunction) else np.asarray(u, dtype=float)


@dataclass(frozen=True)
class KernelConfig:
    r: float
    rho: float | None = None       # mirror-image threshold parameter (> r)
    cutoff_exponent: float = 0.75  # ramp exponent, fixed
    quad_step: float | None = None
    reflect_at_gluing: bool | None = None

    def mirror_rho(self) -> float:
        return self.rho if self.rho is not None else self.r

    def step2d(self) -> float:
        return self.quad_step if self.quad_step is not None else self.r / 96.0


@dataclass(frozen=True)
class QuadratureScheme:
    method: str              # exact-1d | stratified-mc
    seed: int = 0


@dataclass(frozen=True)
class EnergyReport:
    total: float
    omega: float             # contribution of the 2 rho^(3/4) collar of the gluing locus
    omega_c: float


def default_quadrature(space: SpaceModel) -> QuadratureScheme:
    return QuadratureScheme("exact-1d" if space.dim == 1 else "stratified-mc")


def _check_cfg(space: SpaceModel, cfg: KernelConfig):
    if cfg.cutoff_exponent != 0.75:
        raise ValueError("the ramp exponent is fixed at 3/4")
    if space.gluings:
        if cfg.rho is None:
            raise GeometryError("glued spaces need a rho in the kernel config")
        if cfg.r >= cfg.rho:
            raise GeometryError(f"kernel radius r={cfg.r} must be below rho={cfg.rho}")
    if cfg.r >= space.scale_guard():
        raise GeometryError(f"kernel radius r={cfg.r} exceeds the space scale guard")


# ---------------------------------------------------------------------------
# quadrature streams over the whole space


def space_quadrature(net: Net, scheme: QuadratureScheme):
    """(part_ids, points, weights, owning cell) covering the full space;
    per-cell weights sum to mu exactly."""
    space = net.space
    parts_out, pts_out, wts_out, cells_out = [], [], [], []
    for part in space.parts:
        idx = net.part_index(part.part_id)
        if part.dim == 1:
            pieces = _cell_intervals_1d(net, part.part_id)
            for gi, a, b in pieces:
                mid, half = 0.5 * (a + b), 0.5 * (b - a)
                ys = mid + half * GL3_NODES
                ws = half * GL3_WEIGHTS
                if part.shape == geo.CIRCLE:
                    ys = ys % part.extent[0]
                pts_out.append(ys[:, None])
                wts_out.append(ws)
                cells_out.append(np.full(3, gi))
                parts_out.append(np.full(3, part.part_id))
        else:
            if scheme.method != "stratified-mc" or net.mc is None:
                raise GeometryError("2-d quadrature needs the net's Monte Carlo probes")
            pts = net.mc.probes[part.part_id]
            cells = net.mc.cells[part.part_id]
            w = net.mc.weight[part.part_id]
            pts_out.append(pts)
            wts_out.append(np.full(pts.shape[0], w))
            cells_out.append(cells)
            parts_out.append(np.full(pts.shape[0], part.part_id))
    return (np.concatenate(parts_out), np.vstack(pts_out), np.concatenate(wts_out),
            np.concatenate(cells_out))


def _cell_intervals_1d(net: Net, part_id: int):
    """(global index, lo, hi) per cell; the wrapped circle cell keeps lo > hi
    unwrapped as (lo, hi + L)."""
    part = net.space.part(part_id)
    if part.shape == geo.SEGMENT:
        breaks, x, gidx = net.cell_breaks_1d(part_id)
        return [(gidx[k], breaks[k], breaks[k + 1]) for k in range(len(gidx))]
    mids, wrap, x, gidx = net.cell_breaks_1d(part_id)
    L = part.extent[0]
    if len(gidx) == 1:
        return [(gidx[0], 0.0, L)]
    out = []
    edges = np.concatenate(([wrap - L if wrap > mids[-1] else wrap], mids,
                            [wrap + L if wrap <= mids[0] else wrap]))
    # edges has len(gidx)+1 ascending values spanning one full period
    for k in range(len(gidx)):
        out.append((gidx[k], edges[k], edges[k + 1]))
    return out


def integrate(net: Net, scheme: QuadratureScheme, f) -> float:
    parts, pts, wts, _ = space_quadrature(net, scheme)
    total = 0.0
    for pid in np.unique(parts):
        m = parts == pid
        total += float(np.sum(wts[m] * np.ravel(f(int(pid), pts[m]))))
    return total


# ---------------------------------------------------------------------------
# discretization and lifting


def discretize(space: SpaceModel, net: Net, scheme: QuadratureScheme, f) -> DiscreteFunction:
    """Cell averages mu_i^{-1} int_{V_i} f; exact for affine f on 1-d cells."""
    parts, pts, wts, cells = space_quadrature(net, scheme)
    acc = np.zeros(net.n_points)
    for pid in np.unique(parts):
        m = parts == pid
        np.add.at(acc, cells[m], wts[m] * np.ravel(f(int(pid), pts[m])))
    return DiscreteFunction(net, acc / net.mu)


class LiftedFunction:
    """Piecewise constant extension sum_i u_i 1_{V_i}, evaluable anywhere."""

    def __init__(self, net: Net, values):
        self.net = net
        self.values = _values(values)

    def __call__(self, part_id: int, coords) -> np.ndarray:
        cells, _ = self.net.nearest(part_id, coords)
        return self.values[cells]


def lift(net: Net, u) -> LiftedFunction:
    return LiftedFunction(net, u)


def lifted_norm_sq(net: Net, u) -> float:
    v = _values(u)
    return float(np.sum(net.mu * v * v))


# ---------------------------------------------------------------------------
# kernel machinery


def _phi(n_dim: int, t: np.ndarray) -> np.ndarray:
    c = (n_dim + 2) / (2.0 * UNIT_BALL_VOLUME[n_dim])
    return np.where(t < 1.0, c * (1.0 - t * t), 0.0)


def kernel_components(space: SpaceModel, cfg: KernelConfig, x: PointRef):
    """[(part_id, center coords, weight)] of the kernel balls at x plus the
    ramp normalization 1 + sum(alpha)."""
    if not space.gluings:
        return [(x.part_id, np.asarray(x.coords), 1.0)], 1.0
    images = geo.mirror_images(space, x, cfg.mirror_rho())
    ramp_width = cfg.r**cfg.cutoff_exponent
    # the rho guard keeps distinct loci farther apart than the ramp width,
    # so the nearest-locus distance serves every image present
    d_loc = float(geo.locus_distance(space, x.part_id, np.asarray(x.coords))[0])
    alpha = max(0.0, 1.0 - d_loc / ramp_width)
    comps = [(x.part_id, np.asarray(x.coords), 1.0)]
    norm = 1.0
    for pid, img in images[1:]:
        if alpha <= 0.0:
            continue
        comps.append((pid, np.asarray(img.coords), alpha))
        norm += alpha
    return comps, norm


def _forced_images(space: SpaceModel, x: PointRef, parts):
    """Mirror images of x on exactly the given parts, ignoring thresholds
    (the gluing isometries extend across the whole separation collar)."""
    out = {}
    part = space.part(x.part_id)
    for g in space.gluings:
        mine = g.branches_of(x.part_id)
        if not mine:
            continue
        if part.shape == geo.RECTANGLE:
            for other in g.parts():
                if other != x.part_id and other in parts:
                    out[other] = PointRef(other, (x.coords[0], x.coords[1]))
            continue
        hit = geo._nearest_branch_1d(part, mine, x.coords[0])
        if hit is None:
            continue
        s, my_idx, _ = hit
        for other in g.parts():
            if other == x.part_id or other not in parts:
                continue
            theirs = g.branches_of(other)
            be = theirs[min(my_idx, len(theirs) - 1)]
            out[other] = PointRef(
                other, geo._image_on_branch(space.part(other), be, s))
    return out


# --- 1-d exact piecewise integration


def _refl_candidates_1d(space: SpaceModel, part_id: int, c: float):
    """Reflected-path descriptions within a segment part: (z, base) with
    dist(y) = base + |y - z|."""
    ends = geo.reflecting_edges(space, part_id)
    return [(z, abs(c - z)) for z in ends]


def _dtilde_1d(cands, ys: np.ndarray) -> np.ndarray:
    if not cands:
        return np.full(np.shape(ys), geo.INF)
    vals = [base + np.abs(ys - z) for z, base in cands]
    return np.min(np.stack(vals), axis=0)


def _pieces_1d(space: SpaceModel, part_id: int, c: float, r: float, net: Net | None):
    """Sub-intervals on which both ball integrands are single quadratics:
    (lo, hi, has_dtilde, cell index or -1).  Circle parts are handled in the
    offset coordinate around c."""
    part = space.part(part_id)
    if part.shape == geo.CIRCLE:
        L = part.extent[0]
        pieces = [-r, 0.0, r]
        if net is not None:
            mids, wrap, x, gidx = net.cell_breaks_1d(part_id)
            edges = np.concatenate((mids, [wrap]))
            t = (edges - c + L / 2.0) % L - L / 2.0
            pieces.extend(t[(t > -r) & (t < r)].tolist())
        bks = np.unique(np.asarray(pieces))
        keep = np.diff(bks) > 1e-15
        return (bks[:-1][keep], bks[1:][keep],
                np.zeros(int(keep.sum()), dtype=bool)), True
    L = part.extent[0]
    lo, hi = max(0.0, c - r), min(L, c + r)
    cands = _refl_candidates_1d(space, part_id, c)
    breaks = [lo, hi]
    if lo < c < hi:
        breaks.append(c)
    for z, base in cands:
        rem = r - base
        if rem > 0:
            for y in (z - rem, z + rem):
                if lo < y < hi:
                    breaks.append(y)
    if len(cands) == 2:
        (z1, b1), (z2, b2) = cands
        # switch point of the two reflected paths (linear pieces)
        for sgn1 in (-1, 1):
            for sgn2 in (-1, 1):
                denom = sgn1 - sgn2
                if denom == 0:
                    continue
                y = (b2 - b1 + sgn1 * z1 - sgn2 * z2) / denom
                if lo < y < hi:
                    breaks.append(y)
    if net is not None:
        bk, x, gidx = net.cell_breaks_1d(part_id)
        i0, i1 = np.searchsorted(bk, [lo, hi])
        inner = bk[i0:i1]
        breaks.extend(inner[(inner > lo) & (inner < hi)].tolist())
    bks = np.unique(np.asarray(breaks))
    keep = np.diff(bks) > 1e-15
    a = bks[:-1][keep]
    b = bks[1:][keep]
    has_dt = _dtilde_1d(cands, 0.5 * (a + b)) < r
    return (a, b, has_dt), False


def _kernel_cell_integrals_1d(space: SpaceModel, net: Net | None, part_id: int,
                              c: float, r: float):
    """Per-cell integrals of phi(dhat/r) over both ball components of one
    part; exact.  Returns (cells, values, total_mass)."""
    part = space.part(part_id)
    (a, b, has_dt), is_circle = _pieces_1d(space, part_id, c, r, net)
    if a.size == 0:
        return np.empty(0, np.int64), np.empty(0), 0.0
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    ys = mid[:, None] + half[:, None] * GL3_NODES[None, :]
    ws = half[:, None] * GL3_WEIGHTS[None, :]
    if is_circle:
        d = np.abs(ys)
        vals = _phi(1, d / r)
        y_space = (c + ys) % part.extent[0]
        mid_space = (c + mid) % part.extent[0]
    else:
        d = np.abs(ys - c)
        vals = _phi(1, d / r) * (d < r)
        cands = _refl_candidates_1d(space, part_id, c)
        dt = _dtilde_1d(cands, ys)
        vals = vals + np.where(has_dt[:, None], _phi(1, dt / r), 0.0)
        y_space = ys
        mid_space = mid
    piece_int = np.sum(vals * ws, axis=1)
    total = float(np.sum(piece_int))
    if net is None:
        return np.empty(0, np.int64), np.empty(0), total
    cells, _ = net.nearest(part_id, mid_space)
    return cells, piece_int, total


def _ball_integrate_1d(space: SpaceModel, part_id: int, c: float, r: float, g,
                       substep: float):
    """int over {d < r} of g plus int over {dtilde < r} of g, by splitting at
    kinks and subdividing to substep (g arbitrary smooth)."""
    part = space.part(part_id)
    (pa, pb, pdt), is_circle = _pieces_1d(space, part_id, c, r, None)
    total = 0.0
    L = part.extent[0]
    for a, b, has_dt in zip(pa, pb, pdt):
        m = max(1, int(math.ceil((b - a) / substep)))
        edges = np.linspace(a, b, m + 1)
        mid = 0.5 * (edges[:-1] + edges[1:])
        half = 0.5 * (edges[1] - edges[0])
        ys = mid[:, None] + half * GL3_NODES[None, :]
        ws = half * GL3_WEIGHTS[None, :]
        if is_circle:
            gv = g(part_id, (c + ys.ravel()) % L).reshape(ys.shape)
            total += float(np.sum(gv * ws))
        else:
            gv = g(part_id, ys.ravel()).reshape(ys.shape)
            mult = 1.0 + (1.0 if has_dt else 0.0)
            total += mult * float(np.sum(gv * ws))
    return total


# --- 2-d midpoint integration on an exactly fitting grid


def _grid_2d(space: SpaceModel, part_id: int, c, r: float, step: float):
    part = space.part(part_id)
    a, b = part.extent
    if part.shape == geo.TORUS:
        lox, hix = c[0] - r, c[0] + r
        loy, hiy = c[1] - r, c[1] + r
    else:
        lox, hix = max(0.0, c[0] - r), min(a, c[0] + r)
        loy, hiy = max(0.0, c[1] - r), min(b, c[1] + r)
    mx = max(2, int(math.ceil((hix - lox) / step)))
    my = max(2, int(math.ceil((hiy - loy) / step)))
    dx, dy = (hix - lox) / mx, (hiy - loy) / my
    xs = lox + (np.arange(mx) + 0.5) * dx
    ys = loy + (np.arange(my) + 0.5) * dy
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel()])
    if part.shape == geo.TORUS:
        pts[:, 0] %= a
        pts[:, 1] %= b
    return pts, dx * dy


def _kernel_cell_integrals_2d(space: SpaceModel, net: Net | None, part_id: int,
                              c, r: float, step: float):
    part = space.part(part_id)
    pts, w = _grid_2d(space, part_id, c, r, step)
    d = geo.dist_in_part(part, c, pts)
    vals = _phi(2, d / r) * (d < r)
    dt = geo.refl_dist_in_part(space, part_id, c, pts)
    vals = vals + _phi(2, dt / r) * (dt < r)
    total = float(np.sum(vals)) * w
    if net is None:
        return np.empty(0, np.int64), np.empty(0), total
    keep = vals > 0.0
    cells, _ = net.nearest(part_id, pts[keep])
    return cells, vals[keep] * w, total


def _ball_integrate_2d(space: SpaceModel, part_id: int, c, r: float, g, step: float):
    part = space.part(part_id)
    pts, w = _grid_2d(space, part_id, c, r, step)
    d = geo.dist_in_part(part, c, pts)
    dt = geo.refl_dist_in_part(space, part_id, c, pts)
    mult = (d < r).astype(float) + (dt < r).astype(float)
    live = mult > 0
    if not np.any(live):
        return 0.0
    gv = np.ravel(g(part_id, pts[live]))
    return float(np.sum(gv * mult[live])) * w


# ---------------------------------------------------------------------------
# theta, smoothing, energies


def _component_integrals(space, net, cfg, comps):
    """(cells, vals, mass) per kernel component."""
    out = []
    for pid, ccoords, wgt in comps:
        if space.part(pid).dim == 1:
            cells, vals, mass = _kernel_cell_integrals_1d(
                space, net, pid, float(ccoords[0]), cfg.r)
        else:
            cells, vals, mass = _kernel_cell_integrals_2d(
                space, net, pid, ccoords, cfg.r, cfg.step2d())
        out.append((cells, vals, mass, wgt))
    return out


def theta(space: SpaceModel, cfg: KernelConfig, x: PointRef) -> float:
    """Kernel mass at x; identically 1 on the flat catalog away from corner
    wedges, up to 2-d quadrature error."""
    _check_cfg(space, cfg)
    comps, norm = kernel_components(space, cfg, x)
    total = 0.0
    for _, _, mass, wgt in _component_integrals(space, None, cfg, comps):
        total += wgt * mass
    return total / (norm * cfg.r**space.dim)


def smooth(space: SpaceModel, net: Net, cfg: KernelConfig, u, queries) -> np.ndarray:
    """Evaluate the normalized kernel smoothing of the lifted net function at
    the query points."""
    _check_cfg(space, cfg)
    uv = _values(u)
    out = np.empty(len(queries))
    for qi, x in enumerate(queries):
        comps, _ = kernel_components(space, cfg, x)
        numer = 0.0
        denom = 0.0
        for cells, vals, mass, wgt in _component_integrals(space, net, cfg, comps):
            numer += wgt * float(np.sum(vals * uv[cells]))
            denom += wgt * mass
        out[qi] = numer / denom
    return out


def continuous_energy(space: SpaceModel, net: Net, cfg: KernelConfig, f,
                      substep: float | None = None) -> EnergyReport:
    """Double ball-neighborhood energy of f at radius cfg.r: the outer
    integral runs over the net's cells, the inner over the plain plus
    reflected balls of every mirror image.  Mirror availability is anchored
    at the outer cell's net point, so the discrete energy dominates this
    functional at radius rho - 4 eps by construction.

    Returns the total along with its split into the 2 rho^(3/4) gluing
    collar and its complement.
    """
    _check_cfg(space, cfg)
    rho = cfg.mirror_rho()
    collar = 2.0 * rho**0.75
    sub = substep if substep is not None else cfg.r / 12.0
    if space.dim == 1:
        parts, pts, wts, cells = space_quadrature(net, default_quadrature(space))
    else:
        # 2-d outer rule: one representative probe per cell, weighted by mu
        parts, pts, wts = net.part_ids, net.coords, net.mu
        cells = np.arange(net.n_points)
    e_omega = 0.0
    e_rest = 0.0
    anchor_cache: dict[int, tuple] = {}
    for j in range(pts.shape[0]):
        pid = int(parts[j])
        xw = float(wts[j])
        xc = pts[j, : space.dim]
        cell = int(cells[j])
        if cell not in anchor_cache:
            anchor = PointRef(int(net.part_ids[cell]), tuple(net.coords[cell]))
            imgs = geo.mirror_images(space, anchor, rho) if space.gluings else [(pid, anchor)]
            anchor_cache[cell] = tuple(p for p, _ in imgs)
        force = anchor_cache[cell]
        x = PointRef(pid, tuple(xc))
        if space.gluings:
            own = [(pid, np.asarray(xc), 1.0)]
            others = _forced_images(space, x, [p for p in force if p != pid])
            comps = own + [(p, np.asarray(img.coords), 1.0) for p, img in others.items()]
        else:
            comps = [(pid, np.asarray(xc), 1.0)]
        fx = float(np.ravel(f(pid, xc[None, :] if space.dim == 2 else np.array([xc[0]])))[0])

        def g(qpid, ycoords, fx=fx):
            return (np.ravel(f(qpid, ycoords)) - fx) ** 2

        inner = 0.0
        for cpid, cc, _ in comps:
            if space.part(cpid).dim == 1:
                inner += _ball_integrate_1d(space, cpid, float(cc[0]), cfg.r, g, sub)
            else:
                inner += _ball_integrate_2d(space, cpid, cc, cfg.r, g, cfg.step2d())
        d_loc = float(geo.locus_distance(space, pid, xc)[0]) if space.gluings else geo.INF
        if d_loc < collar:
            e_omega += xw * inner
        else:
            e_rest += xw * inner
    return EnergyReport(e_omega + e_rest, e_omega, e_rest)


def eigenspace_error(space: SpaceModel, net: Net, u, basis) -> float:
    """Relative L2 distance of the lifted net function from the span of the
    reference eigenfunctions (handles multiplicity and sign)."""
    if not basis:
        raise ValueError("empty reference basis")
    uv = _values(u)
    scheme = default_quadrature(space)
    parts, pts, wts, cells = space_quadrature(net, scheme)
    m = len(basis)
    G = np.zeros((m, m))
    proj = np.zeros(m)
    gvals = np.empty((pts.shape[0], m))
    for pid in np.unique(parts):
        sel = parts == pid
        sub = pts[sel] if space.dim == 2 else pts[sel, 0]
        for a, g in enumerate(basis):
            gvals[sel, a] = np.ravel(g(int(pid), sub))
    fvals = uv[cells]
    for a in range(m):
        proj[a] = float(np.sum(wts * fvals * gvals[:, a]))
        for b in range(a, m):
            G[a, b] = G[b, a] = float(np.sum(wts * gvals[:, a] * gvals[:, b]))
    norm_sq = float(np.sum(net.mu * uv * uv))
    if norm_sq == 0.0:
        raise ValueError("zero function")
    w, V = np.linalg.eigh(G)
    keep = w > 1e-12 * max(float(w[-1]), 1.0)
    coeff = (V[:, keep] / np.sqrt(w[keep])).T @ proj
    err_sq = max(norm_sq - float(coeff @ coeff), 0.0) / norm_sq
    return math.sqrt(err_sq)
