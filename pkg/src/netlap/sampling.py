"""Epsilon-net construction on model spaces and partition-cell weights.

A net certifies its covering radius: every probe point of the space is within
epsilon of a net point of the same part.  Weights are the exact volumes of
the nearest-point cells for 1-d parts and stratified Monte Carlo estimates
(count-proportional, so part totals are exact) for 2-d parts.  Cells are
nearest-point cells with ties to the lower net index, which are contained in
the epsilon-balls once covering holds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from . import geometry as geo
from .geometry import GeometryError, SpaceModel


class SamplingError(RuntimeError):
    pass


@dataclass(frozen=True)
class SamplerConfig:
    strategy: str                  # grid | uniform_random | clustered
    target_epsilon: float
    seed: int = 0
    locus_bias: float = 1.0
    # optional restriction of the clustered pile to particular boundary /
    # gluing features: list of (part_id, chart location) for 1-d spaces
    anchors: tuple | None = None
    mc_probes: int = 1_000_000


@dataclass
class McCache:
    """Stratified Monte Carlo probes per 2-d part, reused as the quadrature
    stream for all continuous integrals over cells."""

    probes: dict = field(default_factory=dict)    # part_id -> (P, 2) coords
    cells: dict = field(default_factory=dict)     # part_id -> (P,) global cell index
    weight: dict = field(default_factory=dict)    # part_id -> scalar probe weight


@dataclass
class Net:
    space: SpaceModel
    part_ids: np.ndarray
    coords: np.ndarray
    mu: np.ndarray
    epsilon: float
    strategy: str = "manual"
    seed: int | None = None
    cell_rule: str = "nearest-lower"
    mu_sigma: np.ndarray | None = None
    mc: McCache | None = None

    def __post_init__(self):
        self.part_ids = np.asarray(self.part_ids, dtype=np.int64)
        self.coords = np.asarray(self.coords, dtype=float)
        if self.coords.ndim == 1:
            self.coords = self.coords[:, None]
        self.mu = np.asarray(self.mu, dtype=float)
        self._part_index = {}
        self._sorted_1d = {}
        self._trees = {}

    @property
    def n_points(self) -> int:
        return self.part_ids.shape[0]

    def part_index(self, part_id: int) -> np.ndarray:
        if part_id not in self._part_index:
            self._part_index[part_id] = np.flatnonzero(self.part_ids == part_id)
        return self._part_index[part_id]

    def part_coords(self, part_id: int) -> np.ndarray:
        return self.coords[self.part_index(part_id)]

    def sorted_1d(self, part_id: int):
        """(sorted chart coords, global indices in that order) for a 1-d part."""
        if part_id not in self._sorted_1d:
            idx = self.part_index(part_id)
            x = self.coords[idx, 0]
            order = np.argsort(x, kind="stable")
            self._sorted_1d[part_id] = (x[order], idx[order])
        return self._sorted_1d[part_id]

    def cell_breaks_1d(self, part_id: int):
        """Midpoint cell boundaries of a 1-d part.

        Segments: (breaks ascending, sorted points, global order); cell k is
        [breaks[k], breaks[k+1]] including the chart endpoints.
        Circles: breaks has one entry per point; cell k is the arc from
        breaks[k-1] to breaks[k] (wrapping).
        """
        part = self.space.part(part_id)
        x, gidx = self.sorted_1d(part_id)
        if part.shape == geo.SEGMENT:
            mids = 0.5 * (x[:-1] + x[1:])
            breaks = np.concatenate(([0.0], mids, [part.extent[0]]))
            return breaks, x, gidx
        L = part.extent[0]
        mids = 0.5 * (x[:-1] + x[1:])
        wrap = (0.5 * (x[-1] + x[0] + L)) % L
        return mids, wrap, x, gidx

    def _tree(self, part_id: int):
        if part_id not in self._trees:
            part = self.space.part(part_id)
            pts = self.part_coords(part_id)
            if part.shape == geo.TORUS:
                a, b = part.extent
                shifts = np.array([(i * a, j * b) for i in (-1, 0, 1) for j in (-1, 0, 1)])
                tiled = (pts[None, :, :] + shifts[:, None, :]).reshape(-1, 2)
                self._trees[part_id] = (cKDTree(tiled), pts.shape[0])
            else:
                self._trees[part_id] = (cKDTree(pts), pts.shape[0])
        return self._trees[part_id]

    def nearest(self, part_id: int, coords) -> tuple[np.ndarray, np.ndarray]:
        """(global net index, distance) of the owning cell for each query
        point, using within-part distance with ties to the lower index."""
        part = self.space.part(part_id)
        q = np.asarray(coords, dtype=float)
        gidx_all = self.part_index(part_id)
        if gidx_all.size == 0:
            raise SamplingError(f"part {part_id} carries no net points")
        if part.dim == 1:
            xq = q.reshape(-1)
            x, gidx = self.sorted_1d(part_id)
            if part.shape == geo.SEGMENT:
                pos = np.searchsorted(x, xq)
                lo = np.clip(pos - 1, 0, x.size - 1)
                hi = np.clip(pos, 0, x.size - 1)
            else:
                L = part.extent[0]
                pos = np.searchsorted(x, xq)
                lo = (pos - 1) % x.size
                hi = pos % x.size
            if part.shape == geo.SEGMENT:
                d_lo = np.abs(xq - x[lo])
                d_hi = np.abs(xq - x[hi])
            else:
                L = part.extent[0]
                d_lo = np.minimum(np.abs(xq - x[lo]), L - np.abs(xq - x[lo]))
                d_hi = np.minimum(np.abs(xq - x[hi]), L - np.abs(xq - x[hi]))
            pick_hi = (d_hi < d_lo) | ((d_hi == d_lo) & (gidx[hi] < gidx[lo]))
            sel = np.where(pick_hi, hi, lo)
            dist = np.where(pick_hi, d_hi, d_lo)
            return gidx[sel], dist
        tree, n_pts = self._tree(part_id)
        dist, raw = tree.query(q.reshape(-1, 2), k=1)
        return gidx_all[np.asarray(raw) % n_pts], np.asarray(dist)


# ---------------------------------------------------------------------------
# probe grids (used by covering verification and repair)


def part_probe_grid(part: geo.PartDescriptor, step: float) -> np.ndarray:
    if part.dim == 1:
        L = part.extent[0]
        m = max(2, int(math.ceil(L / step)))
        return ((np.arange(m) + 0.5) * (L / m))[:, None]
    a, b = part.extent
    mx = max(2, int(math.ceil(a / step)))
    my = max(2, int(math.ceil(b / step)))
    xs = (np.arange(mx) + 0.5) * (a / mx)
    ys = (np.arange(my) + 0.5) * (b / my)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    return np.column_stack([X.ravel(), Y.ravel()])


# ---------------------------------------------------------------------------
# samplers


def _alloc_counts(space: SpaceModel, total: int) -> list[int]:
    vols = np.array([p.volume for p in space.parts])
    frac = vols / vols.sum()
    counts = np.floor(frac * total).astype(int)
    counts = np.maximum(counts, 2)
    i = 0
    while counts.sum() < total:
        counts[i % len(counts)] += 1
        i += 1
    return counts.tolist()


def _grid_points(space: SpaceModel, eps: float):
    pids, coords, certified = [], [], 0.0
    for part in space.parts:
        if part.dim == 1:
            L = part.extent[0]
            m = int(math.ceil(L / eps))
            h = L / m
            x = (np.arange(m) + 0.5) * h
            coords.append(x[:, None])
            pids.append(np.full(m, part.part_id))
            certified = max(certified, h / 2.0)
        else:
            a, b = part.extent
            mx, my = int(math.ceil(a / eps)), int(math.ceil(b / eps))
            hx, hy = a / mx, b / my
            X, Y = np.meshgrid((np.arange(mx) + 0.5) * hx, (np.arange(my) + 0.5) * hy,
                               indexing="ij")
            coords.append(np.column_stack([X.ravel(), Y.ravel()]))
            pids.append(np.full(mx * my, part.part_id))
            certified = max(certified, 0.5 * math.hypot(hx, hy))
    dim = space.dim
    return (np.concatenate(pids), np.vstack([c if c.shape[1] == dim else c for c in coords]),
            certified)


def _uniform_points(space: SpaceModel, part: geo.PartDescriptor, n: int, rng) -> np.ndarray:
    if part.dim == 1:
        return rng.uniform(0.0, part.extent[0], n)[:, None]
    return np.column_stack([rng.uniform(0.0, part.extent[0], n),
                            rng.uniform(0.0, part.extent[1], n)])


def _pile_anchors(space: SpaceModel, restrict=None):
    """(part_id, anchor chart location, inward direction) list describing the
    boundary and gluing features near which the clustered sampler piles up."""
    anchors = []
    for part in space.parts:
        if part.dim == 1:
            feats = []
            glued = {be.location for g in space.gluings
                     for be in g.branches_of(part.part_id)}
            if part.shape == geo.SEGMENT:
                for z in (0.0, part.extent[0]):
                    feats.append(z)
            for z in glued:
                if z not in feats:
                    feats.append(z)
            for z in feats:
                if restrict is not None and (part.part_id, z) not in restrict:
                    continue
                if part.shape == geo.CIRCLE:
                    anchors.append((part.part_id, z, +1))
                    anchors.append((part.part_id, z, -1))
                else:
                    if z == 0.0:
                        anchors.append((part.part_id, z, +1))
                    else:
                        anchors.append((part.part_id, z, -1))
        else:
            glued = geo._glued_boundary(space, part.part_id)
            for tag in geo.RECT_EDGES:
                if restrict is not None and (part.part_id, tag) not in restrict:
                    continue
                if tag in glued or tag in geo.reflecting_edges(space, part.part_id):
                    anchors.append((part.part_id, tag, +1))
    return anchors


def _clustered_points(space: SpaceModel, part: geo.PartDescriptor, n: int, eps: float,
                      bias: float, anchors, rng) -> np.ndarray:
    """Pile a bias/(bias+1) fraction of the points at distance eps*bias*u^2
    from a random anchor feature (u uniform), the rest uniform."""
    mine = [a for a in anchors if a[0] == part.part_id]
    out = _uniform_points(space, part, n, rng)
    if not mine:
        return out
    pile = rng.random(n) < bias / (bias + 1.0)
    which = rng.integers(0, len(mine), n)
    u = rng.random(n)
    span = min(eps * bias, 0.25 * min(part.extent))
    s = span * u**2
    for k in np.flatnonzero(pile):
        pid, loc, direction = mine[which[k]]
        if part.dim == 1:
            x = loc + direction * s[k]
            if part.shape == geo.CIRCLE:
                x %= part.extent[0]
            else:
                x = min(max(x, 1e-12), part.extent[0] - 1e-12)
            out[k, 0] = x
        else:
            axis, level, c_lo, c_hi = geo._rect_edge_geometry(part, loc)
            t = rng.uniform(c_lo[1 - axis], c_hi[1 - axis])
            val = level + (1.0 if level == 0.0 else -1.0) * s[k]
            if axis == 0:
                out[k] = (val, t)
            else:
                out[k] = (t, val)
    return out


def _repair_covering(space: SpaceModel, part_ids, coords, eps: float,
                     max_insert: int = 200_000):
    """Farthest-point insertion per part until probe covering holds."""
    step = eps / 10.0
    new_pids, new_coords = [part_ids], [coords]
    certified = 0.0
    for part in space.parts:
        probes = part_probe_grid(part, step)
        pts = coords[part_ids == part.part_id]
        if pts.shape[0] == 0:
            pts = part_probe_grid(part, part.extent[0])[:1]
            new_pids.append(np.array([part.part_id]))
            new_coords.append(pts)
        mind = None
        for _ in range(max_insert):
            if mind is None:
                mind = _min_dist_to_set(part, probes, pts)
            worst = int(np.argmax(mind))
            if mind[worst] + step / 2.0 <= eps:
                break
            p_new = probes[worst]
            pts = np.vstack([pts, p_new])
            new_pids.append(np.array([part.part_id]))
            new_coords.append(p_new[None, :])
            d_new = geo.dist_in_part(part, p_new, probes)
            mind = np.minimum(mind, d_new)
        else:
            raise SamplingError(f"covering repair budget exhausted on part {part.part_id}")
        certified = max(certified, float(np.max(mind)) + step / 2.0)
    return np.concatenate(new_pids), np.vstack(new_coords), certified


def _min_dist_to_set(part, probes, pts, chunk=512) -> np.ndarray:
    mind = np.full(probes.shape[0], np.inf)
    for s in range(0, pts.shape[0], chunk):
        block = pts[s:s + chunk]
        for p in block:
            mind = np.minimum(mind, geo.dist_in_part(part, p, probes))
    return mind


def sample_net(space: SpaceModel, cfg: SamplerConfig) -> Net:
    """Build a certified epsilon-net with the configured strategy and assign
    exact / Monte Carlo cell weights.  Deterministic given the seed."""
    eps = cfg.target_epsilon
    if eps >= space.scale_guard() / 2.0:
        raise GeometryError(f"target epsilon {eps} too large for the space scale")
    if cfg.strategy == "grid":
        part_ids, coords, certified = _grid_points(space, eps)
    elif cfg.strategy in ("uniform_random", "clustered"):
        rng = np.random.default_rng(cfg.seed)
        counts = _alloc_counts(space, _initial_count(space, eps))
        anchors = None
        if cfg.strategy == "clustered":
            if cfg.locus_bias < 1.0:
                raise SamplingError("locus_bias must be >= 1")
            restrict = set(cfg.anchors) if cfg.anchors is not None else None
            anchors = _pile_anchors(space, restrict)
        pids, pts = [], []
        for part, n in zip(space.parts, counts):
            if cfg.strategy == "uniform_random":
                p = _uniform_points(space, part, n, rng)
            else:
                p = _clustered_points(space, part, n, eps, cfg.locus_bias, anchors, rng)
            pids.append(np.full(n, part.part_id))
            pts.append(p)
        part_ids = np.concatenate(pids)
        coords = np.vstack(pts)
        part_ids, coords, certified = _repair_covering(space, part_ids, coords, eps)
    else:
        raise SamplingError(f"unknown sampling strategy {cfg.strategy!r}")
    net = Net(space, part_ids, coords, np.ones(part_ids.shape[0]), certified,
              strategy=cfg.strategy, seed=cfg.seed)
    assign_weights(net, mc_probes=cfg.mc_probes, mc_seed=cfg.seed)
    return net


def _initial_count(space: SpaceModel, eps: float) -> int:
    n = 0
    for part in space.parts:
        if part.dim == 1:
            n += int(math.ceil(2.0 * part.extent[0] / eps))
        else:
            n += int(math.ceil(1.5 * part.volume / eps**2))
    return n


# ---------------------------------------------------------------------------
# weights


def assign_weights(net: Net, mc_probes: int = 1_000_000, mc_seed: int = 0) -> np.ndarray:
    """Fill in cell volumes: exact midpoint cells for 1-d parts, stratified
    Monte Carlo for 2-d parts (count-proportional, exact part totals)."""
    space = net.space
    mu = np.zeros(net.n_points)
    sigma = np.zeros(net.n_points)
    mc = McCache()
    for part in space.parts:
        if part.dim == 1:
            if part.shape == geo.SEGMENT:
                breaks, x, gidx = net.cell_breaks_1d(part.part_id)
                mu[gidx] = np.diff(breaks)
            else:
                mids, wrap, x, gidx = net.cell_breaks_1d(part.part_id)
                L = part.extent[0]
                if x.size == 1:
                    mu[gidx] = L
                else:
                    edges = np.concatenate(([wrap if wrap <= mids[0] else wrap - L], mids,
                                            [wrap if wrap > mids[-1] else wrap + L]))
                    mu[gidx] = np.diff(edges)
        else:
            g_mu, g_sig = _mc_weights(net, part, mc, mc_probes, mc_seed)
            mu += g_mu
            sigma += g_sig
    if np.any(mu <= 0.0):
        bad = np.flatnonzero(mu <= 0.0)
        raise SamplingError(f"empty cells at net indices {bad[:5].tolist()}")
    net.mu = mu
    net.mu_sigma = sigma if any(p.dim == 2 for p in space.parts) else None
    net.mc = mc if mc.probes else None
    return mu


def _mc_weights(net: Net, part, mc: McCache, total_probes: int, seed: int):
    space = net.space
    n2d = sum(1 for p in space.parts if p.dim == 2)
    probes_here = max(10_000, total_probes // max(n2d, 1))
    a, b = part.extent
    s = max(4, int(math.floor(math.sqrt(probes_here / 16.0))))
    per_stratum = int(math.ceil(probes_here / (s * s)))
    n_total = per_stratum * s * s
    pts = np.empty((n_total, 2))
    k = 0
    for i in range(s):
        for j in range(s):
            rng = np.random.default_rng([seed, part.part_id, i, j])
            u = rng.random((per_stratum, 2))
            pts[k:k + per_stratum, 0] = (i + u[:, 0]) * (a / s)
            pts[k:k + per_stratum, 1] = (j + u[:, 1]) * (b / s)
            k += per_stratum
    cells, dist = net.nearest(part.part_id, pts)
    stray = dist > net.epsilon * (1.0 + 1e-9)
    if np.any(stray):
        raise SamplingError(
            f"{int(stray.sum())} probe points of part {part.part_id} fall outside "
            "every epsilon ball; the net does not cover")
    counts = np.bincount(cells, minlength=net.n_points).astype(float)
    area = part.volume
    mu = counts * (area / n_total)
    p_hat = counts / n_total
    sig = area * np.sqrt(np.maximum(p_hat * (1 - p_hat), 0.0) / n_total)
    mc.probes[part.part_id] = pts
    mc.cells[part.part_id] = cells
    mc.weight[part.part_id] = area / n_total
    return mu, sig


# ---------------------------------------------------------------------------
# verification and serialization


@dataclass(frozen=True)
class NetReport:
    covering_radius: float
    min_separation: float
    weight_sum_residual: float
    covered: bool


def verify_net(space: SpaceModel, net: Net, probe_step: float | None = None) -> NetReport:
    """Probe-based covering estimate, minimal separation and weight-sum check."""
    step = probe_step if probe_step is not None else net.epsilon / 10.0
    cover = 0.0
    min_sep = math.inf
    for part in space.parts:
        probes = part_probe_grid(part, step)
        _, dist = net.nearest(part.part_id, probes)
        cover = max(cover, float(np.max(dist)))
        idx = net.part_index(part.part_id)
        if idx.size >= 2:
            pts = net.coords[idx]
            if part.dim == 1:
                x, _ = net.sorted_1d(part.part_id)
                gaps = np.diff(x)
                if part.shape == geo.CIRCLE:
                    gaps = np.concatenate([gaps, [part.extent[0] - (x[-1] - x[0])]])
                min_sep = min(min_sep, float(np.min(gaps)))
            else:
                tree = cKDTree(pts)
                d, _ = tree.query(pts, k=2)
                min_sep = min(min_sep, float(np.min(d[:, 1])))
    resid = float(net.mu.sum() - space.total_volume())
    return NetReport(cover, min_sep, resid, cover <= net.epsilon * (1.0 + 1e-9))


NET_CSV_HEADER = "index,part_id,coord0,coord1,mu"


def save_net_csv(net: Net, path):
    with open(path, "w") as fh:
        fh.write(NET_CSV_HEADER + "\n")
        for i in range(net.n_points):
            c0 = net.coords[i, 0]
            c1 = net.coords[i, 1] if net.coords.shape[1] > 1 else 0.0
            fh.write(f"{i},{net.part_ids[i]},{c0:.17g},{c1:.17g},{net.mu[i]:.17g}\n")


def load_net_csv(space: SpaceModel, path, epsilon: float) -> Net:
    data = np.genfromtxt(path, delimiter=",", skip_header=1)
    data = np.atleast_2d(data)
    part_ids = data[:, 1].astype(np.int64)
    coords = data[:, 2:2 + space.dim]
    mu = data[:, 4]
    return Net(space, part_ids, coords, mu, epsilon, strategy="csv")
