"""Independent brute-force validators.

These deliberately avoid the analytic shortcuts of the main modules: the
reflected distance is minimized over a dense boundary discretization, metric
graph spectra come from a second-order finite-difference discretization of
the vertex conditions, and ball volumes from plain Monte Carlo counting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import geometry as geo
from .geometry import GeometryError, PointRef, SpaceModel


@dataclass(frozen=True)
class OracleConfig:
    boundary_step: float = 1e-4
    fd_step: float = 1e-3
    mc_probes: int = 200_000
    seed: int = 0


# ---------------------------------------------------------------------------
# reflected distance by boundary search


def _boundary_nodes(space: SpaceModel, part_id: int, h: float) -> np.ndarray:
    """Dense discretization (step <= h) of the part's reflecting boundary."""
    part = space.part(part_id)
    edges = geo.reflecting_edges(space, part_id)
    if part.shape == geo.SEGMENT:
        return np.asarray(edges, dtype=float).reshape(-1, 1)
    nodes = []
    for tag in edges:
        axis, level, c_lo, c_hi = geo._rect_edge_geometry(part, tag)
        length = c_hi[1 - axis] - c_lo[1 - axis]
        m = max(2, int(math.ceil(length / h)) + 1)
        t = np.linspace(c_lo[1 - axis], c_hi[1 - axis], m)
        pts = np.empty((m, 2))
        pts[:, axis] = level
        pts[:, 1 - axis] = t
        nodes.append(pts)
    if not nodes:
        return np.empty((0, 2))
    return np.vstack(nodes)


def brute_reflected_distance(space: SpaceModel, p: PointRef, q: PointRef,
                             h: float = 1e-4) -> float:
    """min over boundary nodes z of d(p,z) + d(z,q); error at most h since the
    objective is 1-Lipschitz in the boundary arclength."""
    if p.part_id != q.part_id:
        raise GeometryError("points lie in different parts")
    part = space.part(p.part_id)
    nodes = _boundary_nodes(space, p.part_id, h)
    if nodes.shape[0] == 0:
        return math.inf
    dp = geo.dist_in_part(part, p.coords, nodes)
    dq = geo.dist_in_part(part, q.coords, nodes)
    return float(np.min(dp + dq))


# ---------------------------------------------------------------------------
# finite-difference metric-graph spectra


@dataclass
class FDSpectrum:
    eigenvalues: np.ndarray
    # evaluation data for eigenfunctions: per part, grid coords and values
    part_grids: dict
    part_values: dict          # part_id -> (n_grid, k) array
    h: float

    def eigenfunction(self, k: int):
        """Piecewise-linear interpolant of the k-th eigenvector, as a
        callable (part_id, coords) -> values."""
        grids = self.part_grids
        vals = {pid: v[:, k] for pid, v in self.part_values.items()}

        def f(part_id, coords):
            x = np.ravel(np.asarray(coords, dtype=float))
            return np.interp(x, grids[part_id], vals[part_id])

        return f


def _graph_grid(space: SpaceModel, h: float, strict: bool = True):
    """Index the FD unknowns: one shared unknown per vertex, plus interior
    grid points per part.  Returns bookkeeping for assembly and evaluation.

    With strict=True, h must divide every part length; otherwise each part
    rounds to its own step near h (still second-order accurate).
    """
    if space.dim != 1:
        raise GeometryError("finite-difference oracle is 1-d only")
    # vertex unknowns: gluing vertices plus free segment ends
    vertex_ids = {}           # key -> unknown index
    def vkey(g): return ("glue", g.vertex_id)

    n = 0
    for g in space.gluings:
        vertex_ids[vkey(g)] = n
        n += 1
    for part in space.parts:
        if part.shape != geo.SEGMENT:
            continue
        glued_locs = {be.location for g in space.gluings
                      for be in g.branches_of(part.part_id)}
        for z in (0.0, part.extent[0]):
            if z not in glued_locs:
                vertex_ids[("free", part.part_id, z)] = n
                n += 1
    part_layout = {}
    for part in space.parts:
        L = part.extent[0]
        m = max(2, int(round(L / h)))
        if strict and abs(m * h - L) > 1e-9 * max(1.0, L):
            raise GeometryError(f"step {h} does not divide part length {L}")
        # endpoints of the chart: which unknown do they attach to
        if part.shape == geo.SEGMENT:
            lo = _end_unknown(space, vertex_ids, part.part_id, 0.0)
            hi = _end_unknown(space, vertex_ids, part.part_id, part.extent[0])
        else:
            locs = [be for g in space.gluings for be in g.branches_of(part.part_id)
                    if be.direction == +1]
            if len(locs) != 1 or locs[0].location != 0.0:
                raise GeometryError(
                    "FD oracle supports circles glued at their chart origin only")
            g = next(g for g in space.gluings if g.branches_of(part.part_id))
            lo = hi = vertex_ids[vkey(g)]
        interior = np.arange(n, n + m - 1)
        n += m - 1
        part_layout[part.part_id] = (lo, hi, interior, m)
    return vertex_ids, part_layout, n


def _end_unknown(space, vertex_ids, part_id, z):
    for g in space.gluings:
        for be in g.branches_of(part_id):
            if be.location == z:
                return vertex_ids[("glue", g.vertex_id)]
    return vertex_ids[("free", part_id, z)]


def fd_metric_graph_spectrum(space: SpaceModel, h: float, k_max: int,
                             strict: bool = True):
    """Lowest eigenvalues of the Laplacian on a 1-d glued space, with value
    continuity and vanishing inward-derivative sum at every vertex (free
    segment ends get the plain Neumann condition).

    Second-order accurate; returns an FDSpectrum carrying eigenvectors for
    reference-eigenfunction use.
    """
    vertex_ids, part_layout, n = _graph_grid(space, h, strict=strict)
    rows, cols, vals = [], [], []
    mass = np.zeros(n)

    def add(i, j, v):
        rows.append(i)
        cols.append(j)
        vals.append(v)

    for part in space.parts:
        lo, hi, interior, m = part_layout[part.part_id]
        he = part.extent[0] / m
        chain = np.concatenate(([lo], interior, [hi]))
        # stiffness: sum over links (u_a - u_b)^2 / he -> tridiagonal blocks
        for a, b in zip(chain[:-1], chain[1:]):
            add(a, a, 1.0 / he)
            add(b, b, 1.0 / he)
            add(a, b, -1.0 / he)
            add(b, a, -1.0 / he)
        mass[interior] += he
        mass[lo] += he / 2.0
        mass[hi] += he / 2.0
    A = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    d = 1.0 / np.sqrt(mass)
    B = sp.diags(d) @ A @ sp.diags(d)
    B = (B + B.T) * 0.5
    nev = min(k_max + 1, n - 2)
    if n <= 1200:
        w, v = scipy.linalg.eigh(B.toarray())
        w, v = w[:nev], v[:, :nev]
    else:
        v0 = np.random.default_rng(42).standard_normal(n)
        w, v = spla.eigsh(B, k=nev, sigma=-1.0, which="LM", v0=v0)
        order = np.argsort(w)
        w, v = w[order], v[:, order]
    w = np.maximum(w, 0.0)
    vecs = v * d[:, None]
    part_grids, part_values = {}, {}
    for part in space.parts:
        lo, hi, interior, m = part_layout[part.part_id]
        chain = np.concatenate(([lo], interior, [hi]))
        part_grids[part.part_id] = np.linspace(0.0, part.extent[0], m + 1)
        part_values[part.part_id] = vecs[chain, :]
    return FDSpectrum(w, part_grids, part_values, h)


# ---------------------------------------------------------------------------
# Monte Carlo ball volumes


def mc_ball_volume(space: SpaceModel, p: PointRef, r: float, probes: int = 200_000,
                   seed: int = 0) -> tuple[float, float]:
    """Volume of {y in the part : d(p,y) < r} plus {y : reflected d(p,y) < r}
    (the two components counted separately), estimated by uniform probing of
    the part.  Returns (estimate, standard error)."""
    part = space.part(p.part_id)
    rng = np.random.default_rng(seed)
    if part.dim == 1:
        ys = rng.uniform(0.0, part.extent[0], probes)
    else:
        ys = np.column_stack([
            rng.uniform(0.0, part.extent[0], probes),
            rng.uniform(0.0, part.extent[1], probes),
        ])
    d = geo.dist_in_part(part, p.coords, ys)
    dt = geo.refl_dist_in_part(space, p.part_id, p.coords, ys)
    hits = (d < r).astype(float) + (dt < r).astype(float)
    vol = part.volume
    est = vol * float(np.mean(hits))
    sigma = vol * float(np.std(hits)) / math.sqrt(probes)
    return est, sigma
