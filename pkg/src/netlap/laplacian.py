"""Weighted graph Laplacians on nets: closed, boundary corrected and gluing
corrected variants.

The operator acts as

    (L u)_i = scale * sum_j m_ij * mu_j * (u_j - u_i),
    scale   = 2(n+2) / (nu_n rho^(n+2)),

with nu_n the n-ball volume.  The symmetric multiplicity m_ij averages the
directed neighbor counts of the two endpoints; a directed count accumulates
one unit per mirror image c of x_i and per metric (plain or reflected) that
places x_j within rho of c.  The closed variant counts plain within-part
distances only; the boundary variant adds reflected distances; the glued
variant additionally sums over mirror images in neighboring parts.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import geometry as geo
from .geometry import GeometryError, PointRef, SpaceModel
from .sampling import Net

VARIANTS = ("closed", "boundary", "glued")

UNIT_BALL_VOLUME = {1: 2.0, 2: math.pi}

# d < rho decided with a relative guard band: exact ties (grid nets with rho
# an integer multiple of the spacing) would otherwise flip per-row on float
# rounding and break the translation symmetry of the operator.  Ties are
# measure zero for the continuum statement; giving them half weight is the
# unbiased quadrature of the ball indicator and is why multiplicities are
# half-integers.
TIE_MARGIN = 1e-12


def ball_indicator(d, rho: float):
    """1 inside, 0 outside, 1/2 on the tie band around d = rho."""
    d = np.asarray(d, dtype=float)
    return np.where(d < rho * (1.0 - TIE_MARGIN), 1.0,
                    np.where(d <= rho * (1.0 + TIE_MARGIN), 0.5, 0.0))


def laplacian_scale(n_dim: int, rho: float) -> float:
    return 2.0 * (n_dim + 2) / (UNIT_BALL_VOLUME[n_dim] * rho ** (n_dim + 2))


@dataclass
class GraphLaplacian:
    space: SpaceModel
    net: Net
    rho: float
    variant: str
    n_dim: int
    scale: float
    mu: np.ndarray
    weights: sp.csr_matrix          # symmetric multiplicities m_ij, no diagonal

    @property
    def n_points(self) -> int:
        return self.mu.shape[0]

    def apply(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape[0] != self.n_points:
            raise ValueError(f"vector length {u.shape[0]} != {self.n_points}")
        wmu_u = self.weights @ (self.mu * u)
        deg = self.weights @ self.mu
        return self.scale * (wmu_u - deg * u)

    def dirichlet_energy(self, u: np.ndarray) -> float:
        u = np.asarray(u, dtype=float)
        r, c = self.weights.nonzero()
        m = np.asarray(self.weights[r, c]).ravel()
        diff = u[r] - u[c]
        return 0.5 * self.scale * float(np.sum(m * self.mu[r] * self.mu[c] * diff**2))

    def to_weighted_symmetric(self) -> tuple[sp.csr_matrix, np.ndarray]:
        """Similarity transform A = D^(1/2) (-L) D^(-1/2), D = diag(mu).

        A is symmetric positive semi-definite with the same eigenvalues as
        -L; eigenvectors map back through v = w / sqrt(mu).
        """
        if np.any(self.mu <= 0.0):
            raise ValueError("weights must be strictly positive")
        s = np.sqrt(self.mu)
        deg = self.weights @ self.mu
        A = self.scale * (sp.diags(deg) - sp.diags(s) @ self.weights @ sp.diags(s))
        A = A.tocsr()
        return A, s

    def export_matrix(self, path):
        """Coordinate-triplet text dump (i, j, multiplicity) for cross-checks."""
        r, c = self.weights.nonzero()
        m = np.asarray(self.weights[r, c]).ravel()
        with open(path, "w") as fh:
            fh.write(f"# N={self.n_points} scale={self.scale:.17g} variant={self.variant}\n")
            for i, j, v in zip(r, c, m):
                fh.write(f"{i} {j} {v:.17g}\n")


# ---------------------------------------------------------------------------
# assembly


def _images_for(space: SpaceModel, variant: str, part_id: int, coords, rho: float):
    p = PointRef(part_id, tuple(np.ravel(coords)))
    if variant == "glued":
        return geo.mirror_images(space, p, rho)
    return [(part_id, p)]


def _collar_indices(space: SpaceModel, net: Net, rho: float) -> dict:
    """Per part: global indices of net points within rho of the reflecting
    boundary (the only possible reflected-distance neighbors)."""
    out = {}
    for part in space.parts:
        idx = net.part_index(part.part_id)
        if idx.size == 0:
            out[part.part_id] = idx
            continue
        d = geo.refl_boundary_distance(space, part.part_id, net.coords[idx])
        out[part.part_id] = idx[d < rho * (1.0 + 1e-9)]
    return out


def _plain_neighbor_pairs(space: SpaceModel, net: Net, rho: float):
    """Ordered within-part pairs (i, j, weight), i != j, with plain distance
    below rho (weight 1/2 on the tie band)."""
    rows, cols, vals = [], [], []
    for part in space.parts:
        idx = net.part_index(part.part_id)
        if idx.size <= 1:
            continue
        if part.dim == 1:
            x, gidx = net.sorted_1d(part.part_id)
            L = part.extent[0]
            pad = rho * (1.0 + 1e-9)
            if part.shape == geo.SEGMENT:
                lo = np.searchsorted(x, x - pad, side="left")
                hi = np.searchsorted(x, x + pad, side="right")
                counts = hi - lo
                starts = np.repeat(lo, counts)
                flat = _ragged_arange(counts) + starts
                src = np.repeat(np.arange(x.size), counts)
                w = ball_indicator(np.abs(x[flat] - x[src]), rho)
            else:
                # wrap: window in the tripled coordinate array, then weight
                # with the symmetric circular distance on base coordinates
                x3 = np.concatenate([x - L, x, x + L])
                lo = np.searchsorted(x3, x - pad, side="left")
                hi = np.searchsorted(x3, x + pad, side="right")
                counts = hi - lo
                starts = np.repeat(lo, counts)
                flat3 = _ragged_arange(counts) + starts
                src = np.repeat(np.arange(x.size), counts)
                flat = flat3 % x.size
                gap = np.abs(x[flat] - x[src])
                w = ball_indicator(np.minimum(gap, L - gap), rho)
            keep = (w > 0) & (src != flat)
            rows.append(gidx[src[keep]])
            cols.append(gidx[flat[keep]])
            vals.append(w[keep])
        else:
            tree, n_pts = net._tree(part.part_id)
            pts = net.part_coords(part.part_id)
            hits = tree.query_ball_point(pts, rho * (1 + 1e-9))
            src = np.repeat(np.arange(n_pts), [len(h) for h in hits])
            dst = np.fromiter((v for h in hits for v in h), dtype=np.int64,
                              count=sum(len(h) for h in hits)) % n_pts
            w = ball_indicator(_part_dist_rows(part, pts, src, dst), rho)
            keep = (w > 0) & (src != dst)
            rows.append(idx[src[keep]])
            cols.append(idx[dst[keep]])
            vals.append(w[keep])
    if not rows:
        return np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0)
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)


def _part_dist_rows(part, pts, src, dst):
    if part.shape == geo.TORUS:
        d = np.abs(pts[src] - pts[dst])
        d = np.minimum(d, np.asarray(part.extent) - d)
        return np.sqrt(np.sum(d**2, axis=1))
    return np.sqrt(np.sum((pts[src] - pts[dst]) ** 2, axis=1))


def _ragged_arange(counts: np.ndarray) -> np.ndarray:
    total = int(counts.sum())
    out = np.arange(total)
    offs = np.repeat(np.cumsum(counts) - counts, counts)
    return out - offs


def directed_multiplicity(space: SpaceModel, net: Net, i: int, j: int, rho: float,
                          variant: str) -> float:
    """Neighbor count w_{i->j}: one unit per mirror image of x_i and per
    metric (plain / reflected) placing x_j within rho, half on ties."""
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    if i == j:
        return 0
    images = _images_for(space, variant, int(net.part_ids[i]), net.coords[i], rho)
    pj = int(net.part_ids[j])
    qc = net.coords[j]
    count = 0.0
    for part_id, ptref in images:
        if part_id != pj:
            continue
        part = space.part(part_id)
        d = geo.dist_in_part(part, ptref.coords, qc)[0]
        count += float(ball_indicator(d, rho))
        if variant != "closed":
            dt = geo.refl_dist_in_part(space, part_id, ptref.coords, qc)[0]
            count += float(ball_indicator(dt, rho))
    return count


def build(space: SpaceModel, net: Net, rho: float, variant: str = "boundary") -> GraphLaplacian:
    """Assemble the sparse symmetric graph Laplacian.

    Candidate pairs come from per-part sorted windows (1-d) or kd-trees (2-d)
    plus boundary collar lists for reflected distances; mirror image centers
    query the target part's index.  Iteration order is deterministic.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    if rho >= space.scale_guard():
        raise GeometryError(f"rho={rho} exceeds the space scale guard")
    if space.gluings and variant == "glued":
        geo.check_rho(space, rho)
    if rho <= 4.0 * net.epsilon:
        warnings.warn(f"rho={rho} <= 4*epsilon={4 * net.epsilon}: outside the "
                      "margin the covering argument needs", stacklevel=2)
    N = net.n_points
    rows_d, cols_d, vals_d = _plain_neighbor_pairs(space, net, rho)
    rows = [rows_d]
    cols = [cols_d]
    vals = [vals_d]

    if variant != "closed":
        collar = _collar_indices(space, net, rho)
        for part in space.parts:
            src_idx = collar[part.part_id]
            cand = collar[part.part_id]
            if src_idx.size == 0 or cand.size == 0:
                continue
            cand_pts = net.coords[cand]
            for i in src_idx:
                dt = geo.refl_dist_in_part(space, part.part_id, net.coords[i], cand_pts)
                w = ball_indicator(dt, rho)
                keep = (w > 0) & (cand != i)
                if np.any(keep):
                    rows.append(np.full(int(keep.sum()), i))
                    cols.append(cand[keep])
                    vals.append(w[keep])

    if variant == "glued" and space.gluings:
        thr = rho**0.75
        collar = _collar_indices(space, net, rho)
        for part in space.parts:
            idx = net.part_index(part.part_id)
            if idx.size == 0:
                continue
            near = idx[geo.locus_distance(space, part.part_id, net.coords[idx]) < thr]
            for i in near:
                images = geo.mirror_images(
                    space, PointRef(int(net.part_ids[i]), tuple(net.coords[i])), rho)
                for l_part, img in images[1:]:
                    tpart = space.part(l_part)
                    tidx = net.part_index(l_part)
                    if tidx.size == 0:
                        continue
                    w = ball_indicator(geo.dist_in_part(tpart, img.coords,
                                                        net.coords[tidx]), rho)
                    keep = (w > 0) & (tidx != i)
                    if np.any(keep):
                        rows.append(np.full(int(keep.sum()), i))
                        cols.append(tidx[keep])
                        vals.append(w[keep])
                    ccand = collar[l_part]
                    if ccand.size:
                        dt = geo.refl_dist_in_part(space, l_part, img.coords,
                                                   net.coords[ccand])
                        w = ball_indicator(dt, rho)
                        keep = (w > 0) & (ccand != i)
                        if np.any(keep):
                            rows.append(np.full(int(keep.sum()), i))
                            cols.append(ccand[keep])
                            vals.append(w[keep])

    r = np.concatenate(rows)
    c = np.concatenate(cols)
    v = np.concatenate(vals)
    w_dir = sp.coo_matrix((v, (r, c)), shape=(N, N)).tocsr()
    if variant in ("closed", "boundary"):
        asym = (w_dir - w_dir.T)
        if asym.nnz and np.max(np.abs(asym.data)) > 0:
            raise AssertionError("directed counts must be symmetric for this variant")
    W = (w_dir + w_dir.T) * 0.5
    W.setdiag(0.0)
    W.eliminate_zeros()
    scale = laplacian_scale(space.dim, rho)
    return GraphLaplacian(space, net, rho, variant, space.dim, scale, net.mu.copy(), W)
