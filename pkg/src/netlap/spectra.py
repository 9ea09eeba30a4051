"""Symmetric eigensolvers and analytic reference spectra for the catalog.

Graph spectra are computed on the similarity-transformed operator
A = D^(1/2) (-L) D^(-1/2) with D = diag(mu): dense LAPACK for small
problems, Lanczos with full reorthogonalization for large ones.

Reference spectra are closed forms for intervals, circles, rectangles,
tori and book pages.  Metric graphs solve the vertex-condition secular
system: on each edge u(t) = a cos(kt) + b sin(kt); value continuity plus
a vanishing sum of inward derivatives at every vertex gives a square
matrix H(k) whose rank drops exactly at eigenfrequencies.  Roots are
bracketed by the finite-difference oracle and polished by minimizing the
smallest singular value; multiplicity is the nullity of H at the root.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg
import scipy.optimize
import scipy.sparse as sp

from . import geometry as geo
from . import oracle
from .geometry import GeometryError, SpaceModel
from .laplacian import GraphLaplacian


class SolverError(RuntimeError):
    def __init__(self, msg, partial=None):
        super().__init__(msg)
        self.partial = partial


@dataclass
class Spectrum:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray | None
    residual_bound: float


@dataclass
class ReferenceSpectrum:
    eigenvalues: np.ndarray          # ascending, repeated per multiplicity
    provenance: tuple[str, ...]      # closed-form | secular-root | fd-oracle

    def clusters(self, tol: float = 1e-6):
        """(value, multiplicity) pairs grouping nearly equal entries."""
        vals = self.eigenvalues
        out = []
        i = 0
        while i < len(vals):
            j = i
            while j + 1 < len(vals) and vals[j + 1] - vals[i] <= tol * (1.0 + abs(vals[i])):
                j += 1
            out.append((float(np.mean(vals[i:j + 1])), j - i + 1))
            i = j + 1
        return out


# ---------------------------------------------------------------------------
# dense and Lanczos solvers


def _as_dense(A):
    if sp.issparse(A):
        return A.toarray()
    return np.asarray(A, dtype=float)


def eigen_dense_symmetric(A) -> Spectrum:
    """Full spectrum via Householder tridiagonalization + implicitly shifted
    QL/QR (LAPACK).  Input must be symmetric to 1e-10 relative."""
    M = _as_dense(A)
    scale = max(float(np.max(np.abs(M))), 1e-300)
    if float(np.max(np.abs(M - M.T))) > 1e-10 * scale:
        raise ValueError("matrix is not symmetric")
    M = 0.5 * (M + M.T)
    w, v = scipy.linalg.eigh(M)
    nrm = max(float(np.max(np.abs(w))), 1e-300)
    sample = np.unique(np.linspace(0, len(w) - 1, min(len(w), 24)).astype(int))
    res = np.linalg.norm(M @ v[:, sample] - v[:, sample] * w[sample], axis=0)
    return Spectrum(w, v, float(np.max(res)) / nrm if len(res) else 0.0)


def eigen_lanczos(A, k: int, tol: float = 1e-10, seed: int = 0,
                  max_iter: int | None = None) -> Spectrum:
    """Lowest-k eigenpairs by Lanczos with full reorthogonalization and a
    seeded deterministic start vector."""
    n = A.shape[0]
    if k >= n:
        raise ValueError(f"need k < N, got k={k}, N={n}")
    matvec = (lambda x: A @ x)
    m_max = max_iter if max_iter is not None else min(n, max(10 * k, 600))
    m_max = min(m_max, n)
    rng = np.random.default_rng(seed)
    V = np.zeros((n, m_max))
    alphas = np.zeros(m_max)
    betas = np.zeros(m_max)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    V[:, 0] = v
    beta_prev = 0.0
    norm_est = 1e-300
    result = None
    for m in range(m_max):
        w = matvec(V[:, m])
        if m > 0:
            w -= beta_prev * V[:, m - 1]
        alphas[m] = V[:, m] @ w
        w -= alphas[m] * V[:, m]
        # full reorthogonalization, twice for safety
        for _ in range(2):
            w -= V[:, :m + 1] @ (V[:, :m + 1].T @ w)
        beta = np.linalg.norm(w)
        check_now = (m + 1 >= max(k + 2, 10) and (m + 1) % 10 == 0) or m == m_max - 1
        if beta <= 1e-13 * max(norm_est, 1.0):
            # invariant subspace: restart direction orthogonal to the basis
            w = rng.standard_normal(n)
            w -= V[:, :m + 1] @ (V[:, :m + 1].T @ w)
            nw = np.linalg.norm(w)
            if nw <= 1e-13 or m + 1 >= n:
                check_now, beta = True, 0.0
            else:
                w /= nw
                beta = 0.0
        if check_now:
            T_w, T_s = scipy.linalg.eigh_tridiagonal(alphas[:m + 1], betas[:m])
            norm_est = max(norm_est, float(np.max(np.abs(T_w))))
            resid = np.abs(beta * T_s[m, :k]) if m + 1 >= k else np.full(k, np.inf)
            if m + 1 >= k and np.all(resid <= tol * norm_est):
                vecs = V[:, :m + 1] @ T_s[:, :k]
                result = Spectrum(T_w[:k], vecs, float(np.max(resid)) / norm_est)
                break
        if m + 1 < m_max:
            betas[m] = beta
            if beta > 0.0:
                V[:, m + 1] = w / beta
            else:
                V[:, m + 1] = w
            beta_prev = beta
    if result is None:
        T_w, T_s = scipy.linalg.eigh_tridiagonal(alphas[:m_max], betas[:m_max - 1])
        vecs = V @ T_s[:, :k]
        partial = Spectrum(T_w[:k], vecs, float("nan"))
        if m_max == n:
            # the Krylov space is the whole space: the factorization is exact
            res = np.linalg.norm(_matmat(matvec, vecs) - vecs * T_w[:k], axis=0)
            return Spectrum(T_w[:k], vecs, float(np.max(res)) / max(norm_est, 1.0))
        raise SolverError(f"Lanczos did not converge within {m_max} iterations",
                          partial=partial)
    return result


def _matmat(matvec, V):
    return np.column_stack([matvec(V[:, j]) for j in range(V.shape[1])])


def solve_graph_spectrum(L: GraphLaplacian, k: int, dense_cutoff: int = 512,
                         tol: float = 1e-10, seed: int = 0) -> Spectrum:
    """Lowest k+1 eigenpairs of -L, eigenvectors orthonormal in the
    mu-weighted inner product, lambda_0 snapped to an exact zero."""
    n = L.n_points
    if k > n - 1:
        raise ValueError(f"k={k} exceeds N-1={n - 1}")
    A, sqrt_mu = L.to_weighted_symmetric()
    if n <= dense_cutoff:
        full = eigen_dense_symmetric(A)
        w = full.eigenvalues[:k + 1]
        W = full.eigenvectors[:, :k + 1]
    else:
        low = eigen_lanczos(A, k + 1, tol=tol, seed=seed)
        w, W = low.eigenvalues, low.eigenvectors
    # orthonormalize in w-space (columns may have drifted inside clusters)
    W, _ = np.linalg.qr(W)
    sign = np.sign(W[np.argmax(np.abs(W), axis=0), np.arange(W.shape[1])])
    sign[sign == 0] = 1.0
    W = W * sign
    V = W / sqrt_mu[:, None]
    lam = np.array(w, dtype=float)
    if abs(lam[0]) <= 1e-9 * L.scale:
        lam[0] = 0.0
    lam = np.maximum(lam, 0.0)
    res = 0.0
    for j in range(V.shape[1]):
        r = -L.apply(V[:, j]) - lam[j] * V[:, j]
        res = max(res, float(np.linalg.norm(r)))
    return Spectrum(lam, V, res / L.scale)


def rayleigh_quotient(L: GraphLaplacian, u: np.ndarray) -> float:
    u = np.asarray(u, dtype=float)
    den = float(np.sum(L.mu * u * u))
    if den == 0.0:
        raise ValueError("zero vector")
    return L.dirichlet_energy(u) / den


def save_spectrum_csv(spec: Spectrum, path):
    with open(path, "w") as fh:
        fh.write("k,lambda,residual\n")
        for i, lam in enumerate(spec.eigenvalues):
            fh.write(f"{i},{lam:.17g},{spec.residual_bound:.17g}\n")


# ---------------------------------------------------------------------------
# reference spectra


def _closed_1d(space: SpaceModel, k_max: int):
    part = space.parts[0]
    L = part.extent[0]
    if part.shape == geo.SEGMENT:
        return [(k * math.pi / L) ** 2 for k in range(k_max + 1)]
    vals = [0.0]
    m = 1
    while len(vals) <= k_max:
        lam = (2.0 * math.pi * m / L) ** 2
        vals.extend([lam, lam])
        m += 1
    return vals[:k_max + 1]


def _closed_rect(a: float, b: float, k_max: int, torus: bool):
    vals = []
    P = int(math.ceil(math.sqrt(k_max + 2))) + 3
    while True:
        vals.clear()
        rng_p = range(-P, P + 1) if torus else range(0, P + 1)
        for p in rng_p:
            for q in rng_p:
                if torus:
                    vals.append(4.0 * math.pi**2 * ((p / a) ** 2 + (q / b) ** 2))
                else:
                    vals.append(math.pi**2 * ((p / a) ** 2 + (q / b) ** 2))
        vals.sort()
        # the enumeration box must cover everything below the cut
        wall = (math.pi * P / max(a, b)) ** 2 * (4.0 if torus else 1.0)
        if len(vals) > k_max and vals[k_max] < wall:
            return vals[:k_max + 1]
        P += 2


def _closed_book(m: int, a: float, b: float, k_max: int):
    xmodes = []
    j = 0
    while len(xmodes) < 4 * (k_max + 2):
        xmodes.append(((j * math.pi / a) ** 2, 1))
        xmodes.append((((j + 0.5) * math.pi / a) ** 2, m - 1))
        j += 1
    vals = []
    for q in range(0, k_max + 2):
        lam_y = (q * math.pi / b) ** 2
        for lam_x, mult in xmodes:
            vals.extend([lam_x + lam_y] * mult)
    vals.sort()
    return vals[:k_max + 1]


def _graph_topology(space: SpaceModel):
    """Edges (length, v0, v1) and vertex count; circles glued at one point
    become loops, free segment ends become degree-1 Neumann vertices."""
    vid = {}
    n_v = 0
    for g in space.gluings:
        vid[("glue", g.vertex_id)] = n_v
        n_v += 1
    edges = []
    for part in space.parts:
        L = part.extent[0]
        if part.shape == geo.CIRCLE:
            gs = [g for g in space.gluings if g.branches_of(part.part_id)]
            if len(gs) != 1:
                raise GeometryError("secular solver needs circles glued at one point")
            v = vid[("glue", gs[0].vertex_id)]
            edges.append((L, v, v))
        else:
            ends = []
            glued_locs = {be.location: g for g in space.gluings
                          for be in g.branches_of(part.part_id)}
            for z in (0.0, L):
                if z in glued_locs:
                    ends.append(vid[("glue", glued_locs[z].vertex_id)])
                else:
                    vid[("free", part.part_id, z)] = n_v
                    ends.append(n_v)
                    n_v += 1
            edges.append((L, ends[0], ends[1]))
    return edges, n_v


def _secular_matrix(edges, n_v: int, k: float) -> np.ndarray:
    E = len(edges)
    incid = [[] for _ in range(n_v)]
    for e, (L, v0, v1) in enumerate(edges):
        incid[v0].append((e, 0))
        incid[v1].append((e, 1))
    H = np.zeros((2 * E, 2 * E))
    row = 0

    def val_coeff(e, end):
        L = edges[e][0]
        if end == 0:
            return (1.0, 0.0)
        return (math.cos(k * L), math.sin(k * L))

    def dval_coeff(e, end):
        L = edges[e][0]
        if end == 0:
            return (0.0, 1.0)
        return (math.sin(k * L), -math.cos(k * L))

    for v in range(n_v):
        ends = incid[v]
        e0 = ends[0]
        for e1 in ends[1:]:
            ca, cb = val_coeff(*e1)
            H[row, 2 * e1[0]] += ca
            H[row, 2 * e1[0] + 1] += cb
            ca, cb = val_coeff(*e0)
            H[row, 2 * e0[0]] -= ca
            H[row, 2 * e0[0] + 1] -= cb
            row += 1
        for e1 in ends:
            ca, cb = dval_coeff(*e1)
            H[row, 2 * e1[0]] += ca
            H[row, 2 * e1[0] + 1] += cb
        row += 1
    return H


def _sigma_min(edges, n_v, k):
    return float(scipy.linalg.svdvals(_secular_matrix(edges, n_v, k))[-1])


def _nullity(edges, n_v, k, rel_tol=1e-6):
    s = scipy.linalg.svdvals(_secular_matrix(edges, n_v, k))
    return int(np.sum(s <= rel_tol * max(s[0], 1.0)))


@lru_cache(maxsize=32)
def _fd_reference(space: SpaceModel, k_max: int):
    h = min(p.extent[0] for p in space.parts) / 1500.0
    return oracle.fd_metric_graph_spectrum(space, h, k_max, strict=False)


def _secular_spectrum(space: SpaceModel, k_max: int):
    edges, n_v = _graph_topology(space)
    fd = _fd_reference(space, k_max + 4)
    fd_vals = fd.eigenvalues
    # cluster the FD values, then polish one root per cluster
    vals = [0.0]
    seen_k = []
    i = 1
    while i < len(fd_vals) and len(vals) <= k_max + 2:
        lam_hat = fd_vals[i]
        j = i
        while j + 1 < len(fd_vals) and fd_vals[j + 1] - lam_hat <= 2e-3 * (1.0 + lam_hat):
            j += 1
        k_hat = math.sqrt(max(lam_hat, 0.0))
        lo, hi = k_hat * 0.985 - 1e-4, k_hat * 1.015 + 1e-4
        opt = scipy.optimize.minimize_scalar(
            lambda kk: _sigma_min(edges, n_v, kk), bounds=(lo, hi), method="bounded",
            options={"xatol": 1e-13})
        k_star = float(opt.x)
        if any(abs(k_star - ks) < 1e-8 for ks in seen_k):
            i = j + 1
            continue
        mult = _nullity(edges, n_v, k_star)
        if mult == 0:
            raise SolverError(f"secular root polish failed near lambda={lam_hat}")
        seen_k.append(k_star)
        vals.extend([k_star**2] * mult)
        i = j + 1
    return sorted(vals)[:k_max + 1]


def reference_spectrum(space: SpaceModel, k_max: int) -> ReferenceSpectrum:
    """Exact Neumann/vertex-condition eigenvalues of the space, ascending
    with multiplicity."""
    if space.kind == "interval":
        vals, prov = _closed_1d(space, k_max), "closed-form"
    elif space.kind == "circle":
        vals, prov = _closed_1d(space, k_max), "closed-form"
    elif space.kind == "rectangle":
        a, b = space.parts[0].extent
        vals, prov = _closed_rect(a, b, k_max, torus=False), "closed-form"
    elif space.kind == "flat_torus":
        a, b = space.parts[0].extent
        vals, prov = _closed_rect(a, b, k_max, torus=True), "closed-form"
    elif space.kind == "book_pages":
        a, b = space.parts[0].extent
        vals, prov = _closed_book(len(space.parts), a, b, k_max), "closed-form"
    elif space.kind == "metric_graph":
        vals, prov = _secular_spectrum(space, k_max), "secular-root"
    else:
        raise GeometryError(f"no reference spectrum for kind {space.kind!r}")
    vals = np.asarray(vals, dtype=float)
    return ReferenceSpectrum(vals, tuple([prov] * len(vals)))


# ---------------------------------------------------------------------------
# reference eigenfunctions (L2-orthogonal bases per eigenvalue)


def reference_eigenfunctions(space: SpaceModel, lam: float, tol: float = 1e-6):
    """Basis of the eigenspace at the reference eigenvalue lam, as callables
    (part_id, coords) -> values.  Closed forms where available; metric graphs
    fall back to interpolated finite-difference eigenvectors."""
    if space.kind == "interval":
        L = space.parts[0].extent[0]
        k = int(round(math.sqrt(max(lam, 0.0)) * L / math.pi))
        return [lambda pid, x, k=k, L=L: np.cos(k * math.pi * np.ravel(x) / L)]
    if space.kind == "circle":
        L = space.parts[0].extent[0]
        m = int(round(math.sqrt(max(lam, 0.0)) * L / (2 * math.pi)))
        if m == 0:
            return [lambda pid, x: np.ones_like(np.ravel(x))]
        return [
            lambda pid, x, m=m, L=L: np.cos(2 * math.pi * m * np.ravel(x) / L),
            lambda pid, x, m=m, L=L: np.sin(2 * math.pi * m * np.ravel(x) / L),
        ]
    if space.kind == "rectangle":
        a, b = space.parts[0].extent
        out = []
        P = int(math.ceil(math.sqrt(lam) * max(a, b) / math.pi)) + 2
        for p in range(P + 1):
            for q in range(P + 1):
                cand = math.pi**2 * ((p / a) ** 2 + (q / b) ** 2)
                if abs(cand - lam) <= tol * (1.0 + lam):
                    out.append(lambda pid, xy, p=p, q=q, a=a, b=b:
                               np.cos(p * math.pi * np.asarray(xy).reshape(-1, 2)[:, 0] / a)
                               * np.cos(q * math.pi * np.asarray(xy).reshape(-1, 2)[:, 1] / b))
        return out
    if space.kind == "flat_torus":
        a, b = space.parts[0].extent
        out = []
        P = int(math.ceil(math.sqrt(lam) * max(a, b) / (2 * math.pi))) + 2
        for p in range(-P, P + 1):
            for q in range(-P, P + 1):
                if (p, q) < (0, 0) or (p == 0 and q < 0):
                    continue
                cand = 4 * math.pi**2 * ((p / a) ** 2 + (q / b) ** 2)
                if abs(cand - lam) <= tol * (1.0 + lam):
                    def fc(pid, xy, p=p, q=q, a=a, b=b):
                        xy = np.asarray(xy).reshape(-1, 2)
                        return np.cos(2 * math.pi * (p * xy[:, 0] / a + q * xy[:, 1] / b))
                    out.append(fc)
                    if (p, q) != (0, 0):
                        def fs(pid, xy, p=p, q=q, a=a, b=b):
                            xy = np.asarray(xy).reshape(-1, 2)
                            return np.sin(2 * math.pi * (p * xy[:, 0] / a + q * xy[:, 1] / b))
                        out.append(fs)
        return out
    if space.kind == "metric_graph":
        fd = _fd_reference(space, max(12, 2))
        out = []
        for k, w in enumerate(fd.eigenvalues):
            if abs(w - lam) <= max(tol * (1.0 + lam), 5e-3 * (1.0 + lam)):
                out.append(fd.eigenfunction(k))
        return out
    raise GeometryError(f"no reference eigenfunctions for kind {space.kind!r}")
