"""Convex hulls, half-space intersections and triangulations in R^d (2 <= d <= 6).

Two hull backends produce identical :class:`~geoclt.bodies.Polytope` values:

* ``"beneath_beyond"`` -- incremental beneath-beyond construction written here;
* ``"qhull"`` -- :class:`scipy.spatial.ConvexHull`, used for throughput in the
  replication loops.

Both emit simplicial facets plus facet adjacency; coplanar neighbours are then
merged and points that end up in the relative interior of a merged facet are
dropped, so the returned polytope has only extreme points as vertices.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, QhullError

from . import bodies
from .bodies import Polytope, polar_polytope
from .errors import DomainError, InputError, NumericalError

DEFAULT_BACKEND = "qhull"


def _hyperplane(P):
    """Unit normal and offset of the hyperplane through the rows of ``P``."""
    M = P[1:] - P[0]
    _, s, vt = np.linalg.svd(M)
    a = vt[-1]
    return a, float(a @ P[0]), s


def _initial_simplex(points, tol):
    n, d = points.shape
    chosen = [int(np.argmin(points[:, 0]))]
    for k in range(1, d + 1):
        base = points[chosen[0]]
        D = points - base
        if k > 1:
            Q, _ = np.linalg.qr((points[chosen[1:]] - base).T)
            D = D - (D @ Q) @ Q.T
        dist = np.linalg.norm(D, axis=1)
        j = int(np.argmax(dist))
        if dist[j] <= tol:
            raise DomainError(f"degenerate point set: affine rank {k - 1} < {d}")
        chosen.append(j)
    return chosen


def _beneath_beyond(points, tol):
    """Incremental hull.  Returns (simplices, normals, offsets, neighbors)."""
    n, d = points.shape
    init = _initial_simplex(points, tol)
    interior = points[init].mean(axis=0)

    cap = 64
    normals = np.zeros((cap, d))
    offsets = np.zeros(cap)
    active = np.zeros(cap, dtype=bool)
    verts = []
    ridges = {}

    def add(vs):
        nonlocal cap, normals, offsets, active
        fid = len(verts)
        if fid == cap:
            cap *= 2
            normals = np.vstack([normals, np.zeros((cap - fid, d))])
            offsets = np.concatenate([offsets, np.zeros(cap - fid)])
            active = np.concatenate([active, np.zeros(cap - fid, dtype=bool)])
        a, b, _ = _hyperplane(points[list(vs)])
        if a @ interior > b:
            a, b = -a, -b
        normals[fid], offsets[fid], active[fid] = a, b, True
        verts.append(tuple(sorted(vs)))
        for r in combinations(verts[fid], d - 1):
            ridges.setdefault(r, []).append(fid)
        return fid

    def remove(fid):
        active[fid] = False
        for r in combinations(verts[fid], d - 1):
            lst = ridges[r]
            lst.remove(fid)
            if not lst:
                del ridges[r]

    for skip in range(d + 1):
        add([init[i] for i in range(d + 1) if i != skip])

    in_init = set(init)
    for p in range(n):
        if p in in_init:
            continue
        x = points[p]
        ids = np.flatnonzero(active[: len(verts)])
        dist = normals[ids] @ x - offsets[ids]
        visible = ids[dist > tol]
        if len(visible) == 0:
            continue
        vis = set(visible.tolist())
        horizon = []
        for f in visible:
            for r in combinations(verts[f], d - 1):
                other = [g for g in ridges[r] if g != f]
                if other and other[0] not in vis:
                    horizon.append(r)
        for f in visible:
            remove(f)
        for r in horizon:
            add(r + (p,))

    ids = np.flatnonzero(active[: len(verts)])
    simplices = np.array([verts[i] for i in ids], dtype=np.intp)
    pos = {int(f): k for k, f in enumerate(ids)}
    neighbors = np.full((len(ids), d), -1, dtype=np.intp)
    for k, f in enumerate(ids):
        for j, r in enumerate(combinations(verts[f], d - 1)):
            other = [g for g in ridges[r] if g != f]
            if len(other) != 1:
                raise NumericalError("hull adjacency is inconsistent")
            neighbors[k, j] = pos[other[0]]
    return simplices, normals[ids].copy(), offsets[ids].copy(), neighbors


def _qhull(points):
    try:
        hull = ConvexHull(points)
    except QhullError as exc:
        d = points.shape[1]
        rank = np.linalg.matrix_rank(points[1:] - points[0])
        if rank < d:
            raise DomainError(f"degenerate point set: affine rank {rank} < {d}") from None
        raise NumericalError(f"qhull failed: {exc}") from None
    eq = hull.equations
    scale = np.linalg.norm(eq[:, :-1], axis=1)
    return hull.simplices, eq[:, :-1] / scale[:, None], -eq[:, -1] / scale, hull.neighbors


def _assemble(points, simplices, normals, offsets, neighbors, tol):
    """Merge coplanar adjacent simplicial facets and build the Polytope."""
    F, d = simplices.shape
    i_idx = np.repeat(np.arange(F), d)
    j_idx = neighbors.reshape(-1)
    ok = (j_idx > i_idx)
    i_idx, j_idx = i_idx[ok], j_idx[ok]
    same = (np.linalg.norm(normals[i_idx] - normals[j_idx], axis=1) <= tol) & (
        np.abs(offsets[i_idx] - offsets[j_idx]) <= tol)

    if not np.any(same):
        used = np.unique(simplices)
        remap = np.full(len(points), -1, dtype=np.intp)
        remap[used] = np.arange(len(used))
        return Polytope(points[used], normals, offsets, tuple(remap[simplices]), check=False)

    parent = list(range(F))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a, b in zip(i_idx[same], j_idx[same]):
        ra, rb = find(int(a)), find(int(b))
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    groups = {}
    for f in range(F):
        groups.setdefault(find(f), []).append(f)

    facet_pts, facet_n, facet_b = [], [], []
    for members in groups.values():
        vs = np.unique(simplices[members])
        P = points[vs]
        if len(members) == 1:
            a, b = normals[members[0]], offsets[members[0]]
        else:
            ctr = P.mean(axis=0)
            _, _, vt = np.linalg.svd(P - ctr)
            a = vt[-1]
            if a @ normals[members[0]] < 0:
                a = -a
            b = float(np.mean(P @ a))
        facet_pts.append(vs)
        facet_n.append(a)
        facet_b.append(b)
    facet_n = np.array(facet_n)
    facet_b = np.array(facet_b)

    # a point is a vertex iff the normals of its facets span R^d
    incident = {}
    for k, vs in enumerate(facet_pts):
        for v in vs:
            incident.setdefault(int(v), []).append(k)
    keep = sorted(v for v, fs in incident.items()
                  if np.linalg.matrix_rank(facet_n[fs], tol=1e-8) == d)
    remap = np.full(len(points), -1, dtype=np.intp)
    remap[keep] = np.arange(len(keep))
    fv = tuple(remap[vs][remap[vs] >= 0] for vs in facet_pts)
    return Polytope(points[keep], facet_n, facet_b, fv, check=False)


def convex_hull(points, dim=None, backend=None) -> Polytope:
    """Convex hull of a finite point set as a Polytope.

    Raises DomainError (with the detected affine rank) for lower-dimensional
    input.  ``backend`` is ``"qhull"`` (default) or ``"beneath_beyond"``.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n, d = points.shape
    if dim is not None and dim != d:
        raise InputError(f"points have dimension {d}, expected {dim}")
    if not 2 <= d <= 6:
        raise InputError("hull dimension must be between 2 and 6")
    if n < d + 1:
        raise DomainError(f"need at least {d + 1} points, got {n}")
    scale = max(1.0, float(np.max(np.abs(points))))
    tol = bodies.get_tolerance() * scale
    backend = backend or DEFAULT_BACKEND
    if backend == "qhull":
        _initial_simplex(points, tol)
        parts = _qhull(points)
    elif backend == "beneath_beyond":
        parts = _beneath_beyond(points, tol)
    else:
        raise InputError(f"unknown hull backend {backend!r}")
    return _assemble(points, *parts, tol=max(tol, 1e-10))


def hull_with_body(points, T: Polytope, backend=None) -> Polytope:
    """Convex hull of ``points`` together with the polytope ``T``."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    return convex_hull(np.vstack([points, T.vertices]), backend=backend)


def chebyshev_center(A, b):
    """Centre and radius of the largest ball inside {A x <= b}."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    nrm = np.linalg.norm(A, axis=1)
    d = A.shape[1]
    c = np.zeros(d + 1)
    c[-1] = -1.0
    res = linprog(c, A_ub=np.hstack([A, nrm[:, None]]), b_ub=b,
                  bounds=[(None, None)] * d + [(0, None)], method="highs")
    if res.status != 0:
        raise DomainError("half-space system is infeasible or unbounded")
    return res.x[:d], float(res.x[-1])


def halfspace_intersection(A, b, window: Polytope, interior_point=None, backend=None) -> Polytope:
    """Bounded polytope {x : A x <= b} intersected with ``window``.

    Vertex enumeration by polarity: around an interior point ``c`` every
    half-space becomes a dual point ``a / (b - <a, c>)``; facets of the dual
    hull are the vertices of the intersection.  When ``interior_point`` is
    omitted the Chebyshev centre is used.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).reshape(-1)
    if A.size == 0:
        A = np.zeros((0, window.dim))
        b = np.zeros(0)
    nrm = np.linalg.norm(A, axis=1)
    if np.any(nrm == 0):
        raise InputError("zero normal in half-space list")
    A_all = np.vstack([A / nrm[:, None], window.normals])
    b_all = np.concatenate([b / nrm, window.offsets])
    if interior_point is None:
        c, r = chebyshev_center(A_all, b_all)
        if r <= bodies.get_tolerance():
            raise DomainError("intersection is empty or not full-dimensional")
    else:
        c = np.asarray(interior_point, dtype=float)
    slack = b_all - A_all @ c
    if np.any(slack <= 0):
        raise DomainError("interior point is not strictly inside every half-space")
    dual = convex_hull(A_all / slack[:, None], backend=backend)
    P = polar_polytope(dual)
    return Polytope(P.vertices + c, P.normals, P.offsets + P.normals @ c, P.facet_vertices, check=False)


# ----------------------------------------------------------------------------
# triangulation
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class Triangulation:
    """Simplicial decomposition of a polytope.

    ``simplices`` index rows of ``points``; every simplex is positively
    oriented (``orientation == +1``).
    """

    points: np.ndarray
    simplices: np.ndarray
    orientation: int = 1

    def volumes(self):
        S = self.points[self.simplices]
        M = S[:, 1:] - S[:, :1]
        d = M.shape[-1]
        return np.linalg.det(M) / _factorial(d)

    def volume(self):
        return float(np.sum(self.volumes()))


def _factorial(k):
    out = 1
    for i in range(2, k + 1):
        out *= i
    return out


def _facet_simplices(P, i, points_list):
    """Triangulate facet ``i`` of ``P`` into (d-1)-simplices (index tuples)."""
    f = P.facet_vertices[i]
    d = P.dim
    if len(f) == d:
        return [tuple(f)]
    V = P.vertices[f]
    if d == 2:
        t = np.array([-P.normals[i][1], P.normals[i][0]])
        order = f[np.argsort(V @ t)]
        return [(order[0], order[-1])]
    # coordinates in the facet hyperplane, then recurse one dimension down
    ctr = V.mean(axis=0)
    E = np.linalg.svd(V - ctr)[2][: d - 1]
    local = (V - ctr) @ E.T
    if d == 3:
        ang = np.arctan2(local[:, 1], local[:, 0])
        ring = f[np.argsort(ang)]
        return [(ring[0], ring[k], ring[k + 1]) for k in range(1, len(ring) - 1)]
    sub = convex_hull(local)
    subtri = triangulate(sub)
    # map sub-polytope points back: original vertices by position, new ones appended
    index = {}
    for k, row in enumerate(subtri.points):
        dists = np.linalg.norm(local - row, axis=1)
        j = int(np.argmin(dists))
        if dists[j] < 1e-12 * max(1.0, np.abs(local).max()):
            index[k] = int(f[j])
        else:
            points_list.append(ctr + row @ E)
            index[k] = P.n_vertices + len(points_list) - 1
    return [tuple(index[int(k)] for k in s) for s in subtri.simplices]


def triangulate(P: Polytope) -> Triangulation:
    """Cone the facet triangulations of ``P`` to its vertex centroid.

    A simplex is returned as itself.  Degenerate cones are pruned and all
    simplices are reoriented to positive determinant.
    """
    d = P.dim
    if np.linalg.matrix_rank(P.vertices[1:] - P.vertices[0]) < d:
        raise DomainError("polytope is not full-dimensional")
    if P.n_vertices == d + 1:
        pts = P.vertices.copy()
        simp = np.arange(d + 1)[None, :]
    else:
        extra = []
        if all(len(f) == d for f in P.facet_vertices):
            facets = np.array(P.facet_vertices, dtype=np.intp)
        else:
            facets = []
            for i in range(P.n_facets):
                facets.extend(_facet_simplices(P, i, extra))
            facets = np.array(facets, dtype=np.intp)
        apex = P.vertices.mean(axis=0)
        pts = np.vstack([P.vertices] + ([np.array(extra)] if extra else []) + [apex[None]])
        simp = np.hstack([facets, np.full((len(facets), 1), len(pts) - 1, dtype=np.intp)])
    S = pts[simp]
    det = np.linalg.det(S[:, 1:] - S[:, :1])
    tol = bodies.get_tolerance() * max(1.0, float(np.abs(pts).max())) ** d
    simp = simp[np.abs(det) > tol]
    det = det[np.abs(det) > tol]
    neg = det < 0
    if np.any(neg):
        simp = simp.copy()
        simp[neg, 0], simp[neg, 1] = simp[neg, 1], simp[neg, 0].copy()
    return Triangulation(pts, simp, 1)


def facet_areas(P: Polytope):
    """(d-1)-dimensional areas of the facets of ``P``."""
    d = P.dim
    areas = np.zeros(P.n_facets)
    extra = []
    for i in range(P.n_facets):
        simp = _facet_simplices(P, i, extra)
        allpts = np.vstack([P.vertices] + ([np.array(extra)] if extra else []))
        for s in simp:
            M = allpts[list(s[1:])] - allpts[s[0]]
            areas[i] += np.sqrt(max(np.linalg.det(M @ M.T), 0.0)) / _factorial(d - 1)
    return areas


def divergence_volume(P: Polytope) -> float:
    """Volume from the facet formula (1/d) * sum_i b_i * area_i."""
    return float(np.sum(P.offsets * facet_areas(P)) / P.dim)
