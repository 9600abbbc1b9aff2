"""Numerical functionals of polytopes: weighted volume, dual volumes, mean width.

All spherical averages use the *normalized* surface measure on S^{d-1}.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import permutations, product

import numpy as np
from scipy.fft import dct
from scipy.integrate import quad_vec
from scipy.special import roots_jacobi
from scipy.spatial.transform import Rotation

from .bodies import Polytope, kappa, polar_polytope, radial_function, support_function
from .errors import DomainError, InputError, NumericalError

GOLDEN = (1.0 + 5.0 ** 0.5) / 2.0


@dataclass(frozen=True)
class QuadratureSpec:
    sphere_nodes: int = 20000
    simplex_degree: int = 13
    max_refine: int = 4
    rel_tol: float = 1e-9

    def __post_init__(self):
        if min(self.sphere_nodes, self.simplex_degree) <= 0 or self.max_refine < 0:
            raise InputError("quadrature parameters must be positive")
        if not 0 < self.rel_tol < 1:
            raise InputError("rel_tol must lie in (0, 1)")


@dataclass(frozen=True)
class Constants:
    d: int

    @property
    def kappa_d(self):
        return kappa(self.d)

    @property
    def C_d(self):
        return 2.0 / kappa(self.d)


def sphere_area(d: int) -> float:
    """Unnormalized (d-1)-dimensional area of S^{d-1}."""
    return d * kappa(d)


# ----------------------------------------------------------------------------
# spherical grids
# ----------------------------------------------------------------------------


def sphere_grid(d: int, n: int, seed=None):
    """Nodes on S^{d-1} and normalized weights (summing to one).

    d=1: the two points of S^0.  d=2: uniform angular grid, exact for
    trigonometric polynomials of degree < n.  d=3: spherical Fibonacci
    lattice, one node per equal-area latitude band; ``seed`` applies a random
    rotation.  d>=4: seeded Monte Carlo nodes.
    """
    if d == 1:
        return np.array([[1.0], [-1.0]]), np.array([0.5, 0.5])
    n = int(n)
    if d == 2:
        th = 2.0 * np.pi * np.arange(n) / n
        if seed is not None:
            th = th + 2.0 * np.pi / n * np.random.default_rng(seed).random()
        return np.column_stack([np.cos(th), np.sin(th)]), np.full(n, 1.0 / n)
    if d == 3:
        i = np.arange(n) + 0.5
        z = 1.0 - 2.0 * i / n
        phi = 2.0 * np.pi * i / GOLDEN
        r = np.sqrt(1.0 - z * z)
        U = np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
        if seed is not None:
            U = Rotation.random(random_state=np.random.default_rng(seed)).apply(U)
        return U, np.full(n, 1.0 / n)
    rng = np.random.default_rng(0 if seed is None else seed)
    U = rng.standard_normal((n, d))
    U /= np.linalg.norm(U, axis=1)[:, None]
    return U, np.full(n, 1.0 / n)


def sphere_product_grid(n: int):
    """Gauss-Legendre (in z) times uniform (in longitude) rule on S^2 with about ``n`` nodes.

    Spectrally accurate for smooth integrands; weights are normalized.
    """
    m = max(2, int(round((n / 2.0) ** 0.5)))
    z, wz = np.polynomial.legendre.leggauss(m)
    lon = 2.0 * np.pi * (np.arange(2 * m) + 0.5) / (2 * m)
    Z, L = np.meshgrid(z, lon, indexing="ij")
    r = np.sqrt(1.0 - Z * Z)
    U = np.column_stack([(r * np.cos(L)).ravel(), (r * np.sin(L)).ravel(), Z.ravel()])
    w = np.repeat(wz / 2.0, 2 * m) / (2 * m)
    return U, w


def sphere_average(f, d: int, q: QuadratureSpec, seed=None):
    """Normalized spherical average of ``f`` with grid refinement.

    d=2 doubles the angular grid; d>=3 quadruples the node count of a
    randomly rotated lattice and Richardson-extrapolates assuming an O(1/N)
    error.  Stops when the relative change drops below ``q.rel_tol`` or after
    ``q.max_refine`` refinements; grid rules cannot certify a tolerance for
    piecewise-smooth integrands, so the finest estimate is returned either way.
    """
    if seed is None and d >= 3:
        seed = 0
    n = q.sphere_nodes
    U, w = sphere_grid(d, n, seed)
    prev = est = _grid_dot(f, U, w)
    for _ in range(q.max_refine):
        n = 2 * n if d == 2 else 4 * n
        U, w = sphere_grid(d, n, seed)
        cur = _grid_dot(f, U, w)
        est = cur if d == 2 else (4.0 * cur - prev) / 3.0
        if abs(cur - prev) <= q.rel_tol * abs(cur):
            break
        prev = cur
    return est


def _grid_dot(f, U, w, chunk=200_000):
    return float(sum(np.dot(w[lo:lo + chunk], f(U[lo:lo + chunk])) for lo in range(0, len(U), chunk)))


# ----------------------------------------------------------------------------
# simplex rules
# ----------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _collapsed_rule(k: int, m: int):
    """Conical-product Gauss-Jacobi rule on the standard k-simplex.

    Exact for polynomials of degree <= 2m-1.  Returns barycentric nodes
    ``(m**k, k+1)`` and weights summing to 1/k!.
    """
    grids, wts = [], []
    for i in range(1, k + 1):
        alpha = k - i
        t, wt = roots_jacobi(m, alpha, 0.0)
        grids.append((t + 1.0) / 2.0)
        wts.append(wt / 2.0 ** (alpha + 1))
    U = np.array(list(product(*grids)))
    W = np.prod(np.array(list(product(*wts))), axis=1)
    X = np.zeros_like(U)
    rest = np.ones(len(U))
    for i in range(k):
        X[:, i] = rest * U[:, i]
        rest = rest * (1.0 - U[:, i])
    bary = np.column_stack([1.0 - X.sum(axis=1), X])
    return bary, W


@lru_cache(maxsize=None)
def _edgewise_children(k: int, level: int):
    """Barycentric vertex matrices of the 2**level-fold edgewise subdivision."""
    s = 2 ** level
    if s == 1:
        return np.eye(k + 1)[None]
    children = []
    for c in product(range(s), repeat=k):
        if any(c[i] < c[i + 1] for i in range(k - 1)):
            continue
        for perm in permutations(range(k)):
            pos = {p: r for r, p in enumerate(perm)}
            if any(c[i] == c[i + 1] and pos[i] > pos[i + 1] for i in range(k - 1)):
                continue
            w = np.array(c, dtype=float)
            verts = [w.copy()]
            for p in perm:
                w[p] += 1.0
                verts.append(w.copy())
            Y = np.array(verts) / s
            ext = np.hstack([np.ones((k + 1, 1)), Y, np.zeros((k + 1, 1))])
            children.append(ext[:, :-1] - ext[:, 1:])
    out = np.array(children)
    if len(out) != s ** k:
        raise NumericalError("edgewise subdivision produced the wrong number of children")
    return out


@lru_cache(maxsize=None)
def simplex_rule(k: int, degree: int, level: int = 0):
    """Nodes (barycentric) and weights of the composite rule at refinement ``level``.

    Weights sum to 1/k!, the volume of the standard simplex.
    """
    m = max(1, (degree + 2) // 2)
    bary, W = _collapsed_rule(k, m)
    if level == 0:
        return bary, W
    ch = _edgewise_children(k, level)
    nodes = np.einsum("qi,cij->cqj", bary, ch).reshape(-1, k + 1)
    weights = np.tile(W, len(ch)) / len(ch)
    return nodes, weights


def _simplex_integral(S, f, nodes, weights, chunk=2_000_000, scale=None):
    """Sum over simplices ``S`` (n, k+1, d) of the integral of ``f``.

    Uses the Gram determinant, so k-simplices embedded in R^d are allowed.
    ``scale`` multiplies the contribution of each simplex.
    """
    n, kp1, d = S.shape
    k = kp1 - 1
    M = S[:, 1:] - S[:, :1]
    if k == d:
        jac = np.abs(np.linalg.det(M))
    else:
        jac = np.sqrt(np.abs(np.linalg.det(M @ np.swapaxes(M, 1, 2))))
    if scale is not None:
        jac = jac * scale
    step = max(1, chunk // len(weights))
    total = 0.0
    for lo in range(0, n, step):
        X = np.einsum("qi,sid->sqd", nodes, S[lo:lo + step])
        vals = np.asarray(f(X.reshape(-1, d)), dtype=float).reshape(len(X), -1)
        total += float(np.dot(jac[lo:lo + step], vals @ weights))
    return total


def _refine(S, f, q, what, scale=None):
    k = S.shape[1] - 1
    prev = None
    for level in range(q.max_refine + 1):
        nodes, weights = simplex_rule(k, q.simplex_degree, level)
        cur = _simplex_integral(S, f, nodes, weights, scale=scale)
        if prev is not None and abs(cur - prev) <= q.rel_tol * abs(cur):
            return cur
        prev_prev, prev = prev, cur
    raise NumericalError(f"{what}: refinement budget exhausted", estimates=(prev_prev, prev))


# ----------------------------------------------------------------------------
# tensor Chebyshev interpolation
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class ChebyshevTable:
    """Tensor-product Chebyshev interpolant of a function on a box."""

    lo: np.ndarray
    hi: np.ndarray
    coef: np.ndarray

    @staticmethod
    def nodes_1d(n):
        return np.cos(np.pi * (np.arange(n) + 0.5) / n)

    @classmethod
    def fit(cls, f, lo, hi, n):
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        d = len(lo)
        t = cls.nodes_1d(n)
        grids = np.meshgrid(*([t] * d), indexing="ij")
        T = np.stack([g.ravel() for g in grids], axis=1)
        X = lo + (T + 1.0) * 0.5 * (hi - lo)
        vals = np.asarray(f(X), dtype=float).reshape((n,) * d)
        c = vals
        for ax in range(d):
            c = dct(c, type=2, axis=ax) / n
            idx = [slice(None)] * d
            idx[ax] = 0
            c[tuple(idx)] *= 0.5
        return cls(lo, hi, c), X, vals

    def __call__(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        n = self.coef.shape[0]
        step = max(1, 4_000_000 // n ** (X.shape[1] - 1))
        if len(X) > step:
            return np.concatenate([self._eval(X[i:i + step]) for i in range(0, len(X), step)])
        return self._eval(X)

    def _eval(self, X):
        T = 2.0 * (X - self.lo) / (self.hi - self.lo) - 1.0
        n = self.coef.shape[0]
        d = X.shape[1]
        # contract the leading coefficient axis first; acc has shape (n^(d-k), N)
        acc = self.coef.reshape(n, -1).T @ _cheb_basis(T[:, 0], n)
        for ax in range(1, d):
            B = _cheb_basis(T[:, ax], n)
            acc = np.einsum("kn,krn->rn", B, acc.reshape(n, -1, len(X))) if ax < d - 1 else (acc * B).sum(axis=0)
        return acc if d > 1 else acc[0]


def _cheb_basis(t, n):
    """Chebyshev polynomials T_0..T_{n-1} at ``t`` as an ``(n, N)`` array."""
    B = np.empty((n, len(t)))
    B[0] = 1.0
    if n > 1:
        B[1] = t
    for k in range(2, n):
        np.multiply(2.0 * t, B[k - 1], out=B[k])
        B[k] -= B[k - 2]
    return B


# ----------------------------------------------------------------------------
# functionals
# ----------------------------------------------------------------------------


def weighted_volume(P: Polytope, phi, q: QuadratureSpec = QuadratureSpec(), method: str = "auto") -> float:
    """Phi(P) = integral of the density ``phi`` over ``P``.

    ``phi`` is a vectorized callable or a GeometryWeights; constant weights
    short-circuit to ``const * Vol(P)``.  ``method="simplex"`` integrates
    over a triangulation of P.  ``method="potential"`` uses a radial
    potential Psi with div(x Psi) = phi (the ``potential`` attribute of the
    weights), so Phi(P) = sum_F b_F int_F Psi dA needs only facet
    quadrature.  ``"auto"`` picks the potential when one is attached.
    """
    from .hull import triangulate

    const = getattr(phi, "phi_constant", None)
    if const is not None:
        return const * triangulate(P).volume()
    potential = getattr(phi, "potential", None)
    if method == "auto":
        method = "simplex" if potential is None else "potential"
    if method == "potential":
        if potential is None:
            raise InputError("no radial potential attached to the weights")
        S, owner = _facet_simplex_array(P)
        return _refine(S, potential, q, "weighted_volume", scale=P.offsets[owner])
    if method != "simplex":
        raise InputError(f"unknown method {method!r}")
    T = triangulate(P)
    return _refine(T.points[T.simplices], getattr(phi, "phi", phi), q, "weighted_volume")


class RadialProfile:
    """Function of |x| represented by a 1D Chebyshev table on [0, rmax]."""

    def __init__(self, table: "ChebyshevTable"):
        self.table = table

    def __call__(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return self.table(np.linalg.norm(X, axis=1)[:, None])


def radial_integral(phi, X, n_radial: int = 64):
    """Psi(x) = int_0^1 phi(s x) s^(d-1) ds by Gauss-Legendre along each ray."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    d = X.shape[1]
    s, ws = np.polynomial.legendre.leggauss(n_radial)
    s = 0.5 * (s + 1.0)
    ws = 0.5 * ws * s ** (d - 1)
    vals = np.asarray(phi((s[:, None, None] * X[None]).reshape(-1, d)), dtype=float).reshape(len(s), len(X))
    if not np.all(np.isfinite(vals)):
        raise DomainError("density is not finite along the rays")
    return ws @ vals


def fit_validated(f, lo, hi, degrees, check_points, reference, tol):
    """First tensor Chebyshev table of ``f`` over the degree ladder that matches
    ``reference`` at ``check_points`` to relative max error ``tol``; None if none does.
    """
    scale = float(np.max(np.abs(reference)))
    for deg in degrees:
        try:
            table, _, _ = ChebyshevTable.fit(f, lo, hi, deg)
        except DomainError:
            return None
        if np.max(np.abs(table(check_points) - reference)) <= tol * scale:
            return table
    return None


def radial_potential(phi, check_points, lo=None, hi=None, rmax=None, degrees=None,
                     tol: float = 1e-11, n_radial: int = 64):
    """Tabulated radial potential Psi(x) = int_0^1 phi(s x) s^(d-1) ds.

    Psi satisfies d Psi + <x, grad Psi> = phi, i.e. div(x Psi) = phi, so the
    divergence theorem turns integrals of phi over a polytope into facet
    integrals of Psi.  With ``rmax`` the density is assumed radial and Psi is
    tabulated as a function of |x| on [0, rmax]; otherwise on the box
    [lo, hi], which must contain the origin.  The table is accepted only if
    it reproduces direct ray quadrature at ``check_points`` to ``tol``;
    returns None otherwise.
    """
    check_points = np.atleast_2d(np.asarray(check_points, dtype=float))
    d = check_points.shape[1]
    try:
        reference = radial_integral(phi, check_points, n_radial)
    except DomainError:
        return None
    if rmax is not None:
        e1 = np.eye(d)[:1]
        g = lambda R: radial_integral(phi, R[:, :1] * e1, n_radial)
        table = fit_validated(g, [0.0], [float(rmax)], degrees or (16, 32, 64, 128),
                              np.linalg.norm(check_points, axis=1)[:, None], reference, tol)
        return None if table is None else RadialProfile(table)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if np.any(lo >= 0) or np.any(hi <= 0):
        raise InputError("the box must contain the origin in its interior")
    degrees = degrees or {2: (28, 40, 56), 3: (14, 20, 26)}.get(d, (6, 8))
    return fit_validated(lambda X: radial_integral(phi, X, n_radial), lo, hi, degrees,
                         check_points, reference, tol)


def _facet_simplex_array(P: Polytope):
    from .hull import _facet_simplices

    d = P.dim
    if all(len(f) == d for f in P.facet_vertices):
        idx = np.array(P.facet_vertices, dtype=np.intp)
        return P.vertices[idx], np.arange(P.n_facets)
    extra, simp, owner = [], [], []
    for i in range(P.n_facets):
        s = _facet_simplices(P, i, extra)
        simp.extend(s)
        owner.extend([i] * len(s))
    pts = np.vstack([P.vertices] + ([np.array(extra)] if extra else []))
    return pts[np.array(simp, dtype=np.intp)], np.array(owner)


def dual_volume(P: Polytope, j: float, q: QuadratureSpec = QuadratureSpec(),
                method: str = "facet", form: str = "radial") -> float:
    """j-th dual volume  kappa_d * (normalized) integral of rho_P(u)^j over S^{d-1}.

    ``method="facet"`` integrates over the cones of the facets:
    int_{cone(F) cap S} rho^j dS = b_F * int_F |x|^(j-d) dA, which is smooth
    on every facet.  ``method="grid"`` averages rho^j on a sphere grid.
    ``form`` selects the radial form (default) or the polar-coordinate
    volume forms (|j|/d) * int |x|^(j-d) dx over P (j > 0) or its complement
    (j < 0), whose radial integrals are done numerically.
    """
    if j == 0:
        raise InputError("j must be nonzero")
    if not P.contains_origin:
        raise DomainError("origin is not interior to the polytope")
    d = P.dim
    kd = kappa(d)
    if form in ("complement", "interior"):
        return _dual_volume_polar(P, j, q, form)
    if form != "radial":
        raise InputError(f"unknown form {form!r}")
    if method == "grid":
        return kd * sphere_average(lambda U: radial_function(P, U) ** j, d, q)
    if method != "facet":
        raise InputError(f"unknown method {method!r}")
    S, owner = _facet_simplex_array(P)
    # int over cone(F) of rho^j dS = b_F * int_F |x|^(j-d) dA
    f = lambda X: np.linalg.norm(X, axis=1) ** (j - d)
    return _refine(S, f, q, "dual_volume", scale=P.offsets[owner]) / d


def _dual_volume_polar(P, j, q, form):
    d = P.dim
    if (form == "complement") != (j < 0):
        raise InputError("complement form needs j < 0, interior form needs j > 0")
    U, w = sphere_grid(d, q.sphere_nodes)
    rho = radial_function(P, U)
    if j < 0:
        # r = rho / s maps (rho, inf) to (0, 1]
        g = lambda s: (rho / s) ** (j - d) * (rho / s) ** (d - 1) * rho / s ** 2
    else:
        g = lambda s: (rho * s) ** (j - 1) * rho
    R, _ = quad_vec(g, 0.0, 1.0, epsrel=1e-12, epsabs=0.0)
    return abs(j) / d * sphere_area(d) * float(np.dot(w, R))


def mean_width(P: Polytope, q: QuadratureSpec = QuadratureSpec(), method: str = "grid") -> float:
    """Normalized spherical average of the width h_P(u) + h_P(-u).

    ``method="exact"`` (d = 2, 3) uses the edge formulas: perimeter / pi in
    the plane and (1 / 4 pi) * sum over edges of length times external
    dihedral angle in space.
    """
    if method == "grid":
        return sphere_average(lambda U: support_function(P, U) + support_function(P, -U), P.dim, q)
    if method != "exact":
        raise InputError(f"unknown method {method!r}")
    if P.dim == 2:
        return _perimeter(P) / np.pi
    if P.dim == 3:
        return _edge_sum(P) / (4.0 * np.pi)
    raise InputError("exact mean width is available for d = 2, 3")


def _perimeter(P):
    return sum(_segment_length(P.vertices[f]) for f in P.facet_vertices)


def _segment_length(V):
    """Length of the segment spanned by collinear points ``V``."""
    t = (V - V[0]) @ np.linalg.svd(V - V.mean(axis=0))[2][0]
    return float(np.linalg.norm(V[np.argmax(t)] - V[np.argmin(t)]))


def _polygon_edges(P, i):
    """Boundary edges (vertex index pairs) of the planar facet ``i`` of a 3-polytope."""
    f = np.asarray(P.facet_vertices[i])
    if len(f) == 3:
        return [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])]
    V = P.vertices[f]
    c = V.mean(axis=0)
    a = P.normals[i]
    e1 = V[0] - c
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(a, e1)
    order = f[np.argsort(np.arctan2((V - c) @ e2, (V - c) @ e1))]
    return list(zip(order, np.roll(order, -1)))


def _edge_sum(P):
    """Sum over edges of length times external dihedral angle."""
    edges = {}
    for i in range(P.n_facets):
        for a, b in _polygon_edges(P, i):
            edges.setdefault((min(a, b), max(a, b)), []).append(i)
    tot = 0.0
    for (a, b), fs in edges.items():
        if len(fs) != 2:
            raise NumericalError("edge not shared by exactly two facets")
        ang = np.arccos(np.clip(P.normals[fs[0]] @ P.normals[fs[1]], -1.0, 1.0))
        tot += float(np.linalg.norm(P.vertices[a] - P.vertices[b])) * ang
    return tot


def mean_width_dual(P: Polytope, L: Polytope, q: QuadratureSpec = QuadratureSpec(),
                    method: str = "facet") -> float:
    """Mean width of ``P cap L`` via C_d * dual_volume(conv(P* u L*), -1)."""
    from .hull import convex_hull

    pts = np.vstack([polar_polytope(P).vertices, polar_polytope(L).vertices])
    return Constants(P.dim).C_d * dual_volume(convex_hull(pts), -1, q, method=method)


def mean_width_dual_from_halfspaces(A, b, L: Polytope, q: QuadratureSpec = QuadratureSpec(),
                                    method: str = "facet") -> float:
    """As :func:`mean_width_dual` for the (possibly unbounded) set {A x <= b}, b > 0."""
    from .hull import convex_hull

    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float)
    if np.any(b <= 0):
        raise DomainError("origin must be interior to every half-space")
    pts = np.vstack([A / b[:, None], polar_polytope(L).vertices])
    return Constants(L.dim).C_d * dual_volume(convex_hull(pts), -1, q, method=method)
