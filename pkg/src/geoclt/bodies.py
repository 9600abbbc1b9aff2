"""Smooth convex bodies given by support functions, and polytopes.

Smooth bodies are described by the support function ``h`` of a C^2_+ body
containing the origin in its interior.  Everything else (boundary points,
normals, curvature, radial function) is derived from ``h`` and the
derivatives of its 1-homogeneous extension ``H(y) = |y| h(y/|y|)``.

Polytopes carry both a vertex and a facet description.  They are built by
:mod:`geoclt.hull`; this module only stores, validates and dualizes them.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, InputError, ModelError, NumericalError

GEOM_TOL = 1e-9


def get_tolerance() -> float:
    return GEOM_TOL


def set_tolerance(tol: float) -> float:
    """Set the global geometric tolerance; returns the previous value."""
    global GEOM_TOL
    if not tol > 0:
        raise InputError("tolerance must be positive")
    old, GEOM_TOL = GEOM_TOL, float(tol)
    return old


def _as_directions(U, dim=None):
    U = np.asarray(U, dtype=float)
    single = U.ndim == 1
    U = np.atleast_2d(U)
    if dim is not None and U.shape[-1] != dim:
        raise InputError(f"expected vectors of dimension {dim}, got {U.shape[-1]}")
    return U, single


def _check_unit(U, tol=1e-9):
    norms = np.linalg.norm(U, axis=-1)
    if np.any(np.abs(norms - 1.0) > tol):
        raise InputError("direction must have unit Euclidean norm")


def tangent_frame(U):
    """Orthonormal bases of the hyperplanes orthogonal to the rows of ``U``.

    Returns an array of shape ``(N, d, d-1)``; column ``k`` of ``E[i]`` is the
    ``k``-th tangent vector at ``U[i]``.  Built from a Householder reflection
    that maps ``e_d`` to ``+-U[i]``.
    """
    U = np.atleast_2d(np.asarray(U, dtype=float))
    n, d = U.shape
    ed = np.zeros(d)
    ed[-1] = 1.0
    sign = np.where(U[:, -1] > 0, 1.0, -1.0)
    W = U + sign[:, None] * ed
    Q = np.eye(d)[None, :, :] - 2.0 * W[:, :, None] * W[:, None, :] / np.sum(W * W, axis=1)[:, None, None]
    return Q[:, :, : d - 1]


# ----------------------------------------------------------------------------
# smooth bodies
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundaryPoint:
    """A point of a smooth boundary together with its first/second order data."""

    x: np.ndarray
    normal: np.ndarray
    curvature: float
    area_jacobian: float


@dataclass(frozen=True)
class BoundaryPoints:
    """Batch of boundary points (rows), as produced by the samplers."""

    x: np.ndarray
    normal: np.ndarray
    curvature: np.ndarray
    area_jacobian: np.ndarray

    def __len__(self):
        return len(self.x)

    def __getitem__(self, i):
        if isinstance(i, (int, np.integer)):
            return BoundaryPoint(self.x[i], self.normal[i], float(self.curvature[i]),
                                 float(self.area_jacobian[i]))
        return BoundaryPoints(self.x[i], self.normal[i], self.curvature[i], self.area_jacobian[i])


class SupportBody:
    """Convex body of class C^2_+ described by its support function.

    Subclasses implement ``_H``, ``_grad_H`` and ``_hess_H`` for the body
    centred at the origin; a translation ``center`` is added here.  All
    methods are vectorized over rows of ``U``.
    """

    kind = "abstract"

    def __init__(self, dim, center=None, label=None):
        if dim < 2:
            raise InputError("dimension must be at least 2")
        self.dim = int(dim)
        self.center = np.zeros(self.dim) if center is None else np.asarray(center, dtype=float)
        if self.center.shape != (self.dim,):
            raise InputError("center has the wrong dimension")
        self.label = label or self.kind

    # -- to be provided by subclasses, for the body centred at the origin
    def _H(self, U):
        raise NotImplementedError

    def _grad_H(self, U):
        raise NotImplementedError

    def _hess_H(self, U):
        raise NotImplementedError

    def params(self):
        return {}

    # -- support function and its derivatives
    def h(self, U):
        U, single = _as_directions(U, self.dim)
        val = self._H(U) + U @ self.center
        return val[0] if single else val

    def grad_h(self, U):
        """Reverse Gauss map: the boundary point with outer normal ``u``."""
        U, single = _as_directions(U, self.dim)
        X = self._grad_H(U) + self.center
        return X[0] if single else X

    def hess_ext(self, U):
        """Euclidean Hessian of the 1-homogeneous extension of ``h``."""
        U, single = _as_directions(U, self.dim)
        Hs = self._hess_H(U)
        return Hs[0] if single else Hs

    def hess_h(self, u):
        """Spherical Hessian of ``h`` at ``u`` in the frame ``tangent_frame(u)``."""
        u = np.asarray(u, dtype=float)
        E = tangent_frame(u[None])[0]
        D2 = self._hess_H(u[None])[0]
        return E.T @ D2 @ E - float(self.h(u)) * np.eye(self.dim - 1)

    def radii_of_curvature(self, U):
        """Eigenvalues of hess_h + h I (principal radii of curvature), ascending."""
        U, single = _as_directions(U, self.dim)
        E = tangent_frame(U)
        M = np.einsum("nda,nde,neb->nab", E, self._hess_H(U), E)
        ev = np.linalg.eigvalsh(M)
        return ev[0] if single else ev

    def area_jacobian(self, U):
        """det(hess_h + h I): surface area element per unit of normal-sphere area."""
        U, single = _as_directions(U, self.dim)
        M = self._hess_H(U) + U[:, :, None] * U[:, None, :]
        J = np.linalg.det(M)
        return J[0] if single else J

    # -- membership
    def gauge(self, X):
        """Minkowski functional of the body with respect to the origin."""
        X, single = _as_directions(X, self.dim)
        g = self._gauge(X)
        return g[0] if single else g

    def _gauge(self, X):
        return self._gauge_normal(X)[0]

    def _gauge_normal(self, X, U0=None):
        # Generic route: Newton iteration for the normal u whose boundary
        # point grad_h(u) is parallel to x.  Returns (gauge, normal).
        X = np.asarray(X, dtype=float)
        r = np.linalg.norm(X, axis=1)
        out = np.zeros(len(X))
        normals = np.zeros_like(X)
        nz = np.flatnonzero(r > 0)
        V = X[nz] / r[nz, None]
        U = V.copy() if U0 is None else np.asarray(U0, dtype=float)[nz].copy()
        act = np.arange(len(nz))
        for _ in range(100):
            Ua = U[act]
            P = self._grad_H(Ua) + self.center
            nP = np.linalg.norm(P, axis=1)
            W = P / nP[:, None]
            res = V[act] - W
            done = np.linalg.norm(res, axis=1) < 1e-14
            keep = ~done
            act, Ua, W, res, nP = act[keep], Ua[keep], W[keep], res[keep], nP[keep]
            if len(act) == 0:
                break
            E = tangent_frame(Ua)
            proj = np.eye(self.dim)[None] - W[:, :, None] * W[:, None, :]
            A = np.einsum("nij,njk,nkl->nil", proj, self._hess_H(Ua), E) / nP[:, None, None]
            AtA = np.einsum("nia,nib->nab", A, A)
            delta = np.linalg.solve(AtA, np.einsum("nia,ni->na", A, res)[..., None])[..., 0]
            step = np.einsum("nda,na->nd", E, delta)
            sn = np.linalg.norm(step, axis=1)
            step *= np.minimum(1.0, 0.5 / np.maximum(sn, 1e-300))[:, None]
            Ua = Ua + step
            U[act] = Ua / np.linalg.norm(Ua, axis=1)[:, None]
        else:
            P = self._grad_H(U[act]) + self.center
            if np.max(np.linalg.norm(V[act] - P / np.linalg.norm(P, axis=1)[:, None], axis=1)) > 1e-10:
                raise NumericalError("radial function iteration did not converge")
        P = self._grad_H(U) + self.center
        out[nz] = r[nz] / np.linalg.norm(P, axis=1)
        normals[nz] = U
        return out, normals

    def contains(self, X, strict=False):
        g = self.gauge(X)
        return g < 1.0 if strict else g <= 1.0 + GEOM_TOL

    def radial(self, U):
        U, single = _as_directions(U, self.dim)
        r = 1.0 / self._gauge(U / np.linalg.norm(U, axis=1)[:, None])
        return r[0] if single else r

    def ray_exit(self, X, V, method="newton"):
        """Largest ``t`` with ``x + t v`` in the body, for interior ``x``.

        Generic implementation on the gauge g: safeguarded Newton iteration
        (the gradient of g at a boundary point is u / h(u)) or plain
        bisection.  ``X`` and ``V`` broadcast along leading axes.
        """
        X = np.asarray(X, dtype=float)
        V = np.asarray(V, dtype=float)
        X, V = np.broadcast_arrays(X, V)
        shape = X.shape[:-1]
        X = X.reshape(-1, self.dim)
        V = V.reshape(-1, self.dim)
        if np.any(self._gauge(X) >= 1.0):
            raise DomainError("base point is not interior to the body")
        lo = np.zeros(len(X))
        reach = 2.0 * np.max(np.abs(self.bbox()))
        hi = (reach + np.linalg.norm(X, axis=1)) / np.linalg.norm(V, axis=1)
        if method == "bisection":
            for _ in range(200):
                t = 0.5 * (lo + hi)
                inside = self._gauge(X + t[:, None] * V) <= 1.0
                lo = np.where(inside, t, lo)
                hi = np.where(inside, hi, t)
                if np.all(hi - lo <= 1e-15 * np.maximum(1.0, hi)):
                    break
            return (0.5 * (lo + hi)).reshape(shape)
        t = hi.copy()
        U = np.zeros_like(X)
        act = np.arange(len(X))
        for it in range(100):
            Xa, Va, ta = X[act], V[act], t[act]
            g, Ua = self._gauge_normal(Xa + ta[:, None] * Va, U[act] if it else None)
            U[act] = Ua
            inside = g <= 1.0
            la = np.where(inside, ta, lo[act])
            ha = np.where(inside, hi[act], ta)
            lo[act], hi[act] = la, ha
            slope = np.einsum("nd,nd->n", Va, Ua) / self.h(Ua)
            with np.errstate(divide="ignore", invalid="ignore"):
                tn = ta - (g - 1.0) / slope
            ok = np.isfinite(tn) & (tn > la) & (tn < ha)
            t[act] = np.where(ok, tn, 0.5 * (la + ha))
            conv = (np.abs(g - 1.0) <= 4e-16) | (ha - la <= 1e-15 * np.maximum(1.0, ha))
            t[act[conv]] = ta[conv]
            act = act[~conv]
            if len(act) == 0:
                break
        return t.reshape(shape)

    def bbox(self):
        """Axis-aligned bounding box as a ``(2, d)`` array ``[lo, hi]``."""
        E = np.eye(self.dim)
        return np.vstack([-self.h(-E), self.h(E)])

    def inradius(self, n_grid=4096, rng=None):
        """Radius of the largest origin-centred ball inside the body (grid estimate)."""
        from .measure import sphere_grid

        U, _ = sphere_grid(self.dim, n_grid)
        return float(np.min(self.h(U)))

    def check_c2plus(self, n_grid=2048):
        """Raise ModelError unless h > 0 and hess_h + h I > 0 on a direction grid."""
        from .measure import sphere_grid

        U, _ = sphere_grid(self.dim, n_grid)
        if np.any(self.h(U) <= 0):
            raise DomainError(f"{self.label}: origin is not interior (h <= 0 somewhere)")
        if np.any(self.radii_of_curvature(U)[..., 0] <= 0):
            raise ModelError(f"{self.label}: body not C2+ on the direction grid")

    def to_dict(self):
        d = {"kind": self.kind, "dim": self.dim}
        d.update(self.params())
        if np.any(self.center != 0):
            d["center"] = self.center.tolist()
        return d

    def __repr__(self):
        return f"{type(self).__name__}({self.to_dict()})"


class Ellipsoid(SupportBody):
    """Axis-aligned ellipsoid with semi-axes ``axes``: h(u) = |diag(axes) u|."""

    kind = "ellipsoid"

    def __init__(self, axes, center=None, label=None):
        axes = np.asarray(axes, dtype=float)
        if axes.ndim != 1 or np.any(axes <= 0):
            raise InputError("semi-axes must be a positive vector")
        self.axes = axes
        super().__init__(len(axes), center, label)
        if np.any(np.abs(self.center) / self.axes >= 1) or np.sum((self.center / self.axes) ** 2) >= 1:
            raise DomainError("origin must be interior to the body")

    def params(self):
        return {"axes": self.axes.tolist()}

    def _H(self, U):
        return np.linalg.norm(U * self.axes, axis=1)

    def _grad_H(self, U):
        A2 = self.axes ** 2
        return U * A2 / np.linalg.norm(U * self.axes, axis=1)[:, None]

    def _hess_H(self, U):
        A2 = self.axes ** 2
        nrm = np.linalg.norm(U * self.axes, axis=1)
        g = U * A2
        return (np.eye(self.dim)[None] * A2[None, None, :] / nrm[:, None, None]
                - g[:, :, None] * g[:, None, :] / nrm[:, None, None] ** 3)

    def _gauge(self, X):
        a = self.axes
        c = self.center
        A = np.sum((X / a) ** 2, axis=1)
        B = X @ (c / a ** 2)
        C = np.sum((c / a) ** 2)
        out = np.zeros(len(X))
        nz = A > 0
        mu = (B[nz] + np.sqrt(B[nz] ** 2 - A[nz] * (C - 1.0))) / A[nz]
        out[nz] = 1.0 / mu
        return out

    def ray_exit(self, X, V):
        X = np.asarray(X, dtype=float)
        V = np.asarray(V, dtype=float)
        Y = (X - self.center) / self.axes
        W = V / self.axes
        A = np.sum(W * W, axis=-1)
        B = np.sum(Y * W, axis=-1)
        C = np.sum(Y * Y, axis=-1) - 1.0
        if np.any(C >= 0):
            raise DomainError("base point is not interior to the body")
        return (-B + np.sqrt(B * B - A * C)) / A


class Ball(Ellipsoid):
    kind = "ball"

    def __init__(self, dim, radius=1.0, center=None, label=None):
        if radius <= 0:
            raise InputError("radius must be positive")
        self.radius = float(radius)
        super().__init__(np.full(int(dim), self.radius), center, label)

    def params(self):
        return {"radius": self.radius}


class PerturbedBall(SupportBody):
    """h(u) = R (1 + eps * p(u)), p(y) = y1^3 - 3 y1 y2^2 (a cubic harmonic).

    In the plane this is h(theta) = R (1 + eps cos 3 theta), which is C^2_+
    exactly when eps < 1/8.  The construction checks C^2_+ on a grid.
    """

    kind = "perturbed_ball"
    degree = 3

    def __init__(self, dim, radius=1.0, eps=0.05, center=None, label=None):
        self.radius = float(radius)
        self.eps = float(eps)
        super().__init__(dim, center, label)
        if self.radius <= 0:
            raise InputError("radius must be positive")
        self.check_c2plus()

    def params(self):
        return {"radius": self.radius, "eps": self.eps}

    @staticmethod
    def _p(U):
        return U[:, 0] ** 3 - 3.0 * U[:, 0] * U[:, 1] ** 2

    def _grad_p(self, U):
        g = np.zeros_like(U)
        g[:, 0] = 3.0 * U[:, 0] ** 2 - 3.0 * U[:, 1] ** 2
        g[:, 1] = -6.0 * U[:, 0] * U[:, 1]
        return g

    def _hess_p(self, U):
        Hp = np.zeros((len(U), self.dim, self.dim))
        Hp[:, 0, 0] = 6.0 * U[:, 0]
        Hp[:, 0, 1] = Hp[:, 1, 0] = -6.0 * U[:, 1]
        Hp[:, 1, 1] = -6.0 * U[:, 0]
        return Hp

    def _H(self, U):
        r = np.linalg.norm(U, axis=1)
        return self.radius * (r + self.eps * r ** (1 - self.degree) * self._p(U))

    def _grad_H(self, U):
        k = self.degree
        r = np.linalg.norm(U, axis=1)
        p = self._p(U)
        g = (U / r[:, None]
             + self.eps * ((1 - k) * r[:, None] ** (-1 - k) * p[:, None] * U
                           + r[:, None] ** (1 - k) * self._grad_p(U)))
        return self.radius * g

    def _hess_H(self, U):
        k = self.degree
        d = self.dim
        r = np.linalg.norm(U, axis=1)[:, None, None]
        p = self._p(U)[:, None, None]
        gp = self._grad_p(U)
        I = np.eye(d)[None]
        yy = U[:, :, None] * U[:, None, :]
        ball = (I - yy / r ** 2) / r
        sym = U[:, :, None] * gp[:, None, :] + gp[:, :, None] * U[:, None, :]
        pert = ((1 - k) * r ** (-1 - k) * (p * I + sym)
                - (1 - k) * (1 + k) * r ** (-3 - k) * p * yy
                + r ** (1 - k) * self._hess_p(U))
        return self.radius * (ball + self.eps * pert)


def body_from_dict(spec) -> SupportBody:
    """Build a body from its JSON/TOML description ``{kind: ..., params...}``."""
    spec = dict(spec)
    kind = spec.pop("kind", None)
    center = spec.pop("center", None)
    label = spec.pop("label", None)
    try:
        if kind == "ball":
            return Ball(spec["dim"], spec.get("radius", 1.0), center, label)
        if kind == "ellipsoid":
            return Ellipsoid(spec["axes"], center, label)
        if kind == "perturbed_ball":
            return PerturbedBall(spec["dim"], spec.get("radius", 1.0), spec.get("eps", 0.05), center, label)
    except KeyError as exc:
        raise InputError(f"body spec missing field {exc}") from None
    raise InputError(f"unknown body kind {kind!r}")


def boundary_point_from_normal(body: SupportBody, u) -> BoundaryPoint:
    """Reverse Gauss map: boundary point, curvature and area Jacobian at normal ``u``."""
    u = np.asarray(u, dtype=float)
    if u.shape != (body.dim,):
        raise InputError("direction has the wrong dimension")
    _check_unit(u[None])
    pts = boundary_points_from_normals(body, u[None])
    return pts[0]


def boundary_points_from_normals(body: SupportBody, U) -> BoundaryPoints:
    U = np.atleast_2d(np.asarray(U, dtype=float))
    _check_unit(U)
    J = body.area_jacobian(U)
    radii = body.radii_of_curvature(U)
    bad = radii[:, 0] <= 0
    if np.any(bad):
        raise ModelError(f"body not C2+ at u={U[np.argmax(bad)].tolist()}")
    return BoundaryPoints(body.grad_h(U), U.copy(), 1.0 / J, J)


def legendre_transform(body: SupportBody, p) -> np.ndarray:
    """Point of the polar boundary proportional to the outer normal at ``p``.

    ``p`` is a BoundaryPoint or a BoundaryPoints batch.
    """
    U = np.atleast_2d(p.normal)
    hv = body.h(U)
    if np.any(hv <= 0):
        raise DomainError("support value must be positive (origin interior)")
    out = U / hv[:, None]
    return out[0] if np.ndim(p.normal) == 1 else out


# ----------------------------------------------------------------------------
# polytopes
# ----------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Polytope:
    """Convex polytope with simultaneous V- and H-representation.

    Facet ``i`` is ``{x : <normals[i], x> <= offsets[i]}`` with unit outward
    normal; ``facet_vertices[i]`` lists the indices of the vertices on it.
    """

    vertices: np.ndarray
    normals: np.ndarray
    offsets: np.ndarray
    facet_vertices: tuple = field(default=())
    check: bool = field(default=True, repr=False)

    def __post_init__(self):
        V = np.atleast_2d(np.asarray(self.vertices, dtype=float))
        A = np.atleast_2d(np.asarray(self.normals, dtype=float))
        b = np.asarray(self.offsets, dtype=float).reshape(-1)
        fv = tuple(np.asarray(f, dtype=np.intp) for f in self.facet_vertices)
        object.__setattr__(self, "vertices", V)
        object.__setattr__(self, "normals", A)
        object.__setattr__(self, "offsets", b)
        object.__setattr__(self, "facet_vertices", fv)
        if len(V) == 0:
            raise DomainError("polytope has no vertices")
        if A.shape[0] != b.shape[0] or (fv and len(fv) != len(b)):
            raise InputError("facet arrays have inconsistent lengths")
        if self.check:
            self.validate()

    @property
    def dim(self):
        return self.vertices.shape[1]

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_facets(self):
        return len(self.offsets)

    @property
    def scale(self):
        return max(1.0, float(np.max(np.abs(self.vertices))))

    @property
    def contains_origin(self):
        return bool(np.all(self.offsets > GEOM_TOL * self.scale))

    def validate(self):
        d = self.dim
        tol = GEOM_TOL * self.scale
        slack = self.vertices @ self.normals.T - self.offsets
        if np.any(slack > 10 * tol):
            raise DomainError("a vertex violates a facet inequality")
        for i, f in enumerate(self.facet_vertices):
            if len(f) < d:
                raise DomainError(f"facet {i} is supported by fewer than {d} vertices")
            P = self.vertices[f]
            if np.max(np.abs(P @ self.normals[i] - self.offsets[i])) > 10 * tol:
                raise DomainError(f"facet {i}: listed vertices are not on the facet")
            if np.linalg.matrix_rank(P[1:] - P[0], tol=tol) < d - 1:
                raise DomainError(f"facet {i} is degenerate")

    def contains(self, X, tol=None):
        X = np.atleast_2d(X)
        tol = GEOM_TOL * self.scale if tol is None else tol
        return np.all(X @ self.normals.T <= self.offsets + tol, axis=1)

    def scaled(self, lam):
        """The polytope ``lam * P`` for ``lam > 0``."""
        if lam <= 0:
            raise InputError("scale factor must be positive")
        return Polytope(self.vertices * lam, self.normals, self.offsets * lam,
                        self.facet_vertices, check=False)

    def vertex_facets(self):
        """For each vertex, the indices of the facets through it."""
        inc = [[] for _ in range(self.n_vertices)]
        for i, f in enumerate(self.facet_vertices):
            for v in f:
                inc[v].append(i)
        return [np.asarray(x, dtype=np.intp) for x in inc]

    def to_dict(self):
        return {
            "dim": self.dim,
            "vertices": self.vertices.tolist(),
            "facets": [
                {"normal": a.tolist(), "offset": float(b), "vertices": f.tolist()}
                for a, b, f in zip(self.normals, self.offsets, self.facet_vertices)
            ],
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, data):
        facets = data["facets"]
        return cls(np.asarray(data["vertices"], dtype=float),
                   np.asarray([f["normal"] for f in facets], dtype=float).reshape(len(facets), -1),
                   np.asarray([f["offset"] for f in facets], dtype=float),
                   tuple(f["vertices"] for f in facets))

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def _require_origin_interior(P):
    if not P.contains_origin:
        raise DomainError("origin is not interior to the polytope")


def polar_polytope(P: Polytope) -> Polytope:
    """Polar body {y : <x, y> <= 1 for all x in P} of a polytope with origin interior.

    Facets (a, b) become vertices a/b and vertices v become facets
    (v/|v|, 1/|v|); the incidence structure is transposed.
    """
    _require_origin_interior(P)
    verts = P.normals / P.offsets[:, None]
    r = np.linalg.norm(P.vertices, axis=1)
    normals = P.vertices / r[:, None]
    offsets = 1.0 / r
    fv = tuple(P.vertex_facets())
    return Polytope(verts, normals, offsets, fv)


def radial_function(P: Polytope, U):
    """rho_P(u) = max{r > 0 : r u in P}, vectorized over rows of ``U``."""
    _require_origin_interior(P)
    U, single = _as_directions(U, P.dim)
    rho = np.empty(len(U))
    step = max(1, 4_000_000 // max(P.n_facets, 1))
    for lo in range(0, len(U), step):
        dots = U[lo:lo + step] @ P.normals.T
        with np.errstate(divide="ignore"):
            ratios = np.where(dots > 0, P.offsets / np.where(dots > 0, dots, 1.0), np.inf)
        rho[lo:lo + step] = ratios.min(axis=1)
    if np.any(~np.isfinite(rho)):
        raise DomainError("unbounded direction: not a body")
    return rho[0] if single else rho


def support_function(P: Polytope, U):
    """h_P(u) = max over vertices of <v, u>; ``u`` need not be unit."""
    if P.n_vertices == 0:
        raise DomainError("empty vertex list")
    U, single = _as_directions(U, P.dim)
    step = max(1, 4_000_000 // P.n_vertices)
    h = np.concatenate([(U[lo:lo + step] @ P.vertices.T).max(axis=1) for lo in range(0, len(U), step)])
    return h[0] if single else h


def kappa(d: int) -> float:
    """Volume of the d-dimensional Euclidean unit ball."""
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)
