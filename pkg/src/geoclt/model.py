"""The random-polytope model: body, weights, sampler and the functional under study."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .bodies import BoundaryPoints, Polytope, SupportBody, body_from_dict, support_function
from .errors import ConfigError, DomainError, InputError
from .geometries import GeometryWeights, weights_from_config
from .hull import convex_hull, halfspace_intersection, hull_with_body
from .measure import QuadratureSpec, dual_volume, mean_width, mean_width_dual_from_halfspaces, weighted_volume
from .sampling import BoundarySampler

VOLUME_MODELS = ("volume", "riemannian_volume", "finsler_volume")
MODELS = VOLUME_MODELS + ("dual_volume", "mean_width")


def cross_polytope(d: int, scale: float) -> Polytope:
    V = np.vstack([np.eye(d), -np.eye(d)]) * scale
    return convex_hull(V)


def box(lo, hi) -> Polytope:
    from itertools import product

    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    V = np.array([np.where(np.array(c) == 1, hi, lo) for c in product((0, 1), repeat=len(lo))])
    return convex_hull(V)


def default_inner_polytope(K: SupportBody) -> Polytope:
    """Cross-polytope scaled to a quarter of the inradius of K."""
    return cross_polytope(K.dim, 0.25 * K.inradius())


def default_window(K: SupportBody) -> Polytope:
    """Box circumscribing the parallel body {x : dist(x, K) <= 1}."""
    bb = K.bbox()
    return box(bb[0] - 1.0, bb[1] + 1.0)


def polytope_from_spec(spec, K: SupportBody) -> Polytope:
    """``{kind: cross_polytope, scale}``, ``{kind: box, lo, hi}`` or ``{vertices: [...]}``."""
    kind = spec.get("kind", "vertices" if "vertices" in spec else None)
    try:
        if kind == "cross_polytope":
            if "scale" in spec:
                return cross_polytope(K.dim, float(spec["scale"]))
            return cross_polytope(K.dim, float(spec.get("inradius_fraction", 0.25)) * K.inradius())
        if kind == "box":
            return box(spec["lo"], spec["hi"])
        if kind == "vertices":
            return convex_hull(np.asarray(spec["vertices"], dtype=float))
    except (KeyError, InputError, DomainError) as exc:
        raise ConfigError(f"bad polytope spec {spec!r}: {exc}") from None
    raise ConfigError(f"unknown polytope kind {kind!r}")


@dataclass
class Model:
    """Everything needed to draw one replication and evaluate its functional."""

    K: SupportBody
    weights: GeometryWeights
    sampler: BoundarySampler
    kind: str
    quadrature: QuadratureSpec
    j: float = 1.0
    T: Optional[Polytope] = None
    L: Optional[Polytope] = None
    backend: Optional[str] = None

    @property
    def dim(self):
        return self.K.dim

    @classmethod
    def from_config(cls, cfg) -> "Model":
        try:
            K = body_from_dict(cfg.body)
        except (InputError, DomainError) as exc:
            raise ConfigError(f"bad body spec: {exc}") from None
        kind = cfg.model
        if kind not in MODELS:
            raise ConfigError(f"unknown model {kind!r}")
        try:
            weights = weights_from_config(cfg.geometry, K)
        except (InputError, DomainError) as exc:
            raise ConfigError(f"bad geometry: {exc}") from None
        T = L = None
        if kind == "dual_volume":
            T = polytope_from_spec(cfg.T, K) if cfg.T else default_inner_polytope(K)
            if not T.contains_origin or np.any(K.gauge(T.vertices) >= 1.0):
                raise ConfigError("T must contain the origin and lie strictly inside K")
        if kind == "mean_width":
            L = polytope_from_spec(cfg.L, K) if cfg.L else default_window(K)
            E = np.vstack([np.eye(K.dim), -np.eye(K.dim)])
            if not L.contains_origin or np.any(support_function(L, E) <= K.h(E)):
                raise ConfigError("L must strictly contain K")
        return cls(K, weights, BoundarySampler(K, weights), kind, cfg.quadrature, cfg.j, T, L,
                   cfg.hull_backend)

    def sample(self, stream, n: int) -> BoundaryPoints:
        return self.sampler.sample(stream, n)

    def polytope(self, bp: BoundaryPoints) -> Polytope:
        X = np.atleast_2d(bp.x)
        if self.kind in VOLUME_MODELS:
            return convex_hull(X, backend=self.backend)
        if self.kind == "dual_volume":
            return hull_with_body(X, self.T, backend=self.backend)
        A, b = self.halfspaces(bp)
        return halfspace_intersection(A, b, self.L, interior_point=np.zeros(self.dim), backend=self.backend)

    def halfspaces(self, bp: BoundaryPoints):
        """Supporting half-spaces {<u_i, x> <= h_K(u_i)} at the sample points."""
        U = np.atleast_2d(bp.normal)
        return U, self.K.h(U)

    def functional(self, P: Polytope) -> float:
        if self.kind in VOLUME_MODELS:
            return weighted_volume(P, self.weights, self.quadrature)
        if self.kind == "dual_volume":
            return dual_volume(P, self.j, self.quadrature)
        return mean_width(P, self.quadrature, method="exact" if self.dim <= 3 else "grid")

    def evaluate(self, bp: BoundaryPoints):
        """Return (value, check_value, flag) for one sample.

        check_value is an independent second route where one exists (the
        polar route for mean width, the plain volume for j = d) and NaN
        otherwise.  flag marks replications where T changed the hull.
        """
        P = self.polytope(bp)
        value = self.functional(P)
        check, flag = float("nan"), 0
        if self.kind == "mean_width":
            A, b = self.halfspaces(bp)
            check = mean_width_dual_from_halfspaces(A, b, self.L, self.quadrature)
        elif self.kind == "dual_volume":
            X = np.atleast_2d(bp.x)
            flag = int(P.n_vertices != len(_extreme(X, P)))
            if self.j == self.dim:
                from .hull import triangulate
                check = triangulate(P).volume()
        return value, check, flag


def _extreme(X, P):
    """Indices of sample points that are vertices of ``P``."""
    d2 = ((X[:, None, :] - P.vertices[None]) ** 2).sum(axis=2)
    return np.flatnonzero(d2.min(axis=1) <= 1e-24)
