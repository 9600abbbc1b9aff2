"""Reproducible sampling: seed streams, boundary points under sigma, simplices."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bodies import BoundaryPoints, SupportBody, boundary_points_from_normals
from .errors import ConfigError, DomainError, InputError

MIN_ACCEPTANCE = 1e-4
ENVELOPE_SAFETY = 1.2
BATCH = 2048


@dataclass(frozen=True)
class SeedStream:
    """Counter-based random stream keyed by ``(master_seed, path)``.

    Streams with distinct paths are independent Philox streams; the same
    key always reproduces the same sequence.
    """

    master_seed: int
    path: tuple = ()

    def __post_init__(self):
        if not isinstance(self.master_seed, (int, np.integer)) or self.master_seed < 0:
            raise InputError("master_seed must be a non-negative integer")
        object.__setattr__(self, "path", tuple(int(p) for p in self.path))
        if any(p < 0 for p in self.path):
            raise InputError("seed path entries must be non-negative")

    def child(self, *idx) -> "SeedStream":
        return SeedStream(self.master_seed, self.path + tuple(int(i) for i in idx))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.master_seed), spawn_key=self.path)
        return np.random.Generator(np.random.Philox(ss))

    @property
    def label(self) -> str:
        return "/".join(str(p) for p in self.path)


def sample_sphere(d: int, rng, n: int):
    """``n`` uniform points on S^{d-1} (normalized Gaussians)."""
    rng = rng.generator() if isinstance(rng, SeedStream) else rng
    U = rng.standard_normal((n, d))
    return U / np.linalg.norm(U, axis=1)[:, None]


class BoundarySampler:
    """Rejection sampler for sigma on the boundary of ``K``.

    Proposals are normals ``u`` uniform on the sphere; ``u`` is accepted
    with probability sigma(x(u)) J(u) / M, where J is the area Jacobian of
    the reverse Gauss map and M bounds sigma J (grid maximum times a safety
    factor).
    """

    def __init__(self, K: SupportBody, weights, grid_nodes=None):
        from .measure import sphere_grid

        self.K = K
        self.weights = weights
        d = K.dim
        grid_nodes = grid_nodes or (4096 if d == 2 else 20000)
        U, _ = sphere_grid(d, grid_nodes)
        vals = self._target(U)
        if np.any(~np.isfinite(vals)) or np.any(vals <= 0):
            raise ConfigError("boundary density must be positive and finite")
        self.grid_max = float(vals.max())
        self.grid_min = float(vals.min())
        self.envelope = ENVELOPE_SAFETY * self.grid_max
        self.constant = self.grid_max - self.grid_min <= 1e-13 * self.grid_max
        if self.grid_max / self.envelope * (self.grid_min / self.grid_max) < MIN_ACCEPTANCE:
            raise ConfigError("expected acceptance rate below 1e-4")

    def _target(self, U):
        bp = boundary_points_from_normals(self.K, U)
        return self.weights.sigma_density(bp) * bp.area_jacobian

    @property
    def acceptance_rate(self):
        """Expected acceptance probability, from the normalizer."""
        from .measure import sphere_area

        return self.weights.normalizer / (sphere_area(self.K.dim) * self.envelope)

    def sample(self, stream, n: int) -> BoundaryPoints:
        if n < 1:
            raise InputError("n must be at least 1")
        rng = stream.generator() if isinstance(stream, SeedStream) else stream
        d = self.K.dim
        # the batch size does not depend on n, so a sample of size n is a
        # prefix of any larger sample drawn from the same stream
        acc_guess = max(self.acceptance_rate, MIN_ACCEPTANCE)
        batch = int(min(max(BATCH, math.ceil(BATCH / acc_guess)), 4_000_000))
        kept, proposed, accepted = [], 0, 0
        while accepted < n:
            U = sample_sphere(d, rng, batch)
            w = rng.random(batch)
            ratio = self._target(U) / self.envelope
            if np.any(ratio > 1.0):
                raise ConfigError("envelope constant violated; increase the grid resolution")
            ok = U[w < ratio]
            kept.append(ok)
            proposed += batch
            accepted += len(ok)
            if accepted < MIN_ACCEPTANCE * proposed:
                raise ConfigError("acceptance rate below 1e-4")
        U = np.vstack(kept)[:n]
        return boundary_points_from_normals(self.K, U)


def sample_boundary(K: SupportBody, weights, stream, n: int, sampler: BoundarySampler = None) -> BoundaryPoints:
    """``n`` i.i.d. points of the boundary of ``K`` distributed as sigma."""
    return (sampler or BoundarySampler(K, weights)).sample(stream, n)


def sample_simplex(simplex, stream, n: int):
    """``n`` uniform points in a simplex given by its ``(d+1, d)`` vertices."""
    S = np.asarray(simplex, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1] + 1:
        raise InputError("simplex must have d+1 vertices in R^d")
    M = S[1:] - S[0]
    scale = max(np.max(np.abs(M)), 1e-300)
    if abs(np.linalg.det(M / scale)) <= 1e-12:
        raise DomainError("degenerate simplex")
    rng = stream.generator() if isinstance(stream, SeedStream) else stream
    E = rng.standard_exponential((n, len(S)))
    return (E / E.sum(axis=1)[:, None]) @ S
