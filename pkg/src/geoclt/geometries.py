"""Weight pairs (interior density phi, boundary density sigma) for projective geometries."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad

from .bodies import (Ball, BoundaryPoints, SupportBody, body_from_dict, boundary_points_from_normals,
                     tangent_frame)
from .errors import ConfigError, DomainError, InputError, NumericalError
from .measure import ChebyshevTable, fit_validated

RIEMANNIAN_KINDS = ("klein", "gnomonic")
FINSLER_KINDS = ("hilbert", "funk")
VOLUME_KINDS = ("busemann", "holmes_thompson")


@dataclass
class GeometryWeights:
    """Interior density ``phi`` and unnormalized boundary density ``sigma_density``.

    ``phi`` maps ``(N, d)`` points to ``(N,)`` values; ``sigma_density`` maps a
    :class:`BoundaryPoints` batch to ``(N,)`` values.  ``phi_constant`` is set
    when ``phi`` is constant, enabling exact volume shortcuts.
    """

    phi: Callable
    sigma_density: Callable
    normalizer: float
    label: str
    body: SupportBody
    phi_constant: Optional[float] = None
    phi_exact: Optional[Callable] = None
    phi_radial: bool = False
    potential: Optional[Callable] = None

    def __post_init__(self):
        if self.phi_exact is None:
            self.phi_exact = self.phi

    def attach_potential(self) -> bool:
        """Tabulate the radial potential of ``phi`` over the body.

        Returns False (and leaves ``potential`` unset) for constant weights or
        when no table passes validation.
        """
        from .measure import radial_potential

        if self.phi_constant is not None:
            return False
        K = self.body
        X = interior_check_points(K)
        if self.phi_radial:
            rmax = (1.0 + 1e-3) * float(np.max(np.linalg.norm(_boundary_grid(K), axis=1)))
            self.potential = radial_potential(self.phi, X, rmax=rmax)
        else:
            lo, hi = _padded_bbox(K)
            self.potential = radial_potential(self.phi, X, lo=lo, hi=hi)
        return self.potential is not None

    def sigma_on_normals(self, U):
        """Unnormalized sigma density with respect to the surface measure of the normal sphere."""
        bp = boundary_points_from_normals(self.body, U)
        return self.sigma_density(bp) * bp.area_jacobian

    def sigma_probability_density(self, p):
        return self.sigma_density(p) / self.normalizer


def boundary_mass(body: SupportBody, sigma_density, n_nodes=None):
    """Integral of ``sigma_density`` over the boundary of ``body``.

    Uses the normal-sphere parameterization dH = J(u) dS(u).
    """
    from .measure import sphere_area, sphere_grid

    d = body.dim
    if n_nodes is None:
        n_nodes = 4096 if d == 2 else 20000
    U, w = sphere_grid(d, n_nodes)
    bp = boundary_points_from_normals(body, U)
    return sphere_area(d) * float(np.dot(w, sigma_density(bp) * bp.area_jacobian))


def _boundary_grid(K: SupportBody, n=None):
    from .measure import sphere_grid

    U, _ = sphere_grid(K.dim, n or (2048 if K.dim == 2 else 5000))
    return K.grad_h(U)


def _padded_bbox(K: SupportBody, pad=1e-3):
    box = K.bbox()
    w = pad * (box[1] - box[0])
    return box[0] - w, box[1] + w


def interior_check_points(K: SupportBody, n=256, seed=0):
    """Deterministic points of K used to validate tabulations: a quarter on the
    boundary, the rest spread over the interior.
    """
    from .sampling import sample_sphere

    rng = np.random.default_rng(seed)
    X = K.grad_h(sample_sphere(K.dim, rng, n))
    s = rng.random(n) ** (1.0 / K.dim)
    s[: n // 4] = 1.0
    return X * s[:, None]


def _require_inside_unit_ball(K: SupportBody, n_grid=4096):
    from .measure import sphere_grid

    U, _ = sphere_grid(K.dim, n_grid)
    if np.max(np.linalg.norm(K.grad_h(U), axis=1)) >= 1.0 - 1e-9:
        raise DomainError("body must lie strictly inside the open unit ball")


# ----------------------------------------------------------------------------
# Riemannian (Klein, gnomonic)
# ----------------------------------------------------------------------------


def metric_tensor(kind: str, X):
    """Metric tensors ``(N, d, d)`` of the Klein or gnomonic model at rows of ``X``.

    Klein:    ds^2 = |dx|^2/(1-r^2) + <x,dx>^2/(1-r^2)^2.
    Gnomonic: ds^2 = |dx|^2/(1+r^2) - <x,dx>^2/(1+r^2)^2.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    r2 = np.sum(X * X, axis=1)[:, None, None]
    xx = X[:, :, None] * X[:, None, :]
    I = np.eye(X.shape[1])[None]
    if kind == "klein":
        if np.any(r2 >= 1.0):
            raise DomainError("Klein metric is defined only inside the unit ball")
        return I / (1.0 - r2) + xx / (1.0 - r2) ** 2
    if kind == "gnomonic":
        return I / (1.0 + r2) - xx / (1.0 + r2) ** 2
    raise InputError(f"unknown Riemannian model {kind!r}")


def klein_density(X):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    r2 = np.sum(X * X, axis=1)
    if np.any(r2 >= 1.0):
        raise DomainError("Klein density is defined only inside the unit ball")
    return (1.0 - r2) ** (-(X.shape[1] + 1) / 2.0)


def gnomonic_density(X):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return (1.0 + np.sum(X * X, axis=1)) ** (-(X.shape[1] + 1) / 2.0)


def riemannian_surface_density(kind, bp: BoundaryPoints):
    """sqrt det(E^T G E) for an orthonormal tangent frame E at each boundary point."""
    G = metric_tensor(kind, bp.x)
    E = tangent_frame(np.atleast_2d(bp.normal))
    M = np.einsum("nda,nde,neb->nab", E, G, E)
    return np.sqrt(np.linalg.det(M))


def riemannian_weights(kind: str, K: SupportBody) -> GeometryWeights:
    kind = kind.lower()
    if kind == "klein":
        _require_inside_unit_ball(K)
        phi = klein_density
    elif kind == "gnomonic":
        phi = gnomonic_density
    else:
        raise InputError(f"unknown Riemannian model {kind!r}")
    sig = lambda bp: riemannian_surface_density(kind, bp)
    return GeometryWeights(phi, sig, boundary_mass(K, sig), kind, K, phi_radial=True)


def euclidean_weights(K: SupportBody) -> GeometryWeights:
    sig = lambda bp: np.ones(len(np.atleast_2d(bp.x)))
    return GeometryWeights(lambda X: np.ones(len(np.atleast_2d(X))), sig, boundary_mass(K, sig),
                           "euclidean", K, phi_constant=1.0)


# ----------------------------------------------------------------------------
# Finsler (Hilbert, Funk)
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class FinslerNorm:
    omega: SupportBody
    kind: str = "hilbert"

    def __post_init__(self):
        if self.kind not in FINSLER_KINDS:
            raise InputError(f"unknown Finsler kind {self.kind!r}")

    def __call__(self, X, V):
        return finsler_norm(self, X, V)


@dataclass(frozen=True)
class VolumeDefinition:
    """Busemann or Holmes-Thompson; ``nodes`` is the direction-grid size (None: default)."""

    kind: str = "busemann"
    nodes: Optional[int] = None

    def __post_init__(self):
        if self.kind not in VOLUME_KINDS:
            raise InputError(f"unknown volume definition {self.kind!r}")


def t_plus_minus(omega: SupportBody, X, V, method="auto"):
    """Exit times t_+ and t_- of the lines x +- t v from ``omega``.

    ``X`` and ``V`` broadcast along leading axes.  ``method="bisection"``
    forces the generic gauge bisection even when a closed form exists.
    """
    X = np.asarray(X, dtype=float)
    V = np.asarray(V, dtype=float)
    if np.any(np.linalg.norm(V, axis=-1) == 0):
        raise InputError("direction must be nonzero")
    exit_ = omega.ray_exit if method == "auto" else (lambda a, b: SupportBody.ray_exit(omega, a, b))
    if method not in ("auto", "bisection"):
        raise InputError(f"unknown method {method!r}")
    return exit_(X, V), exit_(X, -V)


def finsler_norm(F: FinslerNorm, X, V, method="auto"):
    """Hilbert: (1/t_+ + 1/t_-)/2.  Funk: 1/t_+.  Zero vectors have norm 0."""
    X = np.asarray(X, dtype=float)
    V = np.asarray(V, dtype=float)
    X, V = np.broadcast_arrays(X, V)
    nrm = np.linalg.norm(V, axis=-1)
    zero = nrm == 0
    Vs = np.where(zero[..., None], 1.0, V)
    if F.kind == "hilbert":
        tp, tm = t_plus_minus(F.omega, X, Vs, method)
        out = 0.5 * (1.0 / tp + 1.0 / tm)
    else:
        exit_ = F.omega.ray_exit if method == "auto" else (lambda a, b: SupportBody.ray_exit(F.omega, a, b))
        out = 1.0 / exit_(X, Vs)
    return np.where(zero, 0.0, out)


def _segment_chord(omega, x, y):
    v = y - x
    tp, tm = t_plus_minus(omega, x, v)
    return x - tm * v, x + tp * v


def hilbert_distance_closed_form(omega: SupportBody, x, y):
    """Cross-ratio form 1/2 log(|a-y||b-x| / (|a-x||b-y|)), a, x, y, b in order on the chord."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if omega.gauge(x) >= 1 or omega.gauge(y) >= 1:
        raise DomainError("points must be interior to the domain")
    if np.allclose(x, y, rtol=0, atol=0):
        return 0.0
    a, b = _segment_chord(omega, x, y)
    n = np.linalg.norm
    return 0.5 * float(np.log(n(a - y) * n(b - x) / (n(a - x) * n(b - y))))


def finsler_distance(F: FinslerNorm, x, y, epsabs=1e-13, epsrel=1e-12):
    """Line integral of F(gamma(t), y - x) along the segment gamma(t) = x + t (y - x)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if F.omega.gauge(x) >= 1 or F.omega.gauge(y) >= 1:
        raise DomainError("points must be interior to the domain")
    v = y - x
    if not np.any(v):
        return 0.0
    f = lambda t: float(finsler_norm(F, x + t * v, v))
    val, err = quad(f, 0.0, 1.0, epsabs=epsabs, epsrel=epsrel, limit=200)
    if err > max(epsabs, epsrel * abs(val)) * 100:
        raise NumericalError("distance quadrature did not converge", estimates=(val, err))
    return val


# -- volume definitions on normed spaces ------------------------------------


def _default_nodes(k, kind):
    if kind == "busemann":
        return {1: 2, 2: 512, 3: 10000}.get(k, 20000)
    return {1: 2, 2: 512, 3: 1152}.get(k, 5000)


def _smooth_grid(k, nodes):
    """Direction grid for smooth integrands: product Gauss rule on S^2."""
    from .measure import sphere_grid, sphere_product_grid

    return sphere_product_grid(nodes) if k == 3 else sphere_grid(k, nodes)


def _norm_in_frame(F, X, frame):
    """Return g(W) = F(x, frame @ w) for coordinate directions W of shape (N, M, k)."""
    def g(W):
        V = np.einsum("ndk,nmk->nmd", frame, W)
        return finsler_norm(F, X[:, None, :], V)
    return g


def _busemann(g, N, k, nodes):
    """kappa_k / Vol(unit ball); the ball is star-shaped with radial function 1/g."""
    U, w = _smooth_grid(k, nodes)
    vals = g(np.broadcast_to(U, (N,) + U.shape))
    return 1.0 / (vals ** (-float(k)) @ w)


def _holmes_thompson(g, N, k, nodes, coarse=None, iters=30):
    """Vol(polar unit ball) / kappa_k, with h_B(u) = max_w <u,w>/g(w).

    The maximizer is located on a coarse grid and polished by a shrinking
    local pattern search in the tangent space of the current best direction.
    """
    from .measure import sphere_grid

    U, w = _smooth_grid(k, nodes)
    if k == 1:
        vals = g(np.broadcast_to(U, (N,) + U.shape))
        return 0.5 * (vals[:, 0] + vals[:, 1])
    if k == 2:
        return _holmes_thompson_planar(g, N, nodes)
    m = coarse or 300
    Wc, _ = sphere_grid(k, m)
    rc = 1.0 / g(np.broadcast_to(Wc, (N,) + Wc.shape))  # (N, m)
    Yc = rc[:, :, None] * Wc[None]  # boundary points of B on the coarse grid
    scores = np.einsum("ud,nmd->num", U, Yc)
    best = np.argmax(scores, axis=2)  # (N, nU)
    Wb = Wc[best]  # (N, nU, k)
    hb = np.take_along_axis(scores, best[..., None], axis=2)[..., 0]
    step = np.pi / m if k == 2 else 2.0 * np.sqrt(4.0 * np.pi / m)
    offs = np.array(np.meshgrid(*([[-1.0, 0.0, 1.0]] * (k - 1)), indexing="ij")).reshape(k - 1, -1).T
    offs = offs[np.any(offs != 0, axis=1)]
    nU = len(U)
    for _ in range(iters):
        E = tangent_frame(Wb.reshape(-1, k)).reshape(N, nU, k, k - 1)
        cand = Wb[:, :, None, :] + step * np.einsum("nuka,oa->nuok", E, offs)
        cand /= np.linalg.norm(cand, axis=-1)[..., None]
        gv = g(cand.reshape(N, -1, k)).reshape(N, nU, -1)
        sc = np.einsum("uk,nuok->nuo", U, cand) / gv
        j = np.argmax(sc, axis=2)
        sbest = np.take_along_axis(sc, j[..., None], axis=2)[..., 0]
        better = sbest > hb
        Wb = np.where(better[..., None], np.take_along_axis(cand, j[..., None, None], axis=2)[:, :, 0], Wb)
        hb = np.where(better, sbest, hb)
        step *= 0.5
    if np.any(hb <= 0):
        raise NumericalError("support function of the unit ball is not positive")
    return hb ** (-float(k)) @ w


def _holmes_thompson_planar(g, N, m, upsample=16):
    """Planar case: the unit ball's radial function is smooth in the angle.

    It is sampled on m angles, upsampled spectrally (zero-padded FFT), and
    h_B(u) = max_theta rho(theta) <u, e(theta)> is located in a window around
    the coarse maximizer and polished by a parabolic peak fit.
    """
    th = 2.0 * np.pi * np.arange(m) / m
    W = np.column_stack([np.cos(th), np.sin(th)])
    rho = 1.0 / g(np.broadcast_to(W, (N, m, 2)))  # (N, m)
    mf = m * upsample
    rho_f = np.fft.irfft(np.fft.rfft(rho, axis=1), n=mf, axis=1) * upsample
    thf = 2.0 * np.pi * np.arange(mf) / mf
    cf, sf = np.cos(thf), np.sin(thf)
    # u runs over the same m angles; coarse maximizer per (x, u)
    scores = rho[:, None, :] * (W @ W.T)[None]  # (N, u, theta)
    j = np.argmax(scores, axis=2)
    win = np.arange(-2 * upsample, 2 * upsample + 1)
    idx = (j[..., None] * upsample + win) % mf  # (N, u, w)
    vals = np.take_along_axis(rho_f[:, None, :], idx, axis=2) * (
        W[None, :, 0, None] * cf[idx] + W[None, :, 1, None] * sf[idx])
    k = np.argmax(vals, axis=2)
    kk = np.clip(k, 1, vals.shape[2] - 2)
    f0 = np.take_along_axis(vals, kk[..., None], axis=2)[..., 0]
    fm = np.take_along_axis(vals, kk[..., None] - 1, axis=2)[..., 0]
    fp = np.take_along_axis(vals, kk[..., None] + 1, axis=2)[..., 0]
    curv = fp - 2.0 * f0 + fm
    with np.errstate(divide="ignore", invalid="ignore"):
        peak = np.where(curv < 0, f0 - (fp - fm) ** 2 / (8.0 * curv), f0)
    if np.any(peak <= 0):
        raise NumericalError("support function of the unit ball is not positive")
    return np.mean(peak ** -2.0, axis=1)


DENSITY_TOL = 1e-10
DENSITY_MAX_DOUBLINGS = 3


def _density_fixed(F, kind, X, frame, nodes):
    N = len(X)
    k = frame.shape[2]
    if kind == "busemann":
        chunk = max(1, 400_000 // nodes)
    elif k == 2:
        chunk = max(1, 4_000_000 // nodes ** 2)
    else:
        chunk = max(1, 20_000 // nodes)
    out = np.empty(N)
    for lo in range(0, N, chunk):
        sl = slice(lo, lo + chunk)
        g = _norm_in_frame(F, X[sl], frame[sl])
        n = len(X[sl])
        if k == 1:
            v = g(_pm(n))
            out[sl] = 2.0 / (1.0 / v[:, 0] + 1.0 / v[:, 1]) if kind == "busemann" else 0.5 * (v[:, 0] + v[:, 1])
        elif kind == "busemann":
            out[sl] = _busemann(g, n, k, nodes)
        elif k == 2:
            out[sl] = _holmes_thompson_planar(g, n, nodes)
        else:
            out[sl] = _holmes_thompson(g, n, k, nodes)
    return out


def volume_density(F: FinslerNorm, vd: VolumeDefinition, X, frame=None):
    """Density of the Finsler volume (dimension k = frame columns) at rows of ``X``.

    With ``frame=None`` the full tangent space is used (k = d).  Without an
    explicit node count the direction grid is doubled until the relative
    change is below DENSITY_TOL.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    N, d = X.shape
    if frame is None:
        frame = np.broadcast_to(np.eye(d), (N, d, d))
    k = frame.shape[2]
    if k == 1 or vd.nodes is not None:
        return _density_fixed(F, vd.kind, X, frame, vd.nodes or 2)
    nodes = _default_nodes(k, vd.kind)
    prev = _density_fixed(F, vd.kind, X, frame, nodes)
    for _ in range(DENSITY_MAX_DOUBLINGS):
        nodes *= 2
        cur = _density_fixed(F, vd.kind, X, frame, nodes)
        if np.all(np.abs(cur - prev) <= DENSITY_TOL * np.abs(cur)):
            return cur
        prev = cur
    raise NumericalError("unit-ball volume quadrature did not converge", estimates=(prev, cur))


def _pm(n):
    return np.broadcast_to(np.array([[1.0], [-1.0]]), (n, 2, 1))


TABLE_TOL = 1e-8


def _tabulate(phi, K, omega, degrees):
    """Validated Chebyshev table of ``phi`` on the padded bounding box of K, or None."""
    lo, hi = _padded_bbox(K)
    T = ChebyshevTable.nodes_1d(max(degrees))
    grids = np.meshgrid(*([T] * K.dim), indexing="ij")
    pts = lo + (np.stack([g.ravel() for g in grids], axis=1) + 1.0) * 0.5 * (hi - lo)
    if np.any(omega.gauge(pts) >= 1.0 - 1e-6):
        return None
    X = interior_check_points(K, n=64)
    return fit_validated(phi, lo, hi, degrees, X, phi(X), TABLE_TOL)


def finsler_weights(F: FinslerNorm, vd: VolumeDefinition, vdm1: Optional[VolumeDefinition], K: SupportBody,
                    tabulate: bool = True, table_degree: Optional[int] = None) -> GeometryWeights:
    """Finsler volume density on K and the induced surface density on its boundary.

    With ``tabulate`` the interior density is replaced by a tensor Chebyshev
    interpolant on the bounding box of K, provided the box lies in Omega and
    the interpolant matches the exact density to TABLE_TOL at check points
    of K; the exact evaluator stays available as ``phi_exact``.
    """
    if F.omega.dim != K.dim:
        raise InputError("domain and body dimensions differ")
    vdm1 = vdm1 or vd
    from .measure import sphere_grid

    U, _ = sphere_grid(K.dim, 4096)
    if np.any(F.omega.gauge(K.grad_h(U)) >= 1.0 - 1e-9):
        raise DomainError("body must lie strictly inside the Finsler domain")
    exact = lambda X: volume_density(F, vd, X)
    phi = exact
    if tabulate:
        degrees = (table_degree,) if table_degree else {2: (28, 40), 3: (20, 24)}.get(K.dim, (6,))
        table = _tabulate(exact, K, F.omega, degrees)
        if table is not None:
            phi = table

    def sig(bp):
        X = np.atleast_2d(bp.x)
        frame = tangent_frame(np.atleast_2d(bp.normal))
        return volume_density(F, vdm1, X, frame)

    label = f"{F.kind}-{vd.kind}"
    return GeometryWeights(phi, sig, boundary_mass(K, sig, 2048 if K.dim == 2 else 5000), label, K,
                           phi_exact=exact)


# ----------------------------------------------------------------------------
# config entry point
# ----------------------------------------------------------------------------


def weights_from_config(spec: dict, K: SupportBody) -> GeometryWeights:
    """Build weights from ``{geometry, volume_def, omega, nodes, tabulate, potential}``.

    ``omega`` is a body spec.  ``potential`` (default true) attaches the
    radial potential used for fast weighted volumes.
    """
    W = _weights_from_config(spec, K)
    if spec.get("potential", True):
        W.attach_potential()
    return W


def _weights_from_config(spec: dict, K: SupportBody) -> GeometryWeights:
    geom = str(spec.get("geometry", "euclidean")).lower()
    if geom == "euclidean":
        return euclidean_weights(K)
    if geom in RIEMANNIAN_KINDS:
        return riemannian_weights(geom, K)
    if geom in FINSLER_KINDS:
        try:
            omega = body_from_dict(spec.get("omega", {"kind": "ball", "dim": K.dim, "radius": 1.0}))
        except InputError as exc:
            raise ConfigError(str(exc)) from None
        vd = VolumeDefinition(str(spec.get("volume_def", "busemann")).lower(), spec.get("nodes"))
        return finsler_weights(FinslerNorm(omega, geom), vd, vd, K, tabulate=spec.get("tabulate", True))
    raise ConfigError(f"unknown geometry {geom!r}")
