"""Weighted surface bodies, caps, visibility regions and difference-operator moments.

All routines work in dimension 2 or 3.  Caps are parameterized through the
normal sphere: along every great-circle arc ``v(psi) = cos(psi) u + sin(psi) w``
leaving ``u`` the height ``<x(v), u>`` of the boundary point with normal ``v``
decreases (its derivative is ``-sin(psi) v'^T D^2h v'``), so the cap
``{<x, u> >= s}`` is the polar region ``psi <= alpha(w)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .bodies import BoundaryPoints, Polytope, SupportBody, boundary_points_from_normals, tangent_frame
from .errors import DomainError, InputError, NumericalError
from .hull import convex_hull, halfspace_intersection
from .measure import sphere_grid
from .sampling import BoundarySampler, SeedStream

N_PSI = 32
N_CIRCLE = 64
ANGLE_ITERS = 60
OFFSET_TOL = 1e-12
OFFSET_ITERS = 200
DEFAULT_GRID = {2: 720, 3: 2562}


def _check_dim(K: SupportBody):
    if K.dim not in (2, 3):
        raise InputError("diagnostics are available in dimensions 2 and 3 only")


def _unit(U):
    U = np.atleast_2d(np.asarray(U, dtype=float))
    return U / np.linalg.norm(U, axis=1)[:, None]


# ----------------------------------------------------------------------------
# caps
# ----------------------------------------------------------------------------


def _arc_directions(U):
    """Directions ``w`` orthogonal to each ``u`` and their measure weights: (N, W, d), (W,)."""
    N, d = U.shape
    if d == 2:
        perp = np.column_stack([-U[:, 1], U[:, 0]])
        return np.stack([perp, -perp], axis=1), np.ones(2)
    E = tangent_frame(U)
    th = 2.0 * np.pi * np.arange(N_CIRCLE) / N_CIRCLE
    W = np.cos(th)[None, :, None] * E[:, None, :, 0] + np.sin(th)[None, :, None] * E[:, None, :, 1]
    return W, np.full(N_CIRCLE, 2.0 * np.pi / N_CIRCLE)


def _cap_angles(K, U, Wd, S):
    """Polar angle ``alpha`` of the cap boundary along each arc, by bisection."""
    N, W, d = Wd.shape
    lo = np.zeros((N, W))
    hi = np.full((N, W), np.pi)
    u = np.broadcast_to(U[:, None, :], Wd.shape)
    s = S[:, None]
    for _ in range(ANGLE_ITERS):
        mid = 0.5 * (lo + hi)
        V = np.cos(mid)[..., None] * u + np.sin(mid)[..., None] * Wd
        height = np.einsum("nwd,nwd->nw", K.grad_h(V.reshape(-1, d)).reshape(N, W, d), u)
        inside = height >= s
        lo = np.where(inside, mid, lo)
        hi = np.where(inside, hi, mid)
    return 0.5 * (lo + hi)


def _cap_measures(K, weights, U, S):
    """Normalized sigma-measure of the caps ``{<x, u_i> >= s_i}``."""
    U = _unit(U)
    S = np.asarray(S, dtype=float).reshape(-1)
    N, d = U.shape
    top = K.h(U)
    bottom = -K.h(-U)
    out = np.empty(N)
    full = S <= bottom
    empty = S >= top
    out[full] = 1.0
    out[empty] = 0.0
    mid = ~(full | empty)
    if not np.any(mid):
        return out
    Um, Sm = U[mid], S[mid]
    Wd, wts = _arc_directions(Um)
    alpha = _cap_angles(K, Um, Wd, Sm)
    x, gw = np.polynomial.legendre.leggauss(N_PSI)
    psi = 0.5 * (x + 1.0)[None, None, :] * alpha[..., None]
    V = np.cos(psi)[..., None] * Um[:, None, None, :] + np.sin(psi)[..., None] * Wd[:, :, None, :]
    dens = weights.sigma_on_normals(V.reshape(-1, d)).reshape(psi.shape)
    inner = (dens * np.sin(psi) ** (d - 2) * gw).sum(axis=2) * 0.5 * alpha
    out[mid] = np.clip(inner @ wts / weights.normalizer, 0.0, 1.0)
    return out


def cap_measure(K: SupportBody, weights, u, s: float) -> float:
    """Normalized sigma-measure of the boundary cap ``{x : <x, u> >= s}``.

    Quadrature in polar coordinates about ``u`` on the normal sphere: the
    cap boundary angle is found by bisection along each arc, then Gauss-
    Legendre in the polar angle (and a periodic rule around ``u`` in 3D).
    """
    _check_dim(K)
    u = np.asarray(u, dtype=float).reshape(1, -1)
    if u.shape[1] != K.dim or not np.isfinite(s):
        raise InputError("direction dimension mismatch or non-finite offset")
    return float(_cap_measures(K, weights, u, [s])[0])


def cap_offsets(K: SupportBody, weights, U, t: float):
    """Offsets ``s(u)`` with cap measure exactly ``t``, by the Illinois method."""
    U = _unit(U)
    a = -K.h(-U)  # measure 1
    b = K.h(U)    # measure 0
    fa = np.full(len(U), 1.0 - t)
    fb = np.full(len(U), -t)
    side = np.zeros(len(U), dtype=int)
    done = np.zeros(len(U), dtype=bool)
    s = 0.5 * (a + b)
    for _ in range(OFFSET_ITERS):
        act = ~done
        if not np.any(act):
            return s
        c = (a * fb - b * fa) / (fb - fa)
        c = np.where(act, c, s)
        fc = np.zeros(len(U))
        fc[act] = _cap_measures(K, weights, U[act], c[act]) - t
        s = c
        done |= (np.abs(fc) <= OFFSET_TOL) | (np.abs(b - a) <= 1e-15 * (1.0 + np.abs(c)))
        pos = act & (fc > 0)
        neg = act & (fc < 0)
        # Illinois: halve the retained endpoint value after two same-side steps
        fb = np.where(pos & (side == 1), 0.5 * fb, fb)
        fa = np.where(neg & (side == -1), 0.5 * fa, fa)
        a = np.where(pos, c, a)
        fa = np.where(pos, fc, fa)
        b = np.where(neg, c, b)
        fb = np.where(neg, fc, fb)
        side = np.where(pos, 1, np.where(neg, -1, side))
    if not np.all(done):
        raise DomainError("cap offset search did not converge")
    return s


# ----------------------------------------------------------------------------
# surface bodies
# ----------------------------------------------------------------------------


@dataclass
class SurfaceBodyApprox:
    """Outer grid approximation of the weighted surface body at level ``t``."""

    t: float
    directions: np.ndarray
    offsets: np.ndarray
    polytope: Polytope

    def caps_containing(self, X):
        """Boolean matrix (N, grid): point ``x_i`` lies in the cap of direction ``j``."""
        return np.atleast_2d(X) @ self.directions.T >= self.offsets


def direction_grid(d: int, n: int):
    """Deterministic direction grid: uniform angles in 2D, Fibonacci lattice in 3D."""
    return sphere_grid(d, n)[0]


def _window(K: SupportBody, margin=0.5):
    from .model import box

    bb = K.bbox()
    w = margin * (bb[1] - bb[0])
    return box(bb[0] - w, bb[1] + w)


def surface_body(K: SupportBody, weights, t: float, grid_size: Optional[int] = None) -> SurfaceBodyApprox:
    """Intersection of the half-spaces ``{<x, u> <= s(u)}`` whose caps have measure ``t``."""
    _check_dim(K)
    if not (0.0 < t < 0.5):
        raise DomainError("surface body level t must lie in (0, 1/2)")
    U = direction_grid(K.dim, grid_size or DEFAULT_GRID[K.dim])
    S = cap_offsets(K, weights, U, t)
    from .hull import chebyshev_center

    c, r = chebyshev_center(U, S)
    if r <= 0:
        raise DomainError("surface body is empty at this level")
    P = halfspace_intersection(U, S, _window(K), interior_point=c)
    return SurfaceBodyApprox(float(t), U, S, P)


# ----------------------------------------------------------------------------
# visibility
# ----------------------------------------------------------------------------


@dataclass
class MCEstimate:
    value: float
    stderr: float
    samples: int
    hits: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)), repr=False)


def segments_miss_polytope(z, Y, P: Polytope, chunk=4_000_000):
    """True where the segment ``[z, y]`` does not meet ``P`` (Cyrus-Beck clipping)."""
    Y = np.atleast_2d(Y)
    z = np.asarray(z, dtype=float)
    num = P.offsets - P.normals @ z
    tol = 1e-12 * P.scale
    out = np.empty(len(Y), dtype=bool)
    step = max(1, chunk // P.n_facets)
    for i in range(0, len(Y), step):
        den = (Y[i:i + step] - z) @ P.normals.T
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = num / den
        lam_hi = np.minimum(1.0, np.where(den > 0, ratio, np.inf).min(axis=1))
        lam_lo = np.maximum(0.0, np.where(den < 0, ratio, -np.inf).max(axis=1))
        parallel_out = ((np.abs(den) <= 0) & (num < -tol)).any(axis=1)
        out[i:i + step] = parallel_out | (lam_lo > lam_hi + 1e-12)
    return out


def _boundary_fine(K, n):
    U, w = sphere_grid(K.dim, n)
    return boundary_points_from_normals(K, U), w


def _visibility_box(K, sb: SurfaceBodyApprox, z, n_fine):
    """Bounding box of the union of grid caps containing ``z``."""
    zc = sb.caps_containing(z)[0]
    if not np.any(zc):
        raise DomainError("no grid cap contains the point; refine the direction grid")
    bp, _ = _boundary_fine(K, n_fine)
    inside = (bp.x @ sb.directions[zc].T >= sb.offsets[zc]).any(axis=1)
    X = np.vstack([bp.x[inside], np.atleast_2d(z)])
    lo, hi = X.min(axis=0), X.max(axis=0)
    pad = 0.05 * (hi - lo).max() + 1e-9
    return lo - pad, hi + pad


def visibility_measure(K: SupportBody, weights, phi, z, t: float, mc_budget: int, stream,
                       sb: Optional[SurfaceBodyApprox] = None, n_fine: Optional[int] = None) -> MCEstimate:
    """Monte Carlo estimate of Phi(Vis(z, t)) with its standard error.

    Points ``y`` are drawn uniformly from a box around the union of grid
    caps containing ``z``; ``y`` counts when it lies in K and the segment
    ``[z, y]`` misses the surface-body polytope.  The box is doubled while
    hits touch its boundary.
    """
    _check_dim(K)
    sb = sb or surface_body(K, weights, t)
    z = np.asarray(getattr(z, "x", z), dtype=float).reshape(-1)
    n_fine = n_fine or (8 * len(sb.directions) if K.dim == 2 else 50000)
    phi_f = getattr(phi, "phi", phi)
    lo, hi = _visibility_box(K, sb, z, n_fine)
    rng = stream.generator() if isinstance(stream, SeedStream) else stream
    for _ in range(4):
        Y = lo + rng.random((mc_budget, K.dim)) * (hi - lo)
        ok = K.contains(Y) & segments_miss_polytope(z, Y, sb.polytope)
        hits = Y[ok]
        width = hi - lo
        near = np.any((hits - lo < 0.01 * width) | (hi - hits < 0.01 * width), axis=1) if len(hits) else []
        if not np.any(near):
            break
        c = 0.5 * (lo + hi)
        lo, hi = c - width, c + width
    else:
        raise NumericalError("visibility region keeps touching the sampling box")
    if len(hits) == 0:
        raise NumericalError("no visible point found; increase mc_budget")
    vol = float(np.prod(hi - lo))
    vals = np.zeros(mc_budget)
    vals[ok] = phi_f(hits)
    return MCEstimate(vol * vals.mean(), vol * vals.std(ddof=1) / math.sqrt(mc_budget), mc_budget, hits)


def overlap_measure(K: SupportBody, weights, z, t: float, sb: Optional[SurfaceBodyApprox] = None,
                    n_fine: Optional[int] = None) -> float:
    """sigma{y : Vis(z, t) and Vis(y, t) intersect}, with Vis taken as the union of grid caps.

    Two caps meet inside K exactly when they share a boundary point (their
    half-space intersection is unbounded), so everything is decided on a
    fine boundary grid.
    """
    _check_dim(K)
    sb = sb or surface_body(K, weights, t)
    z = np.asarray(getattr(z, "x", z), dtype=float).reshape(-1)
    n_fine = n_fine or (8 * len(sb.directions) if K.dim == 2 else 50000)
    bp, w = _boundary_fine(K, n_fine)
    from .measure import sphere_area

    mass = sphere_area(K.dim) * w * weights.sigma_density(bp) * bp.area_jacobian / weights.normalizer
    zc = sb.caps_containing(z)[0]
    if not np.any(zc):
        raise DomainError("no grid cap contains the point; refine the direction grid")
    zset = (bp.x @ sb.directions[zc].T >= sb.offsets[zc]).any(axis=1)
    meet = sb.caps_containing(bp.x[zset]).any(axis=0)
    reach = (bp.x @ sb.directions[meet].T >= sb.offsets[meet]).any(axis=1)
    return float(mass[reach].sum())


# ----------------------------------------------------------------------------
# containment and difference operators
# ----------------------------------------------------------------------------


def containment_probability(K: SupportBody, weights, n: int, c: float, reps: int, stream,
                            sampler: Optional[BoundarySampler] = None, grid_size: Optional[int] = None):
    """Fraction of replications where the hull of ``n`` points misses a surface-body vertex.

    The surface body is taken at level ``tau = c log n / n``.  Returns an
    :class:`MCEstimate` of the failure probability.
    """
    _check_dim(K)
    if n < K.dim + 1:
        raise InputError("need at least d+1 points")
    tau = c * math.log(n) / n
    sb = surface_body(K, weights, tau, grid_size)
    sampler = sampler or BoundarySampler(K, weights)
    V = sb.polytope.vertices
    fails = np.zeros(reps)
    for r in range(reps):
        X = sampler.sample(stream.child(r), n).x
        try:
            P = convex_hull(X)
        except DomainError:
            fails[r] = 1.0
            continue
        fails[r] = float(not np.all(P.contains(V, tol=0.0)))
    p = fails.mean()
    return MCEstimate(float(p), float(math.sqrt(max(p * (1 - p), 0.0) / reps)), reps)


@dataclass
class DifferenceStats:
    """Moments of the add-one and add-two cost of a functional."""

    n: int
    B3_hat: float
    B3_stderr: float
    D12_nonzero_rate: float
    D12_stderr: float
    rep_count: int


def difference_moments(model, n: int, reps: int, stream) -> DifferenceStats:
    """Estimate E|D_1 f|^4 and P(D_{1,2} f != 0) for the model functional.

    ``D_1 f = f(X) - f(X without x_1)`` and ``D_{1,2} f = D_1 f(X) - D_1 f(X
    without x_2)``.  A second difference counts as nonzero when it exceeds
    the rounding level of its two first differences.
    """
    d = model.dim
    if n < d + 2:
        raise InputError("need n >= d + 2")
    D1 = np.empty(reps)
    nz = np.empty(reps)
    for r in range(reps):
        bp = model.sample(stream.child(r), n)
        f = lambda keep: model.functional(model.polytope(bp[keep]))
        idx = np.arange(n)
        f_all = f(idx)
        f_1 = f(idx[1:])
        f_2 = f(np.delete(idx, 1))
        f_12 = f(idx[2:])
        a, b = f_all - f_1, f_2 - f_12
        D1[r] = a
        scale = 1e-12 * abs(f_all) + 1e-9 * max(abs(a), abs(b))
        nz[r] = float(abs(a - b) > scale)
    m4 = D1 ** 4
    rate = nz.mean()
    return DifferenceStats(n, float(m4.mean()), float(m4.std(ddof=1) / math.sqrt(reps)) if reps > 1 else float("nan"),
                           float(rate), float(math.sqrt(rate * (1 - rate) / reps)), reps)


# ----------------------------------------------------------------------------
# scans
# ----------------------------------------------------------------------------


def loglog_slope(x, y):
    """Least-squares slope and intercept of log y against log x."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x <= 0) or np.any(y <= 0):
        raise InputError("log-log fit needs positive data")
    slope, intercept = np.polyfit(np.log(x), np.log(y), 1)
    return float(slope), float(intercept)


def visibility_scan(K: SupportBody, weights, ts, n_points: int, mc_budget: int, stream,
                    grid_size: Optional[int] = None):
    """Rows (t, sup_z estimate, stderr) over ``n_points`` evenly spread boundary points ``z``."""
    U = direction_grid(K.dim, n_points) if K.dim == 3 else _rotated_circle(n_points)
    Z = boundary_points_from_normals(K, U).x
    rows = []
    for i, t in enumerate(ts):
        sb = surface_body(K, weights, t, grid_size)
        ests = [visibility_measure(K, weights, weights, z, t, mc_budget, stream.child(i, k), sb)
                for k, z in enumerate(Z)]
        best = max(ests, key=lambda e: e.value)
        rows.append((float(t), float(best.value), float(best.stderr)))
    return rows


def overlap_scan(K: SupportBody, weights, ts, n_points: int, grid_size: Optional[int] = None):
    """Rows (t, sup_z overlap measure, 0.0); the measure is deterministic."""
    U = direction_grid(K.dim, n_points) if K.dim == 3 else _rotated_circle(n_points)
    Z = boundary_points_from_normals(K, U).x
    rows = []
    for t in ts:
        sb = surface_body(K, weights, t, grid_size)
        rows.append((float(t), max(overlap_measure(K, weights, z, t, sb) for z in Z), 0.0))
    return rows


def _rotated_circle(n):
    # offset from the direction grid so z never sits exactly on a grid normal
    th = 2.0 * np.pi * (np.arange(n) + 0.37) / n
    return np.column_stack([np.cos(th), np.sin(th)])


# ----------------------------------------------------------------------------
# config-driven runs
# ----------------------------------------------------------------------------

DIAGNOSTICS = ("cap", "visibility", "overlap", "containment", "differences")


@dataclass
class DiagnosticResult:
    kind: str
    variable: str
    rows: list
    slope: Optional[float]
    intercept: Optional[float]
    config_hash: str


def run_diagnostic(data: dict) -> DiagnosticResult:
    """Run a diagnostic scan described by a config dict (see ``configs/``).

    Keys: ``diagnose`` table with ``kind`` (one of DIAGNOSTICS), ``master_seed``
    and the scan parameters; ``body`` and ``geometry`` tables as for
    experiments.
    """
    import hashlib
    import json

    from .bodies import body_from_dict
    from .errors import ConfigError
    from .geometries import weights_from_config

    data = dict(data)
    diag = dict(data.get("diagnose", {}))
    kind = diag.get("kind")
    if kind not in DIAGNOSTICS:
        raise ConfigError(f"unknown diagnostic {kind!r}; expected one of {DIAGNOSTICS}")
    if "master_seed" not in diag:
        raise ConfigError("master_seed is required")
    h = hashlib.sha256(json.dumps(data, sort_keys=True, default=str).encode()).hexdigest()[:16]
    stream = SeedStream(int(diag["master_seed"]), (int(h[:8], 16),))
    try:
        K = body_from_dict(data["body"])
    except (KeyError, InputError, DomainError) as exc:
        raise ConfigError(f"bad body spec: {exc}") from None
    if kind == "differences":
        return _run_differences(data, diag, stream, h)
    try:
        W = weights_from_config(data.get("geometry", {}), K)
    except (InputError, DomainError) as exc:
        raise ConfigError(f"bad geometry: {exc}") from None
    grid = diag.get("grid_size")
    if kind == "containment":
        ns = [int(n) for n in diag.get("ns", [200, 400, 800])]
        c, reps = float(diag.get("c", 8.0)), int(diag.get("reps", 1000))
        sampler = BoundarySampler(K, W)
        rows = []
        for i, n in enumerate(ns):
            e = containment_probability(K, W, n, c, reps, stream.child(i), sampler, grid)
            rows.append((n, e.value, e.stderr))
        return DiagnosticResult(kind, "n", rows, None, None, h)
    ts = [float(t) for t in diag.get("ts", np.geomspace(0.002, 0.05, 6))]
    if kind == "cap":
        u = _unit(diag.get("direction", np.eye(K.dim)[0]))[0]
        rows = []
        for t in ts:
            s = cap_offsets(K, W, u[None], t)[0]
            rows.append((t, float(s), 0.0))
        return DiagnosticResult(kind, "t", rows, None, None, h)
    points = int(diag.get("points", 4))
    if kind == "visibility":
        rows = visibility_scan(K, W, ts, points, int(diag.get("mc_budget", 20000)), stream, grid)
    else:
        rows = overlap_scan(K, W, ts, points, grid)
    slope, icpt = loglog_slope([r[0] for r in rows], [r[1] for r in rows])
    return DiagnosticResult(kind, "t", rows, slope, icpt, h)


def _run_differences(data, diag, stream, h):
    from .experiments import ExperimentConfig
    from .model import Model

    ns = [int(n) for n in diag.get("ns", [50, 100, 200, 400])]
    reps = int(diag.get("reps", 500))
    cfg = ExperimentConfig.from_dict({"experiment": {"name": "differences", "model": diag.get("model", "volume"),
                                                     "n_list": ns, "reps": reps, "master_seed": int(diag["master_seed"])},
                                      "body": data["body"], "geometry": data.get("geometry", {}),
                                      **({"quadrature": data["quadrature"]} if "quadrature" in data else {})})
    model = Model.from_config(cfg)
    rows = []
    for i, n in enumerate(ns):
        st = difference_moments(model, n, reps, stream.child(i))
        rows.append((n, st.B3_hat, st.B3_stderr, st.D12_nonzero_rate, st.D12_stderr))
    slope, icpt = loglog_slope(ns, [r[1] for r in rows]) if all(r[1] > 0 for r in rows) else (None, None)
    return DiagnosticResult("differences", "n", rows, slope, icpt, h)


def diagnostic_csv(res: DiagnosticResult) -> str:
    import csv
    import io

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if res.kind == "differences":
        w.writerow(["n", "estimate", "stderr", "D12_nonzero_rate", "D12_stderr", "config_hash"])
    else:
        w.writerow([res.variable, "estimate", "stderr", "config_hash"])
    for r in res.rows:
        w.writerow([r[0]] + [format(float(v), ".17g") for v in r[1:]] + [res.config_hash])
    return buf.getvalue()
