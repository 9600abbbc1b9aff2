"""Independent reference values for the test suite.

Nothing here imports the package: every value comes from mpmath quadrature,
closed forms, or brute-force polygon geometry written from scratch.  The
output is frozen into tests/data/oracles.json and read by the tests.

    python3 scripts/compute_oracles.py
"""
import json
from pathlib import Path

import mpmath as mp
import numpy as np

mp.mp.dps = 30
OUT = Path(__file__).resolve().parents[1] / "tests" / "data" / "oracles.json"


def klein_phi_half():
    # sqrt det of the Klein tensor: eigenvalues 1/(1-r^2)^2 (radial), 1/(1-r^2) (tangential)
    r2 = mp.mpf("0.25")
    return mp.sqrt(1 / (1 - r2) ** 2 * 1 / (1 - r2))


def hilbert_distance_half():
    # line integral of (1/2)(1/t_+ + 1/t_-) along 0 -> 0.5 e_1 in the unit disc
    return mp.quad(lambda t: (1 / (1 - t) + 1 / (1 + t)) / 2, [0, mp.mpf("0.5")])


def gnomonic_plane_integral():
    return mp.quad(lambda r: 2 * mp.pi * r * (1 + r * r) ** mp.mpf(-1.5), [0, mp.inf])


def hilbert_unit_ball_polygon(x, n):
    """Area of {v : H(x, v) <= 1} and of its polar, as polygons with ``n`` vertices.

    The exit times of x + t v from the unit ball solve |x + t v| = 1 directly.
    """
    th = 2 * np.pi * np.arange(n) / n
    dirs = np.column_stack([np.cos(th), np.sin(th)])
    b = 2 * dirs @ x
    c = x @ x - 1.0
    disc = np.sqrt(b * b - 4 * c)
    tp = (-b + disc) / 2
    tm = (b + disc) / 2
    rho = 1.0 / (0.5 * (1 / tp + 1 / tm))
    V = dirs * rho[:, None]
    area = 0.5 * np.sum(V[:, 0] * np.roll(V[:, 1], -1) - V[:, 1] * np.roll(V[:, 0], -1))
    # polar polygon: edge lines <v_i, y> = 1 and <v_{i+1}, y> = 1 meet at its vertices
    W = np.roll(V, -1, axis=0)
    det = V[:, 0] * W[:, 1] - V[:, 1] * W[:, 0]
    P = np.column_stack([(W[:, 1] - V[:, 1]) / det, (V[:, 0] - W[:, 0]) / det])
    parea = 0.5 * np.sum(P[:, 0] * np.roll(P[:, 1], -1) - P[:, 1] * np.roll(P[:, 0], -1))
    return area, parea


def hilbert_densities_half():
    x = np.array([0.5, 0.0])
    # Richardson on the polygon resolution (error is O(n^-2))
    a1, p1 = hilbert_unit_ball_polygon(x, 1 << 18)
    a2, p2 = hilbert_unit_ball_polygon(x, 1 << 19)
    area = a2 + (a2 - a1) / 3
    parea = p2 + (p2 - p1) / 3
    return np.pi / area, parea / np.pi


def klein_square_integral():
    f = lambda x, y: (1 - x * x - y * y) ** mp.mpf(-1.5)
    return 4 * mp.quad(lambda x: mp.quad(lambda y: f(x, y), [0, mp.mpf("0.5")]), [0, mp.mpf("0.5")])


def ellipse_curvature_fd():
    # finite differences of the outward normal angle along the arc-length parameterized ellipse
    a, b = 2.0, 1.0
    s = mp.mpf("1e-8")

    def normal_angle(t):
        return mp.atan2(a * mp.sin(t), b * mp.cos(t))

    def speed(t):
        return mp.sqrt((a * mp.sin(t)) ** 2 + (b * mp.cos(t)) ** 2)

    dtheta = (normal_angle(s) - normal_angle(-s)) / (2 * s)
    return dtheta / speed(0)


def dual_volume_square_minus1():
    # (1/d) int_{S^1} rho^{-1} dS over [-1,1]^2; rho(theta)^-1 = max(|cos|, |sin|)
    return mp.quad(lambda t: max(abs(mp.cos(t)), abs(mp.sin(t))), mp.linspace(0, 2 * mp.pi, 9)) / 2


def dual_volume_square_minus1_complement():
    # (|j|/d) int_{R^2 \ P} |x|^{j-d} dx = (1/2) int_theta int_{rho}^{inf} r^{-3} r dr
    inner = lambda t: mp.quad(lambda r: r ** -2, [1 / max(abs(mp.cos(t)), abs(mp.sin(t))), mp.inf])
    return mp.quad(inner, mp.linspace(0, 2 * mp.pi, 9)) / 2


def cube_mean_width():
    # mean width of [-1,1]^3: average of w(u) = 2 * sum |u_i| over the sphere = 2 * 3 * 1/2 = 3
    f = lambda th, ph: 2 * (abs(mp.sin(th) * mp.cos(ph)) + abs(mp.sin(th) * mp.sin(ph)) + abs(mp.cos(th))) * mp.sin(th)
    val = mp.quad(lambda th: mp.quad(lambda ph: f(th, ph), mp.linspace(0, 2 * mp.pi, 5)), [0, mp.pi / 2, mp.pi])
    return val / (4 * mp.pi)


def klein_disc_volume(R):
    return mp.quad(lambda r: 2 * mp.pi * r * (1 - r * r) ** mp.mpf(-1.5), [0, R])


def gnomonic_disc_volume(R):
    return mp.quad(lambda r: 2 * mp.pi * r * (1 + r * r) ** mp.mpf(-1.5), [0, R])


def klein_ball3_volume(R):
    return mp.quad(lambda r: 4 * mp.pi * r * r * (1 - r * r) ** -2, [0, R])


def klein_circle_length(R):
    # sqrt(E^T G E) with E tangent to the circle: tangential eigenvalue 1/(1-r^2)
    return 2 * mp.pi * R / mp.sqrt(1 - R * R)


def main():
    bus, ht = hilbert_densities_half()
    values = {
        "klein_phi_r_half_d2": klein_phi_half(),
        "hilbert_distance_0_to_half": hilbert_distance_half(),
        "artanh_half": mp.atanh(mp.mpf("0.5")),
        "gnomonic_plane_integral_d2": gnomonic_plane_integral(),
        "hilbert_busemann_x_half_d2_polygon": bus,
        "hilbert_holmes_thompson_x_half_d2_polygon": ht,
        "klein_square_half_integral": klein_square_integral(),
        "ellipse_2_1_curvature_at_e1": ellipse_curvature_fd(),
        "dual_volume_square_j_minus1": dual_volume_square_minus1(),
        "dual_volume_square_j_minus1_complement": dual_volume_square_minus1_complement(),
        "cube_mean_width": cube_mean_width(),
        "klein_disc_volume_r_half": klein_disc_volume(mp.mpf("0.5")),
        "gnomonic_disc_volume_r_1": gnomonic_disc_volume(mp.mpf(1)),
        "klein_ball3_volume_r_half": klein_ball3_volume(mp.mpf("0.5")),
        "klein_circle_length_r_half": klein_circle_length(mp.mpf("0.5")),
    }
    values = {k: float(v) for k, v in values.items()}
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(values, indent=1, sort_keys=True) + "\n")
    for k, v in values.items():
        print(f"{k:45s} {v!r}")


if __name__ == "__main__":
    main()
