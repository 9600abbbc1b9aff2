import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from geoclt.bodies import Ball, kappa
from geoclt.errors import DomainError, InputError
from geoclt.geometries import gnomonic_density, klein_density, riemannian_weights
from geoclt.hull import convex_hull, divergence_volume, halfspace_intersection
from geoclt.measure import (ChebyshevTable, QuadratureSpec, dual_volume, mean_width, mean_width_dual,
                            mean_width_dual_from_halfspaces, radial_integral, radial_potential, simplex_rule,
                            sphere_average, sphere_grid, sphere_product_grid, weighted_volume)
from geoclt.model import box, cross_polytope

from conftest import random_unit

Q = QuadratureSpec()


def random_polytope(rng, d, n=25):
    return convex_hull(random_unit(rng, n, d) * rng.uniform(0.5, 1.5, (n, 1)))


# -- quadrature building blocks ---------------------------------------------------


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_simplex_rule_exact_on_monomials(k):
    bary, weights = simplex_rule(k, 13)
    nodes = bary[:, :k]
    # integral over the unit simplex of prod x_i^a_i = prod a_i! / (k + sum a)!
    rng = np.random.default_rng(k)
    for _ in range(10):
        a = rng.multinomial(rng.integers(0, 14), np.ones(k + 1) / (k + 1))[:k]
        exact = math.prod(math.factorial(int(ai)) for ai in a) / math.factorial(k + int(a.sum()))
        assert_allclose(np.dot(weights, np.prod(nodes ** a, axis=1)), exact, rtol=1e-12)


def test_sphere_grids_normalized():
    for d, n in [(2, 100), (3, 500), (4, 1000)]:
        U, w = sphere_grid(d, n)
        assert_allclose(np.linalg.norm(U, axis=1), 1.0)
        assert_allclose(w.sum(), 1.0)
    U, w = sphere_product_grid(2000)
    assert_allclose(np.dot(w, U[:, 2] ** 2), 1 / 3, rtol=1e-14)


def test_sphere_average_smooth():
    assert_allclose(sphere_average(lambda U: U[:, 0] ** 2, 2, Q), 0.5, rtol=1e-14)
    assert_allclose(sphere_average(lambda U: U[:, 0] ** 2, 3, Q), 1 / 3, rtol=1e-6)


def test_chebyshev_table_reproduces_smooth_function():
    f = lambda X: np.exp(X[:, 0]) * np.cos(X[:, 1])
    table, _, _ = ChebyshevTable.fit(f, [-1.0, -0.5], [1.0, 0.5], 24)
    X = np.random.default_rng(0).uniform([-1, -0.5], [1, 0.5], (500, 2))
    assert_allclose(table(X), f(X), atol=1e-13)


# -- weighted volume ----------------------------------------------------------------


def test_weighted_volume_unit_cube():
    one = lambda X: np.ones(len(X))
    assert_allclose(weighted_volume(box([0.0] * 3, [1.0] * 3), one, method="simplex"), 1.0, rtol=1e-14)


@given(st.integers(0, 10_000), st.sampled_from([2, 3]))
def test_weighted_volume_constant_matches_divergence(seed, d):
    P = random_polytope(np.random.default_rng(seed), d)
    one = lambda X: np.ones(len(X))
    assert abs(weighted_volume(P, one, method="simplex") - divergence_volume(P)) <= 1e-10


def test_klein_square_oracle(oracle):
    P = box([-0.5, -0.5], [0.5, 0.5])
    val = weighted_volume(P, klein_density, method="simplex")
    assert_allclose(val, oracle["klein_square_half_integral"], rtol=1e-10)
    # potential route: facet integrals of the radial potential
    X = np.random.default_rng(0).uniform(-0.5, 0.5, (256, 2))
    pot = radial_potential(klein_density, X, rmax=0.5 * math.sqrt(2) * 1.001)
    assert pot is not None
    assert_allclose(weighted_volume(P, type("W", (), {"potential": pot})(), method="potential"),
                    oracle["klein_square_half_integral"], rtol=1e-10)


def test_klein_square_monte_carlo():
    rng = np.random.default_rng(7)
    vals = np.concatenate([klein_density(rng.uniform(-0.5, 0.5, (1_000_000, 2))) for _ in range(10)])
    mc, se = vals.mean(), vals.std(ddof=1) / math.sqrt(len(vals))
    assert abs(weighted_volume(box([-0.5, -0.5], [0.5, 0.5]), klein_density, method="simplex") - mc) <= 3 * se


@pytest.mark.parametrize("kind,d,key", [("klein", 2, "klein_disc_volume_r_half"),
                                        ("klein", 3, "klein_ball3_volume_r_half")])
def test_riemannian_volume_of_fine_polytope(kind, d, key, oracle):
    K = Ball(d, 0.5)
    W = riemannian_weights(kind, K)
    assert W.attach_potential()
    U, _ = sphere_grid(d, 4000 if d == 2 else 3000)
    P = convex_hull(0.5 * U)
    pot = weighted_volume(P, W, method="potential")
    assert_allclose(pot, weighted_volume(P, W, method="simplex"), rtol=1e-11)
    # inscribed polytope approaches the ball from below
    assert pot < oracle[key]
    assert_allclose(pot, oracle[key], rtol=5e-5 if d == 2 else 5e-3)


def test_radial_integral_satisfies_divergence_identity(rng):
    # d Psi + <x, grad Psi> = phi, checked by central differences
    X = 0.6 * random_unit(rng, 20, 2) * rng.random((20, 1))
    h = 1e-5
    psi = lambda Y: radial_integral(gnomonic_density, Y)
    grad = np.column_stack([(psi(X + h * e) - psi(X - h * e)) / (2 * h) for e in np.eye(2)])
    assert_allclose(2 * psi(X) + np.einsum("nd,nd->n", X, grad), gnomonic_density(X), rtol=1e-8)


def test_radial_potential_rejects_box_without_origin():
    with pytest.raises(InputError):
        radial_potential(klein_density, np.full((4, 2), 0.3), lo=[0.1, 0.1], hi=[0.5, 0.5])


# -- dual volumes ---------------------------------------------------------------------


@given(st.integers(0, 10_000), st.sampled_from([2, 3]))
def test_dual_volume_d_is_volume(seed, d):
    P = random_polytope(np.random.default_rng(seed), d)
    assert abs(dual_volume(P, d) - divergence_volume(P)) <= 1e-8


@given(st.integers(0, 10_000), st.sampled_from([2, 3]), st.sampled_from([-1.0, 1.0, 2.0, "d"]),
       st.sampled_from([0.5, 2.0]))
@settings(max_examples=25)
def test_dual_volume_scaling(seed, d, j, lam):
    j = float(d) if j == "d" else j
    P = random_polytope(np.random.default_rng(seed), d)
    assert_allclose(dual_volume(P.scaled(lam), j), lam ** j * dual_volume(P, j), rtol=1e-8)


def test_dual_volume_ball_limit():
    U, _ = sphere_grid(2, 2000)
    P = convex_hull(U)
    for j in (-1.0, 1.0, 3.0):
        assert_allclose(dual_volume(P, j), math.pi, rtol=1e-5)


def test_dual_volume_square_minus_one(oracle):
    P = box([-1.0, -1.0], [1.0, 1.0])
    assert_allclose(dual_volume(P, -1), oracle["dual_volume_square_j_minus1"], rtol=1e-12)
    assert_allclose(dual_volume(P, -1, method="grid"), oracle["dual_volume_square_j_minus1"], rtol=1e-6)
    assert_allclose(dual_volume(P, -1, form="complement"), oracle["dual_volume_square_j_minus1_complement"],
                    rtol=1e-6)


def test_dual_volume_interior_form(rng):
    P = random_polytope(rng, 2)
    assert_allclose(dual_volume(P, 2.0, form="interior"), dual_volume(P, 2.0), rtol=1e-6)


def test_dual_volume_errors():
    with pytest.raises(DomainError):
        dual_volume(box([0.1, 0.1], [1.0, 1.0]), 1.0)
    with pytest.raises(InputError):
        dual_volume(box([-1.0, -1.0], [1.0, 1.0]), 0.0)


# -- mean width ---------------------------------------------------------------------------


@pytest.mark.parametrize("d", [2, 3])
def test_mean_width_ball(d):
    U, _ = sphere_grid(d, 3000 if d == 2 else 400)
    P = convex_hull(0.7 * U)
    q = QuadratureSpec(max_refine=1)
    assert_allclose(mean_width(P, q), 1.4, rtol=1e-5 if d == 2 else 1e-2)
    assert_allclose(mean_width(P, method="exact"), mean_width(P, q), rtol=1e-6 if d == 2 else 1e-4)


def test_mean_width_thin_segment():
    ell = 1.5
    for eps in (1e-2, 1e-4, 1e-6):
        P = box([-ell / 2, -eps], [ell / 2, eps])
        assert abs(mean_width(P) - 2 * ell / math.pi) <= 4 * eps / math.pi + 1e-12


def test_mean_width_cube(oracle):
    P = box([-1.0] * 3, [1.0] * 3)
    assert_allclose(mean_width(P, method="exact"), oracle["cube_mean_width"], rtol=1e-14)
    rng = np.random.default_rng(3)
    U = random_unit(rng, 200_000, 3)
    w = (U @ P.vertices.T).max(axis=1) + (-U @ P.vertices.T).max(axis=1)
    assert abs(mean_width(P) - w.mean()) <= 3 * w.std(ddof=1) / math.sqrt(len(w))


@given(st.integers(0, 10_000), st.sampled_from([2, 3]))
def test_mean_width_exact_matches_grid(seed, d):
    P = random_polytope(np.random.default_rng(seed), d)
    assert_allclose(mean_width(P, method="exact"), mean_width(P, QuadratureSpec(max_refine=1)),
                    rtol=1e-6 if d == 2 else 1e-4)


def test_mean_width_duality_cube():
    P = box([-2.0] * 2, [2.0] * 2)
    assert_allclose(mean_width_dual(P, P), mean_width(P), rtol=1e-9)


@pytest.mark.parametrize("seed", range(5))
def test_mean_width_duality_random(seed):
    rng = np.random.default_rng(seed)
    U = random_unit(rng, 60, 2)
    L = box([-2.5, -2.5], [2.5, 2.5])
    PL = halfspace_intersection(U, np.ones(60), L)
    assert abs(mean_width(PL, QuadratureSpec(sphere_nodes=20000)) -
               mean_width_dual_from_halfspaces(U, np.ones(60), L)) < 1e-4


def test_mean_width_dual_tangent_limit():
    U, _ = sphere_grid(2, 4000)
    assert_allclose(mean_width_dual_from_halfspaces(U, np.ones(len(U)), box([-3.0] * 2, [3.0] * 2)), 2.0, rtol=1e-6)


# -- monotonicity and scaling ---------------------------------------------------------------


@given(st.integers(0, 10_000), st.sampled_from([2, 3]))
@settings(max_examples=20)
def test_monotone_under_inclusion(seed, d):
    rng = np.random.default_rng(seed)
    X = random_unit(rng, 40, d) * rng.uniform(0.3, 0.45, (40, 1))
    P = convex_hull(X[:20])
    R = convex_hull(X)
    assert weighted_volume(P, klein_density, method="simplex") <= weighted_volume(R, klein_density,
                                                                                 method="simplex") + 1e-14
    for j in (1.0, 2.0):
        assert dual_volume(P, j) <= dual_volume(R, j) + 1e-14
    assert mean_width(P, method="exact") <= mean_width(R, method="exact") + 1e-14


@given(st.integers(0, 10_000), st.sampled_from([2, 3]), st.sampled_from([0.5, 2.0]))
@settings(max_examples=20)
def test_scaling_laws(seed, d, lam):
    P = random_polytope(np.random.default_rng(seed), d)
    one = lambda X: np.ones(len(X))
    assert_allclose(weighted_volume(P.scaled(lam), one, method="simplex"),
                    lam ** d * weighted_volume(P, one, method="simplex"), rtol=1e-12)
    assert_allclose(mean_width(P.scaled(lam), method="exact"), lam * mean_width(P, method="exact"), rtol=1e-12)


def test_kappa_bookkeeping():
    # normalized average of rho^d times kappa_d is the volume of the cross-polytope 2^d/d!
    P = cross_polytope(3, 1.0)
    assert_allclose(dual_volume(P, 3.0), 8 / 6, rtol=1e-12)
    assert_allclose(dual_volume(P, 3.0, method="grid"), 8 / 6, rtol=1e-4)
    assert kappa(3) > 0
