import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.testing import assert_allclose

from geoclt.errors import DomainError
from geoclt.hull import (chebyshev_center, convex_hull, divergence_volume, facet_areas, halfspace_intersection,
                         hull_with_body, triangulate)
from geoclt.model import box, cross_polytope

from conftest import random_unit


def _facet_set(P):
    return {tuple(np.round(np.append(a, b), 9)) for a, b in zip(P.normals, P.offsets)}


@pytest.mark.parametrize("backend", ["qhull", "beneath_beyond"])
@pytest.mark.parametrize("d", [2, 3, 4])
def test_simplex_hull(d, backend, rng):
    X = rng.standard_normal((d + 1, d))
    P = convex_hull(X, backend=backend)
    assert P.n_vertices == d + 1 and P.n_facets == d + 1


@pytest.mark.parametrize("backend", ["qhull", "beneath_beyond"])
@pytest.mark.parametrize("d", [2, 3, 4, 5])
def test_cross_polytope_facets(d, backend):
    X = np.vstack([np.eye(d), -np.eye(d)])
    P = convex_hull(X, backend=backend)
    assert P.n_vertices == 2 * d
    assert P.n_facets == 2 ** d
    assert_allclose(P.offsets, 1 / np.sqrt(d))


@pytest.mark.parametrize("backend", ["qhull", "beneath_beyond"])
def test_sphere_points_euler_and_membership(backend, rng):
    X = random_unit(rng, 100, 3)
    P = convex_hull(X, backend=backend)
    edges = {tuple(sorted((f[i], f[(i + 1) % 3]))) for f in P.facet_vertices for i in range(3)}
    assert P.n_vertices - len(edges) + P.n_facets == 2
    assert P.n_vertices == 100
    assert np.all(X @ P.normals.T - P.offsets <= 1e-9)


def test_backends_agree(rng):
    for d in (2, 3, 4):
        X = rng.standard_normal((60, d))
        assert _facet_set(convex_hull(X, backend="qhull")) == _facet_set(convex_hull(X, backend="beneath_beyond"))


def test_interior_points_are_absorbed():
    X = np.vstack([box([-1.0] * 3, [1.0] * 3).vertices, np.zeros((1, 3)), [[1.0, 0.0, 0.0]], [[0.5, 0.5, 1.0]]])
    for backend in ("qhull", "beneath_beyond"):
        P = convex_hull(X, backend=backend)
        assert P.n_vertices == 8 and P.n_facets == 6


def test_degenerate_input_reports_rank():
    X = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 0.0]])
    with pytest.raises(DomainError, match="rank 2"):
        convex_hull(X)


@given(st.integers(0, 10_000), st.sampled_from([2, 3, 4]))
def test_hull_idempotence_and_soundness(seed, d):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((30, d))
    P = convex_hull(X)
    assert np.all(X @ P.normals.T - P.offsets <= 1e-9)
    assert _facet_set(convex_hull(P.vertices)) == _facet_set(P)


def test_tangent_triangle():
    ang = np.deg2rad([0.0, 120.0, 240.0])
    A = np.column_stack([np.cos(ang), np.sin(ang)])
    P = halfspace_intersection(A, np.ones(3), box([-5.0, -5.0], [5.0, 5.0]))
    assert P.n_vertices == 3
    assert_allclose(np.sort(np.linalg.norm(P.vertices, axis=1)), 2.0)
    c, r = chebyshev_center(P.normals, P.offsets)
    assert_allclose(c, 0.0, atol=1e-9)
    assert_allclose(r, 1.0)


@pytest.mark.parametrize("d", [2, 3])
def test_tangent_halfspaces_touch(d, rng):
    U = random_unit(rng, 80, d)
    P = halfspace_intersection(U, np.ones(80), box(-3 * np.ones(d), 3 * np.ones(d)))
    # every tangency point lies on the boundary of the result
    slack = U @ P.normals.T - P.offsets
    assert_allclose(slack.max(axis=1), 0.0, atol=1e-9)
    assert np.all(slack <= 1e-9)


@given(st.integers(0, 10_000), st.sampled_from([2, 3]))
def test_halfspace_duality(seed, d):
    rng = np.random.default_rng(seed)
    P = convex_hull(random_unit(rng, 25, d) * rng.uniform(0.5, 1.5, (25, 1)))
    Q = halfspace_intersection(P.normals, P.offsets, box(-5 * np.ones(d), 5 * np.ones(d)))
    assert _facet_set(Q) == _facet_set(P)


def test_empty_intersection():
    A = np.array([[1.0, 0.0], [-1.0, 0.0]])
    with pytest.raises(DomainError):
        halfspace_intersection(A, np.array([-1.0, -1.0]), box([-5.0, -5.0], [5.0, 5.0]))


def test_hull_with_body(rng):
    T = cross_polytope(2, 0.1)
    X = random_unit(rng, 200, 2)
    assert _facet_set(hull_with_body(X, T)) == _facet_set(convex_hull(X))
    X3 = random_unit(rng, 3, 2)
    P = hull_with_body(X3, T)
    assert P.n_vertices <= 7 and P.contains_origin
    # oracle: every input point and T-vertex is inside, and every vertex is one of them
    pts = np.vstack([X3, T.vertices])
    assert np.all(pts @ P.normals.T - P.offsets <= 1e-12)
    assert all(np.min(np.linalg.norm(pts - v, axis=1)) < 1e-14 for v in P.vertices)


def test_triangulate_examples(rng):
    S = convex_hull(np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]]))
    tri = triangulate(S)
    assert len(tri.simplices) == 1
    assert_allclose(tri.volume(), 1 / 6)
    cube = box([0.0] * 3, [1.0] * 3)
    assert_allclose(triangulate(cube).volume(), 1.0, rtol=1e-14)
    assert np.all(triangulate(cube).volumes() > 0)


@given(st.integers(0, 10_000), st.sampled_from([2, 3, 4]))
def test_triangulation_matches_divergence_volume(seed, d):
    rng = np.random.default_rng(seed)
    P = convex_hull(random_unit(rng, 20, d) * rng.uniform(0.5, 1.5, (20, 1)))
    assert_allclose(triangulate(P).volume(), divergence_volume(P), rtol=1e-12)


def test_facet_areas_box():
    assert_allclose(np.sort(facet_areas(box([0.0] * 3, [2.0, 1.0, 3.0]))), [2.0, 2.0, 3.0, 3.0, 6.0, 6.0])
