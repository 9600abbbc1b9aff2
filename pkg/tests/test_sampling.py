import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.testing import assert_allclose, assert_array_equal
from scipy import stats

from geoclt.bodies import Ball, Ellipsoid
from geoclt.errors import ConfigError, DomainError, InputError
from geoclt.geometries import GeometryWeights, euclidean_weights, riemannian_weights
from geoclt.hull import triangulate
from geoclt.model import box
from geoclt.sampling import BoundarySampler, SeedStream, sample_boundary, sample_simplex


def test_stream_determinism():
    s = SeedStream(42, (1, 2, 3))
    assert_array_equal(s.generator().random(100), SeedStream(42, (1, 2, 3)).generator().random(100))
    assert_array_equal(s.child(4).generator().random(5), SeedStream(42, (1, 2, 3, 4)).generator().random(5))
    assert s.label == "1/2/3"


def test_streams_with_different_paths_differ():
    a = SeedStream(42, (0, 1)).generator().random(20000)
    b = SeedStream(42, (1, 0)).generator().random(20000)
    c = SeedStream(43, (0, 1)).generator().random(20000)
    assert abs(np.corrcoef(a, b)[0, 1]) < 4 / math.sqrt(20000)
    assert abs(np.corrcoef(a, c)[0, 1]) < 4 / math.sqrt(20000)
    assert not np.array_equal(a, b)


def test_stream_validation():
    with pytest.raises(InputError):
        SeedStream(-1)
    with pytest.raises(InputError):
        SeedStream(1, (-2,))


@pytest.mark.parametrize("d", [2, 3, 4])
def test_uniform_sphere_means(d):
    n = 20000
    bp = sample_boundary(Ball(d), euclidean_weights(Ball(d)), SeedStream(1, (d,)), n)
    assert_allclose(np.linalg.norm(bp.x, axis=1), 1.0)
    assert np.all(np.abs(bp.x.mean(axis=0)) < 4 / math.sqrt(n))


def _ellipse_arclength_cdf(a, b):
    # cumulative arc length along x = a cos t, y = b sin t on a fine trapezoid grid
    t = np.linspace(0, 2 * np.pi, 2_000_001)
    speed = np.hypot(a * np.sin(t), b * np.cos(t))
    s = np.concatenate([[0.0], np.cumsum(0.5 * (speed[1:] + speed[:-1]) * np.diff(t))])
    return lambda tt: np.interp(tt, t, s / s[-1])


def test_ellipse_arc_length_distribution():
    K = Ellipsoid([2.0, 1.0])
    bp = sample_boundary(K, euclidean_weights(K), SeedStream(5), 100_000)
    t = np.mod(np.arctan2(bp.x[:, 1] / 1.0, bp.x[:, 0] / 2.0), 2 * np.pi)
    assert stats.kstest(t, _ellipse_arclength_cdf(2.0, 1.0)).pvalue > 0.01


def test_klein_ball_sampling_is_uniform():
    K = Ball(2, 0.5)
    W = riemannian_weights("klein", K)
    bp = sample_boundary(K, W, SeedStream(6), 20000)
    ang = np.mod(np.arctan2(bp.x[:, 1], bp.x[:, 0]), 2 * np.pi) / (2 * np.pi)
    assert stats.kstest(ang, "uniform").pvalue > 0.01


def test_nonuniform_density_dkw_rate():
    # density proportional to 1 + cos(theta) / 2 on the unit circle; CDF known in closed form
    K = Ball(2)
    sig = lambda bp: 1 + 0.5 * np.atleast_2d(bp.x)[:, 0]
    W = GeometryWeights(lambda X: np.ones(len(X)), sig, 2 * math.pi, "test", K)
    n = 50_000
    th = np.sort(np.mod(np.arctan2(*sample_boundary(K, W, SeedStream(7), n).x[:, ::-1].T), 2 * np.pi))
    cdf = (th + 0.5 * np.sin(th)) / (2 * np.pi)
    ecdf = np.arange(1, n + 1) / n
    dist = max(np.max(ecdf - cdf), np.max(cdf - (ecdf - 1 / n)))
    # DKW at level 1e-3
    assert dist < math.sqrt(math.log(2 / 1e-3) / (2 * n))


def test_prefix_consistency():
    K = Ellipsoid([1.0, 0.6])
    S = BoundarySampler(K, euclidean_weights(K))
    big = S.sample(SeedStream(3, (1,)), 5000)
    small = S.sample(SeedStream(3, (1,)), 123)
    assert_array_equal(small.x, big.x[:123])


def test_bad_density_is_config_error():
    K = Ball(2)
    W = GeometryWeights(lambda X: np.ones(len(X)), lambda bp: np.atleast_2d(bp.x)[:, 0], 1.0, "bad", K)
    with pytest.raises(ConfigError):
        BoundarySampler(K, W)
    spiky = lambda bp: np.exp(40 * np.atleast_2d(bp.x)[:, 0])
    with pytest.raises(ConfigError):
        BoundarySampler(K, GeometryWeights(lambda X: X[:, 0], spiky, 1.0, "spiky", K))


def test_sample_simplex_mean():
    S = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    n = 50000
    X = sample_simplex(S, SeedStream(8), n)
    assert np.all(X.sum(axis=1) <= 1 + 1e-15) and np.all(X >= 0)
    assert np.all(np.abs(X.mean(axis=0) - 1 / 3) < 4 / math.sqrt(n))


def test_cube_volume_by_hit_or_miss():
    # uniform points in a simplex containing the unit cube, then the fraction inside the cube
    S = np.array([[0.0, 0, 0], [3.5, 0, 0], [0, 3.5, 0], [0, 0, 3.5]])
    vol = triangulate(box([0.0] * 3, [3.5] * 3)).volume() / 6
    n = 200_000
    X = sample_simplex(S, SeedStream(9), n)
    hit = np.all(X <= 1.0, axis=1)
    est, se = vol * hit.mean(), vol * hit.std(ddof=1) / math.sqrt(n)
    assert abs(est - 1.0) <= 3 * se


@given(st.integers(0, 2 ** 32))
def test_simplex_replay(seed):
    S = np.array([[0.0, 0, 0], [1, 0, 0], [0, 2, 0], [0, 0, 3]])
    assert_array_equal(sample_simplex(S, SeedStream(seed), 10), sample_simplex(S, SeedStream(seed), 10))


def test_degenerate_simplex():
    with pytest.raises(DomainError):
        sample_simplex(np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]), SeedStream(0), 5)
