import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from lfgs.errors import NotOnManifold
from lfgs.stiefel import (StiefelPoint, canonical_inner, exp_map, load_point, make_point, random_point,
                          random_tangent, save_point, tangent_from_ambient, tangent_from_blocks)
from conftest import circle_point


def test_point_rejects_non_orthonormal():
    with pytest.raises(NotOnManifold) as info:
        StiefelPoint(np.array([[1.0, 0.0], [0.0, 1.0 + 1e-6], [0.0, 0.0]]))
    assert info.value.defect > 1e-10
    with pytest.raises(ValueError):
        StiefelPoint(np.ones((2, 3)) / 2)


def test_point_is_read_only_and_caches_complement():
    x = random_point(6, 2, 0)
    with pytest.raises(ValueError):
        x.mat[0, 0] = 1.0
    assert x.complement is x.complement
    assert make_point(x) is x


def test_random_draws_are_reproducible():
    assert np.array_equal(random_point(7, 3, 5, stream=(1, 2)).mat, random_point(7, 3, 5, stream=(1, 2)).mat)
    assert not np.array_equal(random_point(7, 3, 5, 0).mat, random_point(7, 3, 5, 1).mat)


def test_random_tangent_norm_and_tangency():
    x = random_point(12, 3, 1)
    xi = random_tangent(x, 0.7, 1, stream=9)
    assert abs(xi.norm - 0.7) <= 1e-14
    a = x.mat.T @ xi.ambient
    assert np.abs(a + a.T).max() <= 1e-14


def test_tangent_from_blocks_rejects_non_skew():
    x = random_point(5, 2, 0)
    with pytest.raises(ValueError):
        tangent_from_blocks(x, np.ones((2, 2)), np.zeros((3, 2)))


def test_tangent_ambient_roundtrip():
    x = random_point(8, 3, 2)
    xi = random_tangent(x, 1.3, 2)
    back = tangent_from_ambient(x, xi.ambient)
    assert np.abs(back.omega - xi.omega).max() <= 1e-14
    assert np.abs(back.k - xi.k).max() <= 1e-14


@pytest.mark.parametrize("n,p", [(12, 3), (5, 1), (4, 4), (7, 2)])
def test_metric_trace_form(n, p):
    x = random_point(n, p, 11)
    xi, eta = random_tangent(x, 1.0, 1), random_tangent(x, 2.0, 2)
    direct = np.trace(xi.ambient.T @ (np.eye(n) - 0.5 * x.mat @ x.mat.T) @ eta.ambient)
    assert abs(canonical_inner(x, xi, eta) - direct) <= 1e-12
    assert abs(canonical_inner(x, xi, xi) - xi.norm ** 2) <= 1e-12


def test_metric_rejects_foreign_tangent():
    x, y = random_point(5, 2, 0), random_point(5, 2, 1)
    with pytest.raises(ValueError):
        canonical_inner(x, random_tangent(x, 1, 0), random_tangent(y, 1, 0))


def test_exp_zero_time_returns_base():
    x = random_point(6, 2, 3)
    assert exp_map(x, random_tangent(x, 1.0, 3), 0.0) is x


def test_exp_on_circle():
    x = StiefelPoint(circle_point(0.4))
    xi = tangent_from_ambient(x, 1.1 * np.array([[-math.sin(0.4)], [math.cos(0.4)]]))
    assert abs(xi.norm - 1.1) <= 1e-15
    assert np.abs(exp_map(x, xi).mat - circle_point(1.5)).max() <= 1e-14


@pytest.mark.parametrize("n", [3, 7])
def test_exp_on_sphere_is_great_circle(n):
    x = random_point(n, 1, 4)
    xi = random_tangent(x, 2.3, 4)
    v = xi.ambient
    t = np.linalg.norm(v)
    assert abs(t - 2.3) <= 1e-13
    expected = math.cos(t) * x.mat + math.sin(t) * v / t
    assert np.abs(exp_map(x, xi).mat - expected).max() <= 1e-13


def test_exp_on_orthogonal_group():
    x = random_point(4, 4, 5)
    xi = random_tangent(x, 1.7, 5)
    assert np.abs(exp_map(x, xi).mat - x.mat @ scipy.linalg.expm(xi.omega)).max() <= 1e-13


def test_exp_matches_full_block_exponential():
    x = random_point(9, 3, 6)
    xi = random_tangent(x, 2.0, 6)
    q = np.hstack([x.mat, xi.complement])
    v = np.block([[xi.omega, -xi.k.T], [xi.k, np.zeros((6, 6))]])
    ref = q @ scipy.linalg.expm(0.6 * v)[:, :3]
    assert np.abs(exp_map(x, xi, 0.6).mat - ref).max() <= 1e-13


def test_geodesic_has_constant_canonical_speed():
    x = random_point(8, 2, 7)
    xi = random_tangent(x, 1.5, 7)
    h = 1e-5
    for t in (0.0, 0.3, 0.9):
        y = exp_map(x, xi, t) if t else x
        vel = (exp_map(x, xi, t + h).mat - exp_map(x, xi, t - h).mat) / (2 * h)
        speed2 = np.sum(vel ** 2) - 0.5 * np.sum((y.mat.T @ vel) ** 2)
        assert abs(math.sqrt(speed2) - 1.5) <= 1e-8


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2 ** 31), s=st.floats(0.05, 2.5), t=st.floats(0.05, 0.5))
def test_geodesic_segments_have_proportional_length(seed, s, t):
    from lfgs.geodesics import riemannian_distance

    x = random_point(6, 2, seed)
    xi = random_tangent(x, 1.0, seed)
    a, b = exp_map(x, xi, s), exp_map(x, xi, s + t)
    assert abs(riemannian_distance(a, b, gap_guard=None) - t) <= 1e-8


def test_point_file_roundtrip(tmp_path):
    x = random_point(5, 2, 8)
    f = tmp_path / "x.txt"
    save_point(f, x)
    assert np.array_equal(load_point(f).mat, x.mat)
