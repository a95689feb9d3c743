import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rbfflow.cloud import (CloudError, PointCloud, build_clouds, from_csv,
                           torus_distance, FLAG_BOUNDARY, FLAG_INTERIOR)
from rbfflow.geometry import GeometrySpec, generate


def make_cloud(points, periodic=(False, False), extents=(0.0, 1.0, 0.0, 1.0)):
    points = np.asarray(points, dtype=float)
    n = len(points)
    return PointCloud(points=points, flags=np.zeros(n, dtype=np.int8),
                      normals=np.zeros((n, 2)), groups=np.zeros(n, np.int64),
                      spacing=1.0, area=1.0, periodic=periodic, extents=extents)


def brute_force_knn(points, q, periodic, extents):
    """O(n^2) neighbor oracle with the same minimal-image metric."""
    n = len(points)
    xmin, xmax, ymin, ymax = extents
    span = np.array([xmax - xmin, ymax - ymin])
    out = np.empty((n, q), dtype=int)
    for i in range(n):
        d = points - points[i]
        for ax in range(2):
            if periodic[ax]:
                d[:, ax] -= span[ax] * np.round(d[:, ax] / span[ax])
        dist = np.hypot(d[:, 0], d[:, 1])
        order = np.lexsort((np.arange(n), dist))
        order = order[order != i]
        out[i, 0] = i
        out[i, 1:] = order[: q - 1]
    return out


def test_three_collinear_points_full_cloud():
    pc = make_cloud([[0.0, 0.0], [0.5, 0.0], [1.0, 0.0]])
    pc = build_clouds(pc, 3)
    for i in range(3):
        assert pc.clouds[i, 0] == i
        assert sorted(pc.clouds[i].tolist()) == [0, 1, 2]


def test_periodic_wraparound_neighbor():
    pc = make_cloud([[0.99, 0.5], [0.01, 0.5], [0.5, 0.5]],
                    periodic=(True, True))
    pc = build_clouds(pc, 2)
    # wrapped distance 0.02 beats the in-box 0.49
    assert pc.clouds[0].tolist() == [0, 1]


def test_clouds_match_bruteforce_oracle():
    rng = np.random.default_rng(123)
    pts = rng.random((100, 2))
    pc = make_cloud(pts)
    pc = build_clouds(pc, 12)
    oracle = brute_force_knn(pts.copy(), 12, (False, False), pc.extents)
    assert np.array_equal(pc.clouds, oracle)


def test_clouds_match_bruteforce_oracle_periodic():
    rng = np.random.default_rng(29)
    pts = rng.random((80, 2))
    pc = make_cloud(pts, periodic=(True, True))
    pc = build_clouds(pc, 9)
    oracle = brute_force_knn(pts.copy(), 9, (True, True), pc.extents)
    assert np.array_equal(pc.clouds, oracle)


def test_cloud_distances_nondecreasing():
    pc = generate(GeometrySpec("unit-square", 0.08), seed=4)
    pc = build_clouds(pc, 12)
    pc.validate()
    for i in range(0, pc.n_points, 7):
        d = np.linalg.norm(pc.points[pc.clouds[i]] - pc.points[i], axis=1)
        assert np.all(np.diff(d[1:]) >= -1e-12)


def test_q_larger_than_n_rejected():
    pc = make_cloud([[0.0, 0.0], [1.0, 0.0]])
    with pytest.raises(CloudError):
        build_clouds(pc, 3)


def test_duplicate_points_fail_validation():
    pc = make_cloud([[0.5, 0.5], [0.5, 0.5], [0.1, 0.1]])
    with pytest.raises(CloudError, match="duplicate"):
        pc.validate()


@given(st.integers(0, 2 ** 31 - 1))
@settings(max_examples=30, deadline=None)
def test_torus_metric_axioms(seed):
    rng = np.random.default_rng(seed)
    ext = (0.0, 1.0, 0.0, 1.0)
    p, q, r = rng.random((3, 2))
    dpq = torus_distance(p, q, ext)
    dqp = torus_distance(q, p, ext)
    assert dpq >= 0
    assert abs(dpq - dqp) < 1e-14
    assert torus_distance(p, p, ext) == 0.0
    assert dpq <= torus_distance(p, r, ext) + torus_distance(r, q, ext) + 1e-12


def test_csv_roundtrip(tmp_path):
    pc = generate(GeometrySpec("unit-square", 0.3), seed=2)
    path = tmp_path / "cloud.csv"
    pc.to_csv(path)
    back = from_csv(path)
    assert back.n_points == pc.n_points
    assert np.allclose(back.points, pc.points)
    assert np.array_equal(back.flags, pc.flags)
    assert np.allclose(back.normals, pc.normals)


def test_csv_bit_reproducible(tmp_path):
    pc = generate(GeometrySpec("unit-square", 0.2), seed=9)
    p1 = tmp_path / "a.csv"
    p2 = tmp_path / "b.csv"
    pc.to_csv(p1)
    pc.to_csv(p2)
    assert p1.read_bytes() == p2.read_bytes()
