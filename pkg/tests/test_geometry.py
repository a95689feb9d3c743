import numpy as np
import pytest

from rbfflow.cloud import FLAG_BOUNDARY, FLAG_INTERIOR
from rbfflow.geometry import GeometryError, GeometrySpec, generate


def test_unit_square_coarse_limit():
    pc = generate(GeometrySpec("unit-square", 0.5), seed=1)
    assert pc.n_points == 9
    assert (pc.flags == FLAG_BOUNDARY).sum() == 8
    assert (pc.flags == FLAG_INTERIOR).sum() == 1


def test_annulus_point_budget():
    # 1073-point target: spacing from dx = sqrt(flow area / n)
    area = np.pi * (2.0 ** 2 - 1.0 ** 2)
    h = np.sqrt(area / 1073)
    pc = generate(GeometrySpec("annulus", h, params=dict(r1=1.0, r2=2.0)), seed=1)
    assert abs(pc.n_points - 1073) / 1073 < 0.15


def test_unit_square_fine_budget():
    pc = generate(GeometrySpec("unit-square", 0.0578), seed=1)
    assert abs(pc.n_points - 299) / 299 < 0.15


def test_boundary_normals_unit_and_outward():
    pc = generate(GeometrySpec("annulus", 0.2, params=dict(r1=1.0, r2=2.0)), seed=2)
    b = pc.boundary_idx
    norms = np.linalg.norm(pc.normals[b], axis=1)
    assert np.abs(norms - 1.0).max() < 1e-12
    r = np.linalg.norm(pc.points[b], axis=1)
    outward = np.einsum("ij,ij->i", pc.normals[b], pc.points[b] / r[:, None])
    outer = r > 1.5
    assert np.all(outward[outer] > 0.99)       # outer circle: +r direction
    assert np.all(outward[~outer] < -0.99)     # inner circle: into the hole


def test_square_corner_normals_diagonal():
    pc = generate(GeometrySpec("unit-square", 0.5), seed=1)
    corners = {(0.0, 0.0): (-1, -1), (1.0, 0.0): (1, -1),
               (1.0, 1.0): (1, 1), (0.0, 1.0): (-1, 1)}
    for i in pc.boundary_idx:
        key = tuple(np.round(pc.points[i], 12))
        if key in corners:
            want = np.array(corners[key]) / np.sqrt(2.0)
            assert np.allclose(pc.normals[i], want, atol=1e-12)


def test_infeasible_eccentricity_rejected():
    with pytest.raises(GeometryError, match="eccentricity"):
        GeometrySpec("eccentric-annulus", 0.1,
                     params=dict(r1=1.0, r2=2.0, d=1.5)).build()


def test_bad_radii_rejected():
    with pytest.raises(GeometryError):
        GeometrySpec("annulus", 0.1, params=dict(r1=2.0, r2=1.0)).build()


def test_unknown_kind_rejected():
    with pytest.raises(GeometryError):
        GeometrySpec("hexagon", 0.1)


def test_generation_bit_identical_for_seed():
    a = generate(GeometrySpec("unit-square", 0.07), seed=42)
    b = generate(GeometrySpec("unit-square", 0.07), seed=42)
    assert np.array_equal(a.points, b.points)
    assert np.array_equal(a.flags, b.flags)
    c = generate(GeometrySpec("unit-square", 0.07), seed=43)
    assert not np.array_equal(a.points, c.points)


def test_periodic_square_has_no_boundary():
    pc = generate(GeometrySpec("doubly-periodic-square", 0.05), seed=3)
    assert len(pc.boundary_idx) == 0
    assert pc.periodic == (True, True)
    assert abs(pc.n_points - 400) / 400 < 0.15


def test_min_distance_respected():
    pc = generate(GeometrySpec("unit-square", 0.1), seed=7)
    from scipy.spatial import cKDTree
    d, _ = cKDTree(pc.points).query(pc.points, k=2)
    assert d[:, 1].min() > 1e-12 * pc.spacing


def test_cylinder_channel_grading():
    spec = GeometrySpec("square-with-cylinder", 0.15,
                        params=dict(x0=-5.0, x1=10.0, y0=-5.0, y1=5.0,
                                    diameter=1.0), coarsen=5.0)
    pc = generate(spec, seed=5)
    groups = set(pc.groups[pc.boundary_idx].tolist())
    assert groups == {1, 2, 3, 4}
    r = np.linalg.norm(pc.points[pc.interior_idx], axis=1)
    from scipy.spatial import cKDTree
    d, _ = cKDTree(pc.points).query(pc.points[pc.interior_idx], k=2)
    near = r < 1.5
    far = r > 6.0
    # far-field spacing noticeably coarser than near the cylinder
    assert d[far, 1].mean() > 2.5 * d[near, 1].mean()
