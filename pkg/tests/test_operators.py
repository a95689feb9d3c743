import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rbfflow.cloud import build_clouds
from rbfflow.geometry import GeometrySpec, generate
from rbfflow.operators import (BasisConfig, IllConditionedSystemError,
                               OperatorError, UnderdeterminedSystemError,
                               assemble_local, build_ghost_operators,
                               build_operator_set, eval_matrix,
                               monomial_count, operator_weights, phs,
                               reproduction_max_error, transform_cloud)


def test_monomial_count_values():
    assert monomial_count(2, 2) == 6
    assert monomial_count(5, 2) == 21
    assert monomial_count(0, 2) == 1
    assert monomial_count(3, 1) == 4


def test_phs_values():
    assert phs(0.0, 1) == 0.0
    assert phs(1.0, 3) == 1.0
    assert phs(2.0, 1) == 8.0
    with pytest.raises(OperatorError):
        phs(1.0, 0)


def test_transform_1d_shifted():
    t, tr = transform_cloud(np.array([[2.0], [3.0]]))
    assert np.allclose(t.ravel(), [0.0, 1.0])
    assert tr.scale[0] == 1.0
    assert tr.shift[0] == 2.0


def test_transform_identity_on_unit_box():
    pts = np.array([[0.0, 0.0], [1.0, 0.3], [0.4, 1.0]])
    t, tr = transform_cloud(pts)
    assert np.allclose(tr.shift, [0.0, 0.0])
    assert np.allclose(tr.scale, [1.0, 1.0])
    assert np.allclose(t, pts)


def test_transform_scaled_domain():
    pts = np.linspace(0.0, 0.1, 5)[:, None]
    t, tr = transform_cloud(pts)
    assert np.isclose(tr.scale[0], 0.1)
    assert np.isclose(t.max(), 1.0) and np.isclose(t.min(), 0.0)


def test_transform_degenerate_axis():
    pts = np.array([[0.0, 0.5], [1.0, 0.5], [2.0, 0.5]])
    t, tr = transform_cloud(pts)
    assert tr.scale[1] == 1.0
    assert np.allclose(t[:, 1], 0.0)


def test_assemble_minimal_system():
    system = assemble_local(np.array([[0.3]]), BasisConfig(degree=0, dim=1))
    assert np.allclose(system.matrix, [[0.0, 1.0], [1.0, 0.0]])
    assert math.isfinite(system.cond_estimate)


def test_condition_grows_with_degree():
    conds = []
    for k in range(2, 7):
        pts = np.linspace(0.0, 1.0, 2 * (k + 1))[:, None]
        system = assemble_local(pts, BasisConfig(degree=k, dim=1))
        conds.append(system.cond_estimate)
    assert all(b > a for a, b in zip(conds, conds[1:]))


def test_duplicated_points_raise():
    pts = np.array([[0.0, 0.0], [0.5, 0.5], [0.5, 0.5], [1.0, 0.0],
                    [0.0, 1.0], [1.0, 1.0], [0.2, 0.7]])
    with pytest.raises(IllConditionedSystemError):
        assemble_local(pts, BasisConfig(degree=1))


def test_underdetermined_raises_by_default():
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    with pytest.raises(UnderdeterminedSystemError):
        assemble_local(pts, BasisConfig(degree=2))


def test_laplacian_1d_three_point_stencil():
    h = 0.123
    pts = np.array([[0.0], [-h], [h]])
    system = assemble_local(pts, BasisConfig(degree=2, dim=1))
    w = operator_weights(system, "laplacian")
    assert np.allclose(w * h * h, [-2.0, 1.0, 1.0], rtol=1e-10)


def test_laplacian_cross_matches_classical_stencil():
    # q=5 < m=6: solvable by the minimum-norm route; the weight part is
    # unique because only the xy-monomial multiplier is unconstrained
    h = 0.37
    pts = np.array([[0.0, 0.0], [h, 0.0], [-h, 0.0], [0.0, h], [0.0, -h]])
    system = assemble_local(pts, BasisConfig(degree=2),
                            allow_underdetermined=True)
    w = operator_weights(system, "laplacian")
    assert np.allclose(w * h * h, [-4.0, 1.0, 1.0, 1.0, 1.0], atol=1e-9)


def test_derivative_of_constant_is_zero():
    rng = np.random.default_rng(8)
    pts = rng.uniform(-1, 1, (12, 2))
    system = assemble_local(pts, BasisConfig(degree=2))
    for op in ("ddx", "ddy", "laplacian"):
        w = operator_weights(system, op)
        assert abs(w.sum()) <= 1e-10 * np.abs(w).sum()


def test_translation_invariance_of_weights():
    rng = np.random.default_rng(15)
    pts = rng.uniform(0, 1, (20, 2))
    cfg = BasisConfig(degree=3)
    w0 = operator_weights(assemble_local(pts, cfg), "ddx")
    w1 = operator_weights(assemble_local(pts + 37.0, cfg), "ddx")
    assert np.allclose(w0, w1, rtol=1e-9, atol=1e-9 * np.abs(w0).max())


def test_transform_improves_conditioning():
    # shifted/scaled 1-D clouds: transformed system must not be worse
    for k in range(2, 7):
        pts = np.linspace(0.0, 1.0, 2 * (k + 1))
        for variant in (pts + 2.0, pts * 0.1):
            cfg = BasisConfig(degree=k, dim=1)
            tsys = assemble_local(variant[:, None], cfg, cond_limit=np.inf)
            q = len(variant)
            m = k + 1
            raw = np.zeros((q + m, q + m))
            r = np.abs(variant[:, None] - variant[None, :])
            raw[:q, :q] = r ** 3
            pmat = variant[:, None] ** np.arange(m)[None, :]
            raw[:q, q:] = pmat
            raw[q:, :q] = pmat.T
            raw_cond = np.linalg.cond(raw, 1)
            assert tsys.cond_estimate <= raw_cond * (1 + 1e-9)


def test_eval_at_node_reproduces_value():
    rng = np.random.default_rng(21)
    pts = rng.uniform(0, 1, (14, 2))
    system = assemble_local(pts, BasisConfig(degree=2))
    w = operator_weights(system, "eval", point=pts[3])
    expect = np.zeros(14)
    expect[3] = 1.0
    assert np.allclose(w, expect, atol=1e-10)


@given(st.integers(0, 10_000))
@settings(max_examples=25, deadline=None)
def test_polynomial_reproduction_random_clouds(seed):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(2, 5))
    cfg = BasisConfig(degree=k)
    q = cfg.cloud_size
    pts = rng.uniform(-0.5, 0.5, (q, 2))
    system = assemble_local(pts, cfg, cond_limit=1e15)
    exps = [(i, d - i) for d in range(k + 1) for i in range(d, -1, -1)]
    wx = operator_weights(system, "ddx")
    wl = operator_weights(system, "laplacian")
    c = pts[0]
    for i, j in exps:
        s = pts[:, 0] ** i * pts[:, 1] ** j
        ddx = i * c[0] ** max(i - 1, 0) * c[1] ** j if i else 0.0
        lap = 0.0
        if i > 1:
            lap += i * (i - 1) * c[0] ** (i - 2) * c[1] ** j
        if j > 1:
            lap += j * (j - 1) * c[0] ** i * c[1] ** (j - 2)
        assert abs(wx @ s - ddx) < 1e-8 * max(1.0, np.abs(s).max() / 0.1)
        assert abs(wl @ s - lap) < 1e-8 * max(1.0, np.abs(s).max() / 0.01)


@pytest.fixture(scope="module")
def square_ops():
    cfg = BasisConfig(degree=3)
    pc = generate(GeometrySpec("unit-square", 0.08), seed=6)
    pc = build_clouds(pc, cfg.cloud_size)
    return pc, build_operator_set(pc, cfg), cfg


def test_operator_set_reproduction(square_ops):
    pc, ops, cfg = square_ops
    assert reproduction_max_error(ops, pc) < 1e-8


def test_operator_set_row_structure(square_ops):
    pc, ops, cfg = square_ops
    q = cfg.cloud_size
    for mat in (ops.dx, ops.dy, ops.lap):
        assert np.all(np.diff(mat.indptr) == q)


def test_operator_requires_clouds():
    pc = generate(GeometrySpec("unit-square", 0.2), seed=6)
    with pytest.raises(OperatorError):
        build_operator_set(pc, BasisConfig(degree=2))


def test_operator_rejects_wrong_q(square_ops):
    pc, _, _ = square_ops
    with pytest.raises(OperatorError, match="q = 2m"):
        build_operator_set(pc, BasisConfig(degree=4))


def test_eval_matrix_interpolates_smooth_field(square_ops):
    pc, ops, cfg = square_ops
    f = np.sin(2 * pc.points[:, 0]) * np.cos(pc.points[:, 1])
    pts = np.array([[0.37, 0.41], [0.62, 0.58], [0.11, 0.83]])
    e = eval_matrix(pc, cfg, pts)
    exact = np.sin(2 * pts[:, 0]) * np.cos(pts[:, 1])
    assert np.abs(e @ f - exact).max() < 5e-5


def test_eval_matrix_derivative(square_ops):
    pc, ops, cfg = square_ops
    f = pc.points[:, 0] ** 2 * pc.points[:, 1]
    pts = np.array([[0.4, 0.6], [0.55, 0.25]])
    ex = eval_matrix(pc, cfg, pts, op="ddx")
    assert np.abs(ex @ f - 2 * pts[:, 0] * pts[:, 1]).max() < 1e-9


def test_ghost_operators_shapes(square_ops):
    pc, ops, cfg = square_ops
    g = build_ghost_operators(pc, cfg)
    nb = len(pc.boundary_idx)
    assert g.n_ghost == nb
    assert g.dx.shape == (pc.n_points, pc.n_points + nb)
    assert g.dn.shape == (nb, pc.n_points + nb)
    # ghosts sit outside the unit square
    inside = ((g.ghost_points >= 0) & (g.ghost_points <= 1)).all(axis=1)
    assert not inside.any()


def test_ghost_rows_reproduce_laplacian(square_ops):
    pc, ops, cfg = square_ops
    g = build_ghost_operators(pc, cfg)
    aug = np.vstack([pc.points, g.ghost_points])
    f = aug[:, 0] ** 3 + aug[:, 1] ** 3
    lap_exact = 6 * pc.points[:, 0] + 6 * pc.points[:, 1]
    assert np.abs(g.lap @ f - lap_exact).max() < 1e-7
