"""Polyharmonic-spline RBF interpolation systems and derivative weights.

Each point's local cloud carries a dense symmetric system

    [ Phi  P ] [lambda]   [s]
    [ P^T  0 ] [gamma ] = [0]

with Phi the pairwise spline matrix phi(r) = r^(2a+1) and P the appended
monomials up to total degree k. Applying a linear operator to the interpolant
and collocating at the stencil center yields one weight row per point; the
rows are assembled into sparse differentiation matrices. Cloud coordinates
are shifted and scaled per axis into [0, 1] before assembly, which keeps the
system condition number low; the scaling is undone on the weights through the
chain rule, so the derivative values themselves are unaffected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.linalg import lapack

from .cloud import PointCloud

_GETRF = lapack.dgetrf
_GECON = lapack.dgecon
_GETRS = lapack.dgetrs

DEFAULT_COND_LIMIT = 1e14


class OperatorError(ValueError):
    pass


class UnderdeterminedSystemError(OperatorError):
    """Fewer cloud points than appended monomials (q < m)."""


class IllConditionedSystemError(OperatorError):
    """Local system condition estimate beyond the configured limit."""


def monomial_count(degree: int, dim: int = 2) -> int:
    """Number of monomials of total degree <= degree in `dim` variables."""
    if degree < 0 or dim < 1:
        raise OperatorError(f"invalid degree={degree} / dim={dim}")
    return math.comb(degree + dim, degree)


def monomial_exponents(degree: int, dim: int = 2) -> np.ndarray:
    """Exponent rows in graded order: 1, x, y, x^2, xy, y^2, ..."""
    if dim == 1:
        return np.arange(degree + 1, dtype=np.int64)[:, None]
    if dim != 2:
        raise OperatorError("only dim 1 and 2 are supported")
    rows = [(d - j, j) for d in range(degree + 1) for j in range(d + 1)]
    return np.array(rows, dtype=np.int64)


def phs(r, a: int = 1):
    """Polyharmonic spline phi(r) = r^(2a+1); exactly zero at r = 0."""
    if a < 1:
        raise OperatorError("PHS exponent a must be a natural number >= 1")
    return np.asarray(r, dtype=float) ** (2 * a + 1)


@dataclass(frozen=True)
class BasisConfig:
    """PHS exponent and appended polynomial degree (phi(r) = r^(2a+1))."""

    degree: int
    phs_exponent: int = 1
    dim: int = 2

    def __post_init__(self):
        if self.phs_exponent < 1:
            raise OperatorError("phs_exponent must be >= 1")
        if self.degree < 0:
            raise OperatorError("degree must be >= 0")
        if self.dim not in (1, 2):
            raise OperatorError("dim must be 1 or 2")

    @property
    def monomials(self) -> int:
        return monomial_count(self.degree, self.dim)

    @property
    def cloud_size(self) -> int:
        """Flow-solver cloud size: twice the monomial count."""
        return 2 * self.monomials


@dataclass(frozen=True)
class CloudTransform:
    """Per-axis affine map x -> (x - shift) / scale onto [0, 1]."""

    shift: np.ndarray
    scale: np.ndarray

    def to_local(self, pts: np.ndarray) -> np.ndarray:
        return (np.asarray(pts, dtype=float) - self.shift) / self.scale


def transform_cloud(coords: np.ndarray):
    """Shift/scale cloud coordinates into the unit box, axis by axis.

    A degenerate axis (all coordinates equal) keeps scale 1 and is only
    shifted, so one-dimensional clouds embedded in 2-D stay well posed.
    """
    coords = np.atleast_2d(np.asarray(coords, dtype=float))
    lo = coords.min(axis=0)
    hi = coords.max(axis=0)
    span = hi - lo
    scale = np.where(span > 0.0, span, 1.0)
    tr = CloudTransform(shift=lo, scale=scale)
    return tr.to_local(coords), tr


def _monomial_basis(t: np.ndarray, exps: np.ndarray) -> np.ndarray:
    out = t[..., 0:1] ** exps[:, 0]
    for axis in range(1, exps.shape[1]):
        out = out * t[..., axis:axis + 1] ** exps[:, axis]
    return out


def _monomial_derivative(tc: np.ndarray, exps: np.ndarray, axis: int,
                         order: int) -> np.ndarray:
    """d^order/dx_axis^order of each monomial at points tc (..., d)."""
    e = exps[:, axis]
    coef = np.ones(len(exps))
    ered = e.copy()
    for _ in range(order):
        coef = coef * ered
        ered = np.maximum(ered - 1, 0)
    vals = coef * tc[..., axis:axis + 1] ** ered
    for other in range(exps.shape[1]):
        if other != axis:
            vals = vals * tc[..., other:other + 1] ** exps[:, other]
    return vals


def _phs_columns(rel: np.ndarray, p: int, kind: str) -> np.ndarray:
    """Operator applied to phi(|x - x_j|), evaluated at the stencil center.

    ``rel`` holds center-minus-node displacements (..., q, d) in transformed
    coordinates; derivatives follow from phi(r) = r^p with d phi/dx =
    p r^(p-2) dx and d2 phi/dx2 = p ((p-2) r^(p-4) dx^2 + r^(p-2)).
    All expressions vanish at r = 0 for p >= 3.
    """
    r = np.linalg.norm(rel, axis=-1)
    pos = r > 0.0
    safe = np.where(pos, r, 1.0)
    if kind == "eval":
        return r ** p
    if kind in ("ddx", "ddy"):
        axis = 0 if kind == "ddx" else 1
        return np.where(pos, p * safe ** (p - 2) * rel[..., axis], 0.0)
    if kind in ("dxx", "dyy"):
        axis = 0 if kind == "dxx" else 1
        val = p * ((p - 2) * safe ** (p - 4) * rel[..., axis] ** 2
                   + safe ** (p - 2))
        return np.where(pos, val, 0.0)
    raise OperatorError(f"unknown PHS column kind {kind!r}")


# transformed-space columns required per requested operator
_OP_COLUMNS = {
    "eval": ("eval",),
    "ddx": ("ddx",),
    "ddy": ("ddy",),
    "laplacian": ("dxx", "dyy"),
}


@dataclass
class LocalSystem:
    """Assembled (q+m)x(q+m) cloud system with its coordinate transform."""

    coords: np.ndarray        # original cloud coordinates (q, d)
    tcoords: np.ndarray       # transformed coordinates in [0, 1]^d
    transform: CloudTransform
    matrix: np.ndarray
    config: BasisConfig
    cond_estimate: float
    lu: np.ndarray | None = None
    piv: np.ndarray | None = None

    @property
    def q(self) -> int:
        return len(self.coords)

    @property
    def underdetermined(self) -> bool:
        return self.lu is None


def _assemble_matrix(tcoords: np.ndarray, exps: np.ndarray, p: int) -> np.ndarray:
    q = len(tcoords)
    m = len(exps)
    r = np.linalg.norm(tcoords[:, None, :] - tcoords[None, :, :], axis=-1)
    a = np.zeros((q + m, q + m))
    a[:q, :q] = r ** p
    pmat = _monomial_basis(tcoords, exps)
    a[:q, q:] = pmat
    a[q:, :q] = pmat.T
    return a


def assemble_local(coords: np.ndarray, config: BasisConfig,
                   cond_limit: float = DEFAULT_COND_LIMIT,
                   allow_underdetermined: bool = False) -> LocalSystem:
    """Build and factorize the local interpolation system for one cloud.

    Raises UnderdeterminedSystemError when the cloud has fewer points than
    appended monomials (unless explicitly allowed, in which case weight
    solves fall back to minimum-norm least squares) and
    IllConditionedSystemError when the 1-norm condition estimate exceeds
    ``cond_limit`` (e.g. duplicated points).
    """
    coords = np.atleast_2d(np.asarray(coords, dtype=float))
    if coords.shape[1] != config.dim:
        raise OperatorError(
            f"coordinate dim {coords.shape[1]} != config dim {config.dim}")
    q = len(coords)
    m = config.monomials
    if q < m and not allow_underdetermined:
        raise UnderdeterminedSystemError(
            f"cloud size q={q} < m={m} appended monomials "
            "(underdetermined polynomial constraint)")
    tcoords, tr = transform_cloud(coords)
    exps = monomial_exponents(config.degree, config.dim)
    a = _assemble_matrix(tcoords, exps, 2 * config.phs_exponent + 1)

    if q >= m:
        anorm = np.abs(a).sum(axis=0).max()
        lu, piv, info = _GETRF(a, overwrite_a=False)
        if info > 0:
            cond = math.inf
        else:
            rcond, _ = _GECON(lu, anorm, norm="1")
            cond = 1.0 / rcond if rcond > 0 else math.inf
        if cond > cond_limit:
            raise IllConditionedSystemError(
                f"local system condition estimate {cond:.3e} exceeds "
                f"limit {cond_limit:.1e}")
        return LocalSystem(coords, tcoords, tr, a, config, cond, lu, piv)

    # underdetermined path: keep the raw matrix, solve by least squares later
    sv = np.linalg.svd(a, compute_uv=False)
    # rank deficiency from duplicated points shows up in the Phi block
    if q > 1:
        dist = np.linalg.norm(tcoords[:, None, :] - tcoords[None, :, :], axis=-1)
        np.fill_diagonal(dist, np.inf)
        if dist.min() == 0.0:
            raise IllConditionedSystemError(
                "duplicated cloud points make the local system singular")
    cond = sv[0] / sv[-1] if sv[-1] > 0 else math.inf
    return LocalSystem(coords, tcoords, tr, a, config, cond)


def _rhs_columns(system_tc: np.ndarray, tc: np.ndarray, exps: np.ndarray,
                 p: int, kinds) -> np.ndarray:
    """Stack transformed-space RHS columns for the requested column kinds."""
    rel = tc[None, :] - system_tc
    cols = []
    axis_of = {"ddx": 0, "ddy": 1, "dxx": 0, "dyy": 1}
    for kind in kinds:
        bphi = _phs_columns(rel, p, kind)
        if kind == "eval":
            bpoly = _monomial_basis(tc[None, :], exps)[0]
        else:
            order = 1 if kind in ("ddx", "ddy") else 2
            bpoly = _monomial_derivative(tc[None, :], exps, axis_of[kind], order)[0]
        cols.append(np.concatenate([bphi, bpoly]))
    return np.column_stack(cols)


def operator_weights(system: LocalSystem, op: str,
                     point: np.ndarray | None = None) -> np.ndarray:
    """Stencil weights for an operator at a point, in original coordinates.

    ``op`` is one of ``ddx``, ``ddy``, ``laplacian`` or ``eval``; ``point``
    defaults to the first cloud point (the stencil center). Derivative
    weights are chain-rule corrected for the cloud transform, so they apply
    directly to nodal values in the original coordinates.
    """
    cfg = system.config
    if cfg.dim == 1 and op == "ddy":
        raise OperatorError("ddy undefined for one-dimensional systems")
    if op not in _OP_COLUMNS:
        raise OperatorError(f"unknown operator {op!r}")
    kinds = _OP_COLUMNS[op]
    if cfg.dim == 1 and op == "laplacian":
        kinds = ("dxx",)
    point = system.coords[0] if point is None else np.asarray(point, dtype=float)
    tc = system.transform.to_local(point[None, :])[0]
    exps = monomial_exponents(cfg.degree, cfg.dim)
    b = _rhs_columns(system.tcoords, tc, exps, 2 * cfg.phs_exponent + 1, kinds)

    if not system.underdetermined:
        w, info = _GETRS(system.lu, system.piv, b)
        if info != 0:
            raise IllConditionedSystemError("LU back substitution failed")
    else:
        w, _, _, _ = np.linalg.lstsq(system.matrix, b, rcond=None)
        resid = np.linalg.norm(system.matrix @ w - b, axis=0)
        bnorm = np.linalg.norm(b, axis=0)
        if np.any(resid > 1e-8 * np.maximum(bnorm, 1.0)):
            raise IllConditionedSystemError(
                "underdetermined system is inconsistent for this operator "
                f"(residual {resid.max():.3e})")
    w = w[:system.q]

    scale = system.transform.scale
    if op == "eval":
        return w[:, 0]
    if op == "ddx":
        return w[:, 0] / scale[0]
    if op == "ddy":
        return w[:, 0] / scale[1]
    if cfg.dim == 1:
        return w[:, 0] / scale[0] ** 2
    return w[:, 0] / scale[0] ** 2 + w[:, 1] / scale[1] ** 2


@dataclass
class OperatorSet:
    """Sparse d/dx, d/dy and Laplacian matrices over a point cloud.

    ``dn`` holds the outward normal-derivative rows n . grad for boundary
    points (shape: n_boundary x n_points, aligned with ``boundary_idx``).
    ``cond`` records the per-cloud condition estimates.
    """

    dx: sp.csr_matrix
    dy: sp.csr_matrix
    lap: sp.csr_matrix
    dn: sp.csr_matrix
    boundary_idx: np.ndarray
    cond: np.ndarray
    config: BasisConfig
    q: int

    @property
    def n_points(self) -> int:
        return self.dx.shape[0]


def _batched_rows(rel_nodes: np.ndarray, rel_eval: np.ndarray,
                  config: BasisConfig, cond_limit: float, kinds,
                  label: str = "point"):
    """Weights for a batch of 2-D stencils sharing one cloud size.

    ``rel_nodes``: (B, q, 2) node positions relative to a per-stencil origin;
    ``rel_eval``: (B, 2) evaluation positions in the same frame. Returns the
    transformed-space weight columns (B, q, n_kinds) and per-axis scales
    (B, 2); callers apply the chain rule per requested operator.
    """
    bsz, q, _ = rel_nodes.shape
    exps = monomial_exponents(config.degree, 2)
    m = len(exps)
    if q < m:
        raise UnderdeterminedSystemError(f"cloud size q={q} < m={m}")
    p = 2 * config.phs_exponent + 1

    lo = rel_nodes.min(axis=1)
    hi = rel_nodes.max(axis=1)
    span = hi - lo
    span = np.where(span > 0.0, span, 1.0)
    t = (rel_nodes - lo[:, None, :]) / span[:, None, :]
    tc = (rel_eval - lo) / span

    diff = t[:, :, None, :] - t[:, None, :, :]
    r = np.sqrt((diff ** 2).sum(axis=-1))
    pmat = _monomial_basis(t, exps)

    a = np.zeros((bsz, q + m, q + m))
    a[:, :q, :q] = r ** p
    a[:, :q, q:] = pmat
    a[:, q:, :q] = pmat.transpose(0, 2, 1)

    rel = tc[:, None, :] - t
    cols = []
    axis_of = {"ddx": 0, "ddy": 1, "dxx": 0, "dyy": 1}
    for kind in kinds:
        bphi = _phs_columns(rel, p, kind)
        if kind == "eval":
            bpoly = _monomial_basis(tc, exps)
        else:
            order = 1 if kind in ("ddx", "ddy") else 2
            bpoly = _monomial_derivative(tc, exps, axis_of[kind], order)
        cols.append(np.concatenate([bphi, bpoly], axis=1))
    b = np.stack(cols, axis=-1)  # (B, q+m, n_kinds)

    weights = np.empty((bsz, q, len(kinds)))
    conds = np.empty(bsz)
    for i in range(bsz):
        ai = a[i]
        anorm = np.abs(ai).sum(axis=0).max()
        lu, piv, info = _GETRF(ai, overwrite_a=True)
        if info > 0:
            raise IllConditionedSystemError(f"{label} {i}: singular local system")
        rcond, _ = _GECON(lu, anorm, norm="1")
        cond = 1.0 / rcond if rcond > 0 else math.inf
        if cond > cond_limit:
            raise IllConditionedSystemError(
                f"{label} {i}: condition estimate {cond:.3e} exceeds "
                f"{cond_limit:.1e}")
        conds[i] = cond
        x, info = _GETRS(lu, piv, b[i])
        if info != 0:
            raise IllConditionedSystemError(f"{label} {i}: back substitution failed")
        weights[i] = x[:q]
    return weights, conds, span


def build_operator_set(cloud: PointCloud, config: BasisConfig,
                       cond_limit: float = DEFAULT_COND_LIMIT,
                       require_2m: bool = True,
                       allow_underdetermined: bool = False,
                       chunk: int = 1024) -> OperatorSet:
    """Assemble sparse Dx, Dy and Laplacian matrices for a whole cloud.

    The weight rows depend only on the point coordinates, so the matrices
    are computed once per (cloud, basis) pair and reused for every field and
    every time step. Boundary points additionally get an outward
    normal-derivative row combining their Dx and Dy rows.
    """
    if cloud.clouds is None:
        raise OperatorError("build_clouds must be called before building operators")
    if config.dim != 2:
        raise OperatorError("operator sets are two-dimensional")
    if config.degree < config.phs_exponent:
        raise OperatorError(
            f"flow operators need degree k >= PHS exponent a, got "
            f"k={config.degree}, a={config.phs_exponent}")
    n = cloud.n_points
    q = cloud.q
    if require_2m and q != config.cloud_size:
        raise OperatorError(
            f"clouds built with q={q}, expected q = 2m = {config.cloud_size}")

    wx = np.empty((n, q))
    wy = np.empty((n, q))
    wl = np.empty((n, q))
    cond = np.empty(n)
    if q < config.monomials:
        if not allow_underdetermined:
            raise UnderdeterminedSystemError(
                f"cloud size q={q} < m={config.monomials}; pass "
                "allow_underdetermined=True for the least-squares fallback")
        # tiny-cloud debug path: per-point minimum-norm solves
        for i in range(n):
            coords = cloud.points[cloud.clouds[i]]
            system = assemble_local(coords, config, cond_limit=np.inf,
                                    allow_underdetermined=True)
            wx[i] = operator_weights(system, "ddx")
            wy[i] = operator_weights(system, "ddy")
            wl[i] = operator_weights(system, "laplacian")
            cond[i] = system.cond_estimate
        return _operator_set_from_rows(cloud, config, wx, wy, wl, cond, q)

    kinds = ("ddx", "ddy", "dxx", "dyy")
    for start in range(0, n, chunk):
        idx = np.arange(start, min(start + chunk, n))
        nbrs = cloud.clouds[idx]
        rel = cloud.points[nbrs] - cloud.points[idx][:, None, :]
        rel = cloud.wrap(rel)
        try:
            w, c, span = _batched_rows(rel, np.zeros((len(idx), 2)), config,
                                       cond_limit, kinds)
        except IllConditionedSystemError as exc:
            raise IllConditionedSystemError(
                f"operator build failed near point index {start}: {exc}") from exc
        wx[idx] = w[:, :, 0] / span[:, None, 0]
        wy[idx] = w[:, :, 1] / span[:, None, 1]
        wl[idx] = w[:, :, 2] / span[:, None, 0] ** 2 + w[:, :, 3] / span[:, None, 1] ** 2
        cond[idx] = c

    return _operator_set_from_rows(cloud, config, wx, wy, wl, cond, q)


def _operator_set_from_rows(cloud, config, wx, wy, wl, cond, q) -> OperatorSet:
    n = cloud.n_points
    rows = np.repeat(np.arange(n), q)
    cols = cloud.clouds.ravel()
    shape = (n, n)
    dx = sp.csr_matrix((wx.ravel(), (rows, cols)), shape=shape)
    dy = sp.csr_matrix((wy.ravel(), (rows, cols)), shape=shape)
    lap = sp.csr_matrix((wl.ravel(), (rows, cols)), shape=shape)

    bidx = cloud.boundary_idx
    if bidx.size:
        nx = sp.diags(cloud.normals[bidx, 0])
        ny = sp.diags(cloud.normals[bidx, 1])
        dn = (nx @ dx[bidx] + ny @ dy[bidx]).tocsr()
    else:
        dn = sp.csr_matrix((0, n))
    return OperatorSet(dx=dx, dy=dy, lap=lap, dn=dn, boundary_idx=bidx,
                       cond=cond, config=config, q=q)


@dataclass
class GhostOperators:
    """Pressure operators on the ghost-augmented point set.

    One ghost node sits outside each boundary node (offset by the local
    spacing along the outward normal). The matrices have one row per real
    node and columns over [real nodes, ghost nodes], so the Poisson
    equation can be collocated at boundary nodes as well, with the ghost
    pressures balancing the Neumann rows. Collocating the PDE on the
    boundary removes the spurious near-null pressure modes of the
    all-Neumann system that otherwise destabilize the projection step.
    """

    ghost_points: np.ndarray     # (nb, 2)
    dx: sp.csr_matrix            # (n, n + nb)
    dy: sp.csr_matrix
    lap: sp.csr_matrix
    dn: sp.csr_matrix            # (nb, n + nb) normal-derivative rows
    boundary_idx: np.ndarray

    @property
    def n_ghost(self) -> int:
        return len(self.ghost_points)


def build_ghost_operators(cloud: PointCloud, config: BasisConfig,
                          cond_limit: float = DEFAULT_COND_LIMIT,
                          chunk: int = 1024) -> GhostOperators | None:
    """Derivative rows for all real nodes over the ghost-augmented set.

    Returns None for clouds without boundary points (periodic domains need
    no ghosts)."""
    from scipy.spatial import cKDTree

    bidx = cloud.boundary_idx
    if bidx.size == 0:
        return None
    if cloud.clouds is None:
        raise OperatorError("build_clouds must be called first")
    n = cloud.n_points
    # offset each ghost by the distance to the boundary node's nearest neighbor
    d_nn = np.linalg.norm(
        cloud.wrap(cloud.points[cloud.clouds[bidx, 1]] - cloud.points[bidx]), axis=1)
    ghosts = cloud.points[bidx] + d_nn[:, None] * cloud.normals[bidx]
    aug = np.vstack([cloud.points, ghosts])
    q = min(config.cloud_size, len(aug))
    tree = cKDTree(aug)
    _, nbrs = tree.query(aug[:n], k=q)

    wx = np.empty((n, q))
    wy = np.empty((n, q))
    wl = np.empty((n, q))
    kinds = ("ddx", "ddy", "dxx", "dyy")
    for start in range(0, n, chunk):
        idx = np.arange(start, min(start + chunk, n))
        rel = aug[nbrs[idx]] - aug[idx][:, None, :]
        w, _, span = _batched_rows(rel, np.zeros((len(idx), 2)), config,
                                   cond_limit, kinds, label="ghost row")
        wx[idx] = w[:, :, 0] / span[:, None, 0]
        wy[idx] = w[:, :, 1] / span[:, None, 1]
        wl[idx] = w[:, :, 2] / span[:, None, 0] ** 2 + w[:, :, 3] / span[:, None, 1] ** 2

    rows = np.repeat(np.arange(n), q)
    cols = nbrs.ravel()
    shape = (n, n + len(bidx))
    dx = sp.csr_matrix((wx.ravel(), (rows, cols)), shape=shape)
    dy = sp.csr_matrix((wy.ravel(), (rows, cols)), shape=shape)
    lap = sp.csr_matrix((wl.ravel(), (rows, cols)), shape=shape)
    nx = sp.diags(cloud.normals[bidx, 0])
    ny = sp.diags(cloud.normals[bidx, 1])
    dn = (nx @ dx[bidx] + ny @ dy[bidx]).tocsr()
    return GhostOperators(ghost_points=ghosts, dx=dx, dy=dy, lap=lap, dn=dn,
                          boundary_idx=bidx)


def neighbor_clouds(cloud: PointCloud, points: np.ndarray, q: int) -> np.ndarray:
    """Indices of the q nearest cloud nodes to each external point."""
    from scipy.spatial import cKDTree

    points = np.atleast_2d(np.asarray(points, dtype=float))
    xmin, xmax, ymin, ymax = cloud.extents
    if cloud.periodic[0] and cloud.periodic[1]:
        span = np.array([xmax - xmin, ymax - ymin])
        tree = cKDTree((cloud.points - [xmin, ymin]) % span, boxsize=span)
        d, idx = tree.query((points - [xmin, ymin]) % span, k=q)
    elif cloud.periodic[0] or cloud.periodic[1]:
        raise OperatorError("off-node evaluation on singly-periodic clouds "
                            "is not supported")
    else:
        tree = cKDTree(cloud.points)
        d, idx = tree.query(points, k=q)
    if q == 1:
        d, idx = d[:, None], idx[:, None]
    out = np.empty_like(idx)
    for i in range(len(points)):
        order = np.lexsort((idx[i], d[i]))
        out[i] = idx[i][order]
    return out


def eval_matrix(cloud: PointCloud, config: BasisConfig, points: np.ndarray,
                op: str = "eval", q: int | None = None,
                cond_limit: float = DEFAULT_COND_LIMIT,
                chunk: int = 1024) -> sp.csr_matrix:
    """Sparse interpolation/derivative operator at arbitrary points.

    Row i of the result applies ``op`` at ``points[i]`` using the q nearest
    cloud nodes, so ``eval_matrix(...) @ field`` interpolates nodal fields
    off-node (used for reference-table comparisons, center-line profiles and
    surface quantities).
    """
    if op not in _OP_COLUMNS:
        raise OperatorError(f"unknown operator {op!r}")
    points = np.atleast_2d(np.asarray(points, dtype=float))
    q = config.cloud_size if q is None else q
    q = min(q, cloud.n_points)
    nbrs = neighbor_clouds(cloud, points, q)
    kinds = _OP_COLUMNS[op]

    n_eval = len(points)
    data = np.empty((n_eval, q))
    for start in range(0, n_eval, chunk):
        idx = np.arange(start, min(start + chunk, n_eval))
        rel = cloud.points[nbrs[idx]] - points[idx][:, None, :]
        rel = cloud.wrap(rel)
        w, _, span = _batched_rows(rel, np.zeros((len(idx), 2)), config,
                                   cond_limit, kinds, label="eval point")
        if op == "eval":
            data[idx] = w[:, :, 0]
        elif op == "ddx":
            data[idx] = w[:, :, 0] / span[:, None, 0]
        elif op == "ddy":
            data[idx] = w[:, :, 0] / span[:, None, 1]
        else:
            data[idx] = (w[:, :, 0] / span[:, None, 0] ** 2
                         + w[:, :, 1] / span[:, None, 1] ** 2)

    rows = np.repeat(np.arange(n_eval), q)
    return sp.csr_matrix((data.ravel(), (rows, nbrs.ravel())),
                         shape=(n_eval, cloud.n_points))


def reproduction_max_error(ops: OperatorSet, cloud: PointCloud) -> float:
    """Worst relative monomial-reproduction error over all nodes/operators.

    For every monomial of total degree <= k the analytic first and second
    derivatives are compared against the operator matrices; errors are
    scaled by max(1, |exact|, ||s||_inf / h^order) with h the average
    spacing, i.e. relative and scaled by cloud size.
    """
    exps = monomial_exponents(ops.config.degree, 2)
    x, y = cloud.points[:, 0], cloud.points[:, 1]
    h = cloud.spacing
    worst = 0.0
    for i, j in exps:
        s = x ** i * y ** j
        smax = max(1.0, np.abs(s).max())
        dx_exact = (i * x ** max(i - 1, 0) * y ** j) if i else np.zeros_like(x)
        dy_exact = (j * x ** i * y ** max(j - 1, 0)) if j else np.zeros_like(x)
        lap_exact = np.zeros_like(x)
        if i > 1:
            lap_exact = lap_exact + i * (i - 1) * x ** (i - 2) * y ** j
        if j > 1:
            lap_exact = lap_exact + j * (j - 1) * x ** i * y ** (j - 2)
        for mat, exact, order in ((ops.dx, dx_exact, 1), (ops.dy, dy_exact, 1),
                                  (ops.lap, lap_exact, 2)):
            scale = np.maximum(1.0, np.maximum(np.abs(exact), smax / h ** order))
            err = np.abs(mat @ s - exact) / scale
            worst = max(worst, float(err.max()))
    return worst
