"""Error norms, convergence-order fitting and quadrature helpers."""

from __future__ import annotations

import math
import warnings

import numpy as np

from ..cloud import PointCloud
from ..operators import BasisConfig, OperatorSet, eval_matrix
from .tables import ReferenceTable


def l1_norm(values: np.ndarray) -> float:
    """Mean absolute value (the per-point L1 norm used for error curves)."""
    return float(np.abs(np.asarray(values)).mean())


def error_norms(cloud: PointCloud, ops: OperatorSet, u, v, p=None,
                oracle=None, table: ReferenceTable | None = None,
                config: BasisConfig | None = None) -> dict:
    """L1 field errors against an exact solution or a reference table.

    ``oracle(xy)`` returns (u, v[, p]) at arbitrary points for the analytic
    cases; a ReferenceTable instead compares values interpolated off-node at
    the table stations. Pressure errors are computed mean-free (the solver
    pins sum(p) = 0, the references carry their own level). The divergence
    L1 norm over interior nodes is always included.
    """
    out = {"div": l1_norm((ops.dx @ u + ops.dy @ v)[cloud.interior_idx])}
    if oracle is not None:
        exact = oracle(cloud.points)
        out["u"] = l1_norm(u - exact[0])
        out["v"] = l1_norm(v - exact[1])
        if p is not None and len(exact) > 2:
            pe = exact[2] - np.mean(exact[2])
            out["p"] = l1_norm((p - np.mean(p)) - pe)
    if table is not None:
        cfg = config or ops.config
        e = eval_matrix(cloud, cfg, table.coords)
        ui, vi = e @ u, e @ v
        out["u"] = l1_norm(ui - table.u)
        out["v"] = l1_norm(vi - table.v)
        out["max_u"] = float(np.abs(ui - table.u).max())
        out["max_v"] = float(np.abs(vi - table.v).max())
        if p is not None:
            pi = e @ p
            out["p"] = l1_norm((pi - pi.mean()) - (table.p - table.p.mean()))
    return out


def fit_order(pairs) -> float:
    """Least-squares slope of log(error) vs log(spacing).

    ``pairs`` is a sequence of (dx, error); non-positive errors are dropped
    with a warning (they carry no order information on a log scale).
    """
    pairs = [(dx, e) for dx, e in pairs]
    kept = [(dx, e) for dx, e in pairs if e > 0.0]
    if len(kept) < len(pairs):
        warnings.warn("fit_order: dropped non-positive error values")
    if len(kept) < 2:
        raise ValueError("fit_order needs at least two positive-error points")
    lx = np.log([dx for dx, _ in kept])
    le = np.log([e for _, e in kept])
    slope, _ = np.polyfit(lx, le, 1)
    return float(slope)


def richardson_order(f_h, f_2h, f_4h, denom_floor: float = 1e-14) -> float:
    """Convergence order from three systematically refined solutions.

    With centerline L1 differences f on grids h, 2h, 4h the order is
    C = log2((f_4h - f_2h) / (f_2h - f_h)).
    """
    num = f_4h - f_2h
    den = f_2h - f_h
    if abs(den) < denom_floor:
        raise ValueError("Richardson denominator below floor; order undefined")
    ratio = num / den
    if ratio <= 0:
        raise ValueError(f"non-monotone refinement triplet (ratio {ratio:.3e})")
    return math.log2(ratio)


def simpson_integrate(values: np.ndarray, spacing: float) -> float:
    """Composite Simpson rule on uniformly spaced samples (even interval count)."""
    values = np.asarray(values, dtype=float)
    n = len(values) - 1
    if n < 2 or n % 2:
        raise ValueError("Simpson rule needs an even number of intervals >= 2")
    weights = np.ones(n + 1)
    weights[1:-1:2] = 4.0
    weights[2:-1:2] = 2.0
    return float(spacing / 3.0 * (weights @ values))


def simpson_periodic(values: np.ndarray, spacing: float) -> float:
    """Simpson rule over one period given samples at n uniform points (n even);
    the closing sample is the first one repeated."""
    values = np.asarray(values, dtype=float)
    return simpson_integrate(np.append(values, values[0]), spacing)


def kinetic_energy(cloud: PointCloud, config: BasisConfig, u, v,
                   grid_spacing: float | None = None) -> float:
    """Integral of u^2 + v^2 over the (periodic) unit square.

    The nodal fields are interpolated to a uniform Cartesian grid with
    spacing close to the average point spacing, then integrated with the
    composite Simpson rule along both axes.
    """
    xmin, xmax, ymin, ymax = cloud.extents
    h = grid_spacing or cloud.spacing
    nx = int(round((xmax - xmin) / h))
    nx += nx % 2  # Simpson needs an even interval count
    nx = max(nx, 4)
    xs = np.linspace(xmin, xmax, nx + 1)
    ys = np.linspace(ymin, ymax, nx + 1)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    if cloud.periodic[0]:
        # wrap the closing row/column onto the first sample
        pts = pts.copy()
        pts[:, 0] = xmin + (pts[:, 0] - xmin) % (xmax - xmin)
        pts[:, 1] = ymin + (pts[:, 1] - ymin) % (ymax - ymin)
    e = eval_matrix(cloud, config, pts)
    energy = ((e @ u) ** 2 + (e @ v) ** 2).reshape(nx + 1, nx + 1)
    hx = xs[1] - xs[0]
    hy = ys[1] - ys[0]
    line = np.array([simpson_integrate(energy[i], hy) for i in range(nx + 1)])
    return simpson_integrate(line, hx)
