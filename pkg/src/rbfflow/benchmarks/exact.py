"""Closed-form flow solutions used as verification oracles."""

from __future__ import annotations

import math

import numpy as np


def kovasznay_lambda(re: float) -> float:
    """Decay parameter of the steady wake solution behind a 2-D grid."""
    if re <= 0:
        raise ValueError("Reynolds number must be positive")
    return re / 2.0 - math.sqrt(re * re / 4.0 + 4.0 * math.pi ** 2)


def kovasznay_exact(re: float, xy: np.ndarray, p0: float = 0.0):
    """(u, v, p) of the Kovasznay flow at points xy (n, 2).

    u = 1 - exp(lam x) cos(2 pi y)
    v = lam exp(lam x) sin(2 pi y) / (2 pi)
    p = p0 - exp(2 lam x) / 2

    Satisfies the steady Navier-Stokes equations with nu = 1/Re; the
    pressure level p0 is conventionally zero here.
    """
    xy = np.atleast_2d(np.asarray(xy, dtype=float))
    lam = kovasznay_lambda(re)
    x, y = xy[:, 0], xy[:, 1]
    elx = np.exp(lam * x)
    u = 1.0 - elx * np.cos(2.0 * np.pi * y)
    v = lam / (2.0 * np.pi) * elx * np.sin(2.0 * np.pi * y)
    p = p0 - 0.5 * np.exp(2.0 * lam * x)
    return u, v, p


def couette_tangential(r1: float, r2: float, omega: float, r) -> np.ndarray:
    """Tangential velocity of concentric cylindrical Couette flow.

    v_theta(r) = r1 omega (r1 r2 / (r2^2 - r1^2)) (r2/r - r/r2)
    (inner cylinder rotating at omega, outer at rest).
    """
    r = np.asarray(r, dtype=float)
    factor = r1 * omega * (r1 * r2) / (r2 ** 2 - r1 ** 2)
    return factor * (r2 / r - r / r2)


def couette_exact(r1: float, r2: float, omega: float, xy: np.ndarray):
    """Cartesian (u, v) of cylindrical Couette flow at points xy (n, 2).

    Points must lie inside the annulus r1 <= |x| <= r2 (small tolerance).
    """
    xy = np.atleast_2d(np.asarray(xy, dtype=float))
    r = np.hypot(xy[:, 0], xy[:, 1])
    tol = 1e-9 * r2
    if np.any(r < r1 - tol) or np.any(r > r2 + tol):
        raise ValueError("point outside the annulus")
    vt = couette_tangential(r1, r2, omega, np.maximum(r, 1e-300))
    # counterclockwise tangential direction (-sin, cos)
    u = -vt * xy[:, 1] / r
    v = vt * xy[:, 0] / r
    return u, v


def bell_initial(xy: np.ndarray):
    """Divergence-free initial field from the stream function
    sin^2(pi x) sin^2(pi y) / pi on the unit square.

    u = sin^2(pi x) sin(2 pi y), v = -sin(2 pi x) sin^2(pi y); homogeneous
    Dirichlet on all sides, max speed 1.
    """
    xy = np.atleast_2d(np.asarray(xy, dtype=float))
    x, y = xy[:, 0], xy[:, 1]
    u = np.sin(np.pi * x) ** 2 * np.sin(2.0 * np.pi * y)
    v = -np.sin(2.0 * np.pi * x) * np.sin(np.pi * y) ** 2
    return u, v


def shear_layer_initial(xy: np.ndarray, width: float = 30.0,
                        perturbation: float = 0.05):
    """Doubly periodic double shear layer with a sinusoidal v perturbation."""
    xy = np.atleast_2d(np.asarray(xy, dtype=float))
    x, y = xy[:, 0], xy[:, 1]
    u = np.where(y <= 0.5,
                 np.tanh(width * (y - 0.25)),
                 np.tanh(width * (0.75 - y)))
    v = perturbation * np.sin(2.0 * np.pi * x)
    return u, v
