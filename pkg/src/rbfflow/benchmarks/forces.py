"""Surface force integration and shedding-frequency extraction."""

from __future__ import annotations

import numpy as np

from ..cloud import PointCloud
from ..operators import BasisConfig, eval_matrix
from ..solver import FluidProps
from .metrics import simpson_periodic


def force_coefficients(theta, p, dudx, dudy, dvdx, dvdy, diameter, props,
                       u_ref: float = 1.0):
    """Drag and lift coefficients from surface samples at angles theta.

    The stress components sigma_xx = -p + 2 mu du/dx, sigma_yy = -p +
    2 mu dv/dy and sigma_xy = mu (du/dy + dv/dx) are integrated over the
    cylinder surface with the composite Simpson rule (theta must be
    uniformly spaced over one period, first point not repeated):

        F_x = (D/2) int (sigma_xx cos t + sigma_yx sin t) dt
        F_y = (D/2) int (sigma_yy sin t + sigma_xy cos t) dt

    and normalized by rho u_ref^2 D / 2.
    """
    theta = np.asarray(theta, dtype=float)
    dtheta = theta[1] - theta[0]
    mu = props.mu
    sxx = -p + 2.0 * mu * dudx
    syy = -p + 2.0 * mu * dvdy
    sxy = mu * (dudy + dvdx)
    fx = diameter / 2.0 * simpson_periodic(
        sxx * np.cos(theta) + sxy * np.sin(theta), dtheta)
    fy = diameter / 2.0 * simpson_periodic(
        syy * np.sin(theta) + sxy * np.cos(theta), dtheta)
    dyn = props.rho * u_ref ** 2 * diameter / 2.0
    return fx / dyn, fy / dyn


def cylinder_forces(state, cloud: PointCloud, config: BasisConfig,
                    props: FluidProps, diameter: float = 1.0,
                    center=(0.0, 0.0), n_surface: int = 360,
                    u_ref: float = 1.0):
    """Interpolate pressure and strain rates to the cylinder surface and
    integrate them into (C_D, C_L)."""
    theta = np.arange(n_surface) * 2.0 * np.pi / n_surface
    pts = np.column_stack([center[0] + diameter / 2.0 * np.cos(theta),
                           center[1] + diameter / 2.0 * np.sin(theta)])
    ev = eval_matrix(cloud, config, pts)
    ex = eval_matrix(cloud, config, pts, op="ddx")
    ey = eval_matrix(cloud, config, pts, op="ddy")
    return force_coefficients(theta, ev @ state.p,
                              ex @ state.u, ey @ state.u,
                              ex @ state.v, ey @ state.v,
                              diameter, props, u_ref)


def strouhal(times, lift, diameter: float, u_ref: float,
             min_cycles: int = 2) -> float:
    """Shedding frequency from zero crossings of the demeaned lift signal.

    Crossing times are linearly interpolated; the period is averaged over
    all full cycles (same-direction crossings). Raises on fewer than
    ``min_cycles`` cycles.
    """
    times = np.asarray(times, dtype=float)
    sig = np.asarray(lift, dtype=float) - np.mean(lift)
    s = np.sign(sig)
    s[s == 0] = 1.0
    up = np.flatnonzero((s[:-1] < 0) & (s[1:] > 0))
    crossings = times[up] - sig[up] * (times[up + 1] - times[up]) / (sig[up + 1] - sig[up])
    if len(crossings) < min_cycles + 1:
        raise ValueError(
            f"lift history contains {max(len(crossings) - 1, 0)} cycles; "
            f"need at least {min_cycles}")
    period = np.diff(crossings).mean()
    return diameter / (u_ref * period)
