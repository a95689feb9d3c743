"""Explicit fractional-step integrator for incompressible flow on point clouds.

Each step advances the momentum equations without the pressure gradient
(forward Euler, or Adams-Bashforth 2 after a bootstrap step), then solves a
pressure Poisson equation whose interior rows are Laplacian stencils and
whose wall rows impose the Neumann condition from the normal momentum
balance. With Dirichlet velocities everywhere the PPE boundary conditions
are all Neumann, so the singular system is regularized with a bordered
Lagrange row/column enforcing sum(p) = 0. The PPE coefficients never change
during a run, so the matrix is factorized exactly once and the stored
factors are reused every step; the back substitution is much cheaper than
the factorization.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .cloud import PointCloud
from .operators import GhostOperators, OperatorSet, build_ghost_operators
from .sparse import factorize

BC_VELOCITY = 0   # Dirichlet u, v
BC_SYMMETRY = 1   # v = 0, du/dn = 0
BC_OUTFLOW = 2    # du/dn = dv/dn = 0, p = 0


class SolverError(RuntimeError):
    pass


class DivergedError(SolverError):
    """NaN/Inf detected in the advanced fields."""


@dataclass(frozen=True)
class FluidProps:
    rho: float
    mu: float

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError("density must be positive")
        if self.mu < 0:
            raise ValueError("viscosity must be non-negative")


@dataclass(frozen=True)
class TimeScheme:
    """Time integration controls.

    ``steady_tol`` is the max relative change in (u, v) per step below which
    a steady run stops; transient runs go to ``t_final``.
    """

    dt: float
    method: str = "forward-euler"
    steady_tol: float = 1e-8
    max_steps: int = 200_000
    t_final: float | None = None

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.method not in ("forward-euler", "adams-bashforth-2"):
            raise ValueError(f"unknown time scheme {self.method!r}")


@dataclass(frozen=True)
class HyperviscosityConfig:
    """Artificial dissipation kappa (lap)^alpha added to the momentum equations."""

    enabled: bool = False
    alpha: int = 2

    def __post_init__(self):
        if self.alpha < 1:
            raise ValueError("hyperviscosity order alpha must be >= 1")

    def kappa(self, dx: float) -> float:
        return (-1.0) ** (1 - self.alpha) * 2.0 ** -6 * dx ** (2 * self.alpha - 1)


@dataclass
class FlowState:
    u: np.ndarray
    v: np.ndarray
    p: np.ndarray
    u_hat: np.ndarray
    v_hat: np.ndarray
    t: float = 0.0
    step: int = 0

    @classmethod
    def zeros(cls, n: int) -> "FlowState":
        return cls(*(np.zeros(n) for _ in range(5)))

    def copy(self) -> "FlowState":
        return FlowState(self.u.copy(), self.v.copy(), self.p.copy(),
                         self.u_hat.copy(), self.v_hat.copy(), self.t, self.step)


@dataclass
class RunResult:
    state: FlowState
    converged: bool
    steps: int
    residual: float
    div_l1: float
    history: list = field(default_factory=list)


def hyperviscosity_term(fld: np.ndarray, ops: OperatorSet,
                        cfg: HyperviscosityConfig, dx: float) -> np.ndarray:
    """kappa * Lap^alpha applied to a nodal field (zero when disabled)."""
    if not cfg.enabled:
        return np.zeros_like(fld)
    out = fld
    for _ in range(cfg.alpha):
        out = ops.lap @ out
    return cfg.kappa(dx) * out


def assemble_ppe(ops: OperatorSet, cloud: PointCloud,
                 gops: GhostOperators | None = None,
                 pressure_dirichlet: np.ndarray | None = None):
    """Pressure Poisson matrix: Laplacian rows inside, n.grad rows on walls.

    With boundary points present, the pressure space is augmented by one
    ghost node per boundary point (``gops``): the Laplacian is collocated
    at interior *and* boundary nodes (rows 0..n-1) while rows n..n+nb-1
    carry the outward normal-derivative conditions; the ghost pressures
    balance the extra rows. This removes the spurious near-null modes of
    the plain all-Neumann collocation that destabilize the projection.

    Without Dirichlet pressure rows the system is additionally bordered
    with a Lagrange multiplier column and a zero-sum row over the real
    pressures (sum(p) = 0), which fixes the pressure level and regularizes
    the constant null space; with Dirichlet rows (outflow) those boundary
    rows become identity rows and no border is added.

    Returns ``(matrix, meta)`` where meta records the row layout.
    """
    n = cloud.n_points
    pdir = np.asarray(pressure_dirichlet, dtype=np.int64) \
        if pressure_dirichlet is not None else np.empty(0, dtype=np.int64)

    if gops is None:
        # periodic / boundary-free domain: div(grad) rows + zero-sum border
        if cloud.boundary_idx.size:
            raise SolverError("ghost operators are required on bounded domains")
        matrix = (ops.dx @ ops.dx + ops.dy @ ops.dy).tocsr()
        ones_col = sp.csr_matrix(np.ones((n, 1)))
        ones_row = sp.csr_matrix(np.ones((1, n)))
        matrix = sp.bmat([[matrix, ones_col], [ones_row, None]], format="csr")
        meta = {"zero_sum": True, "pressure_dirichlet": pdir,
                "boundary_idx": cloud.boundary_idx, "n": n, "n_ghost": 0}
        return matrix, meta

    bidx = gops.boundary_idx
    nb = len(bidx)
    ncols = n + nb
    # div(grad p) composed from the velocity-divergence rows applied to the
    # ghost-augmented gradient: the projection then zeroes the divergence at
    # every real node exactly (the corrected field lies in the kernel of the
    # same discrete divergence that feeds the right-hand side)
    pde_rows = (ops.dx @ gops.dx + ops.dy @ gops.dy).tocsr()
    bc_rows = gops.dn.tolil()
    if pdir.size:
        # outflow nodes: replace the Neumann row with p = 0 (real column)
        pos = {int(bb): r for r, bb in enumerate(bidx)}
        for node in pdir:
            r = pos[int(node)]
            bc_rows.rows[r] = [int(node)]
            bc_rows.data[r] = [1.0]
    matrix = sp.vstack([pde_rows, bc_rows.tocsr()], format="csr")

    zero_sum = pdir.size == 0
    if zero_sum:
        ones_col = sp.csr_matrix(np.ones((matrix.shape[0], 1)))
        zrow = np.zeros((1, ncols))
        zrow[0, :n] = 1.0
        matrix = sp.bmat([[matrix, ones_col], [sp.csr_matrix(zrow), None]],
                         format="csr")
    meta = {"zero_sum": zero_sum, "pressure_dirichlet": pdir,
            "boundary_idx": bidx, "n": n, "n_ghost": nb}
    return matrix, meta


class FractionalStepSolver:
    """Time integrator owning a cloud, its operators and the PPE factors.

    ``u_bc``/``v_bc`` are full-length nodal arrays; only their boundary
    entries are read. ``bc_kinds`` (aligned with ``cloud.boundary_idx``)
    switches individual boundary nodes to symmetry or outflow treatment;
    velocity Dirichlet everywhere by default.
    """

    def __init__(self, cloud: PointCloud, ops: OperatorSet, props: FluidProps,
                 scheme: TimeScheme, u_bc=None, v_bc=None, *,
                 hyper: HyperviscosityConfig | None = None,
                 bc_kinds: np.ndarray | None = None):
        n = cloud.n_points
        self.cloud = cloud
        self.ops = ops
        self.props = props
        self.scheme = scheme
        self.hyper = hyper or HyperviscosityConfig()
        if props.mu == 0.0 and not self.hyper.enabled:
            raise SolverError("inviscid runs require hyperviscosity")
        self.u_bc = np.zeros(n) if u_bc is None else np.asarray(u_bc, dtype=float)
        self.v_bc = np.zeros(n) if v_bc is None else np.asarray(v_bc, dtype=float)

        self.bidx = cloud.boundary_idx
        self.iidx = cloud.interior_idx
        kinds = np.full(len(self.bidx), BC_VELOCITY, dtype=np.int8) \
            if bc_kinds is None else np.asarray(bc_kinds, dtype=np.int8)
        if len(kinds) != len(self.bidx):
            raise SolverError("bc_kinds must align with cloud.boundary_idx")
        self.bc_kinds = kinds

        self._vel_b = self.bidx[kinds == BC_VELOCITY]
        self._sym_b = self.bidx[kinds == BC_SYMMETRY]
        self._out_b = self.bidx[kinds == BC_OUTFLOW]
        self._extrap = self._build_extrapolators(ops)
        # normal-velocity targets for the PPE rows: prescribed values at
        # velocity-Dirichlet nodes, zero normal flow at symmetry walls
        self._g_u = self.u_bc.copy()
        self._g_v = self.v_bc.copy()
        for nodes in (self._sym_b, self._out_b):
            if nodes.size:
                self._g_u[nodes] = 0.0
                self._g_v[nodes] = 0.0

        self.state = FlowState.zeros(n)
        self._apply_velocity_bc(self.state.u, self.state.v)
        self._f_prev = None
        self._gops = None
        self._ppe = None
        self._ppe_meta = None
        self._fact = None
        self.n_factorizations = 0
        self.div_history = []

    # -- setup ---------------------------------------------------------

    def _build_extrapolators(self, ops):
        """Zero-normal-derivative update u_b = -(sum_j w_j u_j) / w_self."""
        extrap = {}
        for name, nodes in (("sym", self._sym_b), ("out", self._out_b)):
            if nodes.size == 0:
                continue
            rows = np.searchsorted(self.bidx, nodes)
            dn = ops.dn[rows].tolil()
            w_self = np.array([dn[r, n] for r, n in enumerate(nodes)])
            if np.any(w_self == 0):
                raise SolverError("normal-derivative row lacks a self weight")
            for r, n in enumerate(nodes):
                dn[r, n] = 0.0
            extrap[name] = (nodes, dn.tocsr(), w_self)
        return extrap

    def _ensure_factorization(self):
        if self._fact is not None:
            return
        if self.bidx.size:
            self._gops = build_ghost_operators(self.cloud, self.ops.config)
        pdir = self._out_b if self._out_b.size else None
        self._ppe, self._ppe_meta = assemble_ppe(self.ops, self.cloud,
                                                 self._gops, pdir)
        self._fact = factorize(self._ppe)
        self.n_factorizations += 1

    def set_initial(self, u, v, p=None):
        self.state.u[:] = u
        self.state.v[:] = v
        if p is not None:
            self.state.p[:] = p
        self._apply_velocity_bc(self.state.u, self.state.v)
        self._f_prev = None

    # -- physics -------------------------------------------------------

    def _apply_velocity_bc(self, u, v):
        if self._vel_b.size:
            u[self._vel_b] = self.u_bc[self._vel_b]
            v[self._vel_b] = self.v_bc[self._vel_b]
        if self._sym_b.size:
            v[self._sym_b] = 0.0
        for name, fields in (("sym", (u,)), ("out", (u, v))):
            if name in self._extrap:
                nodes, dn_other, w_self = self._extrap[name]
                for fld in fields:
                    fld[nodes] = -(dn_other @ fld) / w_self

    def _rates(self, u, v):
        """Explicit momentum right-hand side F = -(u.grad)u + (mu/rho) lap u."""
        ops = self.ops
        uv = np.column_stack([u, v])
        dx_uv = ops.dx @ uv
        dy_uv = ops.dy @ uv
        lap_uv = ops.lap @ uv
        conv_u = u * dx_uv[:, 0] + v * dy_uv[:, 0]
        conv_v = u * dx_uv[:, 1] + v * dy_uv[:, 1]
        rho, mu = self.props.rho, self.props.mu
        fu = -conv_u + (mu / rho) * lap_uv[:, 0]
        fv = -conv_v + (mu / rho) * lap_uv[:, 1]
        if self.hyper.enabled:
            dx = self.cloud.spacing
            fu = fu + hyperviscosity_term(u, ops, self.hyper, dx) / rho
            fv = fv + hyperviscosity_term(v, ops, self.hyper, dx) / rho
        # Neumann pressure rows use the inertial + viscous balance only
        mom_u = -rho * conv_u + mu * lap_uv[:, 0]
        mom_v = -rho * conv_v + mu * lap_uv[:, 1]
        return fu, fv, mom_u, mom_v

    def predict(self):
        """Intermediate velocities u_hat, v_hat (pressure gradient omitted).

        Boundary values are the prescribed velocities plus (dt/rho) times
        the pressure gradient estimated from the boundary momentum balance,
        the same expression that feeds the PPE Neumann rows; the projection
        then restores the normal boundary velocity exactly.
        """
        st = self.state
        dt = self.scheme.dt
        fu, fv, mom_u, mom_v = self._rates(st.u, st.v)
        if (self.scheme.method == "adams-bashforth-2"
                and self._f_prev is not None):
            fu_p, fv_p = self._f_prev
            du = dt * (1.5 * fu - 0.5 * fu_p)
            dv = dt * (1.5 * fv - 0.5 * fv_p)
        else:
            du = dt * fu
            dv = dt * fv
        if self.scheme.method == "adams-bashforth-2":
            self._f_prev = (fu, fv)
        u_hat = st.u + du
        v_hat = st.v + dv
        if self.bidx.size:
            b = self.bidx
            coef = dt / self.props.rho
            # st.u/st.v already hold the boundary values (Dirichlet data or
            # the extrapolated symmetry/outflow values)
            u_hat[b] = st.u[b] + coef * mom_u[b]
            v_hat[b] = st.v[b] + coef * mom_v[b]
        if not (np.all(np.isfinite(u_hat)) and np.all(np.isfinite(v_hat))):
            raise DivergedError(f"non-finite intermediate field at step {st.step}")
        st.u_hat, st.v_hat = u_hat, v_hat
        return u_hat, v_hat, mom_u, mom_v

    def project(self, u_hat, v_hat, mom_u, mom_v):
        """Solve the PPE and correct the velocities to a divergence-free field."""
        self._ensure_factorization()
        st = self.state
        dt = self.scheme.dt
        rho = self.props.rho
        meta = self._ppe_meta
        n = self.cloud.n_points
        nb = meta["n_ghost"]

        div_hat = self.ops.dx @ u_hat + self.ops.dy @ v_hat
        rhs = np.zeros(n + nb + (1 if meta["zero_sum"] else 0))
        rhs[:n] = (rho / dt) * div_hat
        bidx = meta["boundary_idx"]
        if nb:
            # Neumann rows: (rho/dt) n.(u_hat - g). With u_hat_b built from
            # the boundary momentum balance this equals n.(-rho (u.grad)u +
            # mu lap u), and the projected normal velocity lands exactly on
            # the prescribed value.
            nrm = self.cloud.normals[bidx]
            gn = nrm[:, 0] * self._g_u[bidx] + nrm[:, 1] * self._g_v[bidx]
            rhs[n:n + nb] = (rho / dt) * (
                nrm[:, 0] * u_hat[bidx] + nrm[:, 1] * v_hat[bidx] - gn)
            if meta["pressure_dirichlet"].size:
                pos = np.flatnonzero(np.isin(bidx, meta["pressure_dirichlet"]))
                rhs[n + pos] = 0.0

        sol = self._fact.solve(rhs)
        p = sol[:n]
        multiplier = float(sol[n + nb]) if meta["zero_sum"] else 0.0

        coef = dt / rho
        if nb:
            p_aug = sol[:n + nb]
            u = u_hat - coef * (self._gops.dx @ p_aug)
            v = v_hat - coef * (self._gops.dy @ p_aug)
        else:
            u = u_hat - coef * (self.ops.dx @ p)
            v = v_hat - coef * (self.ops.dy @ p)
        self._apply_velocity_bc(u, v)
        st.u, st.v, st.p = u, v, p
        st.t += dt
        st.step += 1
        return multiplier

    def step(self) -> float:
        """One predict+project cycle; returns the max relative velocity change."""
        u_old = self.state.u.copy()
        v_old = self.state.v.copy()
        self.project(*self.predict())
        scale = max(1.0, float(np.abs(self.state.u).max()),
                    float(np.abs(self.state.v).max()))
        return float(max(np.abs(self.state.u - u_old).max(),
                         np.abs(self.state.v - v_old).max())) / scale

    def divergence(self) -> np.ndarray:
        return self.ops.dx @ self.state.u + self.ops.dy @ self.state.v

    def div_l1(self) -> float:
        """Mean absolute divergence over interior nodes."""
        div = self.divergence()
        idx = self.iidx if self.iidx.size else slice(None)
        return float(np.abs(div[idx]).mean())

    def run(self, mode: str = "steady", log_every: int = 0,
            log_fn=None) -> RunResult:
        """March in time until steady, t_final, or max_steps.

        Steady mode stops when the per-step relative change drops below
        ``scheme.steady_tol``; exceeding ``max_steps`` returns a
        non-converged result with the fields as computed (warning status).
        """
        sch = self.scheme
        residual = np.inf
        history = []
        n_steps = sch.max_steps
        if mode == "transient":
            if sch.t_final is None:
                raise SolverError("transient mode requires t_final")
            n_steps = int(round((sch.t_final - self.state.t) / sch.dt))
        converged = False
        t_wall = time.perf_counter()
        for it in range(n_steps):
            residual = self.step()
            if log_every and (self.state.step % log_every == 0):
                entry = (self.state.step, self.state.t, residual,
                         self.div_l1(), time.perf_counter() - t_wall)
                history.append(entry)
                if log_fn is not None:
                    log_fn(entry)
                t_wall = time.perf_counter()
            if mode == "steady" and residual < sch.steady_tol:
                converged = True
                break
        if mode == "transient":
            converged = True
        div = self.div_l1()
        self.div_history.append(div)
        return RunResult(self.state, converged, self.state.step, residual,
                         div, history)
