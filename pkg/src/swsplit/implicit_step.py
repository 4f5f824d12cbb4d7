"""Implicit wave sub-step: elevation solve and velocity back-substitution.

The elevation increment solves the symmetric positive definite system

    (M + tau_tilde^2 g theta1 theta2 S) d_eta =
        -tau_tilde [ Q1 (H (u1 + theta1 d_u1*)) + Q2 (H (u2 + theta1 d_u2*))
                     + tau_tilde theta1 g S eta ]

with prescribed values at open-boundary nodes eliminated symmetrically,
then the velocity increments follow from a (lumped by default) mass solve
of  M d_ui = -tau_tilde g Qi (eta + theta2 d_eta).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .fem import FemMatrices
from .forcing import TimeSeries
from .mesh import Mesh
from .state import State


class SolverError(RuntimeError):
    """Linear solver breakdown or non-convergence."""

    def __init__(self, message, stats=None):
        super().__init__(message)
        self.stats = stats


@dataclass(frozen=True)
class ThetaConfig:
    """Implicit step length and blending weights."""

    tau_tilde: float
    theta1: float = 0.5
    theta2: float = 0.5

    def __post_init__(self):
        if self.tau_tilde <= 0.0:
            raise ValueError("tau_tilde must be positive")
        if not (0.0 <= self.theta1 <= 1.0 and 0.0 <= self.theta2 <= 1.0):
            raise ValueError("theta weights must lie in [0, 1]")


@dataclass(frozen=True)
class LinearSolveStats:
    iterations: int
    residual: float   # final relative residual


def conjugate_gradient(A, b, tol=1e-10, maxiter=None, precondition=False):
    """Plain CG for SPD systems, zero initial guess, deterministic.

    Stops when ||r|| / ||b|| <= tol; raises :class:`SolverError` on
    non-convergence or on a non-positive curvature direction (matrix not
    SPD).  Optional Jacobi preconditioning.
    """
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    if maxiter is None:
        maxiter = 10 * n
    norm_b = float(np.linalg.norm(b))
    if norm_b == 0.0:
        return np.zeros(n), LinearSolveStats(0, 0.0)

    inv_diag = None
    if precondition:
        diag = A.diagonal()
        if np.any(diag <= 0.0):
            raise SolverError("non-positive diagonal, cannot precondition")
        inv_diag = 1.0 / diag

    x = np.zeros(n)
    r = b.copy()
    z = inv_diag * r if precondition else r
    p = z.copy()
    rz = float(r @ z)
    rel = 1.0
    for k in range(1, maxiter + 1):
        Ap = A @ p
        pAp = float(p @ Ap)
        if pAp <= 0.0:
            raise SolverError("CG breakdown: matrix not positive definite",
                              LinearSolveStats(k, rel))
        gamma = rz / pAp
        x += gamma * p
        r -= gamma * Ap
        rel = float(np.linalg.norm(r)) / norm_b
        if rel <= tol:
            return x, LinearSolveStats(k, rel)
        z = inv_diag * r if precondition else r
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverError(f"CG did not converge in {maxiter} iterations "
                      f"(relative residual {rel:.3e})",
                      LinearSolveStats(maxiter, rel))


def elevation_rhs(state: State, d_star, matrices: FemMatrices, mesh: Mesh,
                  cfg: ThetaConfig, g):
    """Right side of the elevation system (stationary depth H nodal)."""
    h = mesh.depth
    w1 = h * (state.u1 + cfg.theta1 * d_star.d_u1)
    w2 = h * (state.u2 + cfg.theta1 * d_star.d_u2)
    flux = matrices.Q1 @ w1 + matrices.Q2 @ w2
    return -cfg.tau_tilde * (flux + cfg.tau_tilde * cfg.theta1 * g * (matrices.S @ state.eta))


def solve_elevation(A, rhs, open_nodes, open_values, tol=1e-10, precondition=False):
    """Solve A d_eta = rhs with d_eta prescribed at ``open_nodes``.

    The Dirichlet rows/columns are eliminated symmetrically (reduced SPD
    system on the free nodes, right side shifted by the prescribed
    column block).  Returns (d_eta, stats).
    """
    n = rhs.shape[0]
    open_nodes = np.asarray(open_nodes, dtype=int)
    if open_nodes.size == 0:
        return conjugate_gradient(A, rhs, tol=tol, precondition=precondition)

    open_values = np.asarray(open_values, dtype=float)
    free = np.ones(n, dtype=bool)
    free[open_nodes] = False
    free_idx = np.flatnonzero(free)
    d_eta = np.zeros(n)
    d_eta[open_nodes] = open_values
    if free_idx.size == 0:
        return d_eta, LinearSolveStats(0, 0.0)

    A_csr = sp.csr_matrix(A)
    A_ff = A_csr[free_idx][:, free_idx]
    shift = A_csr[free_idx][:, open_nodes] @ open_values
    x_f, stats = conjugate_gradient(A_ff, rhs[free_idx] - shift, tol=tol,
                                    precondition=precondition)
    d_eta[free_idx] = x_f
    return d_eta, stats


def velocity_correction(state: State, d_eta, matrices: FemMatrices, mesh: Mesh,
                        cfg: ThetaConfig, g, consistent=False, tol=1e-10):
    """Velocity increments from the updated surface gradient.

    Solves M d_ui = -tau_tilde g Qi (eta + theta2 d_eta) with the lumped
    mass; ``consistent=True`` runs a CG solve with the consistent mass
    instead (verification path).  Land nodes get their normal component
    removed so no flow is injected through closed boundaries.
    """
    target = state.eta + cfg.theta2 * d_eta
    out = []
    for Q in (matrices.Q1, matrices.Q2):
        rhs = -cfg.tau_tilde * g * (Q @ target)
        if consistent:
            d, _ = conjugate_gradient(matrices.M, rhs, tol=tol)
        else:
            d = rhs / matrices.M_L
        out.append(d)
    d_u1, d_u2 = out
    project_land_velocity(d_u1, d_u2, mesh)
    return d_u1, d_u2


def project_land_velocity(u1, u2, mesh: Mesh):
    """Zero the velocity component normal to the land boundary, in place.

    Straight-wall nodes lose the component along their outward normal;
    corner nodes (distinct adjacent edge normals) are zeroed entirely,
    the only vector with no flow through both edges.
    """
    land = mesh.land_nodes
    if land.size == 0:
        return
    corner = land[mesh.land_corner[land]]
    u1[corner] = 0.0
    u2[corner] = 0.0
    straight = land[~mesh.land_corner[land]]
    if straight.size:
        nx = mesh.land_normals[straight, 0]
        ny = mesh.land_normals[straight, 1]
        un = u1[straight] * nx + u2[straight] * ny
        u1[straight] -= un * nx
        u2[straight] -= un * ny


def apply_boundaries(state: State, mesh: Mesh, tide: TimeSeries, t) -> State:
    """Impose boundary data at time ``t``: tidal elevation on open nodes,
    zero normal flow on land nodes.  Faults if t is outside the tide range.
    """
    open_nodes = mesh.open_nodes
    if open_nodes.size:
        state.eta[open_nodes] = float(tide.at(t)[0])
    project_land_velocity(state.u1, state.u2, mesh)
    return state
