"""Global sparse P1 matrices: mass, lumped mass, depth-weighted stiffness
and the two gradient matrices.

Element contributions (area A, basis gradients grad phi_i constant):

    mass      (A/12) * [[2,1,1],[1,2,1],[1,1,2]]
    stiffness  A * Hbar * (grad phi_i . grad phi_j),  Hbar = mean nodal depth
    gradient  (A/3) * d(phi_j)/dx_k, identical for every test index i

Scatter order is the element index order, so assembly is bit-reproducible.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .mesh import Mesh


class AssemblyError(RuntimeError):
    """Inconsistent matrix produced from a supposedly valid mesh."""


@dataclass(frozen=True)
class FemMatrices:
    """Assembled global operators on one mesh (CSR, immutable)."""

    M: sp.csr_matrix        # consistent mass, symmetric positive definite
    M_L: np.ndarray         # lumped mass diagonal (row sums of M)
    S: sp.csr_matrix        # depth-weighted stiffness, symmetric PSD
    Q1: sp.csr_matrix       # integral of phi_i d(phi_j)/dx1
    Q2: sp.csr_matrix       # integral of phi_i d(phi_j)/dx2

    @property
    def n(self) -> int:
        return self.M.shape[0]


_MASS_PATTERN = (np.ones((3, 3)) + np.eye(3)) / 12.0


def assemble(mesh: Mesh) -> FemMatrices:
    """Assemble M, M_L, S, Q1, Q2 over all elements of ``mesh``."""
    tris = mesh.triangles
    areas = mesh.areas
    grads = mesh.grads
    n = mesh.n_nodes

    mass_el = areas[:, None, None] * _MASS_PATTERN
    hbar = mesh.depth[tris].mean(axis=1)
    stiff_el = (areas * hbar)[:, None, None] * np.einsum("eik,ejk->eij", grads, grads)
    # (A/3) * d(phi_j)/dx_k, identical for each of the three test indices i
    shape = (len(tris), 3, 3)
    q1_el = np.broadcast_to(((areas / 3.0)[:, None] * grads[:, :, 0])[:, None, :], shape)
    q2_el = np.broadcast_to(((areas / 3.0)[:, None] * grads[:, :, 1])[:, None, :], shape)

    rows = np.repeat(tris, 3, axis=1).ravel()
    cols = np.tile(tris, (1, 3)).ravel()

    def to_csr(el):
        mat = sp.coo_matrix((np.ascontiguousarray(el).ravel(), (rows, cols)),
                            shape=(n, n)).tocsr()
        mat.sort_indices()
        return mat

    M = to_csr(mass_el)
    S = to_csr(stiff_el)
    Q1 = to_csr(q1_el)
    Q2 = to_csr(q2_el)
    return FemMatrices(M=M, M_L=lump(M), S=S, Q1=Q1, Q2=Q2)


def lump(M: sp.csr_matrix) -> np.ndarray:
    """Row-sum lumped mass diagonal; every entry must be positive."""
    diag = np.asarray(M.sum(axis=1)).ravel()
    if np.any(diag <= 0.0):
        raise AssemblyError("non-positive lumped mass entry")
    return diag


def helmholtz_matrix(matrices: FemMatrices, tau_tilde, theta1, theta2, g) -> sp.csr_matrix:
    """Elevation system matrix M + tau_tilde^2 g theta1 theta2 S (SPD)."""
    if not (0.0 <= theta1 <= 1.0 and 0.0 <= theta2 <= 1.0):
        raise ValueError("theta weights must lie in [0, 1]")
    if tau_tilde <= 0.0:
        raise ValueError("tau_tilde must be positive")
    A = (matrices.M + (tau_tilde ** 2 * g * theta1 * theta2) * matrices.S).tocsr()
    A.sort_indices()
    return A


def dump_coo(mat, fh):
    """Write a sparse matrix as `i j value` text lines (debug interface)."""
    coo = sp.coo_matrix(mat)
    for i, j, v in zip(coo.row, coo.col, coo.data):
        fh.write(f"{i} {j} {float(v)!r}\n")
