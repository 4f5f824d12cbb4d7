"""Shared mesh builders and independent oracles for the test suite.

The oracles deliberately avoid the package's own formulas: basis
functions come from solving the 3x3 Vandermonde system, integrals from a
three-point Gauss rule (edge midpoints, exact for quadratics), roots
from bisection.
"""
from __future__ import annotations

import numpy as np

from swsplit.mesh import INTERIOR, LAND, OPEN, Mesh, build_mesh


# ---------------------------------------------------------------- meshes

def rect_mesh_arrays(nx, ny, Lx, Ly, depth=2.0, boundary_tag=LAND):
    """Structured triangulated rectangle; boundary nodes tagged as given."""
    xs = np.linspace(0.0, Lx, nx)
    ys = np.linspace(0.0, Ly, ny)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    coords = np.column_stack([X.ravel(), Y.ravel()])

    def nid(i, j):
        return i * ny + j

    tris = []
    for i in range(nx - 1):
        for j in range(ny - 1):
            a, b, c, d = nid(i, j), nid(i + 1, j), nid(i + 1, j + 1), nid(i, j + 1)
            tris.append([a, b, c])
            tris.append([a, c, d])
    tags = np.full(nx * ny, INTERIOR, dtype=int)
    for i in range(nx):
        for j in range(ny):
            if i in (0, nx - 1) or j in (0, ny - 1):
                tags[nid(i, j)] = boundary_tag
    if np.isscalar(depth):
        depth = np.full(nx * ny, float(depth))
    return coords, np.array(tris), np.asarray(depth, dtype=float), tags


def rect_mesh(nx, ny, Lx, Ly, depth=2.0, boundary_tag=LAND, h_min=0.05) -> Mesh:
    coords, tris, d, tags = rect_mesh_arrays(nx, ny, Lx, Ly, depth, boundary_tag)
    return build_mesh(coords, tris, d, tags, h_min=h_min)


def jittered_mesh(nx, ny, rng, scale=1.0, depth=None) -> Mesh:
    """Unit-scale rectangle with interior nodes perturbed (still valid CCW)."""
    coords, tris, d, tags = rect_mesh_arrays(nx, ny, scale, scale, 1.0)
    h = scale / (max(nx, ny) - 1)
    interior = tags == INTERIOR
    coords[interior] += rng.uniform(-0.2 * h, 0.2 * h, size=(interior.sum(), 2))
    if depth is None:
        d = 1.0 + rng.uniform(0.0, 1.0, size=len(coords))
    else:
        d = np.full(len(coords), float(depth))
    return build_mesh(coords, tris, d, tags)


def channel_mesh(nx, ny, Lx, Ly, depth=2.0, h_min=0.05) -> Mesh:
    """Rectangle with the x = 0 edge open (tidal mouth), other walls land."""
    coords, tris, d, tags = rect_mesh_arrays(nx, ny, Lx, Ly, depth)
    on_west = coords[:, 0] == 0.0
    tags[on_west & (tags == LAND)] = OPEN
    return build_mesh(coords, tris, d, tags, h_min=h_min)


def unit_triangle_mesh(depth=1.0) -> Mesh:
    return build_mesh([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], [[0, 1, 2]],
                      [depth] * 3, [LAND] * 3)


def two_triangle_square(depth=1.0, tag=LAND) -> Mesh:
    return build_mesh([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
                      [[0, 1, 2], [0, 2, 3]], [depth] * 4, [tag] * 4)


def mesh_text(coords, tris, depth, tags, comment=None) -> str:
    """Render arrays in the mesh file format."""
    lines = []
    if comment:
        lines.append(f"# {comment}")
    lines.append(f"{len(coords)} {len(tris)}")
    for (x, y), h, tag in zip(coords, depth, tags):
        lines.append(f"{float(x)!r} {float(y)!r} {float(h)!r} {int(tag)}")
    for i, j, k in tris:
        lines.append(f"{i} {j} {k}")
    return "\n".join(lines) + "\n"


def random_triangle(rng, min_area=0.05):
    while True:
        pts = rng.uniform(-1.0, 1.0, size=(3, 2))
        e1 = pts[1] - pts[0]
        e2 = pts[2] - pts[0]
        if 0.5 * abs(e1[0] * e2[1] - e1[1] * e2[0]) >= min_area:
            return pts


# ------------------------------------------------------------- P1 oracle

def basis_coefficients(coords):
    """Coefficients (a, b, c) of each phi_i = a + b x + c y via linear solve."""
    V = np.column_stack([np.ones(3), coords[:, 0], coords[:, 1]])
    return np.linalg.solve(V, np.eye(3))  # column i: coefficients of phi_i


def eval_basis(coords, points):
    """phi_i evaluated at given points, shape (len(points), 3)."""
    C = basis_coefficients(np.asarray(coords, dtype=float))
    P = np.column_stack([np.ones(len(points)), points[:, 0], points[:, 1]])
    return P @ C


def basis_gradients(coords):
    """Gradients from the Vandermonde solve (independent of the package)."""
    C = basis_coefficients(np.asarray(coords, dtype=float))
    return C[1:, :].T  # (3, 2)


def triangle_area(coords):
    e1 = coords[1] - coords[0]
    e2 = coords[2] - coords[0]
    return 0.5 * abs(e1[0] * e2[1] - e1[1] * e2[0])


def gauss3_points(coords):
    """Edge-midpoint rule: degree-2 exact, weights area/3."""
    mids = np.array([(coords[0] + coords[1]) / 2.0,
                     (coords[1] + coords[2]) / 2.0,
                     (coords[2] + coords[0]) / 2.0])
    return mids, np.full(3, triangle_area(coords) / 3.0)


def element_matrices_oracle(coords, depth3):
    """Element mass/stiffness/gradient matrices by quadrature only."""
    coords = np.asarray(coords, dtype=float)
    pts, w = gauss3_points(coords)
    phi = eval_basis(coords, pts)            # (3 qp, 3 basis)
    grads = basis_gradients(coords)          # constant
    hbar = float(np.mean(depth3))
    M = np.einsum("q,qi,qj->ij", w, phi, phi)
    S = hbar * np.sum(w) * (grads @ grads.T)
    Q1 = np.einsum("q,qi->i", w, phi)[:, None] * grads[None, :, 0]
    Q2 = np.einsum("q,qi->i", w, phi)[:, None] * grads[None, :, 1]
    return M, S, Q1, Q2


def dense_global_oracle(mesh: Mesh):
    """Dense global M, S, Q1, Q2 assembled purely from the oracle."""
    n = mesh.n_nodes
    M = np.zeros((n, n))
    S = np.zeros((n, n))
    Q1 = np.zeros((n, n))
    Q2 = np.zeros((n, n))
    for tri in mesh.triangles:
        Me, Se, Q1e, Q2e = element_matrices_oracle(mesh.coords[tri], mesh.depth[tri])
        for a in range(3):
            for b in range(3):
                M[tri[a], tri[b]] += Me[a, b]
                S[tri[a], tri[b]] += Se[a, b]
                Q1[tri[a], tri[b]] += Q1e[a, b]
                Q2[tri[a], tri[b]] += Q2e[a, b]
    return M, S, Q1, Q2


# --------------------------------------------------------- cubic oracle

def bisect_root(f, lo, hi, iters=100):
    flo, fhi = f(lo), f(hi)
    assert flo < 0.0 < fhi, "oracle bracket does not straddle the root"
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if f(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def cubic_value(a, b, c, d, t):
    return ((a * t - b) * t + c) * t - d
