"""Closed-form P1 triangle finite elements for plane elasticity.

Kept free of any dependency on :mod:`vemspectra.vem` so that comparing the
two assemblies is a genuine cross-check: on triangles the lowest-order VEM
space is exactly P1.
"""

import numpy as np
import scipy.sparse as sp


def _lame(young, poisson):
    lam = young * poisson / ((1 + poisson) * (1 - 2 * poisson))
    return lam, young / (2 * (1 + poisson))


def _area_and_gradients(tri):
    tri = np.asarray(tri, dtype=float)
    (x1, y1), (x2, y2), (x3, y3) = tri
    det = (x2 - x1) * (y3 - y1) - (x3 - x1) * (y2 - y1)
    if abs(det) < 1e-300:
        raise ValueError("degenerate triangle")
    # gradients of the barycentric coordinates
    b = np.array([y2 - y3, y3 - y1, y1 - y2]) / det
    c = np.array([x3 - x2, x1 - x3, x2 - x1]) / det
    return 0.5 * abs(det), b, c


def tri_stiffness(tri, young, poisson):
    """6x6 stiffness |T| B^T C B, DOFs ordered (u1x, u1y, u2x, ...)."""
    area, b, c = _area_and_gradients(tri)
    lam, mu = _lame(young, poisson)
    bmat = np.zeros((3, 6))
    bmat[0, 0::2] = b
    bmat[1, 1::2] = c
    bmat[2, 0::2] = c
    bmat[2, 1::2] = b
    cmat = np.array([[lam + 2 * mu, lam, 0], [lam, lam + 2 * mu, 0], [0, 0, mu]])
    return area * bmat.T @ cmat @ bmat


def tri_mass(tri, rho):
    """Consistent 6x6 mass: rho |T| / 12 * (1 + delta_ij) per component."""
    area, _, _ = _area_and_gradients(tri)
    scalar = rho * area / 12.0 * (np.ones((3, 3)) + np.eye(3))
    m = np.zeros((6, 6))
    m[0::2, 0::2] = scalar
    m[1::2, 1::2] = scalar
    return m


def assemble(vertices, triangles, dirichlet_vertices, rho, young, poisson):
    """Global P1 stiffness and mass with Dirichlet vertices removed."""
    n = 2 * len(vertices)
    rows, cols, kv, mv = [], [], [], []
    for t in triangles:
        t = np.asarray(t)
        pts = np.asarray(vertices)[t]
        ke = tri_stiffness(pts, young, poisson)
        me = tri_mass(pts, rho)
        dofs = np.column_stack([2 * t, 2 * t + 1]).ravel()
        rows.append(np.repeat(dofs, 6))
        cols.append(np.tile(dofs, 6))
        kv.append(ke.ravel())
        mv.append(me.ravel())
    rows, cols = np.concatenate(rows), np.concatenate(cols)
    k = sp.csr_matrix((np.concatenate(kv), (rows, cols)), shape=(n, n))
    m = sp.csr_matrix((np.concatenate(mv), (rows, cols)), shape=(n, n))
    fixed = np.zeros(len(vertices), dtype=bool)
    fixed[np.asarray(dirichlet_vertices, dtype=int)] = True
    fv = np.flatnonzero(~fixed)
    free = np.column_stack([2 * fv, 2 * fv + 1]).ravel()
    return k[free][:, free].tocsr(), m[free][:, free].tocsr()
