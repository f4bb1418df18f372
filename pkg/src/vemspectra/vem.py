"""Lowest-order virtual element operators for plane linear elasticity.

Local spaces use the vertex values of both displacement components as
degrees of freedom, interleaved as ``(u_x(v0), u_y(v0), u_x(v1), ...)``.
Polynomials in ``[P1]^2`` are expanded in the scaled monomial basis
``m = (1, (x-xc)/h, (y-yc)/h)`` per component, in the order
``(m0 e1, m1 e1, m2 e1, m0 e2, m1 e2, m2 e2)``.

All local routines work on a batch of elements sharing the same vertex
count; arrays carry a leading batch axis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .mesh import MeshError, PolyMesh


class AssemblyError(RuntimeError):
    pass


@dataclass(frozen=True)
class Material:
    rho: float
    young: float
    poisson: float

    def __post_init__(self):
        if self.rho <= 0 or self.young <= 0:
            raise ValueError("density and Young modulus must be positive")
        if not 0 < self.poisson < 0.5:
            raise ValueError("Poisson ratio must lie in (0, 0.5)")

    @property
    def lame(self) -> tuple[float, float]:
        return lame_from_engineering(self.young, self.poisson)

    def elasticity_matrix(self) -> np.ndarray:
        """Hooke's law in Voigt form acting on (e_xx, e_yy, 2 e_xy)."""
        lam, mu = self.lame
        return np.array([[lam + 2 * mu, lam, 0.0], [lam, lam + 2 * mu, 0.0], [0.0, 0.0, mu]])


def lame_from_engineering(young: float, poisson: float) -> tuple[float, float]:
    if young <= 0:
        raise ValueError("Young modulus must be positive")
    if not 0 <= poisson < 0.5:
        raise ValueError("Poisson ratio must lie in [0, 0.5)")
    lam = young * poisson / ((1 + poisson) * (1 - 2 * poisson))
    mu = young / (2 * (1 + poisson))
    return lam, mu


STEEL = Material(rho=7.7e3, young=1.44e11, poisson=0.35)
UNIT = Material(rho=1.0, young=1.0, poisson=0.35)


@dataclass
class LocalOperators:
    """Operators of a batch of ``nb`` elements with ``nv`` vertices each.

    ``proj`` maps local DOF vectors to monomial coefficients (the energy
    projector; for k = 1 it is also the L2 projector). ``dmat`` evaluates
    the monomial basis at the vertex DOFs.
    """

    centroid: np.ndarray  # (nb, 2)
    diameter: np.ndarray  # (nb,)
    area: np.ndarray  # (nb,)
    dmat: np.ndarray  # (nb, 2nv, 6)
    proj: np.ndarray  # (nb, 6, 2nv)
    poly_stiff: np.ndarray  # (nb, 6, 6)  a^E on the basis
    poly_mass: np.ndarray  # (nb, 6, 6)  b^E on the basis
    k_cons: np.ndarray
    k_stab: np.ndarray
    m_cons: np.ndarray
    m_stab: np.ndarray
    sigma: np.ndarray  # (nb,)
    sigma0: np.ndarray  # (nb,)

    @property
    def stiffness(self) -> np.ndarray:
        return self.k_cons + self.k_stab

    @property
    def mass(self) -> np.ndarray:
        return self.m_cons + self.m_stab

    @property
    def l2_proj(self) -> np.ndarray:
        # k = 1: the enhancement constraint makes Pi^0 coincide with Pi^nabla
        return self.proj

    def remainder(self) -> np.ndarray:
        """``I - D P``: the non-polynomial part of a DOF vector."""
        n = self.dmat.shape[1]
        return np.eye(n) - self.dmat @ self.proj


# strain (e_xx, e_yy, 2 e_xy) of each basis polynomial, times h
_STRAIN = np.array(
    [
        [0, 0, 0],
        [1, 0, 0],
        [0, 0, 1],
        [0, 0, 0],
        [0, 0, 1],
        [0, 1, 0],
    ],
    dtype=float,
)


def _geometry(pts: np.ndarray):
    # shoelace about the vertex mean: no cancellation for elements far from the origin
    shift = pts.mean(axis=1)
    x, y = pts[..., 0] - shift[:, None, 0], pts[..., 1] - shift[:, None, 1]
    xn, yn = np.roll(x, -1, axis=1), np.roll(y, -1, axis=1)
    cross = x * yn - xn * y
    area = 0.5 * cross.sum(1)
    if np.any(area <= 0):
        raise MeshError("degenerate element (non-positive area)")
    cen = shift + np.stack([((x + xn) * cross).sum(1), ((y + yn) * cross).sum(1)], -1) / (6 * area[:, None])
    d = pts[:, :, None, :] - pts[:, None, :, :]
    diam = np.sqrt((d**2).sum(-1)).max(axis=(1, 2))
    return area, cen, diam


def _monomial_gram(pts, cen, diam):
    """Integrals of m_a m_b over each polygon (exact, signed centroid fan)."""
    s = (pts - cen[:, None, :]) / diam[:, None, None]
    sn = np.roll(s, -1, axis=1)
    tri_area = 0.5 * (s[..., 0] * sn[..., 1] - s[..., 1] * sn[..., 0]) * diam[:, None] ** 2
    # edge-midpoint rule on the triangle (centroid, v_i, v_{i+1}) is exact for quadratics
    qp = np.stack([0.5 * s, 0.5 * (s + sn), 0.5 * sn], axis=2)  # (nb, nv, 3, 2)
    mono = np.concatenate([np.ones(qp.shape[:-1] + (1,)), qp], axis=-1)  # (nb, nv, 3, 3)
    w = tri_area[..., None] / 3.0
    return np.einsum("bkq,bkqi,bkqj->bij", w, mono, mono)


STABILIZATIONS = ("trace", "mean")


def local_operators(pts: np.ndarray, material: Material, stabilization: str = "mean") -> LocalOperators:
    """Projector, stiffness and mass for elements with vertex arrays ``pts`` (nb, nv, 2).

    The vertex-value stabilizations are scaled by the trace of the
    consistency matrices (``"trace"``) or by their mean eigenvalue,
    trace / n_dofs (``"mean"``).
    """
    if stabilization not in STABILIZATIONS:
        raise ValueError(f"unknown stabilization {stabilization!r}")
    pts = np.asarray(pts, dtype=float)
    if pts.ndim == 2:
        pts = pts[None]
    nb, nv, _ = pts.shape
    if nv < 3:
        raise MeshError("elements need at least three vertices")
    area, cen, diam = _geometry(pts)
    s = (pts - cen[:, None, :]) / diam[:, None, None]
    ndof = 2 * nv

    dmat = np.zeros((nb, ndof, 6))
    mono = np.concatenate([np.ones((nb, nv, 1)), s], axis=-1)
    dmat[:, 0::2, 0:3] = mono
    dmat[:, 1::2, 3:6] = mono

    cmat = material.elasticity_matrix()
    strain = _STRAIN[None] / diam[:, None, None]  # (nb, 6, 3)
    stress = strain @ cmat  # Voigt stress of each basis polynomial
    poly_stiff = area[:, None, None] * strain @ cmat @ strain.transpose(0, 2, 1)

    # a^E(p, phi_i) = (sigma(p) * w_i), w_i = half the sum of the scaled normals at vertex i
    edge = np.roll(pts, -1, axis=1) - pts
    nrm = np.stack([edge[..., 1], -edge[..., 0]], -1)
    wv = 0.5 * (nrm + np.roll(nrm, 1, axis=1))  # (nb, nv, 2)
    sxx, syy, sxy = stress[..., 0], stress[..., 1], stress[..., 2]
    rhs = np.zeros((nb, 6, ndof))
    rhs[:, :, 0::2] = sxx[..., None] * wv[:, None, :, 0] + sxy[..., None] * wv[:, None, :, 1]
    rhs[:, :, 1::2] = sxy[..., None] * wv[:, None, :, 0] + syy[..., None] * wv[:, None, :, 1]

    # rigid-body side conditions replace the rank-deficient rows 0, 3, 4
    rigid = np.zeros((nb, 3, ndof))
    rigid[:, 0, 0::2] = 1.0
    rigid[:, 1, 1::2] = 1.0
    rigid[:, 2, 0::2] = -s[..., 1]
    rigid[:, 2, 1::2] = s[..., 0]
    rigid /= nv
    gmat = poly_stiff.copy()
    bmat = rhs.copy()
    for row, r in zip((0, 3, 4), range(3)):
        gmat[:, row, :] = np.einsum("bi,bij->bj", rigid[:, r, :], dmat)
        bmat[:, row, :] = rigid[:, r, :]
    try:
        proj = np.linalg.solve(gmat, bmat)
    except np.linalg.LinAlgError as exc:
        raise MeshError("singular projector system (collinear element?)") from exc

    remainder = np.eye(ndof)[None] - dmat @ proj
    stab_form = remainder.transpose(0, 2, 1) @ remainder
    k_cons = proj.transpose(0, 2, 1) @ poly_stiff @ proj
    per = 1.0 if stabilization == "trace" else 1.0 / ndof
    sigma = np.trace(k_cons, axis1=1, axis2=2) * per
    if np.any(sigma <= 0):
        raise MeshError("degenerate element: zero consistency stiffness")

    gram = _monomial_gram(pts, cen, diam)
    poly_mass = np.zeros((nb, 6, 6))
    poly_mass[:, :3, :3] = gram
    poly_mass[:, 3:, 3:] = gram
    poly_mass *= material.rho
    m_cons = proj.transpose(0, 2, 1) @ poly_mass @ proj
    sigma0 = np.trace(m_cons, axis1=1, axis2=2) * per

    return LocalOperators(
        centroid=cen,
        diameter=diam,
        area=area,
        dmat=dmat,
        proj=proj,
        poly_stiff=poly_stiff,
        poly_mass=poly_mass,
        k_cons=k_cons,
        k_stab=sigma[:, None, None] * stab_form,
        m_cons=m_cons,
        m_stab=sigma0[:, None, None] * stab_form,
        sigma=sigma,
        sigma0=sigma0,
    )


def energy_projector(pts, material: Material) -> np.ndarray:
    return local_operators(pts, material).proj[0]


def l2_projector(pts, material: Material) -> np.ndarray:
    return local_operators(pts, material).l2_proj[0]


def stabilization_scaling(pts, material: Material, stabilization: str = "mean") -> tuple[float, float]:
    ops = local_operators(pts, material, stabilization)
    return float(ops.sigma[0]), float(ops.sigma0[0])


def local_stiffness(pts, material: Material, stabilization: str = "mean") -> np.ndarray:
    return local_operators(pts, material, stabilization).stiffness[0]


def local_mass(pts, material: Material, stabilization: str = "mean") -> np.ndarray:
    return local_operators(pts, material, stabilization).mass[0]


def element_groups(mesh: PolyMesh) -> dict[int, np.ndarray]:
    """Element ids grouped by vertex count."""
    sizes = np.array([len(c) for c in mesh.elements])
    return {int(k): np.flatnonzero(sizes == k) for k in np.unique(sizes)}


class MeshOperators:
    """Local operators of every element of a mesh, grouped by vertex count."""

    def __init__(self, mesh: PolyMesh, material: Material, stabilization: str = "mean"):
        self.mesh = mesh
        self.material = material
        self.stabilization = stabilization
        self.groups = {}
        for nv, ids in element_groups(mesh).items():
            conn = np.array([mesh.elements[e] for e in ids])
            ops = local_operators(mesh.vertices[conn], material, stabilization)
            self.groups[nv] = (ids, conn, ops)

    def local_dofs(self, conn: np.ndarray) -> np.ndarray:
        dofs = np.empty((conn.shape[0], 2 * conn.shape[1]), dtype=np.int64)
        dofs[:, 0::2] = 2 * conn
        dofs[:, 1::2] = 2 * conn + 1
        return dofs

    def global_matrices(self) -> tuple[sp.csr_matrix, sp.csr_matrix]:
        """Unconstrained stiffness and mass on all 2 * n_vertices DOFs."""
        n = 2 * self.mesh.num_vertices
        rows, cols, kv, mv = [], [], [], []
        for ids, conn, ops in self.groups.values():
            dofs = self.local_dofs(conn)
            nd = dofs.shape[1]
            rows.append(np.repeat(dofs, nd, axis=1).ravel())
            cols.append(np.tile(dofs, (1, nd)).ravel())
            kv.append(ops.stiffness.ravel())
            mv.append(ops.mass.ravel())
        rows, cols = np.concatenate(rows), np.concatenate(cols)
        k = sp.csr_matrix((np.concatenate(kv), (rows, cols)), shape=(n, n))
        m = sp.csr_matrix((np.concatenate(mv), (rows, cols)), shape=(n, n))
        return k, m


@dataclass
class GlobalSystem:
    stiffness: sp.csr_matrix
    mass: sp.csr_matrix
    free_dofs: np.ndarray  # global DOF id (2*vertex + component) of each row
    num_total_dofs: int
    operators: MeshOperators | None = None

    @property
    def num_free(self) -> int:
        return len(self.free_dofs)

    def expand(self, w: np.ndarray) -> np.ndarray:
        """Free-DOF vector(s) to full vertex-DOF vector(s) with zero Dirichlet values."""
        w = np.asarray(w)
        out = np.zeros((self.num_total_dofs,) + w.shape[1:], dtype=w.dtype)
        out[self.free_dofs] = w
        return out

    def dof_map(self) -> np.ndarray:
        """Row index of each vertex DOF, -1 for Dirichlet-fixed DOFs."""
        m = np.full(self.num_total_dofs, -1, dtype=np.int64)
        m[self.free_dofs] = np.arange(self.num_free)
        return m


def free_dofs(mesh: PolyMesh) -> np.ndarray:
    fixed = np.zeros(mesh.num_vertices, dtype=bool)
    fixed[mesh.dirichlet_vertices] = True
    free_v = np.flatnonzero(~fixed)
    return np.column_stack([2 * free_v, 2 * free_v + 1]).ravel()


def restrict(k: sp.spmatrix, m: sp.spmatrix, mesh: PolyMesh, operators=None) -> GlobalSystem:
    if len(mesh.dirichlet_vertices) == 0:
        raise AssemblyError("empty Dirichlet boundary: stiffness would be singular")
    free = free_dofs(mesh)
    k = sp.csr_matrix(k)[free][:, free]
    m = sp.csr_matrix(m)[free][:, free]
    return GlobalSystem(k.tocsr(), m.tocsr(), free, 2 * mesh.num_vertices, operators)


def assemble(mesh: PolyMesh, material: Material, stabilization: str = "mean") -> GlobalSystem:
    """Assemble the Dirichlet-reduced VEM stiffness and mass matrices."""
    ops = MeshOperators(mesh, material, stabilization)
    k, m = ops.global_matrices()
    return restrict(k, m, mesh, ops)


def dump_matrices(system: GlobalSystem, directory) -> None:
    """Write stiffness/mass as ``row col value`` text files."""
    from pathlib import Path

    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    for name, mat in (("stiffness", system.stiffness), ("mass", system.mass)):
        coo = mat.tocoo()
        lines = [f"{r} {c} {v:.17g}" for r, c, v in zip(coo.row, coo.col, coo.data)]
        (out / f"{name}.txt").write_text("\n".join(lines) + "\n")
