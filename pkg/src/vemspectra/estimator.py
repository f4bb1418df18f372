"""Residual a-posteriori error indicators for a computed eigenpair."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import DIRICHLET, INTERIOR, NEUMANN, MeshError
from .vem import MeshOperators


@dataclass
class EstimatorReport:
    theta2: np.ndarray  # per element, inconsistency term
    residual2: np.ndarray  # per element, volumetric residual
    jump2: np.ndarray  # per element, sum of h_E ||J_l||^2 over its edges
    edge_jumps: np.ndarray  # (n_edges, 2) constant jump vector of each edge
    omega_h: float | None = None
    omega_ref: float | None = None

    @property
    def eta2_elements(self) -> np.ndarray:
        return self.theta2 + self.residual2 + self.jump2

    @property
    def eta_elements(self) -> np.ndarray:
        return np.sqrt(self.eta2_elements)

    @property
    def theta2_total(self) -> float:
        return float(self.theta2.sum())

    @property
    def residual2_total(self) -> float:
        return float(self.residual2.sum())

    @property
    def jump2_total(self) -> float:
        return float(self.jump2.sum())

    @property
    def eta2(self) -> float:
        return float(self.eta2_elements.sum())

    @property
    def eta(self) -> float:
        return float(np.sqrt(self.eta2))

    @property
    def error(self) -> float | None:
        if self.omega_h is None or self.omega_ref is None:
            return None
        return abs(self.omega_ref - self.omega_h)

    @property
    def effectivity(self) -> float | None:
        """|omega - omega_h| / eta^2, when a reference frequency is known."""
        err = self.error
        if err is None:
            return None
        return err / self.eta2 if self.eta2 > 0 else float("inf")


def _element_fields(ops: MeshOperators, w: np.ndarray):
    """Per-element projected coefficients, stabilization norms and stresses."""
    ne = ops.mesh.num_elements
    coef = np.zeros((ne, 6))
    rem2 = np.zeros(ne)
    sigma = np.zeros(ne)
    sigma0 = np.zeros(ne)
    diam = np.zeros(ne)
    l2sq = np.zeros(ne)  # ||Pi w||^2_{0,E}
    for ids, conn, lo in ops.groups.values():
        wl = w[ops.local_dofs(conn)]
        c = np.einsum("bij,bj->bi", lo.proj, wl)
        r = wl - np.einsum("bij,bj->bi", lo.dmat, c)
        coef[ids] = c
        rem2[ids] = (r**2).sum(1)
        sigma[ids] = lo.sigma
        sigma0[ids] = lo.sigma0
        diam[ids] = lo.diameter
        l2sq[ids] = np.einsum("bi,bij,bj->b", c, lo.poly_mass, c) / ops.material.rho
    return coef, rem2, sigma, sigma0, diam, l2sq


def theta_term(ops: MeshOperators, w: np.ndarray) -> np.ndarray:
    """Stabilization norms of ``w - Pi w`` (both forms), per element."""
    _, rem2, sigma, sigma0, _, _ = _element_fields(ops, w)
    return (sigma + sigma0) * rem2


def volume_residual(ops: MeshOperators, w: np.ndarray, lam: float) -> np.ndarray:
    """``h_E^2 ||lam rho Pi0 w + div C eps(Pi w)||^2``; the divergence vanishes for k = 1."""
    _, _, _, _, diam, l2sq = _element_fields(ops, w)
    rho = ops.material.rho
    return diam**2 * (lam * rho) ** 2 * l2sq


def element_stresses(ops: MeshOperators, coef: np.ndarray, diam: np.ndarray) -> np.ndarray:
    """Constant Cauchy stress of the projected field in each element, (ne, 2, 2)."""
    exx = coef[:, 1] / diam
    eyy = coef[:, 5] / diam
    gxy = (coef[:, 2] + coef[:, 4]) / diam
    voigt = np.column_stack([exx, eyy, gxy]) @ ops.material.elasticity_matrix()
    out = np.empty((len(coef), 2, 2))
    out[:, 0, 0] = voigt[:, 0]
    out[:, 1, 1] = voigt[:, 1]
    out[:, 0, 1] = out[:, 1, 0] = voigt[:, 2]
    return out


def edge_jumps(ops: MeshOperators, stress: np.ndarray, diam: np.ndarray):
    """Edge residual vectors and their per-element accumulation.

    Returns ``(jumps, jump2)`` where ``jumps[l]`` is the constant vector
    ``J_l`` and ``jump2[E] = sum_{l in E} h_E |l| |J_l|^2``.
    """
    mesh = ops.mesh
    v = mesh.vertices
    edges = mesh.edges
    owners = mesh.edge_elements
    tags = mesh.edge_tags
    # outward normal of the first owner: orient the edge as that owner traverses it
    jumps = np.zeros((len(edges), 2))
    lengths = np.linalg.norm(v[edges[:, 1]] - v[edges[:, 0]], axis=1)
    first = owners[:, 0]
    tang = np.zeros((len(edges), 2))
    for e, cyc in enumerate(mesh.elements):
        for i, eid in enumerate(mesh.element_edges[e]):
            if first[eid] == e:
                tang[eid] = v[cyc[(i + 1) % len(cyc)]] - v[cyc[i]]
    normal = np.column_stack([tang[:, 1], -tang[:, 0]]) / lengths[:, None]

    interior = tags == INTERIOR
    if np.any(owners[interior, 1] < 0):
        raise MeshError("interior edge with a single owner")
    sp = stress[first[interior]]
    sm = stress[owners[interior, 1]]
    jumps[interior] = 0.5 * np.einsum("bij,bj->bi", sp - sm, normal[interior])
    neu = tags == NEUMANN
    jumps[neu] = -np.einsum("bij,bj->bi", stress[first[neu]], normal[neu])
    jumps[tags == DIRICHLET] = 0.0

    edge_norm2 = lengths * (jumps**2).sum(1)
    jump2 = np.zeros(mesh.num_elements)
    for side in (0, 1):
        e = owners[:, side]
        ok = e >= 0
        np.add.at(jump2, e[ok], diam[e[ok]] * edge_norm2[ok])
    return jumps, jump2


def indicator(ops: MeshOperators, w: np.ndarray, lam: float, omega_ref: float | None = None) -> EstimatorReport:
    """All estimator terms for the eigenpair ``(lam, w)``.

    ``w`` is the full vertex-DOF vector (Dirichlet values included), scaled
    so that its discrete mass-norm over ``rho`` is one.
    """
    w = np.asarray(w, dtype=float)
    coef, rem2, sigma, sigma0, diam, l2sq = _element_fields(ops, w)
    theta2 = (sigma + sigma0) * rem2
    rho = ops.material.rho
    residual2 = diam**2 * (lam * rho) ** 2 * l2sq
    stress = element_stresses(ops, coef, diam)
    jumps, jump2 = edge_jumps(ops, stress, diam)
    return EstimatorReport(
        theta2=theta2,
        residual2=residual2,
        jump2=jump2,
        edge_jumps=jumps,
        omega_h=float(np.sqrt(lam)) if lam >= 0 else None,
        omega_ref=omega_ref,
    )
