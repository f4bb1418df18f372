"""Marking, mesh refinement and the adaptive solve-estimate-mark-refine loop."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .eig import solve_smallest
from .estimator import EstimatorReport, indicator
from .mesh import MeshError, PolyMesh, _key, polygon_centroid
from .vem import Material, assemble


class RefinementError(MeshError):
    pass


def mark(eta, fraction: float = 0.5) -> np.ndarray:
    """Maximum strategy: ids with ``eta_E >= fraction * max(eta)`` (ties included)."""
    eta = np.asarray(eta, dtype=float)
    if eta.size == 0:
        raise ValueError("no elements to mark")
    return np.flatnonzero(eta >= fraction * eta.max())


class _Splitter:
    """Shared midpoint bookkeeping for edge splits."""

    def __init__(self, mesh: PolyMesh):
        self.verts = list(mesh.vertices)
        self.boundary = dict(mesh.boundary)
        self.mids: dict[tuple[int, int], int] = {}

    def midpoint(self, a: int, b: int) -> int:
        k = _key(a, b)
        m = self.mids.get(k)
        if m is None:
            m = self.mids[k] = len(self.verts)
            self.verts.append(0.5 * (self.verts[a] + self.verts[b]))
            tag = self.boundary.pop(k, None)
            if tag is not None:
                self.boundary[_key(a, m)] = tag
                self.boundary[_key(m, b)] = tag
        return m

    def add_vertex(self, p) -> int:
        self.verts.append(np.asarray(p, dtype=float))
        return len(self.verts) - 1

    def build(self, elements) -> PolyMesh:
        return PolyMesh(np.array(self.verts), tuple(elements), self.boundary)


def refine_vem(mesh: PolyMesh, marked) -> PolyMesh:
    """Split each marked n-gon into n quadrilaterals around its barycenter.

    Unmarked neighbours keep their shape and absorb the new edge midpoints
    as extra polygon vertices. Unmarked elements come first in the output,
    in their original order, followed by the children of marked elements.
    """
    marked = np.unique(np.asarray(marked, dtype=np.int64))
    if marked.size == 0:
        return mesh
    is_marked = np.zeros(mesh.num_elements, dtype=bool)
    is_marked[marked] = True
    sp = _Splitter(mesh)
    v = mesh.vertices

    children = []
    for e in marked:
        cyc = [int(i) for i in mesh.elements[e]]
        pts = v[cyc]
        c = polygon_centroid(pts)
        nxt = np.roll(pts, -1, axis=0)
        fan = (pts[:, 0] - c[0]) * (nxt[:, 1] - c[1]) - (pts[:, 1] - c[1]) * (nxt[:, 0] - c[0])
        if np.any(fan <= 0):
            raise RefinementError(f"element {e} is not star-shaped with respect to its barycenter")
        ci = sp.add_vertex(c)
        n = len(cyc)
        mids = [sp.midpoint(cyc[i], cyc[(i + 1) % n]) for i in range(n)]
        for i in range(n):
            children.append([cyc[i], mids[i], ci, mids[i - 1]])

    kept = []
    for e in np.flatnonzero(~is_marked):
        cyc = [int(i) for i in mesh.elements[e]]
        out = []
        for i, a in enumerate(cyc):
            out.append(a)
            m = sp.mids.get(_key(a, cyc[(i + 1) % len(cyc)]))
            if m is not None:
                out.append(m)
        kept.append(out)
    return sp.build(kept + children)


def _longest_edge_first(mesh: PolyMesh) -> list[list[int]]:
    """Rotate each CCW triangle so its longest edge is (t[0], t[1])."""
    out = []
    for t in mesh.elements:
        t = [int(i) for i in t]
        p = mesh.vertices[t]
        lengths = np.linalg.norm(np.roll(p, -1, axis=0) - p, axis=1)
        k = int(np.argmax(lengths))
        out.append(t[k:] + t[:k])
    return out


def refine_fem(mesh: PolyMesh, marked, refinement_edges: list[list[int]] | None = None):
    """Newest-vertex bisection of the marked triangles with conformity closure.

    Each triangle ``(a, b, c)`` is stored with its refinement edge ``(a, b)``
    and newest vertex ``c``. Returns the refined mesh; its element cycles
    keep that convention, so they can be passed back as ``refinement_edges``.
    """
    if not mesh.is_triangular():
        raise RefinementError("newest-vertex bisection needs an all-triangle mesh")
    marked = np.unique(np.asarray(marked, dtype=np.int64))
    if marked.size == 0:
        return mesh
    tris = refinement_edges if refinement_edges is not None else _longest_edge_first(mesh)
    tris = [list(t) for t in tris]

    # closure: every triangle with a marked edge must also bisect its refinement edge
    edge_tris: dict[tuple[int, int], list[int]] = {}
    for i, t in enumerate(tris):
        for a, b in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0])):
            edge_tris.setdefault(_key(a, b), []).append(i)
    flagged: set[tuple[int, int]] = set()
    stack = [_key(tris[i][0], tris[i][1]) for i in marked]
    while stack:
        k = stack.pop()
        if k in flagged:
            continue
        flagged.add(k)
        for i in edge_tris[k]:
            r = _key(tris[i][0], tris[i][1])
            if r not in flagged:
                stack.append(r)

    sp = _Splitter(mesh)
    work = tris
    while True:
        nxt, changed = [], False
        for a, b, c in work:
            if _key(a, b) in flagged:
                m = sp.midpoint(a, b)
                nxt.append([c, a, m])
                nxt.append([b, c, m])
                changed = True
            else:
                nxt.append([a, b, c])
        work = nxt
        if not changed:
            break
    return sp.build(work)


@dataclass
class AdaptiveStep:
    step: int
    num_dofs: int
    omega: float
    report: EstimatorReport
    marked: np.ndarray
    num_elements: int
    wall_time: float
    mesh: PolyMesh = field(repr=False)

    def row(self) -> dict:
        r = self.report
        return {
            "N": self.num_dofs,
            "omega_h1": self.omega,
            "error": r.error,
            "R2": r.residual2_total,
            "theta2": r.theta2_total,
            "J2": r.jump2_total,
            "eta2": r.eta2,
            "effectivity": r.effectivity,
        }


STRATEGIES = ("vem", "fem", "uniform")


def adaptive_loop(
    mesh: PolyMesh,
    material: Material,
    strategy: str = "vem",
    max_dofs: int = 25_000,
    mark_fraction: float = 0.5,
    omega_ref: float | None = None,
    eta_floor: float = 0.0,
    max_steps: int = 50,
    stabilization: str = "mean",
    eig_tol: float = 1e-7,
    callback=None,
) -> list[AdaptiveStep]:
    """Solve, estimate, mark and refine until ``N >= max_dofs`` or ``eta <= eta_floor``.

    ``strategy`` is ``"vem"`` (polygon splitting), ``"fem"`` (newest-vertex
    bisection of marked triangles) or ``"uniform"`` (two bisection sweeps
    of every triangle per step).
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    steps: list[AdaptiveStep] = []
    nvb = None
    for k in range(max_steps):
        t0 = time.perf_counter()
        try:
            system = assemble(mesh, material, stabilization)
            sol = solve_smallest(system.stiffness, system.mass, 1, tol=eig_tol, scale=material.rho)
        except Exception as exc:
            raise type(exc)(f"adaptive step {k}: {exc}") from exc
        lam = float(sol.eigenvalues[0])
        w = system.expand(sol.eigenvectors[:, 0])
        rep = indicator(system.operators, w, lam, omega_ref)
        done = system.num_free >= max_dofs or rep.eta <= eta_floor or k == max_steps - 1
        marked = np.array([], dtype=np.int64) if done else mark(rep.eta_elements, mark_fraction)
        steps.append(
            AdaptiveStep(
                step=k,
                num_dofs=system.num_free,
                omega=float(np.sqrt(lam)),
                report=rep,
                marked=marked,
                num_elements=mesh.num_elements,
                wall_time=time.perf_counter() - t0,
                mesh=mesh,
            )
        )
        if callback is not None:
            callback(steps[-1])
        if done:
            break
        try:
            if strategy == "vem":
                mesh = refine_vem(mesh, marked)
            elif strategy == "fem":
                mesh = refine_fem(mesh, marked, nvb)
                nvb = [list(map(int, t)) for t in mesh.elements]
            else:
                for _ in range(2):
                    mesh = refine_fem(mesh, np.arange(mesh.num_elements), nvb)
                    nvb = [list(map(int, t)) for t in mesh.elements]
        except MeshError as exc:
            raise RefinementError(f"adaptive step {k}: {exc}") from exc
    return steps
