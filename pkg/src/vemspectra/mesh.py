"""Polygonal meshes: data model, generators, geometry and regularity checks."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.spatial import Delaunay, HalfspaceIntersection, Voronoi
from scipy.optimize import linprog

INTERIOR = "interior"
DIRICHLET = "dirichlet"
NEUMANN = "neumann"
TAGS = (INTERIOR, DIRICHLET, NEUMANN)


class MeshError(ValueError):
    """Raised for invalid or inconsistent meshes."""


def _key(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True)
class ElementGeometry:
    area: float
    diameter: float
    centroid: np.ndarray
    edge_lengths: np.ndarray


@dataclass(frozen=True)
class RegularityReport:
    edge_ratio: np.ndarray  # shortest edge / h_E
    ball_ratio: np.ndarray  # inscribed kernel ball radius / h_E
    a1: np.ndarray
    a2: np.ndarray

    @property
    def all_ok(self) -> bool:
        return bool(self.a1.all() and self.a2.all())


@dataclass(frozen=True, eq=False)
class PolyMesh:
    """Conforming polygonal mesh.

    ``elements`` holds counter-clockwise vertex cycles. ``boundary`` maps the
    sorted vertex pair of every boundary edge to its tag (``"dirichlet"`` or
    ``"neumann"``); every other edge is interior.
    """

    vertices: np.ndarray
    elements: tuple[np.ndarray, ...]
    boundary: dict[tuple[int, int], str] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "vertices", np.ascontiguousarray(self.vertices, dtype=float))
        object.__setattr__(
            self, "elements", tuple(np.asarray(e, dtype=np.int64) for e in self.elements)
        )

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_elements(self) -> int:
        return len(self.elements)

    @cached_property
    def _edge_data(self):
        index: dict[tuple[int, int], int] = {}
        pairs, owners, elem_edges = [], [], []
        for e, cyc in enumerate(self.elements):
            ids = []
            for a, b in zip(cyc, np.roll(cyc, -1)):
                k = _key(int(a), int(b))
                j = index.get(k)
                if j is None:
                    j = index[k] = len(pairs)
                    pairs.append(k)
                    owners.append([e, -1])
                elif owners[j][1] == -1:
                    owners[j][1] = e
                else:
                    raise MeshError(f"edge {k} shared by more than two elements")
                ids.append(j)
            elem_edges.append(np.array(ids, dtype=np.int64))
        pairs = np.array(pairs, dtype=np.int64).reshape(-1, 2)
        owners = np.array(owners, dtype=np.int64).reshape(-1, 2)
        tags = []
        for k, (e0, e1) in zip(map(tuple, pairs), owners):
            if e1 >= 0:
                if k in self.boundary:
                    raise MeshError(f"interior edge {k} carries a boundary tag")
                tags.append(INTERIOR)
            else:
                tag = self.boundary.get(k)
                if tag is None:
                    raise MeshError(f"boundary edge {k} has no tag")
                tags.append(tag)
        return pairs, owners, np.array(tags), tuple(elem_edges), index

    @property
    def edges(self) -> np.ndarray:
        """(n_edges, 2) vertex pairs, sorted within each row."""
        return self._edge_data[0]

    @property
    def edge_elements(self) -> np.ndarray:
        """(n_edges, 2) adjacent element ids; -1 marks a boundary side."""
        return self._edge_data[1]

    @property
    def edge_tags(self) -> np.ndarray:
        return self._edge_data[2]

    @property
    def element_edges(self) -> tuple[np.ndarray, ...]:
        """Edge ids of each element, in cycle order (edge i joins vertex i and i+1)."""
        return self._edge_data[3]

    def edge_id(self, a: int, b: int) -> int:
        return self._edge_data[4][_key(a, b)]

    @cached_property
    def dirichlet_vertices(self) -> np.ndarray:
        """Vertices on the closure of the Dirichlet boundary."""
        ed = self.edges[self.edge_tags == DIRICHLET]
        return np.unique(ed.ravel())

    @cached_property
    def geometry(self) -> list[ElementGeometry]:
        return [element_geometry(self, e) for e in range(self.num_elements)]

    def areas(self) -> np.ndarray:
        return np.array([g.area for g in self.geometry])

    def diameters(self) -> np.ndarray:
        return np.array([g.diameter for g in self.geometry])

    def is_triangular(self) -> bool:
        return all(len(c) == 3 for c in self.elements)

    def validate(self, tol: float = 1e-12) -> None:
        """Check the structural invariants; raise :class:`MeshError` on failure."""
        v = self.vertices
        diam = np.ptp(v, axis=0).max() * np.sqrt(2.0)
        for e, cyc in enumerate(self.elements):
            if len(cyc) < 3 or len(set(cyc.tolist())) != len(cyc):
                raise MeshError(f"element {e} is not a simple cycle")
            if polygon_area(v[cyc]) <= 0:
                raise MeshError(f"element {e} has non-positive signed area")
        _ = self.edge_tags
        # each interior edge is traversed in opposite directions by its owners
        seen: dict[tuple[int, int], int] = {}
        for cyc in self.elements:
            for a, b in zip(cyc, np.roll(cyc, -1)):
                if (int(a), int(b)) in seen:
                    raise MeshError(f"edge ({a}, {b}) traversed twice in the same direction")
                seen[(int(a), int(b))] = 1
        used = np.unique(np.concatenate(self.elements))
        if len(used) != self.num_vertices:
            raise MeshError("mesh has unused vertices")
        rounded = np.round(v / (tol * diam)).astype(np.int64)
        if len(np.unique(rounded, axis=0)) != len(v):
            raise MeshError("duplicate vertex coordinates")

    # --- serialization -------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "vertices": self.vertices.tolist(),
            "elements": [c.tolist() for c in self.elements],
            "edges": [
                [int(a), int(b), str(t)] for (a, b), t in zip(self.edges, self.edge_tags)
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PolyMesh":
        boundary = {}
        for a, b, tag in data["edges"]:
            if tag not in TAGS:
                raise MeshError(f"unknown edge tag {tag!r}")
            if tag != INTERIOR:
                boundary[_key(int(a), int(b))] = tag
        mesh = cls(np.array(data["vertices"], dtype=float), tuple(data["elements"]), boundary)
        mesh.validate()
        return mesh

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "PolyMesh":
        return cls.from_dict(json.loads(Path(path).read_text()))


def polygon_area(pts: np.ndarray) -> float:
    q = pts - pts.mean(axis=0)  # translation-invariant shoelace
    x, y = q[:, 0], q[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def polygon_centroid(pts: np.ndarray) -> np.ndarray:
    shift = pts.mean(axis=0)
    q = pts - shift
    x, y = q[:, 0], q[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    a = 0.5 * cross.sum()
    return shift + np.array([((x + xn) * cross).sum(), ((y + yn) * cross).sum()]) / (6.0 * a)


def polygon_diameter(pts: np.ndarray) -> float:
    d = pts[:, None, :] - pts[None, :, :]
    return float(np.sqrt((d**2).sum(-1)).max())


def element_geometry(mesh: PolyMesh, e: int) -> ElementGeometry:
    pts = mesh.vertices[mesh.elements[e]]
    area = polygon_area(pts)
    if area <= 0:
        raise MeshError(f"element {e} is degenerate (area {area:g})")
    lengths = np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1)
    return ElementGeometry(area, polygon_diameter(pts), polygon_centroid(pts), lengths)


def polygon_kernel(pts: np.ndarray):
    """Chebyshev center and radius of the kernel of a CCW polygon.

    The kernel is the intersection of the inner half-planes of all edges;
    returns ``(center, radius)`` with radius 0 when the kernel is empty or
    degenerate.
    """
    d = np.roll(pts, -1, axis=0) - pts
    n = np.column_stack([d[:, 1], -d[:, 0]])  # outward normals (CCW)
    norm = np.linalg.norm(n, axis=1)
    n = n / norm[:, None]
    b = np.einsum("ij,ij->i", n, pts)
    # maximise r subject to n.x + r <= b
    res = linprog(
        c=[0.0, 0.0, -1.0],
        A_ub=np.column_stack([n, np.ones(len(n))]),
        b_ub=b,
        bounds=[(None, None), (None, None), (0, None)],
        method="highs",
    )
    if not res.success or res.x[2] <= 0:
        return None, 0.0
    return res.x[:2], float(res.x[2])


def kernel_polygon(pts: np.ndarray) -> np.ndarray | None:
    """Vertices of the kernel (half-plane intersection), CCW, or None if empty."""
    center, r = polygon_kernel(pts)
    if r <= 0:
        return None
    d = np.roll(pts, -1, axis=0) - pts
    n = np.column_stack([d[:, 1], -d[:, 0]])
    halfspaces = np.column_stack([n, -np.einsum("ij,ij->i", n, pts)])
    hs = HalfspaceIntersection(halfspaces, center)
    k = hs.intersections
    ang = np.arctan2(k[:, 1] - center[1], k[:, 0] - center[0])
    k = k[np.argsort(ang)]
    keep = np.r_[True, np.linalg.norm(np.diff(k, axis=0), axis=1) > 1e-14]
    return k[keep]


def check_assumptions(mesh: PolyMesh, c_t: float) -> RegularityReport:
    if not 0 < c_t < 1:
        raise ValueError("C_T must lie in (0, 1)")
    edge_ratio, ball_ratio = [], []
    for e, g in enumerate(mesh.geometry):
        edge_ratio.append(g.edge_lengths.min() / g.diameter)
        _, r = polygon_kernel(mesh.vertices[mesh.elements[e]])
        ball_ratio.append(r / g.diameter)
    edge_ratio, ball_ratio = np.array(edge_ratio), np.array(ball_ratio)
    return RegularityReport(edge_ratio, ball_ratio, edge_ratio >= c_t, ball_ratio >= c_t)


def star_center(pts: np.ndarray) -> np.ndarray:
    """A point the polygon is star-shaped with respect to (centroid when possible)."""
    c = polygon_centroid(pts)
    if _sees_all_edges(pts, c):
        return c
    k, r = polygon_kernel(pts)
    if r <= 0:
        raise MeshError("polygon is not star-shaped")
    return k


def _sees_all_edges(pts: np.ndarray, c: np.ndarray) -> bool:
    a = pts - c
    b = np.roll(pts, -1, axis=0) - c
    return bool((a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0] > 0).all())


def subtriangulate(mesh: PolyMesh, e: int) -> np.ndarray:
    """Fan of triangles (k, 3, 2) joining consecutive vertices to a star center."""
    pts = mesh.vertices[mesh.elements[e]]
    try:
        c = star_center(pts)
    except MeshError as exc:
        raise MeshError(f"element {e}: no star center for sub-triangulation") from exc
    nxt = np.roll(pts, -1, axis=0)
    return np.stack([np.broadcast_to(c, pts.shape), pts, nxt], axis=1)


# --- generators --------------------------------------------------------


def _tag_boundary(vertices, elements, classify) -> dict[tuple[int, int], str]:
    count: dict[tuple[int, int], int] = {}
    for cyc in elements:
        for a, b in zip(cyc, np.roll(cyc, -1)):
            k = _key(int(a), int(b))
            count[k] = count.get(k, 0) + 1
    out = {}
    for k, c in count.items():
        if c == 1:
            mid = 0.5 * (vertices[k[0]] + vertices[k[1]])
            out[k] = classify(mid)
    return out


def _square_bottom_fixed(mid: np.ndarray) -> str:
    return DIRICHLET if abs(mid[1]) < 1e-12 else NEUMANN


def generate_trapezoidal_mesh(n: int, skew: float = 0.25) -> PolyMesh:
    """``n x n`` trapezoids on the unit square, each edge split at its midpoint.

    Interior vertical grid lines are shifted by ``+-skew/n`` in a checkerboard
    pattern, so interior cells are congruent isosceles trapezoids. Bottom side
    is Dirichlet, the rest Neumann.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    h = 1.0 / n
    ii, jj = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="ij")
    x = ii * h
    interior = (ii > 0) & (ii < n)
    x = x + np.where(interior, skew * h * (-1.0) ** (ii + jj), 0.0)
    y = jj * h
    grid = np.column_stack([x.ravel(), y.ravel()])
    gid = lambda i, j: i * (n + 1) + j  # noqa: E731

    verts = [p for p in grid]
    mids: dict[tuple[int, int], int] = {}

    def mid(a, b):
        k = _key(a, b)
        if k not in mids:
            mids[k] = len(verts)
            verts.append(0.5 * (grid[a] + grid[b]))
        return mids[k]

    elements = []
    for j in range(n):
        for i in range(n):
            c = [gid(i, j), gid(i + 1, j), gid(i + 1, j + 1), gid(i, j + 1)]
            cyc = []
            for a, b in zip(c, c[1:] + c[:1]):
                cyc += [a, mid(a, b)]
            elements.append(cyc)
    verts = np.array(verts)
    return PolyMesh(verts, tuple(elements), _tag_boundary(verts, elements, _square_bottom_fixed))


def generate_triangle_mesh(n: int) -> PolyMesh:
    """``n x n`` squares on the unit square, each cut into two triangles
    along alternating diagonals. Bottom side Dirichlet, the rest Neumann."""
    if n < 1:
        raise ValueError("n must be >= 1")
    t = np.linspace(0.0, 1.0, n + 1)
    xx, yy = np.meshgrid(t, t, indexing="ij")
    verts = np.column_stack([xx.ravel(), yy.ravel()])
    gid = lambda i, j: i * (n + 1) + j  # noqa: E731
    elements = []
    for j in range(n):
        for i in range(n):
            a, b, c, d = gid(i, j), gid(i + 1, j), gid(i + 1, j + 1), gid(i, j + 1)
            if (i + j) % 2 == 0:
                elements += [[a, b, c], [a, c, d]]
            else:
                elements += [[a, b, d], [b, c, d]]
    return PolyMesh(verts, tuple(elements), _tag_boundary(verts, elements, _square_bottom_fixed))


def generate_hexagonal_mesh(n: int, jitter: float = 0.1, seed: int = 0) -> PolyMesh:
    """Voronoi mesh of a jittered hexagonal lattice clipped to the unit square.

    Seeds are reflected across the four sides so boundary cells are clipped
    exactly by the square. About ``n`` cells per side; interior cells are
    convex hexagons. Deterministic for a given ``seed``.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    rng = np.random.default_rng(seed)
    dx = 1.0 / n
    rows = max(2, int(round(n * 2.0 / np.sqrt(3.0))))
    dy = 1.0 / rows
    seeds = []
    for j in range(rows):
        off = 0.25 if j % 2 == 0 else 0.75
        for i in range(n):
            seeds.append(((i + off) * dx, (j + 0.5) * dy))
    seeds = np.array(seeds)
    seeds += jitter * min(dx, dy) * rng.uniform(-1, 1, seeds.shape)
    m = len(seeds)
    mirrored = [
        seeds,
        seeds * [-1, 1],
        seeds * [-1, 1] + [2, 0],
        seeds * [1, -1],
        seeds * [1, -1] + [0, 2],
    ]
    vor = Voronoi(np.vstack(mirrored))
    raw = vor.vertices
    tol = 1e-10
    raw = np.where(np.abs(raw) < tol, 0.0, raw)
    raw = np.where(np.abs(raw - 1.0) < tol, 1.0, raw)

    lookup: dict[tuple[int, int], int] = {}
    verts: list[np.ndarray] = []

    def vid(p):
        k = (int(round(p[0] * 1e9)), int(round(p[1] * 1e9)))
        if k not in lookup:
            lookup[k] = len(verts)
            verts.append(p)
        return lookup[k]

    elements = []
    for s in range(m):
        region = vor.regions[vor.point_region[s]]
        if -1 in region or not region:
            raise MeshError("unbounded Voronoi cell inside the square")
        pts = raw[region]
        c = pts.mean(axis=0)
        order = np.argsort(np.arctan2(pts[:, 1] - c[1], pts[:, 0] - c[0]))
        cyc = []
        for p in pts[order]:
            k = vid(p)
            if not cyc or cyc[-1] != k:
                cyc.append(k)
        if cyc[0] == cyc[-1]:
            cyc.pop()
        elements.append(cyc)
    verts = np.array(verts)
    return PolyMesh(verts, tuple(elements), _tag_boundary(verts, elements, _square_bottom_fixed))


VESSEL_OUTER = 0.75
VESSEL_INNER = 0.5


def _vessel_classifier(fixed: str):
    def classify(mid):
        on_outer = max(abs(mid[0]), abs(mid[1])) > VESSEL_OUTER - 1e-12
        if fixed == "bottom":
            return DIRICHLET if on_outer and mid[1] < -VESSEL_OUTER + 1e-12 else NEUMANN
        if fixed == "outer":
            return DIRICHLET if on_outer else NEUMANN
        raise ValueError(f"unknown vessel Dirichlet choice {fixed!r}")

    return classify


def _square_ring(half: float, per_side: int) -> np.ndarray:
    t = np.linspace(-half, half, per_side + 1)[:-1]
    s = np.full_like(t, half)
    return np.vstack(
        [
            np.column_stack([t, -s]),
            np.column_stack([s, t]),
            np.column_stack([-t, s]),
            np.column_stack([-s, -t]),
        ]
    )


def generate_vessel_mesh(fixed: str = "bottom") -> PolyMesh:
    """Coarse triangulation of the square annulus [-0.75,0.75]^2 minus [-0.5,0.5]^2.

    Three rings of vertices (inner wall, mid-wall, outer wall with 5, 7 and 7
    segments per side) are Delaunay-triangulated and the hole is removed.
    ``fixed`` selects the Dirichlet part: ``"bottom"`` (the outer bottom side)
    or ``"outer"`` (the whole outer wall); everything else is traction free.
    """
    mid_half = 0.5 * (VESSEL_OUTER + VESSEL_INNER)
    pts = np.vstack(
        [
            _square_ring(VESSEL_INNER, 5),
            _square_ring(mid_half, 7),
            _square_ring(VESSEL_OUTER, 7),
        ]
    )
    tri = Delaunay(pts)
    elements = []
    for s in tri.simplices:
        c = pts[s].mean(axis=0)
        if max(abs(c[0]), abs(c[1])) < VESSEL_INNER:
            continue
        if polygon_area(pts[s]) < 0:
            s = s[[0, 2, 1]]
        elements.append(s.tolist())
    return PolyMesh(pts, tuple(elements), _tag_boundary(pts, elements, _vessel_classifier(fixed)))
