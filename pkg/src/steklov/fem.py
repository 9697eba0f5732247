"""P1 finite elements on a refined hexagon-fan triangulation of the unit disk.

The pencil ``(A, B)`` discretizes, on the fixed reference disk, the forms

    A(u, v) = \\int (grad u M grad v^T + u v |det grad phi|) dx,
              M = (grad phi)^-1 (grad phi)^-T |det grad phi|
    B(u, v) = \\int_{dOmega} u v w d sigma,
              w = |nu (grad phi)^-1| |det grad phi|

so that the generalized eigenproblem ``A u = lambda B u`` on the disk gives
the spectrum of the deformed domain ``phi(Omega)``.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .geometry import GAUSS3_NODES, GAUSS3_WEIGHTS, boundary_frame, eval_map

__all__ = ["DiskMesh", "AssembledPencil", "build_disk_mesh", "assemble", "dump_mesh", "load_mesh"]

# degree-2 interior rule: barycentric points and weights (fractions of the area)
TRI_BARY = np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]])
TRI_WEIGHTS = np.full(3, 1 / 3)


@dataclass(frozen=True)
class DiskMesh:
    """Triangulation of the unit disk.

    ``boundary_edges[e] = (i, j)`` runs counterclockwise, and
    ``boundary_t[e] = (t_i, t_j)`` holds the arc parameters of its endpoints,
    unwrapped so that ``t_j > t_i``. ``edge_triangle[e]`` is the triangle
    containing boundary edge ``e``.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_t: np.ndarray
    edge_triangle: np.ndarray
    refinement_level: int

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def boundary_vertices(self):
        """Boundary vertex indices in counterclockwise order."""
        return self.boundary_edges[:, 0]

    @property
    def interior_vertices(self):
        mask = np.ones(self.n_vertices, dtype=bool)
        mask[self.boundary_vertices] = False
        return np.flatnonzero(mask)

    def triangle_areas(self):
        p = self.vertices[self.triangles]
        d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def with_vertices(self, vertices):
        """Same connectivity with moved vertices (e.g. pushed forward by a map)."""
        return DiskMesh(
            vertices=np.asarray(vertices, dtype=float),
            triangles=self.triangles,
            boundary_edges=self.boundary_edges,
            boundary_t=self.boundary_t,
            edge_triangle=self.edge_triangle,
            refinement_level=self.refinement_level,
        )

    def stats(self):
        return {
            "level": self.refinement_level,
            "vertices": int(self.n_vertices),
            "triangles": int(len(self.triangles)),
            "boundary_edges": int(len(self.boundary_edges)),
        }


def build_disk_mesh(level):
    """Hexagon fan refined ``level`` times by midpoint subdivision.

    Boundary vertices are placed on the unit circle after every round.
    """
    if level < 0:
        raise ValueError(f"refinement level must be >= 0, got {level}")
    ang = np.pi / 3 * np.arange(6)
    verts = [(0.0, 0.0)] + [(np.cos(a), np.sin(a)) for a in ang]
    tris = [(0, 1 + k, 1 + (k + 1) % 6) for k in range(6)]
    bedges = [(1 + k, 1 + (k + 1) % 6) for k in range(6)]
    bt = [(a, a + np.pi / 3) for a in ang]

    for _ in range(level):
        verts, tris, bedges, bt = _refine(verts, tris, bedges, bt)

    vertices = np.array(verts, dtype=float)
    triangles = np.array(tris, dtype=np.int64)
    boundary_edges = np.array(bedges, dtype=np.int64)
    boundary_t = np.array(bt, dtype=float)

    owner = {}
    for k, (a, b, c) in enumerate(tris):
        for i, j in ((a, b), (b, c), (c, a)):
            owner[(i, j)] = k
    edge_triangle = np.array([owner[(i, j)] for i, j in bedges], dtype=np.int64)
    return DiskMesh(vertices, triangles, boundary_edges, boundary_t, edge_triangle, level)


def _refine(verts, tris, bedges, bt):
    verts = list(verts)
    mid = {}

    def midpoint(i, j):
        key = (i, j) if i < j else (j, i)
        if key not in mid:
            (xi, yi), (xj, yj) = verts[i], verts[j]
            verts.append((0.5 * (xi + xj), 0.5 * (yi + yj)))
            mid[key] = len(verts) - 1
        return mid[key]

    new_tris = []
    for a, b, c in tris:
        ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
        new_tris += [(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)]

    new_edges, new_t = [], []
    for (i, j), (ti, tj) in zip(bedges, bt):
        m = mid[(i, j) if i < j else (j, i)]
        tm = 0.5 * (ti + tj)
        verts[m] = (np.cos(tm), np.sin(tm))
        new_edges += [(i, m), (m, j)]
        new_t += [(ti, tm), (tm, tj)]
    return verts, new_tris, new_edges, new_t


@dataclass(frozen=True)
class AssembledPencil:
    """Symmetric sparse pair ``(A, B)`` over the mesh vertices."""

    A: sp.csr_matrix
    B: sp.csr_matrix
    mesh: DiskMesh
    phi: object = None

    @property
    def n(self):
        return self.A.shape[0]


def _p1_gradients(mesh):
    """Constant gradients of the three barycentric functions, shape (T, 3, 2)."""
    p = mesh.vertices[mesh.triangles]
    d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    g1 = np.column_stack([d2[:, 1], -d2[:, 0]]) / det[:, None]
    g2 = np.column_stack([-d1[:, 1], d1[:, 0]]) / det[:, None]
    return np.stack([-g1 - g2, g1, g2], axis=1), 0.5 * det


def element_gradients(mesh, values):
    """Reference gradient of a P1 field on every triangle, shape (T, 2)."""
    grads, _ = _p1_gradients(mesh)
    return np.einsum("tk,tkd->td", np.asarray(values)[mesh.triangles], grads)


def boundary_nodes(mesh):
    """Gauss nodes on boundary edges.

    Returns ``xi`` (local coordinate on each edge, shape (3,)), the arc
    parameters ``t`` (E, 3) and the chord lengths (E,).
    """
    p = mesh.vertices[mesh.boundary_edges]
    chord = np.hypot(*(p[:, 1] - p[:, 0]).T)
    t0, t1 = mesh.boundary_t[:, 0], mesh.boundary_t[:, 1]
    t = t0[:, None] + GAUSS3_NODES[None, :] * (t1 - t0)[:, None]
    return GAUSS3_NODES, t, chord


def assemble(mesh, phi=None):
    """Assemble the pulled-back pencil on ``mesh`` for the map ``phi``.

    ``phi=None`` means identity coefficients (``M = I``, ``w = 1``) on the
    mesh as given, which also works for meshes whose vertices were moved off
    the unit disk.
    """
    grads, area = _p1_gradients(mesh)
    ntri = len(mesh.triangles)
    p = mesh.vertices[mesh.triangles]
    xq = np.einsum("qk,tkd->tqd", TRI_BARY, p)

    if phi is None:
        Mq = np.broadcast_to(np.eye(2), (ntri, 3, 2, 2))
        detq = np.ones((ntri, 3))
    else:
        _, J, detq = eval_map(phi, xq)
        Jinv = np.linalg.inv(J)
        Mq = np.einsum("tqij,tqkj->tqik", Jinv, Jinv) * np.abs(detq)[..., None, None]
        detq = np.abs(detq)

    wq = area[:, None] * TRI_WEIGHTS[None, :]
    Mbar = np.einsum("tq,tqij->tij", wq, Mq)
    K = np.einsum("tai,tij,tbj->tab", grads, Mbar, grads)
    mass = np.einsum("tq,qa,qb->tab", wq * detq, TRI_BARY, TRI_BARY)
    local = K + mass
    local = 0.5 * (local + local.transpose(0, 2, 1))

    n = mesh.n_vertices
    rows = np.repeat(mesh.triangles, 3, axis=1).ravel()
    cols = np.tile(mesh.triangles, (1, 3)).ravel()
    A = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()

    xi, t, chord = boundary_nodes(mesh)
    if phi is None:
        w = np.ones_like(t)
    else:
        w = boundary_frame(phi, t.ravel()).weight.reshape(t.shape)
    phis = np.column_stack([1.0 - xi, xi])
    Bloc = np.einsum("e,q,eq,qa,qb->eab", chord, GAUSS3_WEIGHTS, w, phis, phis)
    Bloc = 0.5 * (Bloc + Bloc.transpose(0, 2, 1))
    e = mesh.boundary_edges
    rows = np.repeat(e, 2, axis=1).ravel()
    cols = np.tile(e, (1, 2)).ravel()
    B = sp.coo_matrix((Bloc.ravel(), (rows, cols)), shape=(n, n)).tocsr()

    A = (0.5 * (A + A.T)).tocsr()
    B = (0.5 * (B + B.T)).tocsr()
    return AssembledPencil(A=A, B=B, mesh=mesh, phi=phi)


def dump_mesh(mesh, path):
    """Write the ASCII mesh format: ``v x y``, ``t i j k``, ``b i j t_i t_j``."""
    with open(path, "w") as fh:
        for x, y in mesh.vertices:
            fh.write(f"v {x:.17g} {y:.17g}\n")
        for i, j, k in mesh.triangles:
            fh.write(f"t {i} {j} {k}\n")
        for (i, j), (ti, tj) in zip(mesh.boundary_edges, mesh.boundary_t):
            fh.write(f"b {i} {j} {ti:.17g} {tj:.17g}\n")


def load_mesh(path, refinement_level=-1):
    """Read a mesh written by :func:`dump_mesh`."""
    verts, tris, edges, ts = [], [], [], []
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            tag, rest = parts[0], parts[1:]
            if tag == "v":
                verts.append([float(v) for v in rest])
            elif tag == "t":
                tris.append([int(v) for v in rest])
            elif tag == "b":
                edges.append([int(rest[0]), int(rest[1])])
                ts.append([float(rest[2]), float(rest[3])])
            else:
                raise ValueError(f"unknown record {tag!r} in {path}")
    owner = {}
    for k, (a, b, c) in enumerate(tris):
        for i, j in ((a, b), (b, c), (c, a)):
            owner[(i, j)] = k
    edge_triangle = np.array([owner[(i, j)] for i, j in edges], dtype=np.int64)
    return DiskMesh(
        np.array(verts, dtype=float),
        np.array(tris, dtype=np.int64),
        np.array(edges, dtype=np.int64),
        np.array(ts, dtype=float),
        edge_triangle,
        refinement_level,
    )
