"""Discrete geometry of closed oriented triangle meshes.

Faces are vertex-index triples ordered counter-clockwise when seen from
outside, so ``(b - a) x (c - a)`` points outward. Mean curvature is the sum
of principal curvatures, positive on the sphere.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import DegenerateFace, DimensionMismatch, NotWatertight, SingularNormalEquations


def _check_watertight(faces, K):
    e = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
    key = e[:, 0].astype(np.int64) * K + e[:, 1]
    rev = e[:, 1].astype(np.int64) * K + e[:, 0]
    uniq, counts = np.unique(key, return_counts=True)
    if np.any(counts > 1):
        raise NotWatertight("a directed edge occurs in more than one face (inconsistent orientation)")
    if not np.all(np.isin(rev, uniq, assume_unique=False)):
        raise NotWatertight("boundary edge found; every edge needs an oppositely oriented partner")


class TriangleSurface:
    """Closed, consistently oriented triangle mesh.

    Construction checks that every directed edge has exactly one reversed
    partner and, unless ``orient=False``, flips all faces if the enclosed
    volume is negative.
    """

    def __init__(self, vertices, faces, *, orient=True):
        V = np.array(vertices, dtype=float)
        F = np.array(faces, dtype=np.int64)
        if V.ndim != 2 or V.shape[1] != 3:
            raise DimensionMismatch(f"expected (K, 3) vertices, got {V.shape}")
        if F.ndim != 2 or F.shape[1] != 3:
            raise DimensionMismatch(f"expected (J, 3) faces, got {F.shape}")
        if F.min() < 0 or F.max() >= V.shape[0]:
            raise IndexError("face index out of range")
        _check_watertight(F, V.shape[0])
        if orient and _signed_volume(V, F) < 0:
            F = F[:, [0, 2, 1]]
        V.setflags(write=False)
        F.setflags(write=False)
        self.vertices = V
        self.faces = F

    def __repr__(self):
        return f"TriangleSurface(K={self.K}, J={self.J})"

    @property
    def K(self):
        return self.vertices.shape[0]

    @property
    def J(self):
        return self.faces.shape[0]

    def with_vertices(self, X):
        """Same connectivity, new positions (no re-orientation)."""
        return TriangleSurface(np.asarray(X).reshape(self.K, 3), self.faces, orient=False)

    @cached_property
    def _corners(self):
        P = self.vertices[self.faces]
        return P[:, 0], P[:, 1], P[:, 2]

    @cached_property
    def face_cross(self):
        a, b, c = self._corners
        return np.cross(b - a, c - a)

    @cached_property
    def face_areas(self):
        ar = 0.5 * np.linalg.norm(self.face_cross, axis=1)
        if np.any(ar <= 0.0):
            bad = int(np.flatnonzero(ar <= 0.0)[0])
            raise DegenerateFace(f"face {bad} has zero area")
        return ar

    @cached_property
    def face_normals(self):
        return self.face_cross / (2.0 * self.face_areas[:, None])

    def _scatter(self, per_face):
        # sum a per-face quantity into each of the face's three vertices
        per_face = np.asarray(per_face)
        out = np.zeros((self.K,) + per_face.shape[1:])
        for k in range(3):
            np.add.at(out, self.faces[:, k], per_face)
        return out

    @cached_property
    def weighted_normals(self):
        """omega_i = (1/3) sum over faces at i of |sigma| n, the lumped (n, phi_i)^h."""
        self.face_areas
        return self._scatter(self.face_cross / 6.0)

    @cached_property
    def vertex_mass(self):
        return self._scatter(self.face_areas / 3.0)

    @cached_property
    def gradients(self):
        """Surface gradients of the three hat functions on every face, (J, 3, 3)."""
        a, b, c = self._corners
        n = self.face_normals
        s = 1.0 / (2.0 * self.face_areas)[:, None]
        return np.stack([np.cross(n, c - b) * s, np.cross(n, a - c) * s, np.cross(n, b - a) * s], axis=1)

    @cached_property
    def stiffness_matrix(self):
        """Scalar P1 stiffness (grad u, grad v) = u^T A v (cotangent weights)."""
        G = self.gradients
        loc = np.einsum("jad,jbd->jab", G, G) * self.face_areas[:, None, None]
        F = self.faces
        rows = np.repeat(F, 3, axis=1).ravel()
        cols = np.tile(F, (1, 3)).ravel()
        A = sp.csr_matrix((loc.ravel(), (rows, cols)), shape=(self.K, self.K))
        A.sum_duplicates()
        return A

    @cached_property
    def edge_lengths(self):
        a, b, c = self._corners
        return np.stack(
            [np.linalg.norm(b - a, axis=1), np.linalg.norm(c - b, axis=1), np.linalg.norm(a - c, axis=1)], axis=1
        )

    @property
    def area(self):
        return float(self.face_areas.sum())

    @property
    def volume(self):
        return _signed_volume(self.vertices, self.faces)

    @property
    def mesh_quality(self):
        """(r_h, r_a): max edge over min edge, and max face area over min face area."""
        L = self.edge_lengths
        ar = self.face_areas
        return float(L.max(1).max() / L.min(1).min()), float(ar.max() / ar.min())


def _signed_volume(V, F):
    a, b, c = V[F[:, 0]], V[F[:, 1]], V[F[:, 2]]
    return float(np.einsum("ij,ij->i", a, np.cross(b, c)).sum() / 6.0)


@dataclass(frozen=True)
class FaceValues:
    """A field that is constant on each face."""

    values: np.ndarray


@dataclass(frozen=True)
class SurfaceState:
    """One time level of a surface scheme: mesh plus nodal mean curvature."""

    mesh: TriangleSurface
    H: np.ndarray
    time: float = 0.0
    step_index: int = 0

    def __post_init__(self):
        H = np.asarray(self.H, dtype=float)
        if H.shape != (self.mesh.K,):
            raise DimensionMismatch(f"H has shape {H.shape}, mesh has {self.mesh.K} vertices")
        object.__setattr__(self, "H", H)


def face_data(mesh):
    """Face areas and unit outward normals."""
    return mesh.face_areas, mesh.face_normals


def _corner_values(mesh, u):
    if isinstance(u, FaceValues):
        c = np.asarray(u.values, dtype=float)
        if c.shape[0] != mesh.J:
            raise DimensionMismatch(f"face field of length {c.shape[0]} on {mesh.J} faces")
        return [c, c, c]
    u = np.asarray(u, dtype=float)
    if u.ndim == 0:
        u = np.full(mesh.K, float(u))
    if u.shape[0] != mesh.K:
        raise DimensionMismatch(f"nodal field of length {u.shape[0]} on {mesh.K} vertices")
    return [u[mesh.faces[:, k]] for k in range(3)]


def lumped_inner_product_3d(mesh, u, v):
    """Vertex-lumped pairing (1/3) sum_j |sigma_j| sum_k (u . v)(q_jk)."""
    uc = _corner_values(mesh, u)
    vc = _corner_values(mesh, v)
    if uc[0].shape != vc[0].shape:
        raise DimensionMismatch(f"cannot pair fields of shapes {uc[0].shape} and {vc[0].shape}")
    tot = np.zeros(mesh.J)
    for a, b in zip(uc, vc):
        p = a * b
        tot += p.sum(axis=1) if p.ndim == 2 else p
    return float(np.sum(mesh.face_areas * tot) / 3.0)


def surface_gradient_pairing(mesh, u, v):
    """sum_j |sigma_j| grad u . grad v over faces; componentwise for (K, d) fields."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape or u.shape[0] != mesh.K:
        raise DimensionMismatch(f"fields of shapes {u.shape}, {v.shape} on K={mesh.K}")
    G = mesh.gradients
    F = mesh.faces
    if u.ndim == 1:
        gu = np.einsum("jad,ja->jd", G, u[F])
        gv = np.einsum("jad,ja->jd", G, v[F])
        return float(np.sum(mesh.face_areas * np.einsum("jd,jd->j", gu, gv)))
    gu = np.einsum("jad,jac->jcd", G, u[F])
    gv = np.einsum("jad,jac->jcd", G, v[F])
    return float(np.sum(mesh.face_areas * np.einsum("jcd,jcd->j", gu, gv)))


def init_mean_curvature(mesh):
    """Least-squares H from H n = -Laplace(Id) in weak form.

    As for curves the 3K equations decouple per vertex and
    H_i = omega_i . (A X)_i / |omega_i|^2.
    """
    om = mesh.weighted_normals
    rhs = mesh.stiffness_matrix @ mesh.vertices
    nrm2 = np.einsum("ij,ij->i", om, om)
    if np.any(nrm2 <= 1e-28 * mesh.area**2 / mesh.K**2):
        raise SingularNormalEquations("vanishing weighted normal at a vertex")
    return np.einsum("ij,ij->i", om, rhs) / nrm2


def surface_area(mesh):
    return mesh.area


def enclosed_volume(mesh):
    return mesh.volume


def mesh_quality(mesh):
    return mesh.mesh_quality


# -- generators ----------------------------------------------------------------------
def icosahedron():
    p = (1.0 + 5.0**0.5) / 2.0
    V = np.array(
        [[-1, p, 0], [1, p, 0], [-1, -p, 0], [1, -p, 0], [0, -1, p], [0, 1, p],
         [0, -1, -p], [0, 1, -p], [p, 0, -1], [p, 0, 1], [-p, 0, -1], [-p, 0, 1]],
        dtype=float,
    )
    F = np.array(
        [[0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11], [1, 5, 9], [5, 11, 4],
         [11, 10, 2], [10, 7, 6], [7, 1, 8], [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8],
         [3, 8, 9], [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1]]
    )
    return V / np.linalg.norm(V, axis=1)[:, None], F


def geodesic_sphere(frequency=10, radius=1.0, center=(0.0, 0.0, 0.0)):
    """Class-I geodesic sphere: every icosahedron face split into frequency^2 triangles.

    K = 10 f^2 + 2 vertices and J = 20 f^2 faces.
    """
    f = int(frequency)
    if f < 1:
        raise ValueError("frequency must be at least 1")
    V0, F0 = icosahedron()
    # lattice points (i, j) with i + j <= f on each face, shared points deduplicated
    ii, jj = np.meshgrid(np.arange(f + 1), np.arange(f + 1), indexing="ij")
    keep = ii + jj <= f
    ii, jj = ii[keep], jj[keep]
    local = -np.ones((f + 1, f + 1), dtype=np.int64)
    local[ii, jj] = np.arange(ii.size)
    tri = []
    for i in range(f):
        for j in range(f - i):
            tri.append((local[i, j], local[i + 1, j], local[i, j + 1]))
            if i + j < f - 1:
                tri.append((local[i + 1, j], local[i + 1, j + 1], local[i, j + 1]))
    tri = np.array(tri)
    pts, faces = [], []
    for n, (a, b, c) in enumerate(F0):
        w = np.stack([f - ii - jj, ii, jj], axis=1) / f
        P = w @ V0[[a, b, c]]
        pts.append(P)
        faces.append(tri + n * ii.size)
    P = np.vstack(pts)
    P /= np.linalg.norm(P, axis=1)[:, None]
    _, first, inverse = np.unique(np.round(P, 9), axis=0, return_index=True, return_inverse=True)
    inverse = inverse.ravel()
    order = np.argsort(first)
    remap = np.empty_like(order)
    remap[order] = np.arange(order.size)
    V = P[first[order]]
    F = remap[inverse[np.vstack(faces)]]
    return TriangleSurface(radius * V + np.asarray(center, dtype=float), F)


def subdivided_icosphere(level=3, radius=1.0):
    """Icosphere from ``level`` rounds of 4-to-1 splitting: J = 20 * 4^level."""
    return geodesic_sphere(2 ** int(level), radius)


def ellipsoid(axes=(2.0, 1.0, 1.0), frequency=10):
    S = geodesic_sphere(frequency)
    return TriangleSurface(S.vertices * np.asarray(axes, dtype=float), S.faces)


def torus(major=1.0, minor=0.4, n_major=50, n_minor=20):
    """Structured torus grid with K = n_major * n_minor vertices, J = 2K faces."""
    u = 2.0 * np.pi * np.arange(n_major) / n_major
    v = 2.0 * np.pi * np.arange(n_minor) / n_minor
    U, W = np.meshgrid(u, v, indexing="ij")
    rad = major + minor * np.cos(W)
    V = np.stack([rad * np.cos(U), rad * np.sin(U), minor * np.sin(W)], axis=-1).reshape(-1, 3)
    i, j = np.meshgrid(np.arange(n_major), np.arange(n_minor), indexing="ij")
    i2 = (i + 1) % n_major
    j2 = (j + 1) % n_minor
    idx = lambda a, b: (a * n_minor + b).ravel()
    F = np.concatenate(
        [np.stack([idx(i, j), idx(i2, j), idx(i2, j2)], 1), np.stack([idx(i, j), idx(i2, j2), idx(i, j2)], 1)]
    )
    return TriangleSurface(V, F)


def unit_cube():
    """The unit cube split into 12 right triangles."""
    V = np.array([[x, y, z] for x in (0, 1) for y in (0, 1) for z in (0, 1)], dtype=float)
    F = np.array(
        [[0, 1, 3], [0, 3, 2], [4, 6, 7], [4, 7, 5], [0, 4, 5], [0, 5, 1],
         [2, 3, 7], [2, 7, 6], [0, 2, 6], [0, 6, 4], [1, 5, 7], [1, 7, 3]]
    )
    return TriangleSurface(V, F)
