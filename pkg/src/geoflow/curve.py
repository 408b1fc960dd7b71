"""Discrete geometry of closed polygonal curves.

Conventions used throughout the package:

* vertices are stored clockwise, ``X[j]`` for ``j = 0..N-1``;
* edge ``j`` joins vertex ``j-1`` to vertex ``j`` (indices mod N), with
  edge vector ``h_j = X[j] - X[j-1]``;
* ``perp((x, y)) = (y, -x)`` is the clockwise quarter turn, and the outward
  unit normal of edge ``j`` is ``n_j = -perp(h_j) / |h_j|``. The unit
  tangent ``h_j / |h_j|`` equals ``perp(n_j)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import DimensionMismatch, SingularNormalEquations, ZeroEdge


def perp(v):
    """Clockwise rotation by pi/2 of one vector or an (M, 2) stack."""
    v = np.asarray(v, dtype=float)
    return np.stack([v[..., 1], -v[..., 0]], axis=-1)


def signed_area(vertices):
    """Shoelace area; positive for counter-clockwise vertex order."""
    x, y = np.asarray(vertices, dtype=float).T
    return 0.5 * float(np.sum(np.roll(x, 1) * y - x * np.roll(y, 1)))


class ClosedPolygon:
    """An ordered, clockwise loop of planar vertices.

    The constructor reorients counter-clockwise input (keeping vertex 0 in
    place) unless ``orient=False``. Edge quantities are computed lazily and
    cached; the vertex array is read-only.
    """

    def __init__(self, vertices, *, orient=True):
        X = np.array(vertices, dtype=float)
        if X.ndim != 2 or X.shape[1] != 2:
            raise DimensionMismatch(f"expected (N, 2) vertices, got {X.shape}")
        if X.shape[0] < 3:
            raise ValueError("a closed polygon needs at least 3 vertices")
        if orient and signed_area(X) > 0:
            X = np.concatenate([X[:1], X[:0:-1]])
        X.setflags(write=False)
        self.vertices = X

    def __len__(self):
        return self.vertices.shape[0]

    def __repr__(self):
        return f"ClosedPolygon(N={len(self)}, perimeter={self.perimeter:.6g})"

    @property
    def N(self):
        return self.vertices.shape[0]

    @cached_property
    def edges(self):
        return self.vertices - np.roll(self.vertices, 1, axis=0)

    @cached_property
    def lengths(self):
        L = np.hypot(self.edges[:, 0], self.edges[:, 1])
        if np.any(L <= 0.0):
            bad = int(np.flatnonzero(L <= 0.0)[0])
            raise ZeroEdge(f"edge {bad} has zero length")
        return L

    @cached_property
    def normals(self):
        return -perp(self.edges) / self.lengths[:, None]

    @cached_property
    def tangents(self):
        return self.edges / self.lengths[:, None]

    @cached_property
    def weighted_normals(self):
        """omega_j = (|h_j| n_j + |h_{j+1}| n_{j+1}) / 2 for every vertex."""
        ln = self.lengths[:, None] * self.normals
        return 0.5 * (ln + np.roll(ln, -1, axis=0))

    @cached_property
    def vertex_mass(self):
        """Diagonal of the lumped mass matrix, (|h_j| + |h_{j+1}|) / 2."""
        return 0.5 * (self.lengths + np.roll(self.lengths, -1))

    @property
    def perimeter(self):
        return float(self.lengths.sum())

    @property
    def area(self):
        return abs(signed_area(self.vertices))

    @property
    def mesh_ratio(self):
        L = self.lengths
        return float(L.max() / L.min())

    @cached_property
    def stiffness_matrix(self):
        """Scalar P1 stiffness matrix, (d_s u, d_s v) = u^T A v."""
        N = self.N
        w = 1.0 / self.lengths
        j = np.arange(N)
        i = (j - 1) % N
        rows = np.concatenate([i, j, i, j])
        cols = np.concatenate([i, j, j, i])
        vals = np.concatenate([w, w, -w, -w])
        return sp.csr_matrix((vals, (rows, cols)), shape=(N, N))

    def edge_span_rank(self, tol=1e-12):
        """Dimension of the span of the edge vectors (2 for a proper polygon)."""
        t = self.tangents
        cross = t[:, 0] * t[0, 1] - t[:, 1] * t[0, 0]
        return 2 if np.any(np.abs(cross) > tol) else 1


@dataclass(frozen=True)
class EdgeValues:
    """A field that is constant on each edge (e.g. the normal n^h)."""

    values: np.ndarray


@dataclass(frozen=True)
class CurveState:
    """One time level of a planar scheme."""

    polygon: ClosedPolygon
    scalar: np.ndarray
    time: float = 0.0
    step_index: int = 0

    def __post_init__(self):
        s = np.asarray(self.scalar, dtype=float)
        if s.shape != (self.polygon.N,):
            raise DimensionMismatch(
                f"scalar field has shape {s.shape}, polygon has {self.polygon.N} vertices"
            )
        object.__setattr__(self, "scalar", s)


def edge_data(poly):
    """Edge vectors, lengths and outward unit normals of ``poly``."""
    return poly.edges, poly.lengths, poly.normals


def _one_sided(poly, u):
    # values at rho_{j-1}^+ and rho_j^- on each edge j
    if isinstance(u, EdgeValues):
        c = np.asarray(u.values, dtype=float)
        if c.shape[0] != poly.N:
            raise DimensionMismatch(f"edge field of length {c.shape[0]} on {poly.N} edges")
        return c, c
    u = np.asarray(u, dtype=float)
    if u.ndim == 0:
        u = np.full(poly.N, float(u))
    if u.shape[0] != poly.N:
        raise DimensionMismatch(f"nodal field of length {u.shape[0]} on {poly.N} vertices")
    return np.roll(u, 1, axis=0), u


def lumped_inner_product(poly, u, v):
    """Trapezoidal-rule pairing (u, v)^h over the polygon.

    ``u`` and ``v`` are nodal arrays of shape (N,) or (N, d), scalars, or
    :class:`EdgeValues` for piecewise-constant fields. Vector fields are
    paired with the dot product; both arguments must have the same shape.
    """
    ul, ur = _one_sided(poly, u)
    vl, vr = _one_sided(poly, v)
    if ul.shape != vl.shape:
        raise DimensionMismatch(f"cannot pair fields of shapes {ul.shape} and {vl.shape}")
    left = ul * vl
    right = ur * vr
    if left.ndim == 2:
        left = left.sum(axis=1)
        right = right.sum(axis=1)
    return 0.5 * float(np.sum(poly.lengths * (left + right)))


def stiffness_pairing(poly, u, v):
    """(d_s u, d_s v) over the polygon; componentwise for (N, d) fields."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape or u.shape[0] != poly.N:
        raise DimensionMismatch(f"fields of shapes {u.shape}, {v.shape} on N={poly.N}")
    du = u - np.roll(u, 1, axis=0)
    dv = v - np.roll(v, 1, axis=0)
    prod = du * dv
    if prod.ndim == 2:
        prod = prod.sum(axis=1)
    return float(np.sum(prod / poly.lengths))


def weighted_normal_at_vertex(poly, j):
    return poly.weighted_normals[j % poly.N].copy()


def vector_stiffness_apply(poly, X):
    """Rows of S X, i.e. (S X)_j . e_k = (d_s X, d_s(phi_j e_k)) on ``poly``."""
    X = np.asarray(X, dtype=float)
    g = (X - np.roll(X, 1, axis=0)) / poly.lengths[:, None]
    return g - np.roll(g, -1, axis=0)


def init_curvature(poly):
    """Least-squares curvature from kappa n = -d_ss X in weak form.

    The 2N equations kappa_j omega_j = (S X)_j decouple per vertex, so the
    normal equations are diagonal: kappa_j = omega_j . (S X)_j / |omega_j|^2.
    """
    om = poly.weighted_normals
    rhs = vector_stiffness_apply(poly, poly.vertices)
    nrm2 = np.einsum("ij,ij->i", om, om)
    scale = poly.perimeter**2 / poly.N**2
    if np.any(nrm2 <= 1e-28 * scale):
        raise SingularNormalEquations("vanishing weighted normal at a vertex")
    return np.einsum("ij,ij->i", om, rhs) / nrm2


def equilibrium_curvature(poly):
    """Curvature constant that makes a regular N-gon stationary.

    Returns 2 sin(a) / ((1 + cos a) |h|) with exterior angle a = 2 pi / N,
    the constant satisfying the discrete relation
    (kappa/2) (h_j + h_{j+1})^perp + h_j/|h_j| - h_{j+1}/|h_{j+1}| = 0.
    """
    a = 2.0 * np.pi / poly.N
    h = float(np.mean(poly.lengths))
    return 2.0 * np.sin(a) / ((1.0 + np.cos(a)) * h)


def perimeter(poly):
    return poly.perimeter


def enclosed_area(poly):
    return poly.area


def mesh_ratio(poly):
    return poly.mesh_ratio


def discrete_energy(poly, model=None):
    """W = sum_j |h_j| gamma(n_j); the perimeter when ``model`` is None."""
    if model is None:
        return poly.perimeter
    return float(np.sum(poly.lengths * model.gamma(poly.normals)))


def regular_polygon(N, radius=1.0, center=(0.0, 0.0), phase=0.0):
    """Regular N-gon inscribed in a circle, clockwise from angle ``phase``."""
    th = phase - 2.0 * np.pi * np.arange(N) / N
    X = np.column_stack([radius * np.cos(th), radius * np.sin(th)]) + np.asarray(center)
    return ClosedPolygon(X)
