"""Anisotropic surface-energy densities gamma(n) for planar curves.

Angles follow ``n = (-sin(theta), cos(theta))``: theta is measured from
the y-axis to the normal. The tangent paired with ``n`` is ``t = perp(n)``
(the clockwise quarter turn), so that along a clockwise polygon ``t`` is the
edge direction. With this convention ``dn/dtheta = -t`` and the Cahn-Hoffman
vector is ``xi = gamma n - gamma'(theta) t``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .curve import ClosedPolygon, perp
from .errors import InvalidNormal, TrimFailure

FAMILIES = ("isotropic", "kfold", "riemannian", "regularized_l1")
STABILIZERS = ("energy", "closed_form")

_NORMAL_TOL = 1e-12
_K_TABLE = 4096


def normal_from_angle(theta):
    theta = np.asarray(theta, dtype=float)
    return np.stack([-np.sin(theta), np.cos(theta)], axis=-1)


def angle_from_normal(n):
    n = np.asarray(n, dtype=float)
    return np.arctan2(-n[..., 0], n[..., 1])


def _check_unit(n):
    n = np.asarray(n, dtype=float)
    if n.shape[-1] != 2:
        raise InvalidNormal(f"expected 2-vectors, got shape {n.shape}")
    err = np.abs(np.hypot(n[..., 0], n[..., 1]) - 1.0)
    if np.any(err > _NORMAL_TOL):
        raise InvalidNormal(f"|n| deviates from 1 by {float(np.max(err)):.3e}")
    return n


@dataclass(frozen=True)
class AnisotropyModel:
    """One surface-energy density with its derived quantities.

    ``stabilizer`` selects k(n) in Z_k(n):

    * ``"energy"`` (default): the smallest k for which
      ``2 sqrt(gamma(n) u^T Z u) >= u . perp(xi) + gamma(n_u)`` holds for every
      unit direction u, plus the margin ``delta``. This is the per-edge
      inequality behind unconditional energy decay of the first-order scheme.
    * ``"closed_form"``: ``gamma + gamma'^2 / gamma + delta``, the smallest
      choice that keeps Z_k positive definite.
    * a number: a constant k (``2.0`` with gamma = 1 gives Z = I).
    """

    family: str = "isotropic"
    beta: float = 0.0
    k: int = 4
    matrices: tuple = ()
    eps: float = 0.01
    delta: float | None = None
    stabilizer: object = "energy"

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown anisotropy family {self.family!r}")
        if self.family == "kfold":
            if self.beta < 0:
                raise ValueError("beta must be non-negative")
            if int(self.k) != self.k or self.k < 1:
                raise ValueError("k must be a positive integer")
            if self.beta >= 1.0:
                raise ValueError("gamma must stay positive: need beta < 1")
        if self.family == "riemannian":
            mats = tuple(np.array(G, dtype=float).reshape(2, 2) for G in self.matrices)
            if not mats:
                raise ValueError("riemannian family needs at least one matrix")
            for G in mats:
                if not np.allclose(G, G.T) or np.linalg.eigvalsh(G).min() <= 0:
                    raise ValueError("metric matrices must be symmetric positive definite")
            object.__setattr__(self, "matrices", tuple(tuple(map(tuple, G)) for G in mats))
        if self.family == "regularized_l1" and not 0.0 < self.eps < 1.0:
            raise ValueError("eps must lie in (0, 1)")
        if isinstance(self.stabilizer, str) and self.stabilizer not in STABILIZERS:
            raise ValueError(f"unknown stabilizer {self.stabilizer!r}")

    # -- constructors -------------------------------------------------------
    @classmethod
    def isotropic(cls, **kw):
        return cls("isotropic", **kw)

    @classmethod
    def kfold(cls, beta, k, **kw):
        return cls("kfold", beta=float(beta), k=int(k), **kw)

    @classmethod
    def riemannian(cls, matrices, **kw):
        return cls("riemannian", matrices=tuple(matrices), **kw)

    @classmethod
    def regularized_l1(cls, eps, **kw):
        return cls("regularized_l1", eps=float(eps), **kw)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        fam = d.pop("family", "isotropic")
        if "matrices" in d:
            d["matrices"] = tuple(np.array(G, dtype=float).reshape(2, 2).tolist() for G in d["matrices"])
            d["matrices"] = tuple(tuple(map(tuple, G)) for G in d["matrices"])
        return cls(fam, **d)

    def to_dict(self):
        d = {"family": self.family, "stabilizer": self.stabilizer}
        if self.family == "kfold":
            d.update(beta=self.beta, k=int(self.k))
        elif self.family == "riemannian":
            d["matrices"] = [np.asarray(G).tolist() for G in self.matrices]
        elif self.family == "regularized_l1":
            d["eps"] = self.eps
        if self.delta is not None:
            d["delta"] = self.delta
        return d

    # -- metric blocks -------------------------------------------------------
    def _metrics(self):
        if self.family == "riemannian":
            return [np.asarray(G) for G in self.matrices]
        e2 = self.eps**2
        return [np.diag([1.0, e2]), np.diag([e2, 1.0])]

    @property
    def is_isotropic(self):
        return self.family == "isotropic" or (self.family == "kfold" and self.beta == 0.0)

    # -- gamma as a function of theta -----------------------------------------
    def gamma_theta(self, theta):
        return self._theta_derivs(theta)[0]

    def dgamma_theta(self, theta):
        return self._theta_derivs(theta)[1]

    def d2gamma_theta(self, theta):
        return self._theta_derivs(theta)[2]

    def _theta_derivs(self, theta):
        theta = np.asarray(theta, dtype=float)
        if self.family == "isotropic":
            one = np.ones_like(theta)
            return one, 0.0 * one, 0.0 * one
        if self.family == "kfold":
            b, k = self.beta, self.k
            return (1.0 + b * np.cos(k * theta), -b * k * np.sin(k * theta), -b * k * k * np.cos(k * theta))
        n = normal_from_angle(theta)
        t = perp(n)
        g = np.zeros_like(theta)
        g1 = np.zeros_like(theta)
        g2 = np.zeros_like(theta)
        for G in self._metrics():
            Gn = n @ G
            f = np.sum(Gn * n, axis=-1)
            f1 = -2.0 * np.sum(Gn * t, axis=-1)
            f2 = 2.0 * (np.sum((t @ G) * t, axis=-1) - f)
            r = np.sqrt(f)
            g += r
            g1 += f1 / (2.0 * r)
            g2 += f2 / (2.0 * r) - f1**2 / (4.0 * r**3)
        return g, g1, g2

    # -- gamma as a function of the normal -----------------------------------
    def gamma(self, n):
        n = _check_unit(n)
        if self.family == "isotropic":
            return np.ones(n.shape[:-1])
        if self.family == "kfold":
            return 1.0 + self.beta * np.cos(self.k * angle_from_normal(n))
        return sum(np.sqrt(np.sum((n @ G) * n, axis=-1)) for G in self._metrics())

    def xi(self, n):
        """Cahn-Hoffman vector, the gradient of the 1-homogeneous extension at n."""
        n = _check_unit(n)
        if self.family == "isotropic":
            return n.copy()
        if self.family == "kfold":
            th = angle_from_normal(n)
            g, g1, _ = self._theta_derivs(th)
            return g[..., None] * n - g1[..., None] * perp(n)
        out = np.zeros_like(n)
        for G in self._metrics():
            Gn = n @ G
            out += Gn / np.sqrt(np.sum(Gn * n, axis=-1))[..., None]
        return out

    @cached_property
    def min_gamma(self):
        th = np.linspace(0.0, 2.0 * np.pi, 3600, endpoint=False)
        return float(self.gamma_theta(th).min())

    @property
    def margin(self):
        return 1e-2 * self.min_gamma if self.delta is None else float(self.delta)

    def is_strong(self):
        """True when gamma + gamma'' changes sign (the Wulff envelope has ears)."""
        if self.family == "kfold":
            return self.beta > 1.0 / (self.k**2 - 1) if self.k > 1 else False
        th = np.linspace(0.0, 2.0 * np.pi, 7200, endpoint=False)
        g, _, g2 = self._theta_derivs(th)
        return bool(np.min(g + g2) < 0.0)

    # -- stabilizer and Z_k ----------------------------------------------------
    def _k_positive(self, n, g, xi):
        # smallest k with Z_k positive semidefinite: (k - gamma) gamma >= (xi.t)^2
        xt = np.sum(xi * perp(n), axis=-1)
        return g + xt**2 / g

    def _k_energy(self, n, g, xi):
        phi = (np.arange(1440) + 0.5) * (2.0 * np.pi / 1440) - np.pi
        phi = np.concatenate([phi, [-1e-3, 1e-3]])
        c, s = np.cos(phi), np.sin(phi)
        t = perp(n)
        u = c[None, :, None] * t[:, None, :] + s[None, :, None] * n[:, None, :]
        nu = -perp(u)
        gu = self.gamma(nu.reshape(-1, 2)).reshape(nu.shape[:-1])
        un = s[None, :]
        uxi = np.sum(u * xi[:, None, :], axis=-1)
        uxp = np.sum(u * perp(xi)[:, None, :], axis=-1)
        gg = g[:, None]
        num = np.maximum(0.0, uxp + gu) ** 2 / (4.0 * gg) - gg + 2.0 * un * uxi
        return np.max(num / un**2, axis=1)

    def stabilizer_value(self, n):
        """k(n) for an (M, 2) array (or a single vector) of unit normals."""
        n = _check_unit(n)
        single = n.ndim == 1
        n2 = np.atleast_2d(n)
        if not isinstance(self.stabilizer, str):
            k = np.full(n2.shape[0], float(self.stabilizer))
        else:
            g = self.gamma(n2)
            xi = self.xi(n2)
            kp = self._k_positive(n2, g, xi)
            if self.stabilizer == "closed_form":
                k = kp + self.margin
            else:
                k = np.maximum(self._energy_lookup(n2), kp) + self.margin
        return float(k[0]) if single else k

    def energy_bound(self, n):
        """Direct evaluation of the energy-stable lower bound on k at unit normals n."""
        n2 = np.atleast_2d(_check_unit(n))
        return self._k_energy(n2, self.gamma(n2), self.xi(n2))

    @cached_property
    def _energy_table(self):
        th = 2.0 * np.pi * np.arange(_K_TABLE) / _K_TABLE
        n = normal_from_angle(th)
        out = np.empty(_K_TABLE)
        for i in range(0, _K_TABLE, 256):
            sl = slice(i, i + 256)
            out[sl] = self._k_energy(n[sl], self.gamma(n[sl]), self.xi(n[sl]))
        return out

    def _energy_lookup(self, n):
        # upper envelope of the two neighbouring table entries
        tab = self._energy_table
        pos = (angle_from_normal(n) % (2.0 * np.pi)) * (_K_TABLE / (2.0 * np.pi))
        i = np.floor(pos).astype(int) % _K_TABLE
        return np.maximum(tab[i], tab[(i + 1) % _K_TABLE])

    def zk(self, n):
        """Z_k(n) = gamma I - n xi^T - xi n^T + k n n^T, shape (..., 2, 2)."""
        n = _check_unit(n)
        single = n.ndim == 1
        n2 = np.atleast_2d(n)
        g = self.gamma(n2)
        xi = self.xi(n2)
        k = np.atleast_1d(self.stabilizer_value(n2))
        nn = n2[:, :, None] * n2[:, None, :]
        nx = n2[:, :, None] * xi[:, None, :]
        Z = g[:, None, None] * np.eye(2) - nx - np.transpose(nx, (0, 2, 1)) + k[:, None, None] * nn
        return Z[0] if single else Z


# module-level spellings --------------------------------------------------------
def gamma(model, n):
    return model.gamma(n)


def xi_vector(model, n):
    return model.xi(n)


def stabilizer(model, n):
    return model.stabilizer_value(n)


def zk_matrix(model, n):
    return model.zk(n)


# -- Wulff construction ------------------------------------------------------
@dataclass(frozen=True)
class WulffShape:
    polygon: ClosedPolygon
    strong: bool
    trimmed: bool
    envelope: np.ndarray

    def corners(self, min_turn_deg=15.0):
        """Indices of vertices whose turning angle exceeds ``min_turn_deg``."""
        return polygon_corners(self.polygon, min_turn_deg)

    def scaled_to_area(self, area, center=(0.0, 0.0)):
        s = np.sqrt(area / self.polygon.area)
        X = self.polygon.vertices * s + np.asarray(center, dtype=float)
        return ClosedPolygon(X, orient=False)


def polygon_corners(poly, min_turn_deg=15.0):
    t = poly.tangents
    tn = np.roll(t, -1, axis=0)
    ang = np.degrees(np.abs(np.arctan2(t[:, 0] * tn[:, 1] - t[:, 1] * tn[:, 0], np.sum(t * tn, axis=1))))
    return np.flatnonzero(ang > min_turn_deg)


def wulff_envelope(model, N):
    theta = 2.0 * np.pi * np.arange(N) / N
    return model.xi(normal_from_angle(theta))


def wulff_shape(model, N=1024):
    """Sample the Wulff envelope xi(n(theta)) and trim its ears if it self-intersects.

    Trimming nodes the envelope at its self-intersections and keeps the face
    of the resulting planar arrangement that contains the origin.
    """
    import shapely
    from shapely.geometry import LineString, Point

    if N < 16:
        raise ValueError("need at least 16 samples")
    env = wulff_envelope(model, N)
    ring = LineString(np.vstack([env, env[:1]]))
    strong = model.is_strong()
    if ring.is_simple:
        return WulffShape(ClosedPolygon(env), strong, False, env)
    faces = shapely.get_parts(shapely.polygonize([shapely.union_all([ring])]))
    origin = Point(0.0, 0.0)
    inner = [f for f in faces if f.contains(origin)]
    if len(inner) != 1:
        raise TrimFailure(f"{len(inner)} faces of the envelope contain the origin")
    face = inner[0]
    if not face.is_valid or len(face.interiors):
        raise TrimFailure("trimmed envelope is not a simple loop")
    X = np.asarray(face.exterior.coords)[:-1]
    X = _drop_collinear(X)
    return WulffShape(ClosedPolygon(X), strong, True, env)


def _drop_collinear(X, tol=1e-14):
    d = X - np.roll(X, 1, axis=0)
    return X[np.hypot(d[:, 0], d[:, 1]) > tol]
