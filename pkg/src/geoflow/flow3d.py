"""Surface diffusion of closed triangulated surfaces.

The systems mirror the planar ones with unknowns [H; X] (X interleaved per
vertex, 3 components):

    [ s A    B  ] [H']   [r1]
    [ B^T   -S  ] [X'] = [r2]

where ``A`` is the cotangent stiffness, ``B`` holds the lumped weighted
vertex normals and ``S = A (x) I_3``.
"""

from __future__ import annotations

import logging

import numpy as np
import scipy.sparse as sp

from . import linsys
from .errors import GeoflowError
from .flow2d import Scheme, n_steps
from .surface import SurfaceState, TriangleSurface, init_mean_curvature

log = logging.getLogger(__name__)


class _Level3:
    def __init__(self, mesh):
        self.mesh = mesh
        K = mesh.K
        om = mesh.weighted_normals
        self.B = sp.csr_matrix((om.ravel(), (np.repeat(np.arange(K), 3), np.arange(3 * K))), shape=(K, 3 * K))
        self.A = mesh.stiffness_matrix
        self.S = sp.kron(self.A, sp.identity(3), format="csr")

    def solve(self, s, r1, r2, rel_tol=linsys.DEFAULT_REL_TOL):
        x = linsys.solve(linsys.saddle_system(s, self.A, self.B, self.S, r1, r2), rel_tol)
        K = self.mesh.K
        return x[:K], x[K:].reshape(K, 3)


def _advance(state, X, H, tau):
    return SurfaceState(state.mesh.with_vertices(X), H, state.time + tau, state.step_index + 1)


def bgn3d_step(state, tau):
    """First-order step assembled on the current mesh."""
    lev = _Level3(state.mesh)
    X = state.mesh.vertices.ravel()
    H, Xn = lev.solve(tau, lev.B @ X, np.zeros_like(X))
    return _advance(state, Xn, H, tau)


def trivial3d_step(state):
    """Step of the zero-velocity flow: moves vertices tangentially only (to leading order)."""
    lev = _Level3(state.mesh)
    X = state.mesh.vertices.ravel()
    H, Xn = lev.solve(0.0, lev.B @ X, np.zeros_like(X))
    return SurfaceState(state.mesh.with_vertices(Xn), H, state.time, state.step_index)


def pc3d_step(state, tau, predicted=None):
    """Predictor (half first-order step) plus corrector assembled on the predicted mesh."""
    pred = bgn3d_step(state, 0.5 * tau).mesh if predicted is None else predicted
    lev = _Level3(pred)
    X0 = state.mesh.vertices.ravel()
    H0 = state.H
    s = 0.5 * tau
    r1 = lev.B @ X0 - s * (lev.A @ H0)
    r2 = -(lev.B.T @ H0) + lev.S @ X0
    H, Xn = lev.solve(s, r1, r2)
    return _advance(state, Xn, H, tau)


def cnlf3d_step(prev, curr, tau, regularize=False):
    """Leap-frog step on the current mesh, optionally followed by one trivial-flow step."""
    lev = _Level3(curr.mesh)
    Xp = prev.mesh.vertices.ravel()
    Hp = prev.H
    r1 = lev.B @ Xp - tau * (lev.A @ Hp)
    r2 = -(lev.B.T @ Hp) + lev.S @ Xp
    H, Xn = lev.solve(tau, r1, r2)
    new = _advance(curr, Xn, H, tau)
    if regularize:
        reg = trivial3d_step(new)
        new = SurfaceState(reg.mesh, new.H, new.time, new.step_index)
    return new


def bdf2_3d_step(prev, curr, tau):
    """BDF2 step assembled on the mesh predicted by one full first-order step."""
    pred = bgn3d_step(curr, tau).mesh
    lev = _Level3(pred)
    Xc = curr.mesh.vertices.ravel()
    Xp = prev.mesh.vertices.ravel()
    H, Xn = lev.solve(2.0 * tau / 3.0, lev.B @ ((4.0 * Xc - Xp) / 3.0), np.zeros_like(Xc))
    return _advance(curr, Xn, H, tau)


def step3d(scheme, tau, curr, prev=None, regularize=False):
    scheme = Scheme(scheme)
    if scheme is Scheme.BGN:
        return bgn3d_step(curr, tau)
    if scheme is Scheme.PC:
        return pc3d_step(curr, tau)
    if prev is None:
        raise ValueError(f"{scheme.value} needs two time levels")
    if scheme is Scheme.CNLF:
        return cnlf3d_step(prev, curr, tau, regularize)
    return bdf2_3d_step(prev, curr, tau)


def run_surface_flow(initial, scheme, tau, T, callback=None, store_every=1, regularize=False):
    """Evolve a surface by surface diffusion to time T; see ``flow2d.run_flow``."""
    scheme = Scheme(scheme)
    if not isinstance(initial, TriangleSurface):
        raise TypeError("initial must be a TriangleSurface")
    m_total = n_steps(tau, T)
    curr = SurfaceState(initial, init_mean_curvature(initial), 0.0, 0)
    prev = None
    states = [curr]
    if callback is not None:
        callback(curr)
    for m in range(m_total):
        try:
            if scheme.two_step and prev is None:
                nxt = pc3d_step(curr, tau)
            else:
                nxt = step3d(scheme, tau, curr, prev, regularize)
        except GeoflowError as err:
            raise err.at_step(m + 1)
        prev, curr = curr, nxt
        if callback is not None:
            callback(curr)
        if m + 1 == m_total or (store_every and (m + 1) % store_every == 0):
            states.append(curr)
    return states


def surface_diagnostics(state):
    mesh = state.mesh
    r_h, r_a = mesh.mesh_quality
    return {
        "step": state.step_index,
        "time": state.time,
        "area": mesh.area,
        "volume": mesh.volume,
        "r_h": r_h,
        "r_a": r_a,
    }
