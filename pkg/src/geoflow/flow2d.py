"""Time stepping for planar curve flows.

Flows: surface diffusion (SDF), curve shortening (CSF), area-preserving
curve shortening (APCSF) and anisotropic surface diffusion (ASDF).
Schemes: first-order BGN/BJL, the predictor-corrector variant (PC), and for
reference the Crank-Nicolson leap-frog (CNLF) and BDF2 two-step schemes.

Every step solves one linear system

    [ s K    B  ] [kappa']   [r1]
    [ B^T   -S  ] [  X'  ] = [r2]

assembled on a single polygon (current, predicted, ...). ``K`` is the
scalar stiffness for SDF/ASDF and the lumped mass for CSF/APCSF, ``B``
carries the weighted vertex normals and ``S`` is the vector stiffness,
weighted by Z_k(n) per edge for ASDF. The scalar ``s`` and the right-hand
sides encode the time discretization.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import linsys
from .anisotropy import AnisotropyModel, angle_from_normal
from .curve import ClosedPolygon, CurveState, init_curvature
from .errors import GeoflowError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Flow:
    kind: str
    model: AnisotropyModel | None = None

    def __post_init__(self):
        if self.kind not in ("sdf", "csf", "apcsf", "asdf"):
            raise ValueError(f"unknown flow {self.kind!r}")
        if self.kind == "asdf" and self.model is None:
            raise ValueError("anisotropic surface diffusion needs an AnisotropyModel")

    @classmethod
    def asdf(cls, model):
        return cls("asdf", model)

    @property
    def diffusive(self):
        return self.kind in ("sdf", "asdf")


SDF = Flow("sdf")
CSF = Flow("csf")
APCSF = Flow("apcsf")


class Scheme(str, enum.Enum):
    BGN = "bgn"
    PC = "pc"
    CNLF = "cnlf"
    BDF2 = "bdf2"

    @property
    def two_step(self):
        return self in (Scheme.CNLF, Scheme.BDF2)


# -- assembly -------------------------------------------------------------------
def coupling_matrix(poly):
    """B with (B X)_j = omega_j . X_j, so that X . B^T kappa = (kappa, n . X)^h."""
    N = poly.N
    om = poly.weighted_normals
    rows = np.repeat(np.arange(N), 2)
    cols = np.arange(2 * N)
    return sp.csr_matrix((om.ravel(), (rows, cols)), shape=(N, 2 * N))


def vector_stiffness(poly, Z=None):
    """Vector stiffness (Z d_s X, d_s w) for interleaved X; Z=None means identity."""
    N = poly.N
    if Z is None:
        return sp.kron(poly.stiffness_matrix, sp.identity(2), format="csr")
    w = 1.0 / poly.lengths
    j = np.arange(N)
    a = (j - 1) % N
    b = j
    k, l = np.meshgrid([0, 1], [0, 1], indexing="ij")
    k = k.ravel()
    l = l.ravel()
    blk = (w[:, None, None] * Z).reshape(N, 4)
    rows, cols, vals = [], [], []
    for p, q, sgn in ((a, a, 1.0), (b, b, 1.0), (a, b, -1.0), (b, a, -1.0)):
        rows.append((2 * p[:, None] + k[None, :]).ravel())
        cols.append((2 * q[:, None] + l[None, :]).ravel())
        vals.append(sgn * blk.ravel())
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(2 * N, 2 * N)
    )


def _scalar_block(poly, flow):
    if flow.diffusive:
        return poly.stiffness_matrix
    return sp.diags(poly.vertex_mass)


def _apply_scalar(poly, flow, u):
    if flow.diffusive:
        return poly.stiffness_matrix @ u
    m = poly.vertex_mass
    if flow.kind == "apcsf":
        return m * u - m * (m @ u) / m.sum()
    return m * u


def _stiffness(poly, flow):
    if flow.kind == "asdf":
        return vector_stiffness(poly, flow.model.zk(poly.normals))
    return vector_stiffness(poly)


class _Level:
    """Blocks assembled on one polygon, reused for rhs products and the solve."""

    def __init__(self, poly, flow):
        self.poly = poly
        self.flow = flow
        self.B = coupling_matrix(poly)
        self.S = _stiffness(poly, flow)
        self.K = _scalar_block(poly, flow)

    def K_apply(self, u):
        return _apply_scalar(self.poly, self.flow, u)

    def system(self, s, r1, r2):
        extra = None
        if self.flow.kind == "apcsf" and s != 0.0:
            m = self.poly.vertex_mass
            extra = (-s * m, s * m.sum(), 0.0)
        return linsys.saddle_system(s, self.K, self.B, self.S, r1, r2, extra)

    def solve(self, s, r1, r2, rel_tol=linsys.DEFAULT_REL_TOL):
        x = linsys.solve(self.system(s, r1, r2), rel_tol)
        N = self.poly.N
        return x[:N], x[N : 3 * N].reshape(N, 2)


def _advance(state, X, scalar, tau):
    return CurveState(ClosedPolygon(X, orient=False), scalar, state.time + tau, state.step_index + 1)


# -- steppers ---------------------------------------------------------------------
def bgn_step(state, tau, flow=SDF):
    """First-order BGN step (BJL for ASDF) assembled on the current polygon."""
    lev = _Level(state.polygon, flow)
    X = state.polygon.vertices
    kap, Xn = lev.solve(tau, lev.B @ X.ravel(), np.zeros(2 * X.shape[0]))
    return _advance(state, Xn, kap, tau)


def trivial_step(state):
    """BGN step for zero normal velocity: tangential vertex redistribution only."""
    lev = _Level(state.polygon, SDF)
    X = state.polygon.vertices
    kap, Xn = lev.solve(0.0, lev.B @ X.ravel(), np.zeros(2 * X.shape[0]))
    return CurveState(ClosedPolygon(Xn, orient=False), kap, state.time, state.step_index)


def predict(state, tau, flow=SDF):
    """Predicted polygon at t + tau/2 (first-order half step, scalar discarded)."""
    return bgn_step(state, 0.5 * tau, flow).polygon


def pc_step(state, tau, flow=SDF, predicted=None):
    """Predictor-corrector step.

    The corrector is assembled entirely on the predicted polygon and
    averages the scalar and position unknowns between levels m and m+1.
    """
    pred = predict(state, tau, flow) if predicted is None else predicted
    lev = _Level(pred, flow)
    X0 = state.polygon.vertices.ravel()
    k0 = state.scalar
    s = 0.5 * tau
    r1 = lev.B @ X0 - s * lev.K_apply(k0)
    r2 = -(lev.B.T @ k0) + lev.S @ X0
    kap, Xn = lev.solve(s, r1, r2)
    return _advance(state, Xn, kap, tau)


def cnlf_step(prev, curr, tau, flow=SDF, regularize=False):
    """Crank-Nicolson leap-frog step assembled on the current polygon."""
    lev = _Level(curr.polygon, flow)
    Xp = prev.polygon.vertices.ravel()
    kp = prev.scalar
    r1 = lev.B @ Xp - tau * lev.K_apply(kp)
    r2 = -(lev.B.T @ kp) + lev.S @ Xp
    kap, Xn = lev.solve(tau, r1, r2)
    new = _advance(curr, Xn, kap, tau)
    if regularize:
        reg = trivial_step(new)
        new = CurveState(reg.polygon, new.scalar, new.time, new.step_index)
    return new


def bdf2_step(prev, curr, tau, flow=SDF):
    """BDF2 step assembled on the polygon predicted by a full first-order step."""
    pred = bgn_step(curr, tau, flow).polygon
    lev = _Level(pred, flow)
    Xc = curr.polygon.vertices.ravel()
    Xp = prev.polygon.vertices.ravel()
    s = 2.0 * tau / 3.0
    r1 = lev.B @ ((4.0 * Xc - Xp) / 3.0)
    kap, Xn = lev.solve(s, r1, np.zeros_like(Xc))
    return _advance(curr, Xn, kap, tau)


# -- drivers ------------------------------------------------------------------------
def initial_scalar(poly, flow=SDF):
    """kappa^0 by least squares; mu^0 = (gamma + gamma'') kappa^0 for ASDF."""
    kap = init_curvature(poly)
    if flow.kind != "asdf":
        return kap
    om = poly.weighted_normals
    nv = om / np.hypot(om[:, 0], om[:, 1])[:, None]
    th = angle_from_normal(nv)
    m = flow.model
    return (m.gamma_theta(th) + m.d2gamma_theta(th)) * kap


def n_steps(tau, T):
    r = T / tau
    m = int(round(r))
    if m < 1 or abs(r - m) > 1e-8 * max(1.0, r):
        raise ValueError(f"T/tau = {r} is not a positive integer")
    return m


def step(scheme, flow, tau, curr, prev=None, regularize=False):
    scheme = Scheme(scheme)
    if scheme is Scheme.BGN:
        return bgn_step(curr, tau, flow)
    if scheme is Scheme.PC:
        return pc_step(curr, tau, flow)
    if prev is None:
        raise ValueError(f"{scheme.value} needs two time levels")
    if scheme is Scheme.CNLF:
        return cnlf_step(prev, curr, tau, flow, regularize)
    return bdf2_step(prev, curr, tau, flow)


def run_flow(initial, flow, scheme, tau, T, callback=None, store_every=1, regularize=False, initial_scalar_field=None):
    """Evolve ``initial`` to time T and return the stored states.

    ``callback(state)`` is invoked for the initial state and after every
    step. ``store_every`` keeps every k-th state (the final state is always
    kept); pass 0 to keep only the initial and final states. Two-step schemes
    get their second level from one PC step. Errors raised by a step carry
    the failing step index in ``err.step``.
    """
    scheme = Scheme(scheme)
    poly = initial if isinstance(initial, ClosedPolygon) else ClosedPolygon(initial)
    m_total = n_steps(tau, T)
    scal = initial_scalar(poly, flow) if initial_scalar_field is None else np.asarray(initial_scalar_field, float)
    curr = CurveState(poly, scal, 0.0, 0)
    prev = None
    states = [curr]
    if callback is not None:
        callback(curr)
    for m in range(m_total):
        try:
            if scheme.two_step and prev is None:
                nxt = pc_step(curr, tau, flow)
            else:
                nxt = step(scheme, flow, tau, curr, prev, regularize)
        except GeoflowError as err:
            raise err.at_step(m + 1)
        prev, curr = curr, nxt
        if callback is not None:
            callback(curr)
        if m + 1 == m_total or (store_every and (m + 1) % store_every == 0):
            states.append(curr)
    return states


def curve_diagnostics(state, model=None):
    poly = state.polygon
    row = {
        "step": state.step_index,
        "time": state.time,
        "perimeter": poly.perimeter,
        "area": poly.area,
        "mesh_ratio": poly.mesh_ratio,
    }
    if model is not None:
        row["energy"] = float(np.sum(poly.lengths * model.gamma(poly.normals)))
    return row
