"""Experiment configuration, runs, convergence studies and Wulff comparisons."""

from __future__ import annotations

import csv
import hashlib
import json
import os
import platform
import tempfile
import time
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np
import yaml

from . import __version__, io, shapes
from .anisotropy import AnisotropyModel, wulff_shape
from .curve import discrete_energy
from .errors import ConfigError, GeoflowError, NotConverged
from .flow2d import Flow, Scheme, curve_diagnostics, n_steps, run_flow
from .flow3d import run_surface_flow, surface_diagnostics
from .metrics import convergence_table, manifold_distance_2d, manifold_distance_3d


def parse_number(value):
    """Float from a number or a string such as ``"1/160"``."""
    if isinstance(value, str):
        try:
            return float(Fraction(value.strip()))
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"cannot parse number {value!r}") from exc
    return float(value)


@dataclass
class ReferenceSettings:
    scheme: str = "pc"
    tau: float | None = None
    N: int | None = None
    kind: str = "numerical"

    def __post_init__(self):
        if self.kind not in ("numerical", "exact_circle"):
            raise ConfigError(f"unknown reference kind {self.kind!r}")
        Scheme(self.scheme)
        if self.tau is not None:
            self.tau = parse_number(self.tau)


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce one experiment.

    Only ``flow``, ``scheme``, ``shape``, ``tau`` and ``T`` are required.
    """

    flow: str
    scheme: str
    shape: dict
    tau: float
    T: float
    anisotropy: dict | None = None
    output: str = "runs/experiment"
    reference: ReferenceSettings = field(default_factory=ReferenceSettings)
    snapshot_every: int = 0
    metric_resolution: int = 256
    regularize: bool = False
    vtk: bool = False
    cache_dir: str | None = None
    equilibrium_tol: float = 1e-3
    wulff_normalization: str = "area"
    wulff_samples: int = 4096

    def __post_init__(self):
        self.tau = parse_number(self.tau)
        self.T = parse_number(self.T)
        if not self.tau > 0:
            raise ConfigError("tau must be positive")
        try:
            n_steps(self.tau, self.T)
            Scheme(self.scheme)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if self.flow not in ("sdf", "csf", "apcsf", "asdf"):
            raise ConfigError(f"unknown flow {self.flow!r}")
        if self.flow == "asdf" and not self.anisotropy:
            raise ConfigError("flow 'asdf' needs an anisotropy section")
        if not isinstance(self.shape, dict) or "name" not in self.shape:
            raise ConfigError("shape must be a mapping with a 'name'")
        if isinstance(self.reference, dict):
            self.reference = ReferenceSettings(**self.reference)
        if self.wulff_normalization not in ("area", "initial"):
            raise ConfigError("wulff_normalization must be 'area' or 'initial'")
        if self.surface and self.flow != "sdf":
            raise ConfigError("surfaces support surface diffusion only")

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        missing = [k for k in ("flow", "scheme", "shape", "tau", "T") if k not in d]
        if missing:
            raise ConfigError(f"missing config fields: {', '.join(missing)}")
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config fields: {', '.join(sorted(extra))}")
        if isinstance(d["shape"], str):
            d["shape"] = {"name": d["shape"]}
        return cls(**d)

    @classmethod
    def load(cls, path):
        configs = load_configs(path)
        if len(configs) != 1:
            raise ConfigError(f"{path}: lists several schemes; use load_configs")
        return configs[0]

    def to_dict(self):
        d = asdict(self)
        return d

    def dump(self, path):
        with open(path, "w") as fh:
            yaml.safe_dump(self.to_dict(), fh, sort_keys=False)

    @property
    def surface(self):
        return shapes.is_surface(self.shape["name"])

    @property
    def shape_params(self):
        return {k: v for k, v in self.shape.items() if k != "name"}

    def model(self):
        return AnisotropyModel.from_dict(self.anisotropy) if self.anisotropy else None

    def flow_kind(self):
        return Flow(self.flow, self.model())

    def initial_shape(self, N=None):
        params = self.shape_params
        if N is not None:
            params["N"] = N
        return shapes.generate_shape(self.shape["name"], params)


def _read_yaml(path):
    with open(path) as fh:
        data = yaml.safe_load(fh)
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping at top level")
    return data


def load_configs(path):
    """Configs from one YAML file.

    A list under ``scheme`` expands into one config per scheme, each writing
    to ``<output>/<scheme>``.
    """
    data = _read_yaml(path)
    schemes = data.get("scheme")
    if not isinstance(schemes, list):
        return [ExperimentConfig.from_dict(data)]
    if not schemes:
        raise ConfigError(f"{path}: empty scheme list")
    base = data.get("output", ExperimentConfig.output)
    return [ExperimentConfig.from_dict(dict(data, scheme=s, output=os.path.join(base, str(s)))) for s in schemes]


# -- single runs -------------------------------------------------------------------------
@dataclass
class RunResult:
    final: object
    diagnostics: list
    output: str
    wall_time: float
    error: dict | None = None


def _write_csv(path, rows):
    if not rows:
        return
    cols = list(rows[0])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for r in rows:
            w.writerow([repr(float(r[c])) if isinstance(r[c], (float, np.floating)) else r[c] for c in cols])


def _versions():
    import scipy
    import shapely

    return {
        "geoflow": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "shapely": shapely.__version__,
    }


def simulate(config, initial=None, scheme=None, tau=None, callback=None):
    """Run the configured flow and return the final state (no files written)."""
    scheme = scheme or config.scheme
    tau = config.tau if tau is None else tau
    shape = config.initial_shape() if initial is None else initial
    if config.surface:
        states = run_surface_flow(shape, scheme, tau, config.T, callback, store_every=0, regularize=config.regularize)
    else:
        states = run_flow(shape, config.flow_kind(), scheme, tau, config.T, callback, 0, config.regularize)
    return states[-1]


def run_experiment(config):
    """Run one experiment and write its artifacts to ``config.output``.

    Writes snapshots (every ``snapshot_every`` steps), ``diagnostics.csv``,
    the final shape and ``manifest.json``. A failing step is recorded in the
    manifest before the error is re-raised.
    """
    out = config.output
    os.makedirs(out, exist_ok=True)
    model = config.model()
    rows = []
    snaps = []
    ext = ".obj" if config.surface else ".txt"

    def cb(state):
        if config.surface:
            rows.append(surface_diagnostics(state))
            shape = state.mesh
        else:
            rows.append(curve_diagnostics(state, model if config.flow == "asdf" else None))
            shape = state.polygon
        k = state.step_index
        if config.snapshot_every and k % config.snapshot_every == 0:
            path = os.path.join(out, f"snapshot_{k:06d}{ext}")
            io.write_shape(path, shape)
            if config.surface and config.vtk:
                vtk = os.path.join(out, f"snapshot_{k:06d}.vtk")
                io.write_vtk(vtk, shape, {"H": state.H})
                snaps.append((state.time, vtk))

    t0 = time.perf_counter()
    error = None
    final = None
    try:
        final = simulate(config, callback=cb)
    except GeoflowError as exc:
        error = {"type": type(exc).__name__, "message": str(exc), "step": exc.step}
        raise
    finally:
        wall = time.perf_counter() - t0
        _write_csv(os.path.join(out, "diagnostics.csv"), rows)
        if snaps:
            io.write_pvd(os.path.join(out, "snapshots.pvd"), snaps)
        if final is not None:
            io.write_shape(os.path.join(out, "final" + ext), final.mesh if config.surface else final.polygon)
        manifest = {
            "config": config.to_dict(),
            "versions": _versions(),
            "wall_time": wall,
            "steps": n_steps(config.tau, config.T),
            "status": "ok" if error is None else "failed",
            "error": error,
        }
        with open(os.path.join(out, "manifest.json"), "w") as fh:
            json.dump(manifest, fh, indent=2)
    return RunResult(final, rows, out, wall, error)


def _run_one(config):
    try:
        res = run_experiment(config)
        return {"output": res.output, "status": "ok", "wall_time": res.wall_time}
    except GeoflowError as exc:
        return {"output": config.output, "status": "failed", "error": type(exc).__name__, "message": str(exc), "step": exc.step}


def run_many(configs, jobs=1):
    """Run independent experiments, in ``jobs`` worker processes when jobs > 1.

    Every run writes only to its own output directory. Returns one summary
    dict per config, in input order.
    """
    outputs = [os.path.abspath(c.output) for c in configs]
    if len(set(outputs)) != len(outputs):
        raise ConfigError("concurrent runs need distinct output directories")
    if jobs <= 1 or len(configs) <= 1:
        return [_run_one(c) for c in configs]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_one, configs))


# -- reference cache ---------------------------------------------------------------------
def reference_key(config, N_ref, tau_ref):
    subset = {
        "flow": config.flow,
        "anisotropy": config.anisotropy,
        "shape": dict(sorted(config.shape_params.items()), name=config.shape["name"]),
        "N_ref": N_ref,
        "tau_ref": repr(float(tau_ref)),
        "T": repr(float(config.T)),
        "scheme": config.reference.scheme,
    }
    blob = json.dumps(subset, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()


def _publish(path, writer, shape):
    d = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=d, suffix=os.path.splitext(path)[1])
    os.close(fd)
    try:
        writer(tmp, shape)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def reference_solution(config, tau_list):
    """Fine-step reference at time T, read from or published to the cache."""
    tau_min = min(tau_list)
    ref = config.reference
    if config.surface:
        tau_ref = ref.tau if ref.tau is not None else tau_min / 8
        N_ref = None
    else:
        tau_ref = ref.tau if ref.tau is not None else tau_min / 16
        N_ref = ref.N if ref.N is not None else 2000
    if tau_ref > tau_min / 8 * (1 + 1e-12):
        raise ConfigError("reference step must satisfy tau_ref <= min(tau)/8")
    ext = ".obj" if config.surface else ".txt"
    path = None
    if config.cache_dir:
        os.makedirs(config.cache_dir, exist_ok=True)
        path = os.path.join(config.cache_dir, reference_key(config, N_ref, tau_ref) + ext)
        if os.path.exists(path):
            return io.read_shape(path)
    initial = config.initial_shape() if config.surface else config.initial_shape(N_ref)
    final = simulate(config, initial=initial, scheme=ref.scheme, tau=tau_ref)
    shape = final.mesh if config.surface else final.polygon
    if path:
        _publish(path, io.write_shape, shape)
    return shape


def _exact_circle_error(config, poly):
    r0 = float(config.shape_params.get("radius", 1.0))
    rT = np.sqrt(r0 * r0 - 2.0 * config.T)
    return float(np.max(np.abs(np.hypot(*poly.vertices.T) - rT)))


def convergence_study(config, tau_list, scheme=None):
    """Errors at time T for each step size, against a cached reference."""
    taus = [parse_number(t) for t in tau_list]
    if any(b >= a for a, b in zip(taus, taus[1:])):
        raise ConfigError("tau_list must be strictly decreasing")
    for t in taus:
        try:
            n_steps(t, config.T)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    exact = config.reference.kind == "exact_circle"
    ref = None if exact else reference_solution(config, taus)
    rows = []
    for t in taus:
        final = simulate(config, scheme=scheme, tau=t)
        if exact:
            err = _exact_circle_error(config, final.polygon)
        elif config.surface:
            err = manifold_distance_3d(final.mesh, ref, config.metric_resolution).value
        else:
            err = manifold_distance_2d(final.polygon, ref)
        rows.append((t, err))
    return convergence_table(rows)


# -- Wulff comparison --------------------------------------------------------------------
@dataclass(frozen=True)
class WulffComparison:
    distance_bjl: float
    distance_pc: float
    normal_speed_bjl: float
    normal_speed_pc: float
    area_loss_bjl: float
    area_loss_pc: float
    wulff_corners: int
    corners_pc: int
    corner_error_pc: float
    corners_bjl: int
    corner_error_bjl: float

    def as_row(self):
        return asdict(self)


def _centroid(poly):
    from shapely.geometry import Polygon

    c = Polygon(poly.vertices).centroid
    return (c.x, c.y)


def normal_speed(prev, curr, tau):
    """max_j |(X^{m+1}_j - X^m_j) . omega_j| / (|omega_j| tau)."""
    om = prev.weighted_normals
    d = curr.vertices - prev.vertices
    return float(np.max(np.abs(np.einsum("ij,ij->i", d, om)) / np.hypot(om[:, 0], om[:, 1])) / tau)


def corner_turns(poly, min_turn_deg=2.0, merge_gap=0.25):
    """Net turning angle (degrees) of each cluster of sharply turning vertices.

    Vertices turning by more than ``min_turn_deg`` are grouped when the arc
    length between them is below ``merge_gap`` times the mean edge length, so
    a corner resolved by a zig-zag of collapsed edges counts once with its
    net turn.
    """
    t = poly.tangents
    tn = np.roll(t, -1, axis=0)
    turn = np.degrees(np.arctan2(t[:, 0] * tn[:, 1] - t[:, 1] * tn[:, 0], np.sum(t * tn, axis=1)))
    sharp = np.flatnonzero(np.abs(turn) > min_turn_deg)
    if sharp.size == 0:
        return []
    # arc length position of vertex j (end of edge j)
    s = np.cumsum(poly.lengths)
    L = s[-1]
    gap = merge_gap * L / poly.N
    ds = np.diff(np.r_[s[sharp], s[sharp[0]] + L])
    breaks = np.flatnonzero(ds >= gap)
    if breaks.size == 0:
        return [float(turn[sharp].sum())]
    # start after a break so that no cluster wraps around index 0
    order = np.roll(sharp, -(breaks[0] + 1))
    ds = np.roll(ds, -(breaks[0] + 1))
    runs, cur = [], []
    for j, d in zip(order, ds):
        cur.append(turn[j])
        if d >= gap:
            runs.append(float(np.sum(cur)))
            cur = []
    return runs


def _corner_summary(poly, wulff_turns, min_corner_deg):
    runs = [r for r in corner_turns(poly) if abs(r) >= min_corner_deg]
    if not wulff_turns or len(runs) != len(wulff_turns):
        return len(runs), float("inf") if wulff_turns else 0.0
    ref = np.mean(np.abs(wulff_turns))
    return len(runs), float(np.max(np.abs(np.abs(runs) - ref)))


def wulff_compare(config, min_corner_deg=15.0):
    """Equilibria of BJL and BJL/PC against the Wulff shape of the configured energy.

    Both runs use the configured N, tau and T. The Wulff polygon is scaled
    to the equilibrium's enclosed area (``wulff_normalization="area"``) or
    to the initial area (``"initial"``) and centred at its centroid. Raises
    NotConverged when the last-step normal speed exceeds
    ``config.equilibrium_tol``.
    """
    model = config.model() or AnisotropyModel.isotropic()
    flow = Flow("asdf", model)
    initial = config.initial_shape()
    A0 = initial.area
    W = wulff_shape(model, config.wulff_samples)
    w_turns = [r for r in corner_turns(W.polygon, 2.0) if abs(r) >= min_corner_deg] if W.trimmed else []
    res = {}
    for scheme in (Scheme.BGN, Scheme.PC):
        last = {}

        def cb(state):
            last["prev"], last["curr"] = last.get("curr"), state.polygon

        states = run_flow(initial, flow, scheme, config.tau, config.T, cb, store_every=0)
        P = states[-1].polygon
        speed = normal_speed(last["prev"], P, config.tau)
        if speed > config.equilibrium_tol:
            raise NotConverged(f"{scheme.value}: normal speed {speed:.3e} > {config.equilibrium_tol:.3e} at T={config.T}")
        area = P.area if config.wulff_normalization == "area" else A0
        d = manifold_distance_2d(P, W.scaled_to_area(area, _centroid(P)))
        nc, cerr = _corner_summary(P, w_turns, min_corner_deg)
        res[scheme] = (d, speed, (P.area - A0) / A0, nc, cerr)
    b, p = res[Scheme.BGN], res[Scheme.PC]
    return WulffComparison(b[0], p[0], b[1], p[1], b[2], p[2], len(w_turns), p[3], p[4], b[3], b[4])


def energy_history(config, scheme=None):
    """(time, energy, area) along a run of the configured anisotropic flow."""
    model = config.model()
    rows = []

    def cb(state):
        rows.append((state.time, discrete_energy(state.polygon, model), state.polygon.area))

    simulate(config, scheme=scheme, callback=cb)
    return np.array(rows)
