"""Plain-text shape formats: polygon files, OFF, OBJ and legacy VTK."""

from __future__ import annotations

import contextlib
import os

import numpy as np

from .curve import ClosedPolygon
from .surface import TriangleSurface


def _writer(target):
    """Open a path for writing, or pass an already open text stream through."""
    if hasattr(target, "write"):
        return contextlib.nullcontext(target)
    return open(target, "w")


def write_polygon(path, poly):
    """First line N, then one ``x y`` line per vertex in clockwise order."""
    X = poly.vertices
    with _writer(path) as fh:
        fh.write(f"{len(X)}\n")
        for x, y in X.tolist():
            fh.write(f"{x!r} {y!r}\n")


def read_polygon(path):
    with open(path) as fh:
        N = int(fh.readline().split()[0])
        X = np.loadtxt(fh, ndmin=2, max_rows=N)
    if X.shape != (N, 2):
        raise ValueError(f"{path}: expected {N} vertices, read {X.shape[0]}")
    return ClosedPolygon(X)


def write_off(path, mesh):
    with _writer(path) as fh:
        fh.write(f"OFF\n{mesh.K} {mesh.J} 0\n")
        for p in mesh.vertices:
            fh.write(" ".join(repr(float(c)) for c in p) + "\n")
        for f in mesh.faces:
            fh.write(f"3 {f[0]} {f[1]} {f[2]}\n")


def _tokens(fh):
    for line in fh:
        line = line.split("#", 1)[0].strip()
        if line:
            yield line


def read_off(path):
    with open(path) as fh:
        lines = _tokens(fh)
        head = next(lines)
        if not head.startswith("OFF"):
            raise ValueError(f"{path}: not an OFF file")
        rest = head[3:].split()
        counts = rest if rest else next(lines).split()
        K, J = int(counts[0]), int(counts[1])
        V = np.array([next(lines).split()[:3] for _ in range(K)], dtype=float)
        F = []
        for _ in range(J):
            t = next(lines).split()
            if int(t[0]) != 3:
                raise ValueError(f"{path}: only triangular faces are supported")
            F.append([int(v) for v in t[1:4]])
    return TriangleSurface(V, np.array(F))


def write_obj(path, mesh):
    with _writer(path) as fh:
        for p in mesh.vertices:
            fh.write("v " + " ".join(repr(float(c)) for c in p) + "\n")
        for f in mesh.faces:
            fh.write(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}\n")


def read_obj(path):
    V, F = [], []
    with open(path) as fh:
        for line in _tokens(fh):
            t = line.split()
            if t[0] == "v":
                V.append([float(c) for c in t[1:4]])
            elif t[0] == "f":
                idx = [int(c.split("/")[0]) for c in t[1:]]
                if len(idx) != 3:
                    raise ValueError(f"{path}: only triangular faces are supported")
                F.append([i - 1 if i > 0 else len(V) + i for i in idx])
    return TriangleSurface(np.array(V), np.array(F))


def write_vtk(path, mesh, point_data=None, title="geoflow surface"):
    """Legacy ASCII VTK polydata, optionally with nodal scalar arrays."""
    with open(path, "w") as fh:
        fh.write(f"# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET POLYDATA\n")
        fh.write(f"POINTS {mesh.K} double\n")
        for p in mesh.vertices:
            fh.write(" ".join(repr(float(c)) for c in p) + "\n")
        fh.write(f"POLYGONS {mesh.J} {4 * mesh.J}\n")
        for f in mesh.faces:
            fh.write(f"3 {f[0]} {f[1]} {f[2]}\n")
        if point_data:
            fh.write(f"POINT_DATA {mesh.K}\n")
            for name, vals in point_data.items():
                fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
                fh.write("\n".join(repr(float(v)) for v in vals) + "\n")


def write_pvd(path, entries):
    """ParaView collection indexing numbered VTK files by time."""
    with open(path, "w") as fh:
        fh.write('<?xml version="1.0"?>\n<VTKFile type="Collection" version="0.1">\n<Collection>\n')
        for t, fname in entries:
            fh.write(f'<DataSet timestep="{float(t)!r}" file="{os.path.basename(fname)}"/>\n')
        fh.write("</Collection>\n</VTKFile>\n")


def read_shape(path):
    """Dispatch on extension: .off, .obj, anything else is a polygon file."""
    ext = os.path.splitext(path)[1].lower()
    if ext == ".off":
        return read_off(path)
    if ext == ".obj":
        return read_obj(path)
    return read_polygon(path)


def write_shape(path, shape):
    if isinstance(shape, ClosedPolygon):
        return write_polygon(path, shape)
    ext = os.path.splitext(path)[1].lower()
    if ext == ".off":
        return write_off(path, shape)
    if ext == ".vtk":
        return write_vtk(path, shape)
    return write_obj(path, shape)
