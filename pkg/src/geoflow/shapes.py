"""Named initial shapes for experiments."""

from __future__ import annotations

import numpy as np

from . import surface
from .curve import ClosedPolygon, regular_polygon
from .errors import ConfigError, UnknownShape


def ellipse(N, a=2.0, b=1.0):
    """(a cos 2 pi rho, b sin 2 pi rho) at rho_j = j/N, stored clockwise."""
    rho = np.arange(N) / N
    return ClosedPolygon(np.column_stack([a * np.cos(2 * np.pi * rho), b * np.sin(2 * np.pi * rho)]))


def circle(N, radius=1.0):
    return regular_polygon(N, radius)


def polar_curve(N, radial):
    th = 2.0 * np.pi * np.arange(N) / N
    r = radial(th)
    return ClosedPolygon(np.column_stack([r * np.cos(th), r * np.sin(th)]))


def flower(N, amplitude=0.4, petals=6):
    return polar_curve(N, lambda th: 1.0 + amplitude * np.cos(petals * th))


def nonconvex(N, amplitude=0.65, lobes=3):
    return polar_curve(N, lambda th: 1.0 + amplitude * np.cos(lobes * th))


def rectangle(N, width=4.0, height=1.0):
    """Axis-aligned rectangle sampled at N uniform arc-length points from a corner."""
    w, h = width, height
    corners = np.array([[w / 2, -h / 2], [w / 2, h / 2], [-w / 2, h / 2], [-w / 2, -h / 2], [w / 2, -h / 2]])
    seg = np.hypot(*np.diff(corners, axis=0).T)
    cum = np.r_[0.0, np.cumsum(seg)]
    s = cum[-1] * np.arange(N) / N
    x = np.interp(s, cum, corners[:, 0])
    y = np.interp(s, cum, corners[:, 1])
    return ClosedPolygon(np.column_stack([x, y]))


def _level_frequency(level):
    """Subdivision level to geodesic frequency (each level halves edge lengths)."""
    level = int(level)
    if level < 1:
        raise ConfigError("surface subdivision level must be >= 1")
    return 2**level


CURVES = {
    "ellipse": ellipse,
    "circle": circle,
    "rectangle": rectangle,
    "flower": flower,
    "nonconvex": nonconvex,
    "polygon": lambda N, radius=1.0: regular_polygon(N, radius),
}

SURFACES = {
    "sphere": lambda frequency=10, radius=1.0: surface.geodesic_sphere(frequency, radius),
    "icosphere": lambda level=3, radius=1.0: surface.geodesic_sphere(_level_frequency(level), radius),
    "ellipsoid": lambda frequency=10, axes=(2.0, 1.0, 1.0), level=None: surface.ellipsoid(
        tuple(axes), frequency if level is None else _level_frequency(level)
    ),
    "torus": lambda major=1.0, minor=0.4, n_major=50, n_minor=20: surface.torus(major, minor, n_major, n_minor),
    "cube": surface.unit_cube,
}


def shape_names():
    return sorted(CURVES) + sorted(SURFACES)


def is_surface(name):
    return name in SURFACES


def generate_shape(name, params=None):
    """Build a named curve (needs ``N``) or surface from a parameter dict."""
    params = dict(params or {})
    if name in CURVES:
        N = int(params.pop("N", 0))
        if N < 3:
            raise ConfigError("curves need N >= 3")
        return CURVES[name](N, **params)
    if name in SURFACES:
        return SURFACES[name](**params)
    raise UnknownShape(name)
