"""Command-line entry point: ``geoflow {run,converge,wulff,distance,shapes}``."""

from __future__ import annotations

import argparse
import json
import sys

from . import io, shapes
from .errors import ConfigError, GeoflowError


def _params(pairs):
    out = {}
    for p in pairs or ():
        if "=" not in p:
            raise ConfigError(f"expected key=value, got {p!r}")
        k, v = p.split("=", 1)
        try:
            out[k] = json.loads(v)
        except json.JSONDecodeError:
            out[k] = v
    return out


def _cmd_run(args):
    from .harness import load_configs, run_many

    configs = [c for path in args.config for c in load_configs(path)]
    if args.output:
        if len(configs) != 1:
            raise ConfigError("--output needs exactly one run")
        configs[0].output = args.output
    results = run_many(configs, args.jobs)
    for r in results:
        print(json.dumps(r))
    failed = [r for r in results if r["status"] != "ok"]
    return 1 if failed else 0


def _cmd_converge(args):
    from .harness import ExperimentConfig, convergence_study

    cfg = ExperimentConfig.load(args.config)
    if args.cache_dir:
        cfg.cache_dir = args.cache_dir
    table = convergence_study(cfg, args.tau, scheme=args.scheme)
    if args.csv:
        table.to_csv(args.csv)
    print(table.format())
    print(f"fitted slope {table.fitted_slope():.4f}")


def _cmd_wulff(args):
    from .harness import ExperimentConfig, wulff_compare

    cfg = ExperimentConfig.load(args.config)
    print(json.dumps(wulff_compare(cfg).as_row(), indent=2))


def _cmd_distance(args):
    from .curve import ClosedPolygon
    from .metrics import manifold_distance_2d, manifold_distance_3d

    a = io.read_shape(args.first)
    b = io.read_shape(args.second)
    if isinstance(a, ClosedPolygon) != isinstance(b, ClosedPolygon):
        raise ConfigError("cannot compare a curve with a surface")
    if isinstance(a, ClosedPolygon):
        print(json.dumps({"distance": manifold_distance_2d(a, b)}))
    else:
        d = manifold_distance_3d(a, b, args.resolution)
        print(json.dumps({"distance": d.value, "delta": d.delta, "resolution": d.resolution}))


def _cmd_shapes(args):
    if args.list:
        print("\n".join(shapes.shape_names()))
        return
    if not args.name:
        raise ConfigError("shape name required")
    shape = shapes.generate_shape(args.name, _params(args.param))
    if args.output:
        io.write_shape(args.output, shape)
    elif shapes.is_surface(args.name):
        io.write_off(sys.stdout, shape)
    else:
        io.write_polygon(sys.stdout, shape)


def build_parser():
    p = argparse.ArgumentParser(prog="geoflow", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run experiments from YAML configs")
    r.add_argument("config", nargs="+", help="YAML files; a scheme list expands into one run per scheme")
    r.add_argument("-o", "--output", help="override the output directory (single run only)")
    r.add_argument("-j", "--jobs", type=int, default=1, help="worker processes for independent runs")
    r.set_defaults(func=_cmd_run)

    c = sub.add_parser("converge", help="time-step convergence study")
    c.add_argument("config")
    c.add_argument("--tau", nargs="+", required=True, help="decreasing step sizes, e.g. 1/40 1/80")
    c.add_argument("--scheme", help="override the scheme under test")
    c.add_argument("--csv", help="write the error table here")
    c.add_argument("--cache-dir", help="reference solution cache")
    c.set_defaults(func=_cmd_converge)

    w = sub.add_parser("wulff", help="compare BJL and BJL/PC equilibria with the Wulff shape")
    w.add_argument("config")
    w.set_defaults(func=_cmd_wulff)

    d = sub.add_parser("distance", help="manifold distance between two shape files")
    d.add_argument("first")
    d.add_argument("second")
    d.add_argument("--resolution", type=int, default=256)
    d.set_defaults(func=_cmd_distance)

    s = sub.add_parser("shapes", help="write a named initial shape")
    s.add_argument("name", nargs="?")
    s.add_argument("--param", "-p", action="append", help="key=value (JSON values allowed)")
    s.add_argument("--output", "-o")
    s.add_argument("--list", action="store_true")
    s.set_defaults(func=_cmd_shapes)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        code = args.func(args)
    except (GeoflowError, OSError, KeyError, ValueError) as exc:
        err = {"error": type(exc).__name__, "message": str(exc).strip("'\""), "step": getattr(exc, "step", None)}
        print("error: " + json.dumps(err), file=sys.stderr)
        return 2 if isinstance(exc, ConfigError) else 1
    return code or 0


if __name__ == "__main__":
    sys.exit(main())
