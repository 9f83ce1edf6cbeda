"""Command-line driver: ``serre-galerkin <experiment> [--config FILE] [flags]``.

Exit status is 0 on success, 2 on a configuration error and 3 on a
numerical failure (blow-up, loss of depth positivity, or a collision
run whose peak trace cannot be classified).
"""

import argparse
import logging
import sys

from .config import KINDS, ExperimentConfig, load_config
from .errors import BlowUpError, CollisionAnalysisError, ConfigError, SizingError, SolverBreakdown

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3

log = logging.getLogger("serre_galerkin")


def _list_of(tp):
    def parse(text):
        try:
            return [tp(v) for v in text.split(",") if v.strip()]
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected a comma-separated list, got {text!r}") from None

    return parse


_EXPERIMENT_FLAGS = {
    "converge": [("--c", float, "solitary-wave speed"), ("--x0", float, "initial crest position"),
                 ("--projection", str, "initial velocity projection: l2 or elliptic")],
    "evolve": [("--problem", str, "solitary or gaussian"), ("--c", float, "solitary-wave speed"),
               ("--x0", float, "initial crest position"), ("--a", float, "Gaussian amplitude"),
               ("--b", float, "Gaussian width parameter"), ("--projection", str, "l2 or elliptic"),
               ("--snapshot-stride", int, "steps between snapshots")],
    "resolve": [("--a", float, "Gaussian amplitude"), ("--b", float, "Gaussian width parameter"),
                ("--snapshot-times", _list_of(float), "comma-separated snapshot times")],
    "collide": [("--a1", float, "amplitude of the larger wave"), ("--ratio", float, "amplitude ratio a1/a2"),
                ("--x1", float, "initial crest of the larger wave"), ("--x2", float, "initial crest of the smaller wave"),
                ("--track-stride", int, "steps between peak searches"),
                ("--scan-spacing", float, "spacing of the crest search grid"),
                ("--min-height", float, "crest detection threshold on zeta"),
                ("--report-time", float, "phase-shift measurement time"),
                ("--window", float, "interaction window (crest separation)")],
    "analytics": [("--speeds", _list_of(float), "comma-separated speeds c > 1"),
                  ("--profile-points", int, "samples per profile")],
    "stability": [("--c", float, "solitary-wave speed"), ("--x0", float, "initial crest position"),
                  ("--courant-list", _list_of(float), "comma-separated k/h values")],
}


def build_parser():
    parser = argparse.ArgumentParser(prog="serre-galerkin", description="Galerkin/RK4 experiments for the Serre equations.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = parser.add_subparsers(dest="kind", required=True, metavar="EXPERIMENT")
    for kind in KINDS:
        p = sub.add_parser(kind, help=f"run the {kind} experiment")
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--out", default=f"out-{kind}", help="output directory")
        if kind == "converge":
            p.add_argument("--n", type=_list_of(int), help="comma-separated mesh sizes")
        elif kind != "analytics":
            p.add_argument("--n", type=int, help="number of mesh cells")
        if kind != "analytics":
            p.add_argument("--order", type=int, help="spline order r (4 = cubic)")
            p.add_argument("--L", type=float, help="half-length of the periodic domain")
            p.add_argument("--tfinal", type=float, help="final time")
        if kind not in ("analytics", "stability"):
            p.add_argument("--courant", type=float, help="ratio k/h")
            p.add_argument("--k", type=float, help="time step (overrides --courant)")
        for flag, tp, help_ in _EXPERIMENT_FLAGS[kind]:
            p.add_argument(flag, type=tp, help=help_)
    return parser


def config_from_args(args):
    """Config file values overridden by any flags given."""
    cfg = load_config(args.config) if args.config else ExperimentConfig(args.kind, {})
    if cfg.kind != args.kind:
        raise ConfigError(f"config file describes a {cfg.kind!r} experiment, not {args.kind!r}")
    values = dict(cfg.values)
    skip = {"kind", "config", "out", "verbose"}
    for key, val in vars(args).items():
        if key in skip or val is None:
            continue
        if key == "n" and args.kind == "converge":
            key = "n_list"
        values[key] = val
    return ExperimentConfig(args.kind, values)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    from .experiments import run

    try:
        cfg = config_from_args(args)
        run(cfg, args.out)
    except (ConfigError, SizingError) as exc:
        print(f"serre-galerkin: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (BlowUpError, SolverBreakdown, CollisionAnalysisError) as exc:
        print(f"serre-galerkin: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
