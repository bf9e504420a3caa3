"""Command line entry point: ``cfpilot <command> [options]``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace

from . import harness
from .config import ConfigError, apply_overrides, load_config, spec_from_config

# preset experiments; values are config dicts in the load_config layout
ALL = ["random", "greedy", "repulsive", "ims-es", "ims-vs", "ideal"]
PRESETS = {
    "fig2": {"topology": {"M": 50, "K": 12, "L": 1}, "radio": {"num_pilots": 3},
             "experiment": {"schemes": ["random", "greedy", "repulsive", "ims-es", "ims-vs",
                                        "exhaustive", "ideal"]}},
    "fig3": {"topology": {"K": 40, "L": 1}, "radio": {"num_pilots": 10},
             "experiment": {"schemes": ALL, "sweep": {"param": "M", "values": [50, 100, 150, 200, 250, 300]}}},
    "fig4": {"topology": {"M": 100, "L": 1}, "radio": {"num_pilots": 10},
             "experiment": {"schemes": ALL, "sweep": {"param": "K", "values": [10, 20, 30, 40, 50, 60, 70, 80]}}},
    "fig5": {"topology": {"M": 100, "K": 50, "L": 1},
             "experiment": {"schemes": ALL, "sweep": {"param": "tau_p", "values": [5, 10, 15, 20, 30, 40]}}},
    "fig6": {"topology": {"M": 120, "K": 50, "L": 1}, "radio": {"num_pilots": 10},
             "experiment": {"schemes": ["random", "greedy", "ims-es", "ims-vs"],
                            "sweep": {"param": "loc_error_m", "values": [0, 25, 50, 100, 150, 200, 300]}}},
    "fig7": {"topology": {"M": 100, "K": 40, "L": 1}, "radio": {"num_pilots": 10},
             "experiment": {"schemes": ["ims-es", "ims-vs"],
                            "sweep": {"param": "feature_source", "values": ["location", "lsf", "both"]}}},
    "table2": {"topology": {"M": 200, "K": 40}, "radio": {"num_pilots": 10},
               "experiment": {"schemes": ALL, "sweep": {"param": "L", "values": [1, 3]}}},
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cfpilot", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--out", default="results", help="output directory")
        p.add_argument("--drops", type=int, help="number of Monte-Carlo drops")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--deterministic", action="store_true",
                       help="IMS stops on a sweep budget instead of wall-clock time")
        p.add_argument("--jobs", type=int, help="worker processes")
        p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                       help="override any config field, e.g. radio.shadow_std_db=0")
        p.add_argument("--format", default="csv", help="comma separated: csv,json")
        p.add_argument("--dump-channels", metavar="DIR", help="write beta matrices per drop as CSV")

    common(sub.add_parser("run", help="run the experiment described by --config"))
    for name in PRESETS:
        common(sub.add_parser(name, help=f"preset experiment {name}"))
    sub.add_parser("validate", help="run the built-in invariant and oracle checks")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def _fail(kind: str, message: str, **extra) -> int:
    print(json.dumps({"status": "error", "kind": kind, "message": message, **extra}), file=sys.stderr)
    return 1 if kind != "usage" else 2


def _spec(args) -> harness.ExperimentSpec:
    cfg = load_config(args.config) if args.config else {}
    if args.command in PRESETS:
        base = json.loads(json.dumps(PRESETS[args.command]))
        for section, values in cfg.items():
            base.setdefault(section, {}).update(values)
        cfg = base
    elif not args.config:
        raise ConfigError("the run command needs --config")
    cfg = apply_overrides(cfg, args.overrides)
    spec = spec_from_config(cfg)
    changes = {}
    if args.drops is not None:
        changes["drops"] = args.drops
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.deterministic:
        changes["deterministic"] = True
    if args.jobs is not None:
        changes["jobs"] = args.jobs
    return replace(spec, **changes) if changes else spec


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "validate":
        from .validation import run_all

        checks = run_all()
        for check in checks:
            print(check.line())
        failed = [c.name for c in checks if not c.passed]
        if failed:
            return _fail("validation", "checks failed", failed=failed)
        return 0

    try:
        spec = _spec(args)
    except ConfigError as exc:
        return _fail("config", str(exc))
    try:
        result = harness.run_experiment(spec, dump_channels=args.dump_channels, raise_on_failure=False)
        formats = tuple(f.strip() for f in args.format.split(",") if f.strip())
        paths = harness.emit(result, args.out, formats)
    except OSError as exc:
        return _fail("io", str(exc))
    except Exception as exc:
        return _fail("runtime", f"{type(exc).__name__}: {exc}")
    for path in paths:
        print(path)
    if result.failures:
        return _fail("drops", f"{len(result.failures)} drop(s) failed", failures=result.failures)
    return 0


if __name__ == "__main__":
    sys.exit(main())
