"""Command-line runner: gen-data, identify, filter, bench."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import filtering, identify, lpcore, pipeline, simharness

ERROR_CATEGORIES = [
    (pipeline.ConfigError, "config"),
    (filtering.EmptyIntersection, "empty-intersection"),
    (lpcore.UnboundedDirection, "unbounded-fps"),
    (lpcore.InfeasiblePolytope, "infeasible"),
    (lpcore.SolverFailure, "solver"),
    (FileNotFoundError, "io"),
    (ValueError, "invalid-input"),
]


def _add_config_args(sub):
    sub.add_argument("--config", type=str, default=None,
                     help="flat key=value config file")
    for f in pipeline.RunConfig.__dataclass_fields__.values():
        sub.add_argument(f"--{f.name.replace('_', '-')}", dest=f.name,
                         default=None,
                         help=f"override config key {f.name}")


def _build_config(args) -> pipeline.RunConfig:
    if args.config:
        cfg = pipeline.parse_config_file(args.config)
    else:
        cfg = pipeline.RunConfig()
    overrides = {}
    for name in pipeline.RunConfig.__dataclass_fields__:
        val = getattr(args, name, None)
        if val is not None:
            overrides[name] = pipeline._coerce(name, val)
    if overrides:
        from dataclasses import replace
        cfg = replace(cfg, **overrides)
    return cfg


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="smfilter",
        description="Set Membership multistep-predictor filtering toolkit")
    subs = parser.add_subparsers(dest="verb", required=True)
    for verb, desc in (
        ("gen-data", "generate benchmark experiment data as CSV"),
        ("identify", "run offline identification and persist the bundle"),
        ("filter", "run online filtering against a saved bundle"),
        ("bench", "end-to-end: generate, identify, filter, report"),
    ):
        sub = subs.add_parser(verb, help=desc)
        _add_config_args(sub)
        if verb == "filter":
            sub.add_argument("--bundle", type=str, required=True)
    args = parser.parse_args(argv)

    try:
        cfg = _build_config(args)
        outdir = Path(cfg.outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        log = print

        if args.verb == "gen-data":
            data = pipeline.generate_data(cfg)
            path = outdir / "experiment.csv"
            simharness.save_csv(data, path,
                                header_comment=f"config: {cfg.config_hash()}")
            log(f"wrote {path} ({len(data)} samples)")
        elif args.verb == "identify":
            data = pipeline.generate_data(cfg)
            bundle = pipeline.run_identification(cfg, data, log=log)
            path = outdir / "bundle.json"
            identify.save_bundle(bundle, path)
            log(f"wrote {path}")
        elif args.verb == "filter":
            bundle = identify.load_bundle(args.bundle)
            data = pipeline.generate_data(cfg)
            pipeline.run_filtering(cfg, bundle, data, log=log)
            log(f"wrote metrics to {outdir / 'metrics.json'}")
        elif args.verb == "bench":
            data = pipeline.generate_data(cfg)
            bundle = pipeline.run_identification(cfg, data, log=log)
            identify.save_bundle(bundle, outdir / "bundle.json")
            pipeline.run_filtering(cfg, bundle, data, log=log)
            log(f"wrote outputs to {outdir}")
        return 0
    except Exception as exc:  # noqa: BLE001 - map to exit categories
        for etype, category in ERROR_CATEGORIES:
            if isinstance(exc, etype):
                print(f"error [{category}]: {exc}", file=sys.stderr)
                return 2
        raise


if __name__ == "__main__":
    sys.exit(main())
