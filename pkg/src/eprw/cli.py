"""Command-line entry point: ``eprw <scenario> [--config FILE] [--key value ...]``."""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from . import scenarios
from .config import SCENARIOS, ConfigError, ExperimentConfig, load_config
from .protocol import ConversionError

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2

_SUMMARY = {
    "hom_scan": ("visibility",),
    "epr_qst": ("12", "34"),
    "w_conversion": ("success_probability", "reconstructed", "monte_carlo"),
    "error_budget": ("rungs",),
    "param_sweep": ("max_p_H", "argmax_p_H", "nu_half_slice"),
}


def _override_flags(parser: argparse.ArgumentParser) -> None:
    for f in dataclasses.fields(ExperimentConfig):
        if f.name == "scenario":
            continue
        kind = int if f.name == "seed" else type(getattr(ExperimentConfig(), f.name))
        parser.add_argument(f"--{f.name.replace('_', '-')}", dest=f.name, type=kind,
                            default=None, help=f"override config key {f.name}")


def _brief(value):
    # density matrices stay in the report file
    if isinstance(value, dict):
        return {k: _brief(v) for k, v in value.items()
                if not (k.startswith("rho") or k == "marginals")}
    if isinstance(value, list):
        return [_brief(v) for v in value]
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eprw", description=__doc__)
    sub = parser.add_subparsers(dest="scenario", required=True)
    for name in SCENARIOS:
        aliases = [name.replace("_", "-")] if "_" in name else []
        p = sub.add_parser(name, aliases=aliases, help=scenarios.RUNNERS[name].__doc__)
        p.add_argument("--config", help="flat key = value config file")
        p.add_argument("--optimal", action="store_true",
                       help="use the optimal beam-splitter parameters")
        p.add_argument("--quiet", action="store_true", help="do not print the summary")
        _override_flags(p)
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    scenario = args.scenario.replace("-", "_")
    overrides = {f.name: getattr(args, f.name) for f in dataclasses.fields(ExperimentConfig)
                 if f.name != "scenario"}
    config = load_config(args.config, **overrides)
    config.scenario = scenario
    if args.optimal:
        if args.mu is not None or args.nu is not None:
            raise ConfigError("--optimal conflicts with --mu/--nu")
        config.use_optimal_params()
    return config.validate()


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = config_from_args(args)
    except (ConfigError, OSError, TypeError) as exc:
        print(f"eprw: invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        report = scenarios.run(config)
    except (ConversionError, RuntimeError, ValueError, FloatingPointError, OSError) as exc:
        print(f"eprw: {config.scenario} failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    if not args.quiet:
        keys = _SUMMARY[config.scenario]
        summary = {k: _brief(report["results"][k]) for k in keys if k in report["results"]}
        print(json.dumps(summary, indent=2, sort_keys=True, default=str))
        print(f"report written to {config.output_dir}/report.json")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
