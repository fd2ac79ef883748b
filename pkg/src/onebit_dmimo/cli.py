"""Command-line entry point: run one experiment sweep from a YAML config."""

from __future__ import annotations

import argparse
import dataclasses
import sys

import yaml

from .params import ConfigError
from . import experiments


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="onebit-dmimo",
        description=(
            "Uplink EVM sweeps for distributed massive MIMO with a one-bit "
            "dithered RF fronthaul; writes one CSV per run."
        ),
    )
    p.add_argument("--config", required=True, help="YAML config file (sweep spec)")
    p.add_argument(
        "--experiment",
        choices=("dither", "fronthaul", "availability", "pilots"),
        help="experiment kind; must match the config if both are given",
    )
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--trials", type=int, help="override the config trial count")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker count")
    return p


def load_spec(path: str, args) -> experiments.SweepSpec:
    with open(path) as fh:
        raw = yaml.safe_load(fh)
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    spec = experiments.spec_from_dict(raw)
    if args.experiment is not None and args.experiment != spec.kind:
        raise ConfigError(
            f"--experiment {args.experiment} conflicts with config kind {spec.kind}"
        )
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.trials is not None:
        updates["n_trials"] = args.trials
        if spec.kind == "availability":
            updates["n_drops"] = args.trials
    if updates:
        spec = dataclasses.replace(spec, **updates)
    return spec


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = load_spec(args.config, args)
    except (OSError, yaml.YAMLError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        csv_text = experiments.run_to_csv(spec, jobs=args.jobs)
    except KeyboardInterrupt:
        print("interrupted; no complete sweep to write", file=sys.stderr)
        return 130
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    with open(args.out, "w") as fh:
        fh.write(csv_text)
    print(f"wrote {args.out} ({csv_text.count(chr(10)) - 2} rows)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
