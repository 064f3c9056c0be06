"""Command-line interface.

    mergelab run        full pipeline over a data directory
    mergelab ingest     parse + validate recordings, write ingest_report.csv
    mergelab extract    detect merging events (events.csv, rejections.csv)
    mergelab classify   neighbor matching + scenario labels (scenarios.csv)
    mergelab indicators microscopic indicators (indicators.csv)
    mergelab macro      generalized flow/density/speed (macro.csv)
    mergelab stats      summaries, divergences, appendix-style tables
    mergelab report     per-figure CSV bundles (figures_data/)
    mergelab synth      generate a synthetic corpus with ground truth

Exit codes: 0 success, 2 configuration error, 3 data error, 4 internal.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import yaml

from .errors import (ConfigError, DomainError, IntegrityError, MapParseError,
                     MergelabError, SchemaError)
from .pipeline import RunConfig, run_pipeline, run_stage
from .scenarios import DEFAULT_THRESHOLDS

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_INTERNAL = 4

_STAGES = ("ingest", "extract", "classify", "indicators", "macro",
           "stats", "report")


def _add_run_arguments(parser: argparse.ArgumentParser):
    parser.add_argument("--data-dir", type=Path, help="directory with "
                        "XX_{recordingMeta,tracksMeta,tracks}.csv triples")
    parser.add_argument("--maps-dir", type=Path,
                        help="directory with <location>_*.osm lanelet2 maps")
    parser.add_argument("--layout", type=Path, help="merging-area layout file "
                        "(defaults to the bundled one)")
    parser.add_argument("--locations", type=int, nargs="*",
                        help="locations to process (default: all in the data)")
    parser.add_argument("--distance-threshold", type=float, action="append",
                        dest="distance_thresholds", metavar="METERS",
                        help="neighbor distance threshold; repeatable "
                        "(default: 100 150 200)")
    parser.add_argument("--outlier-multiplier", type=float, default=3.0,
                        help="IQR fence multiplier (default 3)")
    parser.add_argument("--timestep", type=float, default=None,
                        help="override the recording timestep in seconds")
    parser.add_argument("--out", type=Path, required=True,
                        help="output directory")
    parser.add_argument("--jobs", type=int, default=1,
                        help="recordings processed in parallel")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--geometric-neighbors", action="store_true",
                        help="ignore the dataset neighbor-id columns and "
                        "match purely on map geometry")
    parser.add_argument("--config", type=Path, default=None,
                        help="YAML/JSON file with the same keys; command-line "
                        "flags win")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mergelab",
        description="HD-map-anchored merging-behavior analysis")
    sub = parser.add_subparsers(dest="command", required=True)

    for name in ("run", *_STAGES):
        p = sub.add_parser(name)
        _add_run_arguments(p)

    synth = sub.add_parser("synth", help="generate a synthetic corpus")
    synth.add_argument("--out", type=Path, required=True)
    synth.add_argument("--events", type=int, default=200)
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--events-per-recording", type=int, default=50)
    synth.add_argument("--threshold-sensitive", action="store_true",
                       help="place some neighbors in the 110-185 m bands so "
                       "labels respond to the threshold sweep")
    return parser


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    file_values: dict = {}
    if args.config is not None:
        text = Path(args.config).read_text(encoding="utf-8")
        try:
            file_values = (json.loads(text) if args.config.suffix == ".json"
                           else yaml.safe_load(text)) or {}
        except (json.JSONDecodeError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot parse config file {args.config}: {exc}")
        if not isinstance(file_values, dict):
            raise ConfigError(f"config file {args.config} must hold a mapping")

    def pick(flag, key, default=None):
        if flag is not None:
            return flag
        return file_values.get(key, default)

    data_dir = pick(args.data_dir, "data_dir")
    if data_dir is None:
        raise ConfigError("--data-dir (or data_dir in --config) is required")
    thresholds = pick(args.distance_thresholds, "distance_thresholds",
                      list(DEFAULT_THRESHOLDS))
    return RunConfig(
        data_dir=Path(data_dir),
        out_dir=Path(args.out),
        layout_path=pick(args.layout, "layout_path"),
        maps_dir=pick(args.maps_dir, "maps_dir"),
        locations=pick(args.locations or None, "locations"),
        distance_thresholds=tuple(thresholds),
        outlier_multiplier=args.outlier_multiplier,
        timestep_override=pick(args.timestep, "timestep_override"),
        jobs=args.jobs,
        seed=pick(args.seed, "seed"),
        use_dataset_neighbors=not args.geometric_neighbors,
    )


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    parser = _build_parser()
    args = parser.parse_args(argv)

    try:
        if args.command == "synth":
            from .synth import build_corpus
            out = build_corpus(args.out, n_events=args.events, seed=args.seed,
                               events_per_recording=args.events_per_recording,
                               threshold_sensitive=args.threshold_sensitive)
            print(f"synthetic corpus written to {out}")
            return EXIT_OK

        config = _config_from_args(args)
        if args.command == "run":
            out = run_pipeline(config)
        else:
            out = run_stage(config, args.command)
        print(f"{args.command}: outputs in {out}")
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SchemaError, IntegrityError, DomainError, MapParseError) as exc:
        print(f"data error [{args.command}]: {exc}", file=sys.stderr)
        return EXIT_DATA
    except MergelabError as exc:
        print(f"error [{args.command}]: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        logger.exception("internal error in stage %s", args.command)
        print(f"internal error [{args.command}]: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
