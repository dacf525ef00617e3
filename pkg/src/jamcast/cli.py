"""``jamcast`` command line: synth, experiment, collect, replay.

Exit codes: 0 success, 2 config/usage, 3 data, 4 numeric failure.
Every command writes a JSON manifest next to its outputs; ``jamcast replay
MANIFEST`` re-runs the recorded command line.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import logging
import sys
import time
from datetime import date, datetime, timezone
from pathlib import Path

from . import __version__, charts, evaluation, ingestion, pipeline
from .errors import (
    ConvergenceError,
    InsufficientDataError,
    JamcastError,
    ParseError,
    SearchFailedError,
    ValidationError,
)
from .evaluation import AVERAGE_ROW
from .svr import SvrHyperparams, save_model

log = logging.getLogger("jamcast")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


class UsageError(Exception):
    pass


class DataFileError(Exception):
    pass


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(path, command, argv, seed, config, inputs=(), outputs=()) -> None:
    manifest = {
        "command": command,
        "argv": list(argv),
        "seed": seed,
        "config": config,
        "inputs": {str(p): _sha256(p) for p in inputs},
        "outputs": sorted(str(p) for p in outputs),
        "tool_version": __version__,
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _duration(text: str) -> int:
    units = {"s": 1, "m": 60, "h": 3600, "d": 86400}
    try:
        if text[-1:] in units:
            return int(float(text[:-1]) * units[text[-1]])
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid duration {text!r} (e.g. 900, 15m, 2h)") from None


def _timestamp(text: str) -> int:
    if text.isdigit():
        return int(text)
    try:
        dt = datetime.fromisoformat(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid timestamp {text!r}") from None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def _iso_date(text: str) -> str:
    try:
        return date.fromisoformat(text).isoformat()
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid ISO date {text!r}") from None


# -- commands --------------------------------------------------------------------


def cmd_synth(args, argv) -> int:
    config = ingestion.load_synth_config(args.config) if args.config else ingestion.SynthConfig()
    if args.seed is not None:
        config = dataclasses.replace(config, seed=args.seed)
    rows = ingestion.synth_generate(config)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    ingestion.save_csv(rows, out)
    write_manifest(
        out.with_name(out.name + ".manifest.json"),
        "synth",
        argv,
        config.seed,
        dataclasses.asdict(config),
        inputs=[args.config] if args.config else [],
        outputs=[out],
    )
    print(f"wrote {len(rows)} rows to {out}")
    return EXIT_OK


def _resolve_split(args) -> pipeline.WeekSplit:
    given = [args.train_start, args.train_end, args.test_start, args.test_end]
    if all(g is None for g in given):
        return pipeline.DEFAULT_SPLIT
    if args.train_start and not any(given[1:]):
        return pipeline.WeekSplit.consecutive(args.train_start)
    if any(g is None for g in given):
        raise UsageError("give either --train-start alone or all four split dates")
    return pipeline.WeekSplit.from_dates(*given)


def _write_road_forecasts(path, result: pipeline.RoadResult) -> None:
    amwr = {t: p for t, p, _ in result.amwr_forecast.points}
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp", "actual", "proposed", "amwr"])
        for t, p, a in result.forecast.points:
            w.writerow([t, repr(a), repr(p), repr(amwr[t]) if t in amwr else ""])


def cmd_experiment(args, argv) -> int:
    split = _resolve_split(args)
    try:
        dataset = ingestion.load_csv(args.data)
    except ParseError as exc:
        raise DataFileError(f"{args.data}: {exc}") from None
    if args.roads:
        roads = sorted(set(args.roads.split(",")))
    else:
        roads = pipeline.select_roads(dataset, args.random, args.seed)
    grid = pipeline.load_grid(args.grid) if args.grid else None
    hp = SvrHyperparams(
        C=args.C, epsilon=args.epsilon, gamma=args.gamma, tol=args.tol, max_passes=args.max_passes
    )

    result = pipeline.run_experiment(dataset, split, roads, hp=hp, grid=grid, seed=args.seed)

    out = Path(args.out)
    for sub in ("models", "forecasts", "plots"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    outputs = []
    for r in result.roads:
        model_path = out / "models" / f"{r.road_id}.svr"
        save_model(r.model, model_path)
        fc_path = out / "forecasts" / f"{r.road_id}.csv"
        _write_road_forecasts(fc_path, r)
        plot_path = out / "plots" / f"{r.road_id}.svg"
        amwr = dict((t, p) for t, p, _ in r.amwr_forecast.points)
        svg = charts.line_chart(
            r.forecast.timestamps,
            {
                "actual": r.forecast.actual,
                "proposed": r.forecast.predicted,
                "amwr": [amwr[t] for t in r.forecast.timestamps],
            },
            f"{r.road_id} (RMSE={result.proposed.per_road[r.road_id]:.3f})",
        )
        plot_path.write_text(svg, encoding="utf-8")
        outputs += [model_path, fc_path, plot_path]

    report_path = out / "report.csv"
    evaluation.write_report_csv([result.proposed, result.baseline], report_path)
    rows = result.comparison()
    comparison_path = out / "comparison.csv"
    evaluation.write_comparison_csv(rows, comparison_path)
    bars_path = out / "plots" / "comparison.svg"
    road_rows = [row for row in rows if row[0] != AVERAGE_ROW]
    bars_path.write_text(
        charts.grouped_bar_chart(
            [row[0] for row in road_rows],
            {"proposed": [row[1] for row in road_rows], "amwr": [row[2] for row in road_rows]},
            "Comparison between proposed approach and AMWR",
        ),
        encoding="utf-8",
    )
    outputs += [report_path, comparison_path, bars_path]

    config = {
        "split": dataclasses.asdict(split),
        "roads": roads,
        "hyperparams": {r.road_id: dataclasses.asdict(r.hyperparams) for r in result.roads},
        "grid": str(args.grid) if args.grid else None,
    }
    write_manifest(
        out / "manifest.json", "experiment", argv, args.seed, config,
        inputs=[args.data] + ([args.grid] if args.grid else []), outputs=outputs,
    )
    for road, p, b in rows:
        print(f"{road:>12}  proposed {p:.3f}  amwr {b:.3f}")
    return EXIT_OK


def cmd_collect(args, argv) -> int:
    config = ingestion.load_collect_config(args.config) if args.config else ingestion.CollectConfig()
    interval = args.interval or config.poll_interval_seconds
    if args.mock_provider:
        traffic = ingestion.MockTrafficProvider(ingestion.SynthConfig(seed=args.seed))
        weather = ingestion.MockWeatherProvider(seed=args.seed)
        start = args.start if args.start is not None else ingestion.SynthConfig().start_timestamp
        wait_until = None
    else:
        if not (config.traffic_endpoint and config.weather_endpoint):
            raise UsageError("live collection needs traffic_endpoint and weather_endpoint in the config")
        traffic = ingestion.HttpProvider(config.traffic_endpoint, config.api_key_env)
        weather = ingestion.HttpProvider(config.weather_endpoint, config.api_key_env)
        now = int(time.time())
        start = args.start if args.start is not None else now - now % interval + interval

        def wait_until(t):
            delay = t - time.time()
            if delay > 0:
                time.sleep(delay)

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    stats = ingestion.collect(traffic, weather, config.bbox, start, args.duration, interval, out, wait_until)
    write_manifest(
        out.with_name(out.name + ".manifest.json"),
        "collect",
        argv,
        args.seed,
        {
            "bbox": [list(config.bbox.corner_a), list(config.bbox.corner_b)],
            "poll_interval_seconds": interval,
            "start": start,
            "duration": args.duration,
            "mock_provider": bool(args.mock_provider),
        },
        inputs=[args.config] if args.config else [],
        outputs=[out],
    )
    print(f"{stats.cycles} cycles, {stats.skipped} skipped, {stats.rows} rows appended to {out}")
    if stats.cycles and stats.skipped == stats.cycles:
        log.error("every poll cycle failed; provider unreachable")
        return EXIT_DATA
    return EXIT_OK


def cmd_replay(args, argv) -> int:
    try:
        with open(args.manifest, encoding="utf-8") as fh:
            recorded = json.load(fh)["argv"]
    except (OSError, ValueError, KeyError) as exc:
        raise ParseError(f"cannot read manifest {args.manifest}: {exc}") from None
    return main(recorded)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jamcast", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"jamcast {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--config", help="TOML file with SynthConfig fields")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("experiment", help="train, forecast, evaluate and compare against AMWR")
    p.add_argument("--data", required=True, help="dataset CSV")
    p.add_argument("--out", required=True, help="output directory")
    for flag in ("--train-start", "--train-end", "--test-start", "--test-end"):
        p.add_argument(flag, type=_iso_date)
    roads = p.add_mutually_exclusive_group()
    roads.add_argument("--roads", help="comma-separated road ids")
    roads.add_argument("--random", type=int, default=4, help="pick N roads at random (default 4)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid", help="TOML hyperparameter grid")
    p.add_argument("--C", type=float, default=10.0)
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--max-passes", type=int, default=1000)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("collect", help="poll providers on a fixed cadence")
    p.add_argument("--config", help="TOML collection config")
    p.add_argument("--duration", type=_duration, required=True, help="e.g. 900, 15m, 2h")
    p.add_argument("--out", required=True)
    p.add_argument("--interval", type=int, help="override poll interval (seconds)")
    p.add_argument("--start", type=_timestamp, help="first slot (epoch seconds or ISO time)")
    p.add_argument("--mock-provider", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_collect)

    p = sub.add_parser("replay", help="re-run a command from its manifest")
    p.add_argument("manifest")
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args, argv)
    except (UsageError, ParseError, ValidationError) as exc:
        print(f"jamcast: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConvergenceError, SearchFailedError) as exc:
        road = getattr(exc, "road_id", None)
        where = f" on road {road}" if road else ""
        print(f"jamcast: numeric failure{where}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InsufficientDataError, DataFileError, JamcastError, OSError) as exc:
        print(f"jamcast: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
