"""Command-line front end: run, sweep, optimize, table, attack, noise.

Every subcommand reads one JSON config and writes its results atomically.
Exit codes: 0 success, 2 config error, 3 data or file error, 4 anything
else.  Summaries go to stdout, errors to stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import glob as _glob
import json
import sys
import time

from . import experiment as exp
from .errors import ConfigError, DataError


def _parse_int_list(text: str, flag: str):
    try:
        return [int(part) for part in text.split(",") if part.strip() != ""]
    except ValueError:
        raise ConfigError(f"{flag}: expected comma-separated integers, got {text!r}")


def _parse_float_list(text: str, flag: str):
    try:
        return [float(part) for part in text.split(",") if part.strip() != ""]
    except ValueError:
        raise ConfigError(f"{flag}: expected comma-separated numbers, got {text!r}")


def _stem(path: str) -> str:
    for suffix in (".json", ".csv"):
        if path.endswith(suffix):
            return path[: -len(suffix)]
    return path


def _load_config(args) -> exp.ExperimentConfig:
    config = exp.load_config(args.config)
    if getattr(args, "seeds", None):
        seeds = _parse_int_list(args.seeds, "--seeds")
        if not seeds:
            raise ConfigError("--seeds: expected at least one seed")
        if len(set(seeds)) != len(seeds):
            raise ConfigError("--seeds: seeds must be unique")
        echo = dict(config.echo)
        echo["seeds"] = seeds
        config = dataclasses.replace(config, seeds=tuple(seeds), echo=echo)
    return config


def _out_stem(args, config) -> str:
    out = args.out or config.output
    if out is None:
        raise ConfigError("config.output: required (or pass --out)")
    return _stem(out)


def cmd_run(args) -> int:
    config = _load_config(args)
    stem = _out_stem(args, config)
    record, sidecar = exp.run_experiment(config)
    exp.write_json_atomic(f"{stem}.json", record)
    header, rows = exp.per_seed_csv(record)
    exp.write_csv_atomic(f"{stem}.csv", header, rows)
    exp.write_json_atomic(f"{stem}.params.json", sidecar)
    mean = record["aggregate"]["accuracy"]["mean"]
    print(
        f"wrote {stem}.json ({len(config.seeds)} seed"
        f"{'s' if len(config.seeds) != 1 else ''}, mean accuracy {mean:.4f})"
    )
    return 0


def cmd_sweep(args) -> int:
    config = _load_config(args)
    stem = _out_stem(args, config)
    taus = _parse_float_list(args.taus, "--taus")
    if not taus:
        raise ConfigError("--taus: expected at least one threshold")
    t0 = time.perf_counter()
    rows = exp.sweep_experiment(config, taus)
    record = {
        "schema_version": exp.SCHEMA_VERSION,
        "config": config.echo,
        "seed": config.seeds[0],
        "rows": rows,
        "wall_time": time.perf_counter() - t0,
    }
    exp.write_json_atomic(f"{stem}.json", record)
    exp.write_csv_atomic(
        f"{stem}.csv",
        ["tau", "accuracy", "entropy"],
        [[r["tau"], r["accuracy"], r["entropy"]] for r in rows],
    )
    best = max(rows, key=lambda r: r["accuracy"])
    print(
        f"wrote {stem}.csv ({len(rows)} thresholds, "
        f"best accuracy {best['accuracy']:.4f} at tau={best['tau']})"
    )
    return 0


def cmd_optimize(args) -> int:
    config = _load_config(args)
    stem = _out_stem(args, config)
    record, result = exp.optimize_experiment(
        config, trace_path=f"{stem}.trace.jsonl"
    )
    exp.write_json_atomic(f"{stem}.json", record)
    print(
        f"wrote {stem}.json (tau*={result.tau_star:.6g}, "
        f"accuracy {result.best_accuracy:.4f}, "
        f"{len(result.evaluations)} evaluations)"
    )
    return 0


def cmd_table(args) -> int:
    paths = []
    for pattern in args.files:
        matches = sorted(_glob.glob(pattern))
        if matches:
            paths.extend(matches)
        else:
            paths.append(pattern)  # literal path; a miss errors on open
    records = []
    for path in paths:
        with open(path, "r", encoding="utf-8") as fh:
            try:
                records.append(json.load(fh))
            except json.JSONDecodeError as exc:
                raise DataError(f"{path} is not valid JSON ({exc})")
    (header, rows), text = exp.table_from_records(records, entropy=args.entropy)
    if args.out:
        exp.write_csv_atomic(args.out, header, rows)
    print(text)
    return 0


def cmd_attack(args) -> int:
    config = _load_config(args)
    stem = _out_stem(args, config)
    record = exp.attack_experiment(config)
    exp.write_json_atomic(f"{stem}.json", record)
    header, rows = exp.per_seed_csv(record)
    exp.write_csv_atomic(f"{stem}.csv", header, rows)
    agg = record["aggregate"]
    print(
        f"wrote {stem}.json (clean {agg['clean_accuracy']['mean']:.4f}, "
        f"attacked {agg['attack_accuracy']['mean']:.4f})"
    )
    return 0


def cmd_noise(args) -> int:
    config = _load_config(args)
    stem = _out_stem(args, config)
    record = exp.noise_experiment(config)
    exp.write_json_atomic(f"{stem}.json", record)
    header, rows = exp.per_seed_csv(record)
    exp.write_csv_atomic(f"{stem}.csv", header, rows)
    print(
        f"wrote {stem}.json (clean "
        f"{record['aggregate']['clean_accuracy']['mean']:.4f}, "
        f"{len(config.noise.ps)} noise levels)"
    )
    return 0


def _add_config_out(parser, out_required=False):
    parser.add_argument("--config", required=True, help="JSON config path")
    parser.add_argument(
        "--out",
        required=out_required,
        help="output path (overrides the config's output field)",
    )
    parser.add_argument(
        "--seeds", help="comma-separated seed override, e.g. 0,1,2"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qprune",
        description="quantum encoder experiments: train, prune, perturb",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="train and evaluate over all seeds")
    _add_config_out(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="evaluate a list of thresholds")
    _add_config_out(p)
    p.add_argument(
        "--taus", required=True, help="comma-separated thresholds, e.g. 0,0.1,0.2"
    )
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("optimize", help="search for the best threshold")
    _add_config_out(p)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("table", help="cross-tabulate result files")
    p.add_argument("files", nargs="+", help="result JSON files or globs")
    p.add_argument("--out", help="also write the table as CSV here")
    p.add_argument(
        "--entropy",
        action="store_true",
        help="tabulate mean entanglement entropy instead of accuracy",
    )
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("attack", help="FGSM-evaluate saved models")
    _add_config_out(p)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("noise", help="noise-sweep saved models")
    _add_config_out(p)
    p.set_defaults(func=cmd_noise)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
