"""Command-line runner: declarative config in, deterministic artifacts out.

Exit codes: 0 success, 2 validation error, 3 runtime failure. CSV bodies are
byte-identical across reruns of the same config; timestamps and other
machine-dependent facts are quarantined in report.json's metadata block.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import tempfile
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from ._backend import backend_name
from .config import config_hash, load_config, validate_config
from .core import ConfigError, EngineError, InputError
from .experiments import run_seeds
from .topology import PointCloud, build_rips, persistence_z2

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3


def _format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        f = float(v)
        if math.isnan(f):
            return "nan"
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return repr(f)
    return str(v)


def _atomic_write(path: Path, data: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: Path, header, rows):
    lines = [",".join(header)]
    lines.extend(",".join(_format_value(v) for v in row) for row in rows)
    _atomic_write(path, "\n".join(lines) + "\n")


def _aggregate(per_seed: dict) -> dict:
    names = sorted({k for metrics in per_seed.values() for k in metrics})
    out = {}
    for name in names:
        vals = []
        for metrics in per_seed.values():
            v = metrics.get(name)
            if isinstance(v, bool):
                vals.append(float(v))
            elif isinstance(v, (int, float, np.integer, np.floating)):
                vals.append(float(v))
        if vals:
            q25, q50, q75 = np.percentile(vals, [25, 50, 75])
            out[name] = {"median": float(q50), "iqr": float(q75 - q25)}
    return out


def _json_safe(obj):
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        f = float(obj)
        return "nan" if math.isnan(f) else f
    if isinstance(obj, float) and math.isnan(obj):
        return "nan"
    return obj


def resolve_output_dir(config: dict, config_path, override=None) -> Path:
    if override:
        return Path(override)
    if "output_dir" in config:
        return Path(config["output_dir"])
    root = os.environ.get("MEMLOOP_OUTPUT_ROOT", "memloop_out")
    return Path(root) / Path(config_path).stem


def run_config(config: dict, out_dir: Path) -> dict:
    started = time.perf_counter()
    per_seed, tables = run_seeds(config)
    wall = time.perf_counter() - started
    for name, (header, rows) in sorted(tables.items()):
        write_csv(out_dir / f"{name}.csv", header, rows)
    report = {
        "version": __version__,
        "kind": config["kind"],
        "config_hash": config_hash(config),
        "config": config,
        "per_seed": _json_safe({str(s): m for s, m in per_seed.items()}),
        "aggregate": _json_safe(_aggregate(per_seed)),
        "metadata": {
            "wall_clock_s": wall,
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "backend": backend_name(),
        },
    }
    _atomic_write(out_dir / "report.json", json.dumps(report, indent=2, sort_keys=True) + "\n")
    return report


def _cmd_run(args) -> int:
    try:
        config = load_config(args.config)
    except FileNotFoundError:
        print(f"error: config file not found: {args.config}", file=sys.stderr)
        return EXIT_VALIDATION
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    out_dir = resolve_output_dir(config, args.config, args.output_dir)
    try:
        report = run_config(config, out_dir)
    except EngineError as exc:
        print(f"runtime invariant violated ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # pragma: no cover - defensive
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"wrote {out_dir}/report.json ({report['kind']}, "
          f"{len(config['seeds'])} seed(s), {report['metadata']['wall_clock_s']:.2f}s)")
    return EXIT_OK


def _cmd_validate(args) -> int:
    try:
        load_config(args.config)
    except FileNotFoundError:
        print(f"error: config file not found: {args.config}", file=sys.stderr)
        return EXIT_VALIDATION
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    print("ok")
    return EXIT_OK


def _read_cloud_csv(path) -> np.ndarray:
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                values = [float(c) for c in row]
            except ValueError:
                if lineno == 1:  # tolerate a header row
                    continue
                raise InputError(f"line {lineno}: non-numeric cell")
            rows.append(values)
    if not rows:
        raise InputError("cloud file contains no points")
    width = len(rows[0])
    for i, r in enumerate(rows, start=1):
        if len(r) != width:
            raise InputError(f"ragged rows: row {i} has {len(r)} cells, expected {width}")
    return np.asarray(rows, dtype=np.float64)


def _cmd_barcode(args) -> int:
    try:
        pts = _read_cloud_csv(args.cloud)
        barcode = persistence_z2(build_rips(PointCloud(pts), args.max_filtration))
    except FileNotFoundError:
        print(f"error: cloud file not found: {args.cloud}", file=sys.stderr)
        return EXIT_VALIDATION
    except (InputError, ConfigError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except EngineError as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    payload = {
        "points": len(pts),
        "max_filtration": args.max_filtration,
        "intervals": {
            str(dim): [[b, "inf" if math.isinf(d) else d] for b, d in barcode.intervals[dim]]
            for dim in (0, 1)
        },
        "h1_representatives": [loop.tolist() for loop in barcode.representatives],
    }
    _atomic_write(Path(args.out), json.dumps(payload, indent=2, sort_keys=True) + "\n")
    print(f"wrote {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="memloop",
        description="Memory-amortized inference experiments: run, validate, barcode export.",
    )
    parser.add_argument("--version", action="version", version=f"memloop {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config", help="path to a JSON experiment config")
    p_run.add_argument("--output-dir", help="override the output directory")
    p_run.set_defaults(func=_cmd_run)

    p_val = sub.add_parser("validate", help="schema-check a config without running it")
    p_val.add_argument("config", help="path to a JSON experiment config")
    p_val.set_defaults(func=_cmd_validate)

    p_bar = sub.add_parser("barcode", help="persistence barcode of a point-cloud CSV")
    p_bar.add_argument("cloud", help="CSV of coordinates, one point per row")
    p_bar.add_argument("--max-filtration", type=float, required=True)
    p_bar.add_argument("--out", required=True, help="output JSON path")
    p_bar.set_defaults(func=_cmd_barcode)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
