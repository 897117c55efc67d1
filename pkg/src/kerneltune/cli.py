"""Command-line entry point.

Output layout under ``--out`` (default from the config, else ``out``)::

    configs.csv                    sample
    dataset_<device>.csv           collect
    model.json, train_report.json,
    loss.csv, scatter_train.csv,
    scatter_test.csv               train
    report.json, topk.csv          tune (plus the train files with --data)

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
The log level comes from ``KERNELTUNE_LOG_LEVEL`` (default WARNING).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import selfcheck
from .config import ConfigError, RunConfig, load_config
from .harness import DatasetError, MeasurementError, collect, load_dataset, stderr_progress
from .space import SpaceError, sample_random
from .surrogate import ModelFileError, TrainingDiverged, load_model, save_model
from .tuner import (
    REPORT_VERSION,
    TrainResult,
    TuningError,
    train_combined,
    train_single,
    tune,
    write_training_artifacts,
)
from .workload import WorkloadError

log = logging.getLogger("kerneltune")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2
LOG_ENV = "KERNELTUNE_LOG_LEVEL"


class UsageError(Exception):
    pass


def _globals_parser(suppress: bool) -> argparse.ArgumentParser:
    # the same flags are accepted before and after the subcommand name
    d = argparse.SUPPRESS if suppress else None
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", default=d, help="YAML run configuration")
    p.add_argument("--seed", type=int, default=d, help="override the config seed")
    p.add_argument("--out", default=d, help="output directory")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _globals_parser(suppress=True)
    parser = argparse.ArgumentParser(prog="kerneltune", parents=[_globals_parser(suppress=False)],
                                     description="Surrogate-guided launch-parameter tuning.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", parents=[common], help="write n sampled configurations")
    p.add_argument("-n", type=int, required=True)

    p = sub.add_parser("collect", parents=[common], help="measure sampled configurations")
    p.add_argument("-n", type=int, help="number of rows (default: collect.n)")
    p.add_argument("--device", help="device name from the config table")
    p.add_argument("--repeats", type=int, help="runs per configuration (default: collect.repeats)")
    p.add_argument("--output", help="dataset path (default: <out>/dataset_<device>.csv)")
    p.add_argument("--resume", action="store_true", help="continue a partial dataset file")
    p.add_argument("--quiet", action="store_true", help="no progress lines")

    p = sub.add_parser("train", parents=[common],
                       help="train a surrogate; one dataset = single mode, several = combined")
    p.add_argument("datasets", nargs="+")

    p = sub.add_parser("tune", parents=[common], help="search, re-measure the top k, report")
    p.add_argument("--model", help="trained model JSON")
    p.add_argument("--data", nargs="+", help="dataset(s) to train on first")
    p.add_argument("--device", help="device to tune for")
    p.add_argument("--topk", type=int, help="number of configurations to re-measure")
    p.add_argument("--candidates", type=int, help="random candidates for large spaces")
    p.add_argument("--repeats", type=int)

    p = sub.add_parser("report", parents=[common], help="print a summary of <out>/report.json")
    p.add_argument("path", nargs="?", help="report.json (default: <out>/report.json)")

    sub.add_parser("selfcheck", parents=[common], help="run the built-in numerical checks")
    return parser


def _positive(value: Optional[int], flag: str) -> Optional[int]:
    if value is not None and value < 1:
        raise UsageError(f"{flag} must be at least 1")
    return value


def _default_device(cfg: RunConfig, name: Optional[str]):
    if name is not None:
        return cfg.device(name)
    return cfg.devices["P100"] if "P100" in cfg.devices else next(iter(cfg.devices.values()))


def cmd_sample(cfg: RunConfig, args, out: Path) -> int:
    n = _positive(args.n, "-n")
    configs = sample_random(cfg.space, n, cfg.seed)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "configs.csv"
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(cfg.space.names)
        w.writerows(configs)
    print(path)
    return EXIT_OK


def cmd_collect(cfg: RunConfig, args, out: Path) -> int:
    device = _default_device(cfg, args.device)
    n = _positive(args.n, "-n") or cfg.collect.n
    repeats = _positive(args.repeats, "--repeats") or cfg.collect.repeats
    path = Path(args.output) if args.output else out / f"dataset_{device.name}.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    ds = collect(cfg.space, n, cfg.make_backend(), device, repeats, cfg.seed, path,
                 resume=args.resume, progress=None if args.quiet else stderr_progress)
    if cfg.backend_kind == "synthetic" and cfg.cost_model.noise_sigma == 0:
        t = ds.targets()
        log.info("runtimes span [%.4f, %.4f] s", t.min(), t.max())
    print(path)
    return EXIT_OK


def _train(cfg: RunConfig, paths: Sequence[str]) -> TrainResult:
    datasets = [load_dataset(p, expected_params=cfg.space.names) for p in paths]
    if len(datasets) == 1:
        return train_single(datasets[0], cfg.train)
    by_device = {}
    for path, ds in zip(paths, datasets):
        gflops = ds.devices()
        if len(gflops) != 1:
            raise UsageError(f"{path}: combined training needs a single-device dataset "
                             "with a device_gflops column")
        name = cfg.device_by_gflops(gflops[0]).name
        if name in by_device:
            raise UsageError(f"{path}: a second dataset for device {name}")
        by_device[name] = ds
    return train_combined(by_device, cfg.devices, cfg.train)


def _train_summary(result: TrainResult) -> dict:
    r = result.report
    return {
        "report_version": REPORT_VERSION,
        "mode": "combined" if result.surrogate.device_feature else "single",
        "r2_train": result.surrogate.r2_train,
        "r2_test": result.surrogate.r2_test,
        "per_device_r2_test": result.per_device_r2,
        "epochs_run": r.epochs_run,
        "final_lr": r.final_lr,
        "stop_reason": r.stop_reason.value,
        "n_train": int(len(result.train.actual)),
        "n_test": int(len(result.test.actual)),
    }


def cmd_train(cfg: RunConfig, args, out: Path) -> int:
    result = _train(cfg, args.datasets)
    out.mkdir(parents=True, exist_ok=True)
    save_model(out / "model.json", result.surrogate)
    write_training_artifacts(out, result)
    summary = _train_summary(result)
    (out / "train_report.json").write_text(json.dumps(summary, indent=2))
    print(f"{summary['mode']} training: r2_train={summary['r2_train']:.6f} "
          f"r2_test={summary['r2_test']:.6f} epochs={summary['epochs_run']}")
    for name, v in result.per_device_r2.items():
        print(f"  {name}: r2_test={v:.6f}")
    print(out / "model.json")
    return EXIT_OK


def cmd_tune(cfg: RunConfig, args, out: Path) -> int:
    if bool(args.model) == bool(args.data):
        raise UsageError("tune needs exactly one of --model or --data")
    device = _default_device(cfg, args.device)
    k = _positive(args.topk, "--topk") or cfg.search.k
    n_cand = _positive(args.candidates, "--candidates") or cfg.search.n_candidates
    repeats = _positive(args.repeats, "--repeats") or cfg.search.repeats
    result = None
    if args.model:
        surrogate = load_model(args.model)
    else:
        result = _train(cfg, args.data)
        surrogate = result.surrogate
        out.mkdir(parents=True, exist_ok=True)
        save_model(out / "model.json", surrogate)
    report = tune(surrogate, cfg.space, cfg.make_backend(), device, out, k, n_cand, cfg.seed,
                  repeats, cfg.search.enumeration_cap, cfg.search.baseline, result)
    _print_report(report.to_dict())
    return EXIT_OK


def _print_report(d: dict) -> None:
    print(f"device {d['device']}: best measured {d['best']['measured_s']:.6g} s, "
          f"baseline {d['baseline']['measured_s']:.6g} s, speedup {d['speedup']:.4f}")
    if d.get("r2_test") is not None:
        print(f"surrogate r2_train={d['r2_train']:.6f} r2_test={d['r2_test']:.6f}")
    print(f"{'rank':>4} {'predicted_s':>12} {'measured_s':>12}  config")
    for i, e in enumerate(d["top_k"], start=1):
        print(f"{i:>4} {e['predicted_s']:12.6g} {e['measured_s']:12.6g}  "
              + " ".join(str(v) for v in e["config"].values()))


def cmd_report(cfg: RunConfig, args, out: Path) -> int:
    path = Path(args.path) if args.path else out / "report.json"
    try:
        d = json.loads(path.read_text())
    except OSError as exc:
        raise UsageError(f"{path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: not valid JSON ({exc.msg})") from None
    if d.get("report_version") != REPORT_VERSION:
        raise UsageError(f"{path}: report_version {d.get('report_version')!r}, "
                         f"expected {REPORT_VERSION}")
    _print_report(d)
    return EXIT_OK


def cmd_selfcheck(cfg, args, out) -> int:
    return EXIT_OK if selfcheck.run_all() else EXIT_RUNTIME


COMMANDS = {
    "sample": cmd_sample,
    "collect": cmd_collect,
    "train": cmd_train,
    "tune": cmd_tune,
    "report": cmd_report,
    "selfcheck": cmd_selfcheck,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    level = os.environ.get(LOG_ENV, "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.command == "selfcheck":
            return cmd_selfcheck(None, args, None)
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        out = Path(args.out if args.out is not None else cfg.out)
        return COMMANDS[args.command](cfg, args, out)
    except (UsageError, ConfigError, SpaceError, DatasetError, ModelFileError, TuningError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (MeasurementError, TrainingDiverged, WorkloadError, OSError) as exc:
        print(f"failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
