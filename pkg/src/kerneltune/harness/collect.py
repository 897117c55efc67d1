"""Dataset collection with progress reporting and resume support."""

from __future__ import annotations

import csv
import logging
import os
import sys
import time
from pathlib import Path
from typing import Callable, Optional

from ..space import ParamSpace, sample_random, space_size
from .backends import Backend, MeasurementError, measure
from .cost import DeviceSpec
from .dataset import Dataset, DatasetError, format_row, load_dataset

log = logging.getLogger(__name__)

Progress = Callable[[int, int, float, float], None]


def stderr_progress(i: int, n: int, elapsed: float, eta: float) -> None:
    print(f"PROGRESS {i}/{n} {elapsed:.3f} {eta:.3f}", file=sys.stderr, flush=True)


def collect(space: ParamSpace, n: int, backend: Backend, device: DeviceSpec, repeats: int = 1,
            seed: int = 0, out_path=None, resume: bool = False,
            progress: Optional[Progress] = stderr_progress, device_column: bool = True) -> Dataset:
    """Sample ``n`` distinct configurations and measure each one.

    With ``out_path`` every row is appended to the CSV as soon as it is
    measured, so an interrupted run keeps its partial results. ``resume``
    reloads that file and measures only the configurations still missing;
    the configuration list depends on ``seed`` alone, so the resumed run
    ends with exactly the same ``n`` rows.
    """
    if n > space_size(space):
        raise ValueError(f"n={n} exceeds the space size {space_size(space)}")
    configs = sample_random(space, n, seed)
    dataset = Dataset(space.names, device_column)
    gflops = float(device.gflops) if device_column else None

    done: dict[tuple, object] = {}
    path = Path(out_path) if out_path is not None else None
    if path is not None and resume and path.exists() and path.stat().st_size > 0:
        partial = load_dataset(path, expected_params=space.names)
        if partial.device_column != device_column:
            raise DatasetError(f"{path}: device column does not match this run")
        wanted = set(configs)
        for r in partial:
            if r.config not in wanted or r.device_gflops != gflops:
                raise DatasetError(f"{path}: row {r.config} was not drawn by this seed/device; "
                                   "refusing to mix runs")
            done[r.config] = r
        log.info("resuming: %d of %d rows already measured", len(done), n)

    fh = None
    writer = None
    if path is not None:
        fresh = not (resume and done)
        fh = open(path, "w" if fresh else "a", newline="")
        writer = csv.writer(fh)
        if fresh:
            writer.writerow(dataset.columns)
            fh.flush()

    todo = [c for c in configs if c not in done]
    start = time.perf_counter()
    try:
        for i, config in enumerate(todo, start=1):
            try:
                sample = measure(backend, config, device, repeats, device_column)
            except MeasurementError:
                log.error("measurement failed for config %s on %s", config, device.name)
                raise
            done[config] = sample
            if writer is not None:
                writer.writerow(format_row(sample))
                fh.flush()
            if progress is not None:
                elapsed = time.perf_counter() - start
                progress(len(done), n, elapsed, elapsed / i * (len(todo) - i))
    finally:
        if fh is not None:
            fh.flush()
            os.fsync(fh.fileno())
            fh.close()

    for c in configs:
        dataset.append(done[c])
    return dataset
