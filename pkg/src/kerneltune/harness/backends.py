"""Measurement backends and repeat-and-aggregate timing."""

from __future__ import annotations

import re
import shlex
import statistics
import string
import subprocess
import time
from dataclasses import dataclass
from typing import Mapping, Optional, Protocol, Sequence, Union

from ..space import ParamSpace
from ..workload import WorkloadResult, WorkloadSpec, run_workload, tiles_from_config
from .cost import CostModelSpec, DeviceSpec, synthetic_cost
from .dataset import Sample

TIME_LINE = re.compile(r"^TIME_S=([-+0-9.eEinfINFaA]+)\s*$", re.MULTILINE)


class MeasurementError(RuntimeError):
    """A backend run failed; carries the configuration when known."""

    def __init__(self, message: str, config: Optional[tuple] = None):
        super().__init__(message)
        self.config = config

    def __str__(self) -> str:
        msg = super().__str__()
        return f"{msg} [config={self.config}]" if self.config is not None else msg


class CommandFailed(MeasurementError):
    def __init__(self, returncode: int, stderr: str = "", config=None):
        super().__init__(f"command exited with code {returncode}: {stderr.strip()[-500:]}", config)
        self.returncode = returncode


class CommandTimeout(MeasurementError):
    def __init__(self, timeout: float, config=None):
        super().__init__(f"command exceeded the {timeout} s timeout", config)
        self.timeout = timeout


class OutputParseError(MeasurementError):
    pass


class Backend(Protocol):
    name: str

    def run(self, config: tuple[int, ...], device: DeviceSpec) -> float:
        """One timed execution, in seconds."""


@dataclass
class SyntheticBackend:
    space: ParamSpace
    cost: CostModelSpec
    name: str = "synthetic"

    def __post_init__(self):
        self.cost.bind(self.space)

    def run(self, config, device):
        return synthetic_cost(config, device, self.cost)


class WorkloadBackend:
    """Runs the tiled finite-volume workload with tiles taken from the config."""

    name = "workload"

    def __init__(self, space: ParamSpace, spec: WorkloadSpec):
        self.space = space
        self.spec = spec
        self.last_result: Optional[WorkloadResult] = None

    def run(self, config, device):
        tiles = tiles_from_config(config, self.space, self.spec.nx, self.spec.ny)
        self.last_result = run_workload(self.spec.with_tiles(tiles))
        return self.last_result.elapsed_seconds


class CommandBackend:
    """Runs an external command built from a ``str.format`` template.

    The template must name every space parameter as ``{name}``; it may also
    use ``{device}``, ``{device_gflops}`` and ``{iters}``. The runtime is the
    process wall-clock (``parse="wall"``) or the last ``TIME_S=<float>`` line
    on stdout (``parse="stdout"``).
    """

    name = "command"
    EXTRA_FIELDS = ("device", "device_gflops", "iters")

    def __init__(self, space: ParamSpace, template: str, timeout: float = 60.0,
                 parse: str = "stdout", iters: Union[int, Mapping[str, int]] = 1):
        if parse not in ("stdout", "wall"):
            raise ValueError(f"parse must be 'stdout' or 'wall', got {parse!r}")
        if timeout <= 0:
            raise ValueError("timeout must be positive")
        fields = {f for _, f, _, _ in string.Formatter().parse(template) if f is not None}
        missing = [n for n in space.names if n not in fields]
        unknown = sorted(fields - set(space.names) - set(self.EXTRA_FIELDS))
        if missing:
            raise ValueError(f"template lacks placeholders for: {', '.join(missing)}")
        if unknown:
            raise ValueError(f"template has unknown placeholders: {', '.join(unknown)}")
        self.space = space
        self.template = template
        self.timeout = timeout
        self.parse = parse
        self.iters = iters

    def command(self, config, device: DeviceSpec) -> list[str]:
        iters = self.iters.get(device.name, 1) if isinstance(self.iters, Mapping) else self.iters
        values = dict(zip(self.space.names, config))
        text = self.template.format(device=device.name, device_gflops=device.gflops,
                                    iters=iters, **values)
        return shlex.split(text)

    def run(self, config, device):
        argv = self.command(config, device)
        start = time.perf_counter()
        try:
            proc = subprocess.run(argv, capture_output=True, text=True, timeout=self.timeout)
        except subprocess.TimeoutExpired:
            raise CommandTimeout(self.timeout, tuple(config)) from None
        except OSError as exc:
            raise CommandFailed(-1, str(exc), tuple(config)) from None
        wall = time.perf_counter() - start
        if proc.returncode != 0:
            raise CommandFailed(proc.returncode, proc.stderr, tuple(config))
        if self.parse == "wall":
            return wall
        found = TIME_LINE.findall(proc.stdout)
        if not found:
            raise OutputParseError("no TIME_S=<seconds> line on stdout", tuple(config))
        try:
            value = float(found[-1])
        except ValueError:
            raise OutputParseError(f"unparsable TIME_S value {found[-1]!r}", tuple(config)) from None
        if not value > 0 or value == float("inf"):
            raise OutputParseError(f"TIME_S must be a positive finite number, got {value}", tuple(config))
        return value


def measure(backend: Backend, config: Sequence[int], device: DeviceSpec, repeats: int = 1,
            device_column: bool = True) -> Sample:
    """Run ``repeats`` times in sequence; the median is the runtime and
    ``max - min`` the dispersion."""
    if repeats < 1:
        raise ValueError("repeats must be at least 1")
    config = tuple(int(v) for v in config)
    times = []
    for _ in range(repeats):
        try:
            times.append(float(backend.run(config, device)))
        except MeasurementError as exc:
            if exc.config is None:
                exc.config = config
            raise
        except Exception as exc:
            raise MeasurementError(f"{backend.name} backend failed: {exc!r}", config) from exc
    return Sample(config, float(device.gflops) if device_column else None,
                  statistics.median(times), repeats, max(times) - min(times))
