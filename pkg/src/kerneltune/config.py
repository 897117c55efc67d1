"""YAML run configuration shared by the CLI subcommands.

Example::

    seed: 0
    out: runs/demo
    space:
      kernels: [xi_limiter, eta_limiter]    # gang/vector grids per kernel
      # or an explicit list:  params: [{name: ..., values: [...]}, ...]
    devices:
      P100: 4700
      V100: {gflops: 7500, base_scale: 0.8}
    backend:
      kind: synthetic                       # synthetic | workload | command
    cost_model:
      noise_sigma: 0.0
      calibration_device: P100
      window: [0.8, 2.0]
    train: {max_epochs: 200, batch_size: 200}
    search: {k: 10, n_candidates: 100000}
    collect: {n: 10000, repeats: 1}
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Optional

import yaml

from .harness.backends import Backend, CommandBackend, SyntheticBackend, WorkloadBackend
from .harness.cost import REFERENCE_DEVICES, CostModelSpec, DeviceSpec, default_cost_model
from .space import KERNELS, ParamSpace, SpaceError, kernel_space, space_from_dict
from .surrogate import TrainConfig
from .workload import WorkloadSpec

BACKEND_KINDS = ("synthetic", "workload", "command")


class ConfigError(ValueError):
    pass


@dataclass
class SearchSettings:
    k: int = 10
    n_candidates: int = 100_000
    enumeration_cap: int = 200_000
    repeats: int = 1
    baseline: Optional[tuple[int, ...]] = None


@dataclass
class CollectSettings:
    n: int = 10_000
    repeats: int = 1


@dataclass
class RunConfig:
    space: ParamSpace
    devices: dict[str, DeviceSpec]
    backend_kind: str = "synthetic"
    backend_options: dict = field(default_factory=dict)
    cost_model: Optional[CostModelSpec] = None
    train: TrainConfig = field(default_factory=TrainConfig)
    search: SearchSettings = field(default_factory=SearchSettings)
    collect: CollectSettings = field(default_factory=CollectSettings)
    seed: int = 0
    out: str = "out"

    def device(self, name: str) -> DeviceSpec:
        if name not in self.devices:
            raise ConfigError(f"unknown device {name!r}; known: {', '.join(self.devices)}")
        return self.devices[name]

    def device_by_gflops(self, gflops: float) -> DeviceSpec:
        for d in self.devices.values():
            if d.gflops == gflops:
                return d
        raise ConfigError(f"no device in the table has gflops={gflops}")

    def make_backend(self) -> Backend:
        opts = self.backend_options
        if self.backend_kind == "synthetic":
            return SyntheticBackend(self.space, self.cost_model)
        if self.backend_kind == "workload":
            return WorkloadBackend(self.space, WorkloadSpec(**opts))
        return CommandBackend(self.space, **opts)


def _mapping(value, where: str) -> dict:
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ConfigError(f"{where}: expected a mapping")
    return value


def _int(value, where: str, minimum: int = 0) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise ConfigError(f"{where}: expected an integer >= {minimum}, got {value!r}")
    return value


def _check_keys(d: dict, allowed, where: str) -> None:
    extra = sorted(set(d) - set(allowed))
    if extra:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(map(str, extra))}")


def _parse_space(raw) -> ParamSpace:
    d = _mapping(raw, "space")
    if not d:
        return kernel_space()
    _check_keys(d, ("kernels", "params", "device_feature"), "space")
    if "kernels" in d and "params" in d:
        raise ConfigError("space: give either 'kernels' or 'params', not both")
    if "kernels" in d:
        ks = d["kernels"]
        if not isinstance(ks, list) or not ks:
            raise ConfigError("space.kernels: expected a non-empty list")
        for i, k in enumerate(ks):
            if k not in KERNELS:
                raise ConfigError(f"space.kernels[{i}]: unknown kernel {k!r}")
        return kernel_space(ks, bool(d.get("device_feature", False)))
    try:
        return space_from_dict(d)
    except SpaceError as exc:
        raise ConfigError(str(exc)) from None


def _parse_devices(raw) -> dict[str, DeviceSpec]:
    if raw is None:
        return {d.name: d for d in REFERENCE_DEVICES}
    d = _mapping(raw, "devices")
    if not d:
        raise ConfigError("devices: expected at least one device")
    out = {}
    for name, spec in d.items():
        where = f"devices.{name}"
        try:
            if isinstance(spec, (int, float)) and not isinstance(spec, bool):
                out[str(name)] = DeviceSpec(str(name), float(spec))
            else:
                spec = _mapping(spec, where)
                _check_keys(spec, ("gflops", "base_scale"), where)
                if "gflops" not in spec:
                    raise ConfigError(f"{where}.gflops: required")
                out[str(name)] = DeviceSpec(str(name), float(spec["gflops"]),
                                            float(spec.get("base_scale", 0.8)))
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"{where}: {exc}") from None
    return out


def _parse_cost(raw, space: ParamSpace, devices: dict[str, DeviceSpec]) -> CostModelSpec:
    d = _mapping(raw, "cost_model")
    if "stages" in d:
        try:
            return CostModelSpec.from_dict(d).bind(space)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"cost_model: {exc}") from None
    _check_keys(d, ("noise_sigma", "seed", "calibration_device", "window"), "cost_model")
    cal_name = d.get("calibration_device", "P100" if "P100" in devices else next(iter(devices)))
    if cal_name not in devices:
        raise ConfigError(f"cost_model.calibration_device: unknown device {cal_name!r}")
    cal = devices[cal_name]
    window = d.get("window", [cal.base_time(), 2.5 * cal.base_time()])
    if (not isinstance(window, list) or len(window) != 2
            or not all(isinstance(w, (int, float)) for w in window)
            or not 0 < window[0] < window[1]):
        raise ConfigError("cost_model.window: expected [low, high] with 0 < low < high")
    if not math.isclose(window[0], cal.base_time(), rel_tol=1e-12):
        raise ConfigError(f"cost_model.window: low end must equal the base time "
                          f"{cal.base_time()} of {cal_name}")
    sigma = d.get("noise_sigma", 0.0)
    if not isinstance(sigma, (int, float)) or sigma < 0:
        raise ConfigError("cost_model.noise_sigma: expected a non-negative number")
    return default_cost_model(space, cal, (float(window[0]), float(window[1])), float(sigma),
                              _int(d.get("seed", 0), "cost_model.seed"))


def _parse_backend(raw, space: ParamSpace) -> tuple[str, dict]:
    d = dict(_mapping(raw, "backend"))
    kind = d.pop("kind", "synthetic")
    if kind not in BACKEND_KINDS:
        raise ConfigError(f"backend.kind: expected one of {', '.join(BACKEND_KINDS)}, got {kind!r}")
    others = [k for k in BACKEND_KINDS if k != kind and k in d]
    if others:
        raise ConfigError(f"backend: options given for {others[0]!r} but kind is {kind!r}")
    opts = _mapping(d.pop(kind, None), f"backend.{kind}")
    _check_keys(d, (), "backend")
    if kind == "workload":
        _check_keys(opts, ("nx", "ny", "steps", "epsilon", "kappa", "seed", "field",
                           "source_amplitude", "dt"), "backend.workload")
        try:
            WorkloadSpec(**opts)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"backend.workload: {exc}") from None
    elif kind == "command":
        _check_keys(opts, ("template", "timeout", "parse", "iters"), "backend.command")
        if "template" not in opts:
            raise ConfigError("backend.command.template: required")
        try:
            CommandBackend(space, **opts)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"backend.command: {exc}") from None
    elif opts:
        raise ConfigError("backend.synthetic: takes no options; use cost_model")
    return kind, opts


def _parse_search(raw, space: ParamSpace) -> SearchSettings:
    d = _mapping(raw, "search")
    _check_keys(d, ("k", "n_candidates", "enumeration_cap", "repeats", "baseline"), "search")
    s = SearchSettings()
    for key, minimum in (("k", 1), ("n_candidates", 1), ("enumeration_cap", 0), ("repeats", 1)):
        if key in d:
            setattr(s, key, _int(d[key], f"search.{key}", minimum))
    if d.get("baseline") is not None:
        b = d["baseline"]
        try:
            if isinstance(b, dict):
                b = [b[n] for n in space.names]
            s.baseline = space.check(b)
        except (KeyError, TypeError, SpaceError) as exc:
            raise ConfigError(f"search.baseline: {exc}") from None
    return s


def _parse_collect(raw) -> CollectSettings:
    d = _mapping(raw, "collect")
    _check_keys(d, ("n", "repeats"), "collect")
    c = CollectSettings()
    if "n" in d:
        c.n = _int(d["n"], "collect.n", 1)
    if "repeats" in d:
        c.repeats = _int(d["repeats"], "collect.repeats", 1)
    return c


TOP_KEYS = ("seed", "out", "space", "devices", "backend", "cost_model", "train", "search", "collect")


def parse_config(data: Any) -> RunConfig:
    d = _mapping(data, "config")
    _check_keys(d, TOP_KEYS, "config")
    space = _parse_space(d.get("space"))
    devices = _parse_devices(d.get("devices"))
    kind, opts = _parse_backend(d.get("backend"), space)
    cost = _parse_cost(d.get("cost_model"), space, devices)
    try:
        train = TrainConfig.from_dict(_mapping(d.get("train"), "train"))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"train: {exc}") from None
    out = d.get("out", "out")
    if not isinstance(out, str):
        raise ConfigError("out: expected a path string")
    return RunConfig(space, devices, kind, opts, cost, train,
                     _parse_search(d.get("search"), space), _parse_collect(d.get("collect")),
                     _int(d.get("seed", 0), "seed"), out)


def load_config(path) -> RunConfig:
    """Read and validate a YAML run configuration; ``None`` gives the defaults."""
    if path is None:
        return parse_config({})
    try:
        with open(path) as f:
            data = yaml.safe_load(f)
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{path}:{mark.line + 1}" if mark is not None else str(path)
        raise ConfigError(f"{where}: invalid YAML ({getattr(exc, 'problem', exc)})") from None
    try:
        return parse_config(data if data is not None else {})
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None
