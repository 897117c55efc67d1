"""Measurement backends, the synthetic cost oracle, datasets and collection."""

from .backends import (
    Backend,
    CommandBackend,
    CommandFailed,
    CommandTimeout,
    MeasurementError,
    OutputParseError,
    SyntheticBackend,
    WorkloadBackend,
    measure,
)
from .collect import collect, stderr_progress
from .cost import (
    REFERENCE_DEVICES,
    DEFAULT_WINDOW,
    CostModelSpec,
    DeviceSpec,
    StageCost,
    default_cost_model,
    noise_draw,
    optimum_config,
    synthetic_cost,
    synthetic_cost_many,
)
from .dataset import (
    DEVICE_COLUMN,
    Dataset,
    DatasetError,
    Sample,
    concat,
    load_dataset,
    save_dataset,
)
