"""Runtime surrogate: standardization, MLP regression, Adam training, metrics."""

from .mlp import (
    DivergenceError,
    MlpModel,
    forward,
    forward_batch,
    gradients,
    loss,
    loss_and_gradients,
    mlp_init,
)
from .optim import AdamState, AdaptiveLearningRate, TrainConfig, adam_step
from .persist import (
    FORMAT_VERSION,
    ModelFileError,
    ModelVersionError,
    Surrogate,
    load_model,
    save_model,
    write_loss_csv,
)
from .scaler import ScalerState, scaler_fit, scaler_inverse, scaler_transform
from .training import (
    R2Result,
    StopReason,
    TrainingDiverged,
    TrainReport,
    fit,
    mse,
    predict,
    r2,
    r2_score,
    train,
)
