from .adam import Adam, adam_step
from .losses import NMSE_FLOOR_DB, mse_loss, nmse
from .trainer import Checkpoint, TrainConfig, TrainingError, TrainResult, evaluate, save_curve, train
from .diagnostics import (
    CorrelationReport,
    assumption_series,
    correlation_diagnostics,
    decreasing_from_peak,
    parameter_stats,
    pearson,
)
