"""From-scratch GRU/LSTM regressors trained with BPTT and Adam."""

from .adam import AdamState, adam_step
from .cells import CellParams, gru_cell_forward, lstm_cell_forward
from .network import (
    ARCH_DEFAULTS,
    ARCHITECTURES,
    Network,
    NetworkSpec,
    TrainedModel,
    build_layers,
    forward,
    grad_check,
    init_model,
    load_checkpoint,
    save_checkpoint,
    train,
    write_loss_csv,
)

__all__ = [
    "ARCHITECTURES",
    "ARCH_DEFAULTS",
    "AdamState",
    "CellParams",
    "Network",
    "NetworkSpec",
    "TrainedModel",
    "adam_step",
    "build_layers",
    "forward",
    "grad_check",
    "gru_cell_forward",
    "init_model",
    "load_checkpoint",
    "lstm_cell_forward",
    "save_checkpoint",
    "train",
    "write_loss_csv",
]
