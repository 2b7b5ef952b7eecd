"""From-scratch recurrent regression network.

Layout: a tanh input layer, stacked GRU layers unrolled over a feature
window, and one of two output heads on the final hidden state.  The
grouped-softmax head mixes a fixed bank of candidate parameter values
("regimes") with learned weights, which keeps estimates inside the training
range by construction; the linear head is the conventional baseline.
"""

from .adam import AdamState
from .layers import (
    DenseParams,
    GruLayerParams,
    LinearHead,
    RegimeBank,
    gru_cell_forward,
    regime_head_forward,
    softmax,
)
from .network import (
    ModelParams,
    batch_forward,
    default_regimes,
    grad_check,
    init_model,
    loss_and_grads,
    model_forward,
)
from .training import TrainHistory, evaluate_mse, pack_batch, train, train_step
from .checkpoint import load_model, save_model

__all__ = [
    "AdamState",
    "DenseParams",
    "GruLayerParams",
    "LinearHead",
    "RegimeBank",
    "ModelParams",
    "TrainHistory",
    "batch_forward",
    "default_regimes",
    "evaluate_mse",
    "grad_check",
    "gru_cell_forward",
    "init_model",
    "load_model",
    "loss_and_grads",
    "model_forward",
    "pack_batch",
    "regime_head_forward",
    "save_model",
    "softmax",
    "train",
    "train_step",
]
