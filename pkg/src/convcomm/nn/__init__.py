"""Minimal differentiable-computation kernel.

Dense layers, a bidirectional GRU, masked softmax, dropout, Adam and a
finite-difference gradient checker — just enough machinery to train the
contextual utterance encoder, in double precision.
"""
from .adam import AdamState, adam_step
from .checkpoint import load_checkpoint, save_checkpoint
from .functional import dense, dropout, softmax
from .gradcheck import grad_check
from .gru import bigru, gru_sequence, init_gru_params
from .params import ParamStore, glorot_uniform
from .tensor import Tensor, backward, is_grad_enabled, no_grad

__all__ = [
    "AdamState",
    "ParamStore",
    "Tensor",
    "adam_step",
    "backward",
    "bigru",
    "dense",
    "dropout",
    "glorot_uniform",
    "grad_check",
    "gru_sequence",
    "init_gru_params",
    "is_grad_enabled",
    "load_checkpoint",
    "no_grad",
    "save_checkpoint",
    "softmax",
]
