"""Minimal float64 tensor library: reverse-mode autodiff, layers, Adam."""
from . import ops
from .checkpoint import load_checkpoint, save_checkpoint
from .kernels import BACKEND
from .layers import FFNN, BiLSTM, CharCNN, ParamStore, bilstm, char_cnn, ffnn_forward
from .optim import Adam
from .tensor import Parameter, Tensor, backward, grad_enabled, no_grad

softmax = ops.softmax

__all__ = [
    "Adam",
    "BACKEND",
    "BiLSTM",
    "CharCNN",
    "FFNN",
    "ParamStore",
    "Parameter",
    "Tensor",
    "backward",
    "bilstm",
    "char_cnn",
    "ffnn_forward",
    "grad_enabled",
    "load_checkpoint",
    "no_grad",
    "ops",
    "save_checkpoint",
    "softmax",
]
