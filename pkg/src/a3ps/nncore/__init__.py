"""Minimal autodiff, layers and Adam used by both agents."""
from a3ps.nncore.checks import gradient_check
from a3ps.nncore.io import load_tensors, save_tensors
from a3ps.nncore.layers import GRU, Embedding, Linear, Module, PatchEncoder, patchify, recur
from a3ps.nncore.optim import AdamState, adam_step, checksum
from a3ps.nncore.tensor import (
    Parameter,
    Tensor,
    add,
    affine,
    backward,
    clip,
    concat,
    cross_entropy,
    embed,
    exp,
    gru_step,
    index,
    log,
    log_softmax,
    log_softmax_np,
    matmul,
    mean,
    minimum,
    mul,
    no_recording,
    pick,
    recording,
    relu,
    reshape,
    sigmoid,
    softmax,
    softmax_np,
    square,
    sub,
    tanh,
)
from a3ps.nncore.tensor import sum as tsum

__all__ = [
    "AdamState", "Embedding", "GRU", "Linear", "Module", "Parameter", "PatchEncoder", "Tensor",
    "adam_step", "add", "affine", "backward", "checksum", "clip", "concat", "cross_entropy", "embed",
    "exp", "gradient_check", "gru_step", "index", "load_tensors", "log", "log_softmax",
    "log_softmax_np", "matmul", "mean", "minimum", "mul", "no_recording", "patchify", "pick", "recording",
    "recur", "relu", "reshape", "save_tensors", "sigmoid", "softmax", "softmax_np", "square",
    "sub", "tanh", "tsum",
]
