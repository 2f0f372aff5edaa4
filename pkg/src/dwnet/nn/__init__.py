"""Minimal dense-tensor engine: layers, ops with backward passes, SGD."""

from .gradcheck import check_gradient, numerical_gradient, relative_error
from .layers import (
    ConvLayer,
    DenseLayer,
    SgdConfig,
    glorot_uniform,
    init_conv,
    init_dense,
    sgd_step,
    zero_velocity,
)
from .ops import (
    conv2d_backward,
    conv2d_forward,
    dense_backward,
    dense_forward,
    dropout,
    dropout_mask,
    maxpool2d_backward,
    maxpool2d_forward,
    relu,
    relu_backward,
    softmax,
    softmax_cross_entropy,
)
from .serialize import FORMAT_NAME, dump_json, format_float, load_params, save_params

__all__ = [
    "FORMAT_NAME",
    "ConvLayer",
    "DenseLayer",
    "SgdConfig",
    "check_gradient",
    "conv2d_backward",
    "conv2d_forward",
    "dense_backward",
    "dense_forward",
    "dropout",
    "dropout_mask",
    "dump_json",
    "format_float",
    "glorot_uniform",
    "init_conv",
    "init_dense",
    "load_params",
    "maxpool2d_backward",
    "maxpool2d_forward",
    "numerical_gradient",
    "relative_error",
    "relu",
    "relu_backward",
    "save_params",
    "sgd_step",
    "softmax",
    "softmax_cross_entropy",
    "zero_velocity",
]
