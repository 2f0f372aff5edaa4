"""Parameter containers and the SGD update rule.

Layers hold parameters only; the math lives in :mod:`dwnet.nn.ops` so a
trained model stays immutable during inference.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


def _as_pair(v) -> tuple[int, int]:
    if isinstance(v, (tuple, list)):
        a, b = v
        return int(a), int(b)
    return int(v), int(v)


@dataclass
class ConvLayer:
    """2D convolution parameters: weights [out_c, in_c, kh, kw], bias [out_c]."""

    weights: np.ndarray
    bias: np.ndarray
    stride: tuple[int, int] = (1, 1)
    padding: tuple[int, int] = (0, 0)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        self.stride = _as_pair(self.stride)
        self.padding = _as_pair(self.padding)
        if self.weights.ndim != 4:
            raise ValueError(f"conv weights must be 4D, got shape {self.weights.shape}")
        if self.bias.shape != (self.weights.shape[0],):
            raise ValueError(
                f"conv bias length {self.bias.shape} does not match "
                f"{self.weights.shape[0]} output channels"
            )
        if min(self.stride) < 1 or min(self.padding) < 0:
            raise ValueError("stride must be positive and padding non-negative")

    @property
    def out_channels(self) -> int:
        return self.weights.shape[0]

    @property
    def in_channels(self) -> int:
        return self.weights.shape[1]

    @property
    def kernel(self) -> tuple[int, int]:
        return self.weights.shape[2], self.weights.shape[3]

    def output_spatial(self, height: int, width: int) -> tuple[int, int]:
        """Output spatial dims; raises if either collapses below 1."""
        kh, kw = self.kernel
        sh, sw = self.stride
        ph, pw = self.padding
        oh = (height + 2 * ph - kh) // sh + 1
        ow = (width + 2 * pw - kw) // sw + 1
        if oh < 1 or ow < 1:
            raise ValueError(
                f"conv output collapses: input {height}x{width}, kernel {kh}x{kw}, "
                f"stride {self.stride}, padding {self.padding} -> {oh}x{ow}"
            )
        return oh, ow


@dataclass
class DenseLayer:
    """Fully connected parameters: weights [in_dim, out_dim], bias [out_dim]."""

    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights.ndim != 2:
            raise ValueError(f"dense weights must be 2D, got shape {self.weights.shape}")
        if self.bias.shape != (self.weights.shape[1],):
            raise ValueError(
                f"dense bias length {self.bias.shape} does not match "
                f"{self.weights.shape[1]} outputs"
            )

    @property
    def in_dim(self) -> int:
        return self.weights.shape[0]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[1]


@dataclass
class SgdConfig:
    """Minibatch SGD hyperparameters (momentum + weight decay)."""

    learning_rate: float = 0.01
    momentum: float = 0.9
    weight_decay: float = 1e-4
    epochs: int = 300
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be non-negative")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")


def glorot_uniform(rng: np.random.Generator, shape: Sequence[int],
                   fan_in: int, fan_out: int) -> np.ndarray:
    """Uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out))."""
    a = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-a, a, size=tuple(shape))


def init_conv(rng: np.random.Generator, out_channels: int, in_channels: int,
              kernel, stride=(1, 1), padding=(0, 0)) -> ConvLayer:
    kh, kw = _as_pair(kernel)
    fan_in = in_channels * kh * kw
    fan_out = out_channels * kh * kw
    w = glorot_uniform(rng, (out_channels, in_channels, kh, kw), fan_in, fan_out)
    return ConvLayer(w, np.zeros(out_channels), stride=stride, padding=padding)


def init_dense(rng: np.random.Generator, in_dim: int, out_dim: int) -> DenseLayer:
    w = glorot_uniform(rng, (in_dim, out_dim), in_dim, out_dim)
    return DenseLayer(w, np.zeros(out_dim))


def sgd_step(params: Sequence[np.ndarray], grads: Sequence[np.ndarray],
             config: SgdConfig, velocity: Sequence[np.ndarray]) -> None:
    """One momentum-SGD update, in place.

    velocity <- momentum * velocity - lr * (grad + weight_decay * param)
    param    <- param + velocity
    """
    if not (len(params) == len(grads) == len(velocity)):
        raise ValueError("params, grads and velocity must have equal length")
    for p, g, v in zip(params, grads, velocity):
        if p.shape != g.shape or p.shape != v.shape:
            raise ValueError(
                f"shape mismatch in sgd_step: param {p.shape}, grad {g.shape}, "
                f"velocity {v.shape}"
            )
        v *= config.momentum
        v -= config.learning_rate * (g + config.weight_decay * p)
        p += v


def zero_velocity(params: Sequence[np.ndarray]) -> list[np.ndarray]:
    return [np.zeros_like(p) for p in params]
