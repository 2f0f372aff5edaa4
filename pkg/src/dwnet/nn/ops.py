"""Forward and backward tensor operations.

Everything operates on float64 numpy arrays; spatial ops use NCHW layout.
Convolution follows the cross-correlation convention (no kernel flip).
Randomness enters only through explicitly passed ``numpy.random.Generator``
objects, so identical inputs and seeds reproduce bit-identical outputs in
single-threaded execution.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .layers import ConvLayer, DenseLayer


def _check_input_4d(x: np.ndarray, layer: ConvLayer) -> None:
    if x.ndim != 4:
        raise ValueError(f"conv input must be [N, C, H, W], got shape {x.shape}")
    if x.shape[1] != layer.in_channels:
        raise ValueError(
            f"conv input has {x.shape[1]} channels, layer expects {layer.in_channels}"
        )


def _im2col(x: np.ndarray, layer: ConvLayer) -> tuple[np.ndarray, int, int]:
    """Flatten conv windows of the padded input into rows [N*OH*OW, C*kh*kw]."""
    kh, kw = layer.kernel
    sh, sw = layer.stride
    ph, pw = layer.padding
    oh, ow = layer.output_spatial(x.shape[2], x.shape[3])
    if ph or pw:
        x = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    win = sliding_window_view(x, (kh, kw), axis=(2, 3))[:, :, ::sh, ::sw]
    # [N, C, OH, OW, kh, kw] -> [N, OH, OW, C, kh, kw]
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(x.shape[0] * oh * ow, -1)
    return np.ascontiguousarray(cols), oh, ow


def conv2d_forward(x: np.ndarray, layer: ConvLayer) -> np.ndarray:
    """Cross-correlate ``x`` [N, C, H, W] with the layer kernel, add bias."""
    x = np.asarray(x, dtype=np.float64)
    _check_input_4d(x, layer)
    cols, oh, ow = _im2col(x, layer)
    wmat = layer.weights.reshape(layer.out_channels, -1)
    y = cols @ wmat.T + layer.bias
    y = y.reshape(x.shape[0], oh, ow, layer.out_channels).transpose(0, 3, 1, 2)
    return np.ascontiguousarray(y)


def conv2d_backward(grad_out: np.ndarray, x: np.ndarray, layer: ConvLayer
                    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients of a conv2d output w.r.t. input, weights and bias.

    ``x`` is the forward input; ``grad_out`` must match the forward output
    shape. Returns (grad_input, grad_weights, grad_bias).
    """
    x = np.asarray(x, dtype=np.float64)
    grad_out = np.asarray(grad_out, dtype=np.float64)
    _check_input_4d(x, layer)
    n = x.shape[0]
    kh, kw = layer.kernel
    sh, sw = layer.stride
    ph, pw = layer.padding
    oh, ow = layer.output_spatial(x.shape[2], x.shape[3])
    expected = (n, layer.out_channels, oh, ow)
    if grad_out.shape != expected:
        raise ValueError(f"grad_out shape {grad_out.shape} does not match forward output {expected}")

    cols, _, _ = _im2col(x, layer)
    g = grad_out.transpose(0, 2, 3, 1).reshape(-1, layer.out_channels)

    grad_bias = g.sum(axis=0)
    grad_weights = (g.T @ cols).reshape(layer.weights.shape)

    wmat = layer.weights.reshape(layer.out_channels, -1)
    grad_cols = (g @ wmat).reshape(n, oh, ow, layer.in_channels, kh, kw)
    hp, wp = x.shape[2] + 2 * ph, x.shape[3] + 2 * pw
    grad_xp = np.zeros((n, layer.in_channels, hp, wp))
    for i in range(kh):
        hi = i + sh * (oh - 1) + 1
        for j in range(kw):
            wj = j + sw * (ow - 1) + 1
            grad_xp[:, :, i:hi:sh, j:wj:sw] += grad_cols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
    grad_x = grad_xp[:, :, ph:hp - ph, pw:wp - pw]
    return np.ascontiguousarray(grad_x), grad_weights, grad_bias


def maxpool2d_forward(x: np.ndarray, window: int = 2, stride: int = 2
                      ) -> tuple[np.ndarray, np.ndarray]:
    """Max over ``window x window`` patches; trailing odd rows/cols dropped.

    Returns (output, argmax) where argmax holds the flat in-window index
    (0..window*window-1) used to route gradients in the backward pass.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 4:
        raise ValueError(f"maxpool input must be [N, C, H, W], got shape {x.shape}")
    if x.shape[2] < window or x.shape[3] < window:
        raise ValueError(
            f"maxpool needs spatial dims >= {window}, got {x.shape[2]}x{x.shape[3]}"
        )
    win = sliding_window_view(x, (window, window), axis=(2, 3))[:, :, ::stride, ::stride]
    n, c, oh, ow = win.shape[:4]
    flat = win.reshape(n, c, oh, ow, window * window)
    argmax = flat.argmax(axis=-1)
    out = np.take_along_axis(flat, argmax[..., None], axis=-1)[..., 0]
    return np.ascontiguousarray(out), argmax


def maxpool2d_backward(grad_out: np.ndarray, argmax: np.ndarray,
                       input_shape: tuple[int, ...], window: int = 2,
                       stride: int = 2) -> np.ndarray:
    """Route gradients back to the argmax positions of each pool window."""
    grad_out = np.asarray(grad_out, dtype=np.float64)
    if grad_out.shape != argmax.shape:
        raise ValueError(f"grad_out shape {grad_out.shape} does not match argmax {argmax.shape}")
    n, c, oh, ow = grad_out.shape
    ni, ci, hi, wi = np.indices((n, c, oh, ow), sparse=False)
    rows = hi * stride + argmax // window
    cols = wi * stride + argmax % window
    grad_x = np.zeros(input_shape)
    np.add.at(grad_x, (ni, ci, rows, cols), grad_out)
    return grad_x


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(np.asarray(x, dtype=np.float64), 0.0)


def relu_backward(grad_out: np.ndarray, x: np.ndarray) -> np.ndarray:
    return np.where(np.asarray(x) > 0.0, grad_out, 0.0)


def dropout_mask(rng: np.random.Generator, shape: tuple[int, ...],
                 rate: float) -> np.ndarray:
    """Inverted-scaling dropout mask: 0 with probability ``rate``, else 1/(1-rate)."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must lie in [0, 1), got {rate}")
    keep = rng.random(shape) >= rate
    return keep / (1.0 - rate)


def dropout(x: np.ndarray, rate: float, training: bool,
            rng: np.random.Generator | None = None) -> np.ndarray:
    """Zero elements with probability ``rate`` and rescale survivors.

    Identity in inference mode and at rate 0.
    """
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must lie in [0, 1), got {rate}")
    x = np.asarray(x, dtype=np.float64)
    if not training or rate == 0.0:
        return x
    if rng is None:
        raise ValueError("dropout in training mode requires an rng")
    return x * dropout_mask(rng, x.shape, rate)


def dense_forward(x: np.ndarray, layer: DenseLayer) -> np.ndarray:
    """Affine map: x [N, in_dim] -> x @ weights + bias."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != layer.in_dim:
        raise ValueError(
            f"dense input must be [N, {layer.in_dim}], got shape {x.shape}"
        )
    return x @ layer.weights + layer.bias


def dense_backward(grad_out: np.ndarray, x: np.ndarray, layer: DenseLayer
                   ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns (grad_input, grad_weights, grad_bias)."""
    x = np.asarray(x, dtype=np.float64)
    grad_out = np.asarray(grad_out, dtype=np.float64)
    if grad_out.shape != (x.shape[0], layer.out_dim):
        raise ValueError(
            f"grad_out shape {grad_out.shape} does not match [N, {layer.out_dim}]"
        )
    return grad_out @ layer.weights.T, x.T @ grad_out, grad_out.sum(axis=0)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max-subtraction for stability."""
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray
                          ) -> tuple[float, np.ndarray]:
    """Mean negative log-likelihood of the true class and its logit gradient.

    grad = (softmax(logits) - onehot(labels)) / N.
    """
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels)
    if logits.ndim != 2:
        raise ValueError(f"logits must be [N, C], got shape {logits.shape}")
    n, c = logits.shape
    if labels.shape != (n,):
        raise ValueError(f"labels must be a length-{n} vector, got shape {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= c):
        raise ValueError(f"labels must lie in [0, {c}), got range "
                         f"[{labels.min()}, {labels.max()}]")
    labels = labels.astype(np.intp)
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1))
    log_p = shifted - log_z[:, None]
    loss = float(-log_p[np.arange(n), labels].mean())
    grad = np.exp(log_p)
    grad[np.arange(n), labels] -= 1.0
    grad /= n
    return loss, grad
