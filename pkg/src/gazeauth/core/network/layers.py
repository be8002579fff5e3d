"""
Forward / backward primitives of the embedder, on (B, C, T) float64 blocks.
Gradients are hand derived; every backward takes what its forward returned.
"""
from typing import Tuple

import numpy as np


def conv_padding(kernel_size: int, dilation: int) -> int:
    return dilation * (kernel_size - 1) // 2


def conv1d_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray, dilation: int) -> np.ndarray:
    """Stride-1 dilated convolution, zero padded so the output keeps length T."""
    _, _, T = x.shape
    k = w.shape[2]
    pad = conv_padding(k, dilation)
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad)))
    out = np.broadcast_to(b[None, :, None], (x.shape[0], w.shape[0], T)).copy()
    for j in range(k):
        s = j * dilation
        out += np.matmul(w[:, :, j], xp[:, :, s:s + T])
    return out


def conv1d_backward(
    dout: np.ndarray, x: np.ndarray, w: np.ndarray, dilation: int
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns (dx, dw, db)."""
    _, _, T = x.shape
    k = w.shape[2]
    pad = conv_padding(k, dilation)
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad)))
    dxp = np.zeros_like(xp)
    dw = np.empty_like(w)
    for j in range(k):
        s = j * dilation
        dw[:, :, j] = np.tensordot(dout, xp[:, :, s:s + T], axes=([0, 2], [0, 2]))
        dxp[:, :, s:s + T] += np.matmul(w[:, :, j].T, dout)
    db = dout.sum(axis=(0, 2))
    return dxp[:, :, pad:pad + T], dw, db


def batch_moments(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Per-channel mean and biased variance over batch and time."""
    mean = x.mean(axis=(0, 2))
    var = ((x - mean[None, :, None]) ** 2).mean(axis=(0, 2))
    return mean, var


def batchnorm_apply(
    x: np.ndarray, mean: np.ndarray, inv_std: np.ndarray, gamma: np.ndarray, beta: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """Returns (xhat, y) with y = gamma * xhat + beta."""
    xhat = (x - mean[None, :, None]) * inv_std[None, :, None]
    return xhat, gamma[None, :, None] * xhat + beta[None, :, None]


def batchnorm_backward(
    dy: np.ndarray, xhat: np.ndarray, inv_std: np.ndarray, gamma: np.ndarray, batch_stats: bool
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns (dx, dgamma, dbeta). With batch statistics the mean/var depend on x."""
    dgamma = (dy * xhat).sum(axis=(0, 2))
    dbeta = dy.sum(axis=(0, 2))
    dxhat = dy * gamma[None, :, None]
    if not batch_stats:
        return dxhat * inv_std[None, :, None], dgamma, dbeta
    n = xhat.shape[0] * xhat.shape[2]
    sum_dxhat = dxhat.sum(axis=(0, 2))[None, :, None]
    sum_dxhat_xhat = (dxhat * xhat).sum(axis=(0, 2))[None, :, None]
    dx = (inv_std[None, :, None] / n) * (n * dxhat - sum_dxhat - xhat * sum_dxhat_xhat)
    return dx, dgamma, dbeta


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)
