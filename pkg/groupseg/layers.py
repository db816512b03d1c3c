"""Forward and backward kernels of the network layers.

Activations are channels-last arrays (B, H, W, C). Every forward function
returns the output and a cache tuple; the matching backward function takes the
upstream gradient and the cache.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from .errors import ShapeError


__title__ = "groupseg"
__version__ = "1.0"
__author__ = "groupseg developers"
__copyright__ = """
Copyright 2026 groupseg developers

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
"""
__license__ = "Apache 2.0"


NORM_EPS: float = 1e-5


def he_uniform(rng: np.random.Generator, shape: tuple, dtype=np.float64) -> np.ndarray:
    """Fan-in scaled uniform initialization of a kernel (kh, kw, c_in, c_out).

    Args:
        rng (np.random.Generator): Generator
        shape (tuple): Kernel shape
        dtype (optional): Floating point type. Defaults to np.float64.

    Returns:
        np.ndarray: Kernel drawn from U(-sqrt(6/fan_in), sqrt(6/fan_in))
    """
    fan_in: int = shape[0] * shape[1] * shape[2]
    bound: float = float(np.sqrt(6.0 / fan_in))
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


def _pad(x: np.ndarray, pad: int) -> np.ndarray:
    if pad == 0: return x
    return np.pad(x, ((0, 0), (pad, pad), (pad, pad), (0, 0)))


def conv2d_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray = None) -> tuple:
    """Stride-1 convolution with zero padding that keeps the spatial size (odd kernels).

    Args:
        x (np.ndarray): Input (B, H, W, C_in)
        w (np.ndarray): Kernel (k, k, C_in, C_out)
        b (np.ndarray, optional): Bias (C_out). Defaults to None.

    Raises:
        ShapeError: Channel count or kernel shape does not fit

    Returns:
        tuple: Output (B, H, W, C_out) and cache
    """
    k: int = w.shape[0]
    if w.shape[1] != k or k % 2 != 1: raise ShapeError("kernel must be square with odd size, got " + str(w.shape[:2]))
    if x.shape[-1] != w.shape[2]: raise ShapeError("input has " + str(x.shape[-1]) + " channels, kernel expects " + str(w.shape[2]))
    pad: int = (k - 1) // 2
    # windows: (B, H, W, C_in, k, k)
    windows: np.ndarray = sliding_window_view(_pad(x, pad), (k, k), axis=(1, 2))
    y: np.ndarray = np.tensordot(windows, w, axes=([4, 5, 3], [0, 1, 2]))
    if b is not None: y = y + b
    return y, (windows, w, b is not None)


def conv2d_backward(grad: np.ndarray, cache: tuple) -> tuple:
    """Backward pass of conv2d_forward.

    Args:
        grad (np.ndarray): Upstream gradient (B, H, W, C_out)
        cache (tuple): Cache of the forward pass

    Returns:
        tuple: Gradients (dx, dw, db); db is None without bias
    """
    windows, w, has_bias = cache
    k: int = w.shape[0]
    dw: np.ndarray = np.tensordot(windows, grad, axes=([0, 1, 2], [0, 1, 2])).transpose(1, 2, 0, 3)
    db = grad.sum(axis=(0, 1, 2)) if has_bias else None
    # Full correlation with the flipped kernel
    grad_windows: np.ndarray = sliding_window_view(_pad(grad, k - 1 - (k - 1) // 2), (k, k), axis=(1, 2))
    dx: np.ndarray = np.tensordot(grad_windows, w[::-1, ::-1], axes=([4, 5, 3], [0, 1, 3]))
    return dx, dw, db


def instance_norm_forward(x: np.ndarray, eps: float = NORM_EPS) -> tuple:
    """Instance normalization (per sample and channel over the spatial axes, no affine parameters).

    Args:
        x (np.ndarray): Input (B, H, W, C)
        eps (float, optional): Variance offset. Defaults to 1e-5.

    Returns:
        tuple: Output and cache
    """
    mean: np.ndarray = x.mean(axis=(1, 2), keepdims=True)
    centered: np.ndarray = x - mean
    inv_std: np.ndarray = 1.0 / np.sqrt((centered * centered).mean(axis=(1, 2), keepdims=True) + eps)
    y: np.ndarray = centered * inv_std
    return y, (y, inv_std)


def instance_norm_backward(grad: np.ndarray, cache: tuple) -> np.ndarray:
    y, inv_std = cache
    return (grad - grad.mean(axis=(1, 2), keepdims=True) - y * (grad * y).mean(axis=(1, 2), keepdims=True)) * inv_std


def relu_forward(x: np.ndarray) -> tuple:
    mask: np.ndarray = x > 0
    return x * mask, mask


def relu_backward(grad: np.ndarray, mask: np.ndarray) -> np.ndarray:
    return grad * mask


def maxpool_forward(x: np.ndarray) -> tuple:
    """2x2 max pooling with stride 2; ties go to the first window position (row-major).

    Args:
        x (np.ndarray): Input (B, H, W, C) with even H and W

    Raises:
        ShapeError: Odd spatial size

    Returns:
        tuple: Output (B, H/2, W/2, C) and cache
    """
    batch, height, width, channels = x.shape
    if height % 2 or width % 2: raise ShapeError("max pooling needs even spatial size, got " + str((height, width)))
    windows: np.ndarray = x.reshape(batch, height // 2, 2, width // 2, 2, channels).transpose(0, 1, 3, 5, 2, 4).reshape(batch, height // 2, width // 2, channels, 4)
    index: np.ndarray = windows.argmax(axis=-1)
    y: np.ndarray = np.take_along_axis(windows, index[..., None], axis=-1)[..., 0]
    return y, (index, x.shape)


def maxpool_backward(grad: np.ndarray, cache: tuple) -> np.ndarray:
    index, shape = cache
    batch, height, width, channels = shape
    windows: np.ndarray = np.zeros(grad.shape + (4,), dtype=grad.dtype)
    np.put_along_axis(windows, index[..., None], grad[..., None], axis=-1)
    return windows.reshape(batch, height // 2, width // 2, channels, 2, 2).transpose(0, 1, 4, 2, 5, 3).reshape(shape)


def upsample_forward(x: np.ndarray) -> np.ndarray:
    """Nearest neighbor upsampling by 2 in both spatial directions."""
    return x.repeat(2, axis=1).repeat(2, axis=2)


def upsample_backward(grad: np.ndarray) -> np.ndarray:
    batch, height, width, channels = grad.shape
    return grad.reshape(batch, height // 2, 2, width // 2, 2, channels).sum(axis=(2, 4))
