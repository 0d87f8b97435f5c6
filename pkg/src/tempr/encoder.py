"""Shared spatio-temporal feature encoder and adaptive average pooling.

The encoder is a small stack of three 3x3x3 convolutions (spatial stride 2 on
the first two) with GELU nonlinearities, pooled down to a fixed (t, h, w) grid
so tower inputs have the same token count regardless of frame size.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numkit as nk
from .errors import ConfigError


def _pool_matrix(src: int, dst: int) -> np.ndarray:
    """Row a averages source cells [floor(a*src/dst), ceil((a+1)*src/dst))."""
    m = np.zeros((dst, src))
    for a in range(dst):
        lo = (a * src) // dst
        hi = -((-(a + 1) * src) // dst)
        m[a, lo:hi] = 1.0 / (hi - lo)
    return m


def _pool_axis(x: nk.Tensor, axis: int, dst: int) -> nk.Tensor:
    src = x.shape[axis]
    if src == dst:
        return x
    mt = nk.tensor(_pool_matrix(src, dst).T)
    axis = axis % x.ndim
    perm = [i for i in range(x.ndim) if i != axis] + [axis]
    y = nk.matmul(nk.transpose(x, perm), mt)
    inv = list(np.argsort(perm))
    return nk.transpose(y, inv)


def adaptive_avg_pool(x: nk.Tensor, target: tuple[int, int, int]) -> nk.Tensor:
    """Pool (..., t', h', w') down (or up) to (..., t, h, w)."""
    t, h, w = target
    if min(target) < 1:
        raise ConfigError(f"bad pool target {target}")
    x = _pool_axis(x, -3, t)
    x = _pool_axis(x, -2, h)
    x = _pool_axis(x, -1, w)
    return x


@dataclass
class EncoderConfig:
    in_channels: int = 1
    channels: int = 64
    grid: tuple[int, int, int] = (8, 4, 4)  # pooled (t, h, w)
    kind: str = "toy3d"


class Encoder3D:
    """Three conv3d blocks, widths in->16->32->channels, then adaptive pooling."""

    def __init__(self, config: EncoderConfig, rng: np.random.Generator):
        if config.kind != "toy3d":
            raise ConfigError(f"unknown encoder kind {config.kind!r}")
        self.config = config
        widths = [config.in_channels, 16, 32, config.channels]
        self.weights = []
        self.biases = []
        for cin, cout in zip(widths[:-1], widths[1:]):
            fan_in = cin * 27
            self.weights.append(nk.parameter(rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(cout, cin, 3, 3, 3))))
            self.biases.append(nk.parameter(np.zeros(cout)))
        self.strides = [(1, 2, 2), (1, 2, 2), (1, 1, 1)]

    def parameters(self) -> list[nk.Tensor]:
        return [*self.weights, *self.biases]

    def forward(self, x: np.ndarray | nk.Tensor) -> nk.Tensor:
        """(N, F, H, W, Cch) frame volumes -> (N, C, t, h, w) pooled features."""
        if isinstance(x, np.ndarray):
            x = nk.tensor(np.moveaxis(x, -1, 1))  # -> (N, Cch, F, H, W)
        if x.ndim != 5 or x.shape[1] != self.config.in_channels:
            raise ConfigError(f"encoder expects (N, {self.config.in_channels}, F, H, W), got {x.shape}")
        for w, b, s in zip(self.weights, self.biases, self.strides):
            x = nk.gelu(nk.conv3d(x, w, b, stride=s, padding=(1, 1, 1)))
        return adaptive_avg_pool(x, self.config.grid)
