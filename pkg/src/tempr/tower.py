"""Per-scale attention towers: Fourier positional embeddings, a cross-attention
latent bottleneck block, a stack of self-attention blocks, the shared linear
classifier, and an MLP-only tower baseline.

Each attention tower maps a pooled feature grid to class probabilities through
a small learned latent array: the latent queries attend once to the grid
tokens (cross block), then refine among themselves (self blocks)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numkit as nk
from .errors import ConfigError


@dataclass
class TowerConfig:
    layers: int = 2  # self-attention blocks L
    latent_dim: int = 64  # latent slots d
    channels: int = 64  # feature width C
    heads_cross: int = 4
    heads_self: int = 8
    pe_bands: int = 4
    share_towers: bool = False
    share_classifier: bool = True
    share_latent: bool = True
    kind: str = "attention"  # attention | mlp
    mlp_depth: int = 8  # used when kind == "mlp"

    def validate(self) -> "TowerConfig":
        if self.kind == "attention" and self.layers < 1:
            raise ConfigError("need at least one self-attention block")
        if self.channels % self.heads_cross or self.channels % self.heads_self:
            raise ConfigError(f"channels {self.channels} must divide by both head counts")
        if self.kind == "mlp" and self.mlp_depth not in (4, 8):
            raise ConfigError("mlp tower depth must be 4 or 8")
        if self.kind not in ("attention", "mlp"):
            raise ConfigError(f"unknown tower kind {self.kind!r}")
        return self


def fourier_pe(scale_index: int, n_scales: int, grid: tuple[int, int, int], bands: int) -> np.ndarray:
    """Positional features for every grid cell of one scale, shape (thw, 4*(1+2B)).

    Per coordinate p (scale index i/n, then t, h, w mapped to [-1, 1]) the
    features are [p, sin(pi f_k p), cos(pi f_k p)] over B log-spaced
    frequencies f_k."""
    if bands < 1:
        raise ConfigError("need at least one Fourier band")
    t, h, w = grid
    freqs = np.geomspace(1.0, float(max(bands, 1)), bands)
    coords_t = np.linspace(-1.0, 1.0, t) if t > 1 else np.zeros(1)
    coords_h = np.linspace(-1.0, 1.0, h) if h > 1 else np.zeros(1)
    coords_w = np.linspace(-1.0, 1.0, w) if w > 1 else np.zeros(1)
    scale_coord = (scale_index + 1) / n_scales
    tt, hh, ww = np.meshgrid(coords_t, coords_h, coords_w, indexing="ij")
    rows = []
    for p in (np.full(t * h * w, scale_coord), tt.ravel(), hh.ravel(), ww.ravel()):
        feats = [p[:, None]]
        for f in freqs:
            feats.append(np.sin(np.pi * f * p)[:, None])
            feats.append(np.cos(np.pi * f * p)[:, None])
        rows.append(np.concatenate(feats, axis=1))
    return np.concatenate(rows, axis=1)


def pe_channels(bands: int) -> int:
    return 4 * (1 + 2 * bands)


class Linear:
    def __init__(self, din: int, dout: int, rng: np.random.Generator):
        self.w = nk.parameter(rng.normal(0.0, 1.0 / np.sqrt(din), size=(din, dout)))
        self.b = nk.parameter(np.zeros(dout))

    def __call__(self, x: nk.Tensor) -> nk.Tensor:
        return nk.matmul(x, self.w) + self.b

    def parameters(self) -> list[nk.Tensor]:
        return [self.w, self.b]


class LayerNorm:
    def __init__(self, width: int):
        self.gamma = nk.parameter(np.ones(width))
        self.beta = nk.parameter(np.zeros(width))

    def __call__(self, x: nk.Tensor) -> nk.Tensor:
        return nk.layernorm(x, self.gamma, self.beta)

    def parameters(self) -> list[nk.Tensor]:
        return [self.gamma, self.beta]


class MLP:
    """Two-layer GELU MLP, hidden width 2x, as used inside the MAB blocks."""

    def __init__(self, width: int, rng: np.random.Generator):
        self.fc1 = Linear(width, 2 * width, rng)
        self.fc2 = Linear(2 * width, width, rng)

    def __call__(self, x: nk.Tensor) -> nk.Tensor:
        return self.fc2(nk.gelu(self.fc1(x)))

    def parameters(self) -> list[nk.Tensor]:
        return [*self.fc1.parameters(), *self.fc2.parameters()]


class CrossMAB:
    """Pre-norm residual cross-attention block: latent queries, grid keys/values."""

    def __init__(self, channels: int, heads: int, rng: np.random.Generator):
        self.heads = heads
        self.ln_q = LayerNorm(channels)
        self.ln_kv = LayerNorm(channels)
        self.attn = nk.init_attention(channels, rng)
        self.ln_mid = LayerNorm(channels)
        self.mlp = MLP(channels, rng)

    def __call__(self, u: nk.Tensor, z_tokens: nk.Tensor) -> nk.Tensor:
        if z_tokens.shape[-2] < 1:
            raise ConfigError("cross attention needs at least one key/value token")
        h = nk.multi_head_attention(self.ln_q(u), self.ln_kv(z_tokens), self.heads, self.attn) + u
        return self.mlp(self.ln_mid(h)) + h

    def parameters(self) -> list[nk.Tensor]:
        return [*self.ln_q.parameters(), *self.ln_kv.parameters(), *self.attn.tensors(),
                *self.ln_mid.parameters(), *self.mlp.parameters()]


class SelfMAB:
    """Pre-norm residual self-attention block over the latent slots."""

    def __init__(self, channels: int, heads: int, rng: np.random.Generator):
        self.heads = heads
        self.ln1 = LayerNorm(channels)
        self.attn = nk.init_attention(channels, rng)
        self.ln2 = LayerNorm(channels)
        self.mlp = MLP(channels, rng)

    def __call__(self, z: nk.Tensor) -> nk.Tensor:
        zn = self.ln1(z)
        h = nk.multi_head_attention(zn, zn, self.heads, self.attn) + z
        return self.mlp(self.ln2(h)) + h

    def parameters(self) -> list[nk.Tensor]:
        return [*self.ln1.parameters(), *self.attn.tensors(), *self.ln2.parameters(), *self.mlp.parameters()]


class AttentionTower:
    def __init__(self, config: TowerConfig, rng: np.random.Generator):
        c = config.channels
        self.config = config
        self.pe_proj = Linear(c + pe_channels(config.pe_bands), c, rng)
        self.cross = CrossMAB(c, config.heads_cross, rng)
        self.blocks = [SelfMAB(c, config.heads_self, rng) for _ in range(config.layers)]

    def __call__(self, z_tokens: nk.Tensor, u: nk.Tensor, pe: np.ndarray) -> nk.Tensor:
        """z_tokens (N, thw, C), u (d, C), pe (thw, PEch) -> (N, d, C)."""
        n_batch = z_tokens.shape[0]
        pe_b = nk.tensor(np.broadcast_to(pe, (n_batch, *pe.shape)))
        z = self.pe_proj(nk.concat([z_tokens, pe_b], axis=-1))
        z_hat = self.cross(u, z)
        for block in self.blocks:
            z_hat = block(z_hat)
        return z_hat

    def parameters(self) -> list[nk.Tensor]:
        out = [*self.pe_proj.parameters(), *self.cross.parameters()]
        for b in self.blocks:
            out.extend(b.parameters())
        return out


class MLPTower:
    """Baseline: mean-pool grid tokens, run residual MLP blocks, broadcast to d slots."""

    def __init__(self, config: TowerConfig, rng: np.random.Generator):
        c = config.channels
        self.config = config
        self.pe_proj = Linear(c + pe_channels(config.pe_bands), c, rng)
        self.blocks = [MLP(c, rng) for _ in range(config.mlp_depth)]

    def __call__(self, z_tokens: nk.Tensor, u: nk.Tensor, pe: np.ndarray) -> nk.Tensor:
        n_batch = z_tokens.shape[0]
        pe_b = nk.tensor(np.broadcast_to(pe, (n_batch, *pe.shape)))
        z = self.pe_proj(nk.concat([z_tokens, pe_b], axis=-1))
        x = nk.mean(z, axis=1, keepdims=True)  # (N, 1, C)
        for block in self.blocks:
            x = block(x) + x
        ones = nk.tensor(np.ones((self.config.latent_dim, 1)))
        return nk.matmul(ones, x)  # (N, d, C)

    def parameters(self) -> list[nk.Tensor]:
        out = list(self.pe_proj.parameters())
        for b in self.blocks:
            out.extend(b.parameters())
        return out


def make_tower(config: TowerConfig, rng: np.random.Generator):
    config.validate()
    if config.kind == "attention":
        return AttentionTower(config, rng)
    return MLPTower(config, rng)


class Classifier:
    """Mean-pool the latent slots, then one linear map to class logits."""

    def __init__(self, channels: int, num_classes: int, rng: np.random.Generator):
        self.fc = Linear(channels, num_classes, rng)

    def __call__(self, z_hat: nk.Tensor) -> tuple[nk.Tensor, nk.Tensor]:
        pooled = nk.mean(z_hat, axis=-2)  # (N, C)
        logits = self.fc(pooled)
        return logits, nk.softmax(logits, axis=-1)

    def parameters(self) -> list[nk.Tensor]:
        return self.fc.parameters()


def init_latent(latent_dim: int, channels: int, rng: np.random.Generator) -> nk.Tensor:
    """Learned latent array: d slots of width C."""
    return nk.parameter(rng.normal(0.0, 0.02, size=(latent_dim, channels)))
