"""Multi-head scaled dot-product attention with learned Q/K/V/output projections."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import ShapeError, Tensor, matmul, parameter, reshape, softmax, transpose


@dataclass
class AttentionParams:
    wq: Tensor
    wk: Tensor
    wv: Tensor
    wo: Tensor
    bq: Tensor
    bk: Tensor
    bv: Tensor
    bo: Tensor

    def tensors(self) -> list[Tensor]:
        return [self.wq, self.wk, self.wv, self.wo, self.bq, self.bk, self.bv, self.bo]


def init_attention(width: int, rng: np.random.Generator) -> AttentionParams:
    scale = 1.0 / np.sqrt(width)
    mk = lambda: parameter(rng.normal(0.0, scale, size=(width, width)))
    zb = lambda: parameter(np.zeros(width))
    return AttentionParams(wq=mk(), wk=mk(), wv=mk(), wo=mk(), bq=zb(), bk=zb(), bv=zb(), bo=zb())


def _split_heads(x: Tensor, heads: int) -> Tensor:
    # (..., N, D) -> (..., heads, N, D/heads)
    *batch, n, d = x.shape
    x = reshape(x, (*batch, n, heads, d // heads))
    perm = list(range(len(batch))) + [len(batch) + 1, len(batch), len(batch) + 2]
    return transpose(x, perm)


def _merge_heads(x: Tensor) -> Tensor:
    # (..., heads, N, Dh) -> (..., N, heads*Dh)
    *batch, h, n, dh = x.shape
    perm = list(range(len(batch))) + [len(batch) + 1, len(batch), len(batch) + 2]
    return reshape(transpose(x, perm), (*batch, n, h * dh))


def multi_head_attention(q_tokens: Tensor, kv_tokens: Tensor, heads: int, params: AttentionParams) -> Tensor:
    """Attend q_tokens (..., Nq, D) to kv_tokens (..., Nk, D); returns (..., Nq, D).

    Leading batch axes broadcast between the two inputs, so an unbatched
    latent query can attend to a batched key/value set.
    """
    d = q_tokens.shape[-1]
    if d % heads != 0:
        raise ShapeError(f"feature width {d} not divisible by {heads} heads")
    if kv_tokens.shape[-1] != d:
        raise ShapeError("q and kv feature widths differ")
    q = _split_heads(matmul(q_tokens, params.wq) + params.bq, heads)
    k = _split_heads(matmul(kv_tokens, params.wk) + params.bk, heads)
    v = _split_heads(matmul(kv_tokens, params.wv) + params.bv, heads)
    scores = matmul(q, transpose(k, list(range(k.ndim - 2)) + [k.ndim - 1, k.ndim - 2]))
    scores = scores * (1.0 / np.sqrt(d // heads))
    attn = softmax(scores, axis=-1)
    mixed = _merge_heads(matmul(attn, v))
    return matmul(mixed, params.wo) + params.bo


def attention_weights(q_tokens: Tensor, kv_tokens: Tensor, heads: int, params: AttentionParams) -> np.ndarray:
    """Post-softmax attention matrix, for inspection only."""
    d = q_tokens.shape[-1]
    q = _split_heads(matmul(q_tokens, params.wq) + params.bq, heads)
    k = _split_heads(matmul(kv_tokens, params.wk) + params.bk, heads)
    scores = matmul(q, transpose(k, list(range(k.ndim - 2)) + [k.ndim - 1, k.ndim - 2]))
    return softmax(scores * (1.0 / np.sqrt(d // heads)), axis=-1).data
