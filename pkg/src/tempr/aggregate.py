"""Aggregation of per-tower class distributions.

The adaptive aggregate blends two weightings of the n tower predictions:
agreement (eICW: exponential of the inverse Dice-Sorensen similarity to the
mean distribution) and confidence (eM: per-class softmax across towers). A
learned scalar beta in (0, 1) sets the blend; the result is renormalized to a
probability vector before the loss. A set of fixed ablation variants (avg,
softmax, top, gate, icw, weighted, weighted_theta) shares the same interface.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numkit as nk
from .errors import ConfigError

VARIANTS = ("adaptive", "avg", "softmax", "top", "gate", "icw", "eicw", "em",
            "weighted", "weighted_theta")

_DSC_INV_CAP = 1e6


@dataclass
class BetaParam:
    """beta = sigmoid(raw); raw=0 gives the 0.5 initialization."""

    raw: nk.Tensor

    @classmethod
    def init(cls, beta0: float = 0.5) -> "BetaParam":
        if not (0.0 < beta0 < 1.0):
            raise ConfigError("beta must start inside (0, 1)")
        return cls(raw=nk.parameter(np.log(beta0 / (1.0 - beta0))))

    @property
    def value(self) -> float:
        return float(1.0 / (1.0 + np.exp(-self.raw.data)))

    def beta(self) -> nk.Tensor:
        return nk.sigmoid(self.raw)


@dataclass
class PredictionSet:
    """Per-tower distributions plus the aggregate, as plain arrays for reporting."""

    y_hats: np.ndarray  # (n, N, K)
    mean: np.ndarray  # (N, K)
    weights_eicw: np.ndarray  # (n, N)
    weights_em: np.ndarray  # (n, N, K)
    aggregated: np.ndarray  # (N, K)


def dsc(a: nk.Tensor, b: nk.Tensor) -> nk.Tensor:
    """Dice-Sorensen coefficient along the class axis; 1 for identical inputs."""
    num = 2.0 * nk.sum_(a * b, axis=-1)
    den = nk.sum_(a * a, axis=-1) + nk.sum_(b * b, axis=-1)
    if np.any(den.data == 0.0):
        raise ConfigError("DSC undefined for all-zero vectors")
    return num / den


def _stack(y_hats: list[nk.Tensor]) -> nk.Tensor:
    if len(y_hats) < 1:
        raise ConfigError("need at least one tower prediction")
    return nk.stack(y_hats, axis=0)  # (n, ..., K)


def eicw_weights(y_hats: list[nk.Tensor]) -> nk.Tensor:
    """Agreement weights over towers, shape (n, ...); columns sum to 1."""
    stacked = _stack(y_hats)
    ybar = nk.mean(stacked, axis=0)
    inv = [nk.clip_max(nk.power(dsc(y, ybar), -1.0), _DSC_INV_CAP) for y in y_hats]
    return nk.softmax(nk.stack(inv, axis=0), axis=0)


def eicw(y_hats: list[nk.Tensor]) -> tuple[nk.Tensor, nk.Tensor]:
    """Returns (weights (n, ...), summed contribution Sum_i w_i * y_i)."""
    w = eicw_weights(y_hats)
    stacked = _stack(y_hats)
    shape = w.shape + (1,)
    contrib = nk.sum_(nk.reshape(w, shape) * stacked, axis=0)
    return w, contrib


def em(y_hats: list[nk.Tensor]) -> tuple[nk.Tensor, nk.Tensor]:
    """Confidence weights: per-class softmax across towers. Returns
    (weights (n, ..., K), summed contribution)."""
    stacked = _stack(y_hats)
    w = nk.softmax(stacked, axis=0)
    contrib = nk.sum_(w * stacked, axis=0)
    return w, contrib


def _renormalize(agg: nk.Tensor) -> nk.Tensor:
    return agg / nk.sum_(agg, axis=-1, keepdims=True)


def adaptive(y_hats: list[nk.Tensor], beta: BetaParam) -> nk.Tensor:
    """beta-blend of the eICW and eM contributions, renormalized to sum to 1."""
    b = beta.beta()
    _, agreement = eicw(y_hats)
    _, confidence = em(y_hats)
    return _renormalize(b * agreement + (1.0 - b) * confidence)


def variant(name: str, y_hats: list[nk.Tensor], theta: float | None = None,
            weights: nk.Tensor | None = None, training: bool = False) -> nk.Tensor:
    """Fixed aggregation variants; all outputs are renormalized distributions."""
    n = len(y_hats)
    stacked = _stack(y_hats)
    if name == "avg":
        return _renormalize(nk.mean(stacked, axis=0))
    if name in ("softmax", "em"):
        return _renormalize(em(y_hats)[1])
    if name == "eicw":
        return _renormalize(eicw(y_hats)[1])
    if name == "icw":
        ybar = nk.mean(stacked, axis=0)
        inv = [nk.clip_max(nk.power(dsc(y, ybar), -1.0), _DSC_INV_CAP) for y in y_hats]
        inv_stack = nk.stack(inv, axis=0)
        w = inv_stack / nk.sum_(inv_stack, axis=0, keepdims=True)
        return _renormalize(nk.sum_(nk.reshape(w, w.shape + (1,)) * stacked, axis=0))
    if name == "top":
        conf = nk.stack([nk.max_(y, axis=-1) for y in y_hats], axis=0)  # (n, ...)
        if training:
            w = nk.softmax(conf, axis=0)
            return _renormalize(nk.sum_(nk.reshape(w, w.shape + (1,)) * stacked, axis=0))
        pick = conf.data.argmax(axis=0)
        out = np.take_along_axis(stacked.data, pick[None, ..., None], axis=0)[0]
        return nk.tensor(out)
    if name == "gate":
        if theta is None:
            raise ConfigError("gate aggregation needs theta")
        conf = np.stack([y.data.max(axis=-1) for y in y_hats], axis=0)  # (n, ...)
        mask = (conf >= theta).astype(np.float64)
        # rows where no tower qualifies fall back to plain averaging
        mask = np.where(np.any(mask > 0, axis=0, keepdims=True), mask, 1.0)
        m = nk.tensor(mask[..., None])
        summed = nk.sum_(m * stacked, axis=0)
        counts = nk.tensor(mask.sum(axis=0)[..., None])
        return _renormalize(summed / counts)
    if name == "weighted":
        if weights is None:
            raise ConfigError("weighted aggregation needs the learned per-tower weights")
        w = nk.softmax(weights, axis=0)  # (n,)
        w = nk.reshape(w, (n,) + (1,) * (stacked.ndim - 1))
        return _renormalize(nk.sum_(w * stacked, axis=0))
    if name == "weighted_theta":
        if weights is None:
            raise ConfigError("weighted_theta aggregation needs the learned per-tower weights")
        th = 1.0 / (2.0 * n) if theta is None else theta
        w = nk.softmax(weights, axis=0) * (1.0 - n * th) + th  # floor every weight at theta
        w = nk.reshape(w, (n,) + (1,) * (stacked.ndim - 1))
        return _renormalize(nk.sum_(w * stacked, axis=0))
    raise ConfigError(f"unknown aggregation variant {name!r}")


def eap_label(aggregated: np.ndarray | nk.Tensor) -> np.ndarray:
    """argmax class per row; ties break to the lowest index."""
    data = aggregated.data if isinstance(aggregated, nk.Tensor) else np.asarray(aggregated)
    return np.argmax(data, axis=-1)


def prediction_set(y_hats_np: np.ndarray, beta_value: float) -> PredictionSet:
    """Evaluation-side summary from stacked (n, N, K) tower outputs."""
    y_hats = [nk.tensor(y) for y in y_hats_np]
    with nk.no_grad():
        w_eicw, agree = eicw(y_hats)
        w_em, conf = em(y_hats)
        agg = _renormalize(beta_value * agree + (1.0 - beta_value) * conf)
    return PredictionSet(
        y_hats=np.asarray(y_hats_np),
        mean=np.mean(y_hats_np, axis=0),
        weights_eicw=w_eicw.data,
        weights_em=w_em.data,
        aggregated=agg.data,
    )
