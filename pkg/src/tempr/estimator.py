"""Scikit-learn style front end: fit on labeled video volumes, predict the
ongoing action from a partially observed prefix."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from . import numkit as nk
from .dataio import DatasetManifest, VideoClip, VideoDataset, clip_to_ratio
from .trainer import RunConfig, sample_batch_volumes, train
from .validation import check_labels, check_ratio, check_video_array


class TemPrClassifier(BaseEstimator, ClassifierMixin):
    """Early action prediction with progressive temporal scales.

    ``fit(X, y)`` takes full videos shaped (N, T, H, W[, C]) with values in
    [0, 1]; ``predict(X)`` sees only the first ceil(rho * T) frames of each
    input. All randomness is controlled by ``random_state``.
    """

    def __init__(self, n_scales: int = 4, strategy: str = "increasing", frames: int = 8,
                 channels: int = 64, grid: tuple[int, int, int] = (8, 4, 4),
                 latent_dim: int = 64, layers: int = 2, heads_cross: int = 4, heads_self: int = 8,
                 pe_bands: int = 4, share_towers: bool = False, share_classifier: bool = True,
                 share_latent: bool = True, tower: str = "attention", agg: str = "adaptive",
                 gate_theta: float = 0.1, rho: float = 0.5, train_rho_list: list[float] | None = None,
                 epochs: int = 30, base_lr: float = 1e-2, beta_lr: float = 1e-3,
                 weight_decay: float = 1e-5, batch_size: int = 8, random_state: int = 0):
        self.n_scales = n_scales
        self.strategy = strategy
        self.frames = frames
        self.channels = channels
        self.grid = grid
        self.latent_dim = latent_dim
        self.layers = layers
        self.heads_cross = heads_cross
        self.heads_self = heads_self
        self.pe_bands = pe_bands
        self.share_towers = share_towers
        self.share_classifier = share_classifier
        self.share_latent = share_latent
        self.tower = tower
        self.agg = agg
        self.gate_theta = gate_theta
        self.rho = rho
        self.train_rho_list = train_rho_list
        self.epochs = epochs
        self.base_lr = base_lr
        self.beta_lr = beta_lr
        self.weight_decay = weight_decay
        self.batch_size = batch_size
        self.random_state = random_state

    def _run_config(self) -> RunConfig:
        check_ratio(self.rho)
        return RunConfig(
            rho_list=list(self.train_rho_list) if self.train_rho_list else [self.rho],
            n_scales=self.n_scales, strategy=self.strategy, frames=self.frames,
            channels=self.channels, grid=tuple(self.grid), latent_dim=self.latent_dim,
            layers=self.layers, heads_cross=self.heads_cross, heads_self=self.heads_self,
            pe_bands=self.pe_bands, share_towers=self.share_towers,
            share_classifier=self.share_classifier, share_latent=self.share_latent,
            tower=self.tower, agg=self.agg, gate_theta=self.gate_theta,
            epochs=self.epochs, base_lr=self.base_lr, beta_lr=self.beta_lr,
            weight_decay=self.weight_decay, batch_size=self.batch_size, seed=self.random_state,
        )

    def fit(self, X, y):
        X = check_video_array(X)
        y = check_labels(y, len(X))
        self.classes_, y_idx = np.unique(y, return_inverse=True)
        _, T, H, W, C = X.shape
        clips = [
            VideoClip(frames=X[i].astype(np.float32), label=int(y_idx[i]), id=f"fit_{i:05d}")
            for i in range(len(X))
        ]
        manifest = DatasetManifest(
            class_names=[str(c) for c in self.classes_], clip_count=len(clips),
            dims=(T, H, W, C), seed=self.random_state,
            splits={c.id: "train" for c in clips}, clip_ids=[c.id for c in clips],
        )
        cfg = self._run_config()
        self.model_, self.record_ = train(cfg, VideoDataset(clips=clips, manifest=manifest))
        self.config_ = cfg
        return self

    def predict_proba(self, X, rho: float | None = None) -> np.ndarray:
        if not hasattr(self, "model_"):
            raise RuntimeError("call fit before predict")
        X = check_video_array(X)
        rho = check_ratio(self.rho if rho is None else rho)
        clips = [VideoClip(frames=x.astype(np.float32), label=0, id=f"pred_{i:05d}")
                 for i, x in enumerate(X)]
        probs = []
        for lo in range(0, len(clips), 16):
            batch = clips[lo : lo + 16]
            volumes = sample_batch_volumes(batch, [rho] * len(batch), self.config_, (0xE, 0, 0, lo))
            with nk.no_grad():
                _, aggregated = self.model_.forward(volumes, training=False)
            probs.append(aggregated.data)
        return np.concatenate(probs, axis=0)

    def predict(self, X, rho: float | None = None) -> np.ndarray:
        probs = self.predict_proba(X, rho=rho)
        return self.classes_[np.argmax(probs, axis=-1)]
