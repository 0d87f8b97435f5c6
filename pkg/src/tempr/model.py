"""The full temporal-progressive network: shared encoder, per-scale towers,
latent array(s), classifier(s), and the aggregation head."""

from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import aggregate as agg
from . import numkit as nk
from .encoder import Encoder3D, EncoderConfig
from .errors import ConfigError
from .tower import Classifier, TowerConfig, fourier_pe, init_latent, make_tower


@dataclass
class ModelConfig:
    num_classes: int = 4
    n_scales: int = 4
    strategy: str = "increasing"
    frames: int = 8  # F, sampled per scale
    agg: str = "adaptive"
    gate_theta: float = 0.1
    seed: int = 0
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    tower: TowerConfig = field(default_factory=TowerConfig)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        d["encoder"] = EncoderConfig(**{**d.get("encoder", {}), "grid": tuple(d.get("encoder", {}).get("grid", (8, 4, 4)))})
        d["tower"] = TowerConfig(**d.get("tower", {}))
        return cls(**d)


class TemPrModel:
    def __init__(self, config: ModelConfig):
        tc = config.tower.validate()
        if config.encoder.channels != tc.channels:
            raise ConfigError("encoder output width and tower width must agree")
        if config.agg not in agg.VARIANTS:
            raise ConfigError(f"unknown aggregation {config.agg!r}")
        thw = int(np.prod(config.encoder.grid))
        if tc.latent_dim >= thw:
            warnings.warn(
                f"latent_dim {tc.latent_dim} is not smaller than the {thw} grid tokens; "
                "the bottleneck no longer compresses", stacklevel=2)
        self.config = config
        n = config.n_scales
        rng = np.random.default_rng(config.seed)

        self.encoder = Encoder3D(config.encoder, rng)
        if tc.share_towers:
            shared = make_tower(tc, rng)
            self.towers = [shared] * n
        else:
            self.towers = [make_tower(tc, rng) for _ in range(n)]
        if tc.share_latent:
            u = init_latent(tc.latent_dim, tc.channels, rng)
            self.latents = [u] * n
        else:
            self.latents = [init_latent(tc.latent_dim, tc.channels, rng) for _ in range(n)]
        if tc.share_classifier:
            head = Classifier(tc.channels, config.num_classes, rng)
            self.classifiers = [head] * n
        else:
            self.classifiers = [Classifier(tc.channels, config.num_classes, rng) for _ in range(n)]
        self.beta = agg.BetaParam.init(0.5)
        self.agg_weights = nk.parameter(np.zeros(n))  # used by the weighted variants
        self.pe = [fourier_pe(i, n, config.encoder.grid, tc.pe_bands) for i in range(n)]

    # -- parameter bookkeeping ------------------------------------------

    def parameters(self) -> list[nk.Tensor]:
        """Model parameters excluding beta, deduplicated with order preserved."""
        seen: set[int] = set()
        out: list[nk.Tensor] = []
        groups = [self.encoder.parameters()]
        groups += [t.parameters() for t in self.towers]
        groups.append(list(self.latents))
        groups += [c.parameters() for c in self.classifiers]
        if self.config.agg in ("weighted", "weighted_theta"):
            groups.append([self.agg_weights])
        for group in groups:
            for p in group:
                if id(p) not in seen:
                    seen.add(id(p))
                    out.append(p)
        return out

    def num_parameters(self) -> int:
        return sum(p.data.size for p in self.parameters())

    def latent_parameter_bytes(self) -> int:
        seen = {id(u): u for u in self.latents}
        return sum(u.data.size * 8 for u in seen.values())

    # -- forward ---------------------------------------------------------

    def tower_outputs(self, volumes: list[np.ndarray]) -> list[nk.Tensor]:
        """Per-scale class distributions; volumes are n arrays (N, F, H, W, Cch)."""
        if len(volumes) != self.config.n_scales:
            raise ConfigError(f"expected {self.config.n_scales} scale volumes, got {len(volumes)}")
        y_hats = []
        for i, vol in enumerate(volumes):
            z = self.encoder.forward(np.asarray(vol, dtype=np.float64))  # (N, C, t, h, w)
            n_batch, c = z.shape[0], z.shape[1]
            tokens = nk.transpose(nk.reshape(z, (n_batch, c, -1)), (0, 2, 1))  # (N, thw, C)
            z_hat = self.towers[i](tokens, self.latents[i], self.pe[i])
            _, y_hat = self.classifiers[i](z_hat)
            y_hats.append(y_hat)
        return y_hats

    def aggregate(self, y_hats: list[nk.Tensor], training: bool = False) -> nk.Tensor:
        if self.config.agg == "adaptive":
            return agg.adaptive(y_hats, self.beta)
        return agg.variant(self.config.agg, y_hats, theta=self.config.gate_theta,
                           weights=self.agg_weights, training=training)

    def forward(self, volumes: list[np.ndarray], training: bool = False) -> tuple[list[nk.Tensor], nk.Tensor]:
        y_hats = self.tower_outputs(volumes)
        return y_hats, self.aggregate(y_hats, training=training)

    def loss(self, aggregated: nk.Tensor, labels: np.ndarray) -> nk.Tensor:
        """Cross-entropy of the aggregated distribution against one-hot targets."""
        onehot = np.zeros(aggregated.shape)
        onehot[np.arange(len(labels)), np.asarray(labels)] = 1.0
        return -nk.mean(nk.sum_(nk.tensor(onehot) * nk.log(aggregated), axis=-1))

    # -- persistence -----------------------------------------------------

    def save(self, path: str | Path) -> None:
        path = str(path)
        if not path.endswith(".npz"):
            path += ".npz"
        params = self.parameters() + [self.beta.raw]
        arrays = {f"p{i:04d}": p.data for i, p in enumerate(params)}
        np.savez(path, **arrays)
        meta = {"config": self.config.to_dict(), "count": len(params)}
        Path(path + ".json").write_text(json.dumps(meta, indent=2, sort_keys=True))

    @classmethod
    def load(cls, path: str | Path) -> "TemPrModel":
        path = str(path)
        if not path.endswith(".npz"):
            path += ".npz"
        meta = json.loads(Path(path + ".json").read_text())
        model = cls(ModelConfig.from_dict(meta["config"]))
        with np.load(path) as data:
            params = model.parameters() + [model.beta.raw]
            if len(params) != meta["count"]:
                raise ConfigError("checkpoint parameter count mismatch")
            for i, p in enumerate(params):
                arr = data[f"p{i:04d}"]
                if arr.shape != p.data.shape:
                    raise ConfigError(f"checkpoint shape mismatch at {i}: {arr.shape} vs {p.data.shape}")
                p.data[...] = arr
        return model
