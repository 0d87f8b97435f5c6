"""End-to-end training, per-ratio evaluation, ablation sweeps, and artifacts.

All randomness (shuffling, per-sample observation ratio, frame sampling) is
drawn from generators seeded off the run seed plus structural indices, so a
given config + seed reproduces bit-identical metrics.
"""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import numkit as nk
from .dataio import VideoClip, VideoDataset, clip_to_ratio
from .errors import ConfigError
from .model import ModelConfig, TemPrModel
from .numkit import AdamW, NumericError, lr_schedule
from .scales import build_scales, gather_inputs, sample_frames

ABLATION_AXES = ("strategy", "aggregation", "share_towers", "share_classifier",
                 "share_latent", "latent_dim", "layers", "tower_kind", "scales_n")

PAPER_DROP_EPOCHS = (14, 32, 44)
PAPER_TOTAL_EPOCHS = 60


@dataclass
class RunConfig:
    dataset: str = ""
    rho_list: list[float] = field(default_factory=lambda: [0.3, 0.5, 0.7, 0.9])
    train_rho: str = "uniform"  # "uniform" over rho_list, or "fixed:<v>"
    n_scales: int = 4
    strategy: str = "increasing"
    frames: int = 8
    channels: int = 64
    grid: tuple[int, int, int] = (8, 4, 4)
    latent_dim: int = 64
    layers: int = 2
    heads_cross: int = 4
    heads_self: int = 8
    pe_bands: int = 4
    share_towers: bool = False
    share_classifier: bool = True
    share_latent: bool = True
    tower: str = "attention"  # attention | mlp4 | mlp8
    agg: str = "adaptive"
    gate_theta: float = 0.1
    epochs: int = 30
    base_lr: float = 1e-2
    beta_lr: float = 1e-3
    weight_decay: float = 1e-5
    drop_epochs: list[int] | None = None  # None: paper drops scaled to `epochs`
    batch_size: int = 8
    seed: int = 0
    out_dir: str = "runs"
    stop_at_train_acc: float | None = None  # early exit once reached

    def validate(self) -> "RunConfig":
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        for r in self.rho_list:
            if not (0.0 < r < 1.0):
                raise ConfigError(f"rho {r} outside (0, 1)")
        if self.train_rho != "uniform" and not self.train_rho.startswith("fixed:"):
            raise ConfigError(f"bad train_rho {self.train_rho!r}")
        return self

    def resolved_drops(self) -> list[int]:
        if self.drop_epochs is not None:
            return sorted(self.drop_epochs)
        return [d * self.epochs // PAPER_TOTAL_EPOCHS for d in PAPER_DROP_EPOCHS]

    def to_model_config(self, num_classes: int, in_channels: int = 1) -> ModelConfig:
        from .encoder import EncoderConfig
        from .tower import TowerConfig

        kind = "attention" if self.tower == "attention" else "mlp"
        depth = {"attention": 8, "mlp4": 4, "mlp8": 8}.get(self.tower)
        if depth is None:
            raise ConfigError(f"unknown tower {self.tower!r}")
        return ModelConfig(
            num_classes=num_classes,
            n_scales=self.n_scales,
            strategy=self.strategy,
            frames=self.frames,
            agg=self.agg,
            gate_theta=self.gate_theta,
            seed=self.seed,
            encoder=EncoderConfig(in_channels=in_channels, channels=self.channels, grid=tuple(self.grid)),
            tower=TowerConfig(
                layers=self.layers, latent_dim=self.latent_dim, channels=self.channels,
                heads_cross=self.heads_cross, heads_self=self.heads_self, pe_bands=self.pe_bands,
                share_towers=self.share_towers, share_classifier=self.share_classifier,
                share_latent=self.share_latent, kind=kind, mlp_depth=depth,
            ),
        )


@dataclass
class MetricsRecord:
    config: dict
    seed: int
    epochs: list[dict] = field(default_factory=list)  # loss/acc/beta/lr per epoch
    eval: dict = field(default_factory=dict)  # str(rho) -> {agg_top1, towers}
    wall_clock: float = 0.0

    def canonical(self) -> dict:
        """Deterministic content only; wall-clock is deliberately excluded."""
        return {"config": self.config, "seed": self.seed, "epochs": self.epochs, "eval": self.eval}

    def canonical_json(self) -> str:
        return json.dumps(self.canonical(), sort_keys=True)

    def beta_trajectory(self) -> list[float]:
        return [e["beta"] for e in self.epochs]


# -- batch assembly --------------------------------------------------------


def sample_batch_volumes(clips: list[VideoClip], rhos: list[float], config: RunConfig,
                         seed_parts: tuple[int, ...]) -> list[np.ndarray]:
    """Per-scale stacked input volumes for a batch of clips."""
    per_scale: list[list[np.ndarray]] = [[] for _ in range(config.n_scales)]
    for j, (clip, rho) in enumerate(zip(clips, rhos)):
        prefix = clip_to_ratio(clip, rho)
        rng = np.random.default_rng([config.seed, 0xF0, *seed_parts, j])
        window_seed = int(rng.integers(0, 2**31))
        scaleset = build_scales(prefix.T_rho, config.n_scales, config.strategy, seed=window_seed)
        # resampled per call; evaluation reaches here with a fixed seed tuple
        scaleset.sampled = [sample_frames(w, config.frames, rng) for w in scaleset.windows]
        vols = gather_inputs(prefix, scaleset)
        for i in range(config.n_scales):
            per_scale[i].append(vols[i])
    return [np.stack(v) for v in per_scale]


def _draw_rhos(config: RunConfig, rng: np.random.Generator, count: int) -> list[float]:
    if config.train_rho.startswith("fixed:"):
        v = float(config.train_rho.split(":", 1)[1])
        return [v] * count
    return [config.rho_list[int(k)] for k in rng.integers(0, len(config.rho_list), size=count)]


# -- training --------------------------------------------------------------


def train(config: RunConfig, dataset: VideoDataset, log=None) -> tuple[TemPrModel, MetricsRecord]:
    config.validate()
    clips = dataset.split("train") or dataset.clips
    if not clips:
        raise ConfigError("empty training split")
    model = TemPrModel(config.to_model_config(dataset.num_classes, in_channels=dataset.manifest.dims[3]))
    opt_model = AdamW(model.parameters(), lr=config.base_lr, weight_decay=config.weight_decay)
    opt_beta = AdamW([model.beta.raw], lr=config.beta_lr, weight_decay=0.0)
    drops = config.resolved_drops()
    record = MetricsRecord(config=_config_dict(config), seed=config.seed)
    shuffle_rng = np.random.default_rng([config.seed, 0x51])
    rho_rng = np.random.default_rng([config.seed, 0x52])
    start = time.monotonic()

    for epoch in range(config.epochs):
        lr = lr_schedule(epoch, config.base_lr, drops)
        beta_lr = lr_schedule(epoch, config.beta_lr, drops)
        opt_model.lr = lr
        opt_beta.lr = beta_lr
        beta_at_start = model.beta.value  # logged pre-update: first entry is the 0.5 init
        order = shuffle_rng.permutation(len(clips))
        losses, correct, total = [], 0, 0
        for b, lo in enumerate(range(0, len(order), config.batch_size)):
            batch = [clips[i] for i in order[lo : lo + config.batch_size]]
            rhos = _draw_rhos(config, rho_rng, len(batch))
            volumes = sample_batch_volumes(batch, rhos, config, (1, epoch, b))
            labels = np.array([c.label for c in batch])
            _, aggregated = model.forward(volumes, training=True)
            loss = model.loss(aggregated, labels)
            if not np.isfinite(loss.item()):
                norms = {i: float(np.linalg.norm(p.data)) for i, p in enumerate(model.parameters()[:4])}
                raise NumericError(f"non-finite loss at epoch {epoch} batch {b}; head param norms {norms}")
            opt_model.zero_grad()
            opt_beta.zero_grad()
            loss.backward()
            opt_model.step()
            opt_beta.step()
            losses.append(loss.item())
            correct += int(np.sum(np.argmax(aggregated.data, axis=-1) == labels))
            total += len(batch)
        entry = {
            "epoch": epoch,
            "loss": float(np.mean(losses)),
            "acc": correct / total,
            "beta": beta_at_start,
            "lr": lr,
        }
        record.epochs.append(entry)
        if log:
            log(f"epoch {epoch:3d}  loss {entry['loss']:.4f}  acc {entry['acc']:.3f}  "
                f"beta {entry['beta']:.3f}  lr {lr:g}")
        if config.stop_at_train_acc is not None and entry["acc"] >= config.stop_at_train_acc:
            break
    record.wall_clock = time.monotonic() - start
    return model, record


# -- evaluation ------------------------------------------------------------


def evaluate(model: TemPrModel, clips: list[VideoClip], rho_list: list[float],
             config: RunConfig, eval_seed: int = 0, batch_size: int = 16) -> dict:
    """Per-rho aggregated and per-tower top-1; frame sampling is seed-fixed."""
    if not clips:
        raise ConfigError("empty evaluation split")
    results: dict[str, dict] = {}
    for ri, rho in enumerate(rho_list):
        agg_hits = 0
        tower_hits = np.zeros(model.config.n_scales, dtype=int)
        for lo in range(0, len(clips), batch_size):
            batch = clips[lo : lo + batch_size]
            volumes = sample_batch_volumes(batch, [rho] * len(batch), config,
                                           (0xE, eval_seed, ri, lo))
            labels = np.array([c.label for c in batch])
            with nk.no_grad():
                y_hats, aggregated = model.forward(volumes, training=False)
            agg_hits += int(np.sum(np.argmax(aggregated.data, axis=-1) == labels))
            for i, y in enumerate(y_hats):
                tower_hits[i] += int(np.sum(np.argmax(y.data, axis=-1) == labels))
        results[f"{rho:g}"] = {
            "agg_top1": agg_hits / len(clips),
            "towers": [int(h) / len(clips) for h in tower_hits],
        }
    return results


# -- ablation and reporting ------------------------------------------------


@dataclass
class ResultRow:
    axis_value: str
    rho: float
    agg_top1: float
    tower_top1: list[float]
    seed: int


def csv_header(n_scales: int) -> str:
    towers = ",".join(f"tower_{i}_top1" for i in range(1, n_scales + 1))
    return f"axis_value,rho,agg_top1,{towers},seed"


def rows_from_eval(axis_value: str, eval_table: dict, seed: int) -> list[ResultRow]:
    rows = []
    for rho_key in sorted(eval_table, key=float):
        e = eval_table[rho_key]
        rows.append(ResultRow(axis_value=axis_value, rho=float(rho_key),
                              agg_top1=e["agg_top1"], tower_top1=list(e["towers"]), seed=seed))
    return rows


def emit_csv(rows: list[ResultRow], n_scales: int) -> str:
    buf = io.StringIO()
    buf.write(csv_header(n_scales) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    for r in rows:
        towers = list(r.tower_top1) + [""] * (n_scales - len(r.tower_top1))
        writer.writerow([r.axis_value, repr(r.rho), repr(r.agg_top1),
                         *[repr(t) if t != "" else "" for t in towers], r.seed])
    return buf.getvalue()


def parse_csv(text: str) -> list[ResultRow]:
    lines = text.splitlines()
    if not lines:
        return []
    rows = []
    for rec in csv.reader(lines[1:]):
        if not rec:
            continue
        axis_value, rho, agg_top1, *rest = rec
        seed = int(rest[-1])
        towers = [float(t) for t in rest[:-1] if t != ""]
        rows.append(ResultRow(axis_value=axis_value, rho=float(rho), agg_top1=float(agg_top1),
                              tower_top1=towers, seed=seed))
    return rows


def apply_axis(config: RunConfig, axis: str, value) -> RunConfig:
    cfg = RunConfig(**{**asdict(config)})
    if axis == "strategy":
        cfg.strategy = str(value)
    elif axis == "aggregation":
        cfg.agg = str(value)
    elif axis == "share_towers":
        cfg.share_towers = _to_bool(value)
    elif axis == "share_classifier":
        cfg.share_classifier = _to_bool(value)
    elif axis == "share_latent":
        cfg.share_latent = _to_bool(value)
    elif axis == "latent_dim":
        cfg.latent_dim = int(value)
    elif axis == "layers":
        cfg.layers = int(value)
    elif axis == "tower_kind":
        cfg.tower = str(value)
    elif axis == "scales_n":
        cfg.n_scales = int(value)
    else:
        raise ConfigError(f"unknown ablation axis {axis!r}; choose from {ABLATION_AXES}")
    return cfg


def _to_bool(v) -> bool:
    if isinstance(v, bool):
        return v
    return str(v).lower() in ("1", "true", "on", "yes")


def ablate(axis: str, values: list, base: RunConfig, dataset: VideoDataset,
           seeds: list[int] | None = None, log=None) -> tuple[list[ResultRow], list[MetricsRecord], list[dict]]:
    """One training run per (value, seed); returns table rows plus extras
    (records and per-run parameter accounting)."""
    seeds = seeds or [base.seed]
    rows: list[ResultRow] = []
    records: list[MetricsRecord] = []
    accounting: list[dict] = []
    for value in values:
        for seed in seeds:
            cfg = apply_axis(base, axis, value)
            cfg.seed = seed
            model, record = train(cfg, dataset, log=log)
            val_clips = dataset.split("val") or dataset.clips
            table = evaluate(model, val_clips, cfg.rho_list, cfg)
            record.eval = table
            rows.extend(rows_from_eval(str(value), table, seed))
            records.append(record)
            accounting.append({
                "axis_value": str(value),
                "seed": seed,
                "num_parameters": model.num_parameters(),
                "latent_parameter_bytes": model.latent_parameter_bytes(),
            })
            if log:
                log(f"{axis}={value} seed={seed}: " + ", ".join(
                    f"rho {k}: {v['agg_top1']:.3f}" for k, v in sorted(table.items(), key=lambda kv: float(kv[0]))))
    return rows, records, accounting


def report(records: list[MetricsRecord], rows: list[ResultRow], n_scales: int,
           out_prefix: str | Path) -> tuple[Path, Path]:
    """Write the CSV table and a JSON mirror carrying configs and beta curves."""
    out_prefix = Path(out_prefix)
    out_prefix.parent.mkdir(parents=True, exist_ok=True)
    csv_path = Path(str(out_prefix) + ".csv")
    json_path = Path(str(out_prefix) + ".json")
    csv_path.write_text(emit_csv(rows, n_scales))
    payload = {
        "rows": [asdict(r) for r in rows],
        "records": [
            {**rec.canonical(), "beta_trajectory": rec.beta_trajectory(), "wall_clock": rec.wall_clock}
            for rec in records
        ],
    }
    json_path.write_text(json.dumps(payload, indent=2, sort_keys=True))
    return csv_path, json_path


def _config_dict(config: RunConfig) -> dict:
    d = asdict(config)
    d["grid"] = list(d["grid"])
    return d
