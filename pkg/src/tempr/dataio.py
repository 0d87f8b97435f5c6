"""Synthetic labeled videos, the TPRV on-disk format, and observation-ratio clipping.

A clip's class is defined jointly by an early cue (a distinctive sprite shape,
sharp only over the first quarter of the clip before morphing into a generic
blob) and a late cue (the sprite's motion pattern over the whole clip). Fine
temporal scales therefore carry appearance information that coarse scales
undersample, and vice versa for motion.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import ConfigError, FormatError

TPRV_MAGIC = b"TPRV"
TPRV_VERSION = 1


@dataclass
class VideoClip:
    frames: np.ndarray  # (T, H, W, Cch) float32 in [0, 1]
    label: int
    id: str

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]


@dataclass
class ObservedPrefix:
    frames: np.ndarray
    rho: float
    T_rho: int


@dataclass
class DatasetManifest:
    class_names: list[str]
    clip_count: int
    dims: tuple[int, int, int, int]  # (T, H, W, Cch)
    seed: int
    splits: dict[str, str] = field(default_factory=dict)  # clip id -> "train"/"val"
    clip_ids: list[str] = field(default_factory=list)  # ids in payload order

    def to_json(self) -> str:
        return json.dumps(
            {
                "class_names": self.class_names,
                "clip_count": self.clip_count,
                "dims": list(self.dims),
                "seed": self.seed,
                "splits": self.splits,
                "clip_ids": self.clip_ids,
            },
            indent=2,
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "DatasetManifest":
        d = json.loads(text)
        return cls(
            class_names=list(d["class_names"]),
            clip_count=int(d["clip_count"]),
            dims=tuple(d["dims"]),
            seed=int(d["seed"]),
            splits=dict(d["splits"]),
            clip_ids=list(d.get("clip_ids", [])),
        )


@dataclass
class VideoDataset:
    clips: list[VideoClip]
    manifest: DatasetManifest

    @property
    def num_classes(self) -> int:
        return len(self.manifest.class_names)

    def split(self, which: str) -> list[VideoClip]:
        return [c for c in self.clips if self.manifest.splits.get(c.id) == which]


# -- synthetic generation --------------------------------------------------

_SHAPE_NAMES = ["square", "cross", "diamond", "tee"]
_MOTION_NAMES = ["forward", "backward", "outback", "sprint"]


def _sprite(shape_id: int, size: int = 5) -> np.ndarray:
    s = np.zeros((size, size), dtype=np.float64)
    c = size // 2
    kind = shape_id % len(_SHAPE_NAMES)
    if kind == 0:  # square
        s[:, :] = 1.0
    elif kind == 1:  # cross
        s[c, :] = 1.0
        s[:, c] = 1.0
    elif kind == 2:  # diamond
        for i in range(size):
            for j in range(size):
                if abs(i - c) + abs(j - c) <= c:
                    s[i, j] = 1.0
    else:  # tee
        s[0, :] = 1.0
        s[:, c] = 1.0
    return s


def _blob(size: int = 5) -> np.ndarray:
    c = size // 2
    yy, xx = np.mgrid[0:size, 0:size]
    return np.exp(-((yy - c) ** 2 + (xx - c) ** 2) / (2.0 * (size / 4.0) ** 2))


def _motion_path(motion_id: int, T: int, start: np.ndarray, end: np.ndarray) -> np.ndarray:
    """Per-frame sprite centers, shape (T, 2) in unit coordinates.

    All motion patterns traverse the same spatial path and differ only in the
    time parameterization, so time-collapsed views (e.g. the mean frame) are
    nearly identical across motions while frame ordering separates them."""
    ts = np.linspace(0.0, 1.0, T)
    kind = motion_id % len(_MOTION_NAMES)
    if kind == 0:  # forward traverse
        u = ts
    elif kind == 1:  # backward traverse
        u = 1.0 - ts
    elif kind == 2:  # out and back at double speed
        u = 1.0 - np.abs(1.0 - 2.0 * ts)
    else:  # sprint to the end, then hold
        u = np.minimum(2.0 * ts, 1.0)
    pos = start[None, :] + u[:, None] * (end - start)[None, :]
    return np.clip(pos, 0.0, 1.0)


def class_layout(num_classes: int) -> list[tuple[int, int]]:
    """(shape_id, motion_id) per class; both cues vary across the class set."""
    if num_classes <= 4:
        n_motions = 2
    elif num_classes <= 9:
        n_motions = 3
    else:
        n_motions = 4
    return [(c // n_motions, c % n_motions) for c in range(num_classes)]


def _stamp(frames: np.ndarray, t: int, patch: np.ndarray, cy: int, cx: int) -> None:
    half = patch.shape[0] // 2
    H, W = frames.shape[1:3]
    y0, y1 = max(0, cy - half), min(H, cy + half + 1)
    x0, x1 = max(0, cx - half), min(W, cx + half + 1)
    sy0, sx0 = y0 - (cy - half), x0 - (cx - half)
    cut = patch[sy0 : sy0 + (y1 - y0), sx0 : sx0 + (x1 - x0)]
    for ch in range(frames.shape[3]):
        frames[t, y0:y1, x0:x1, ch] = np.maximum(frames[t, y0:y1, x0:x1, ch], cut)


def render_clip(shape_id: int, motion_id: int, T: int, H: int, W: int, channels: int,
                rng: np.random.Generator, noise_sigma: float = 0.05) -> np.ndarray:
    """Two decoupled cues: a static sprite at a shape-dependent corner, sharp only
    for the first quarter of the clip (early appearance cue), and a blob that
    traverses a fixed spatial path under a motion-dependent time
    parameterization (ordering cue). Forward and backward motions cover the
    same positions over the full clip, so time-collapsed views cannot
    separate them. The sprite keeps a dim floor after the sharp phase so
    longer observation windows never lose the appearance cue."""
    sprite_size = max(5, min(H, W) // 5)
    if sprite_size % 2 == 0:
        sprite_size += 1
    sprite = _sprite(shape_id, sprite_size)
    blob = _blob(sprite_size)

    corners = [np.array([0.15, 0.15]), np.array([0.15, 0.85]),
               np.array([0.85, 0.15]), np.array([0.85, 0.85])]
    cue_pos = np.clip(corners[shape_id % 4] + rng.uniform(-0.05, 0.05, size=2), 0.05, 0.95)
    start = np.clip(corners[(shape_id + 1) % 4] + rng.uniform(-0.05, 0.05, size=2), 0.05, 0.95)
    end = np.clip(np.array([1.0, 1.0]) - start + rng.uniform(-0.05, 0.05, size=2), 0.05, 0.95)
    path = _motion_path(motion_id, T, start, end)

    morph_span = max(1, math.ceil(T / 4))
    frames = np.zeros((T, H, W, channels), dtype=np.float64)
    cue_y = int(round(cue_pos[0] * (H - 1)))
    cue_x = int(round(cue_pos[1] * (W - 1)))
    for t in range(T):
        alpha = max(0.4, 1.0 - t / morph_span)  # sharp early, dim floor after
        _stamp(frames, t, alpha * sprite, cue_y, cue_x)
        _stamp(frames, t, blob,
               int(round(path[t, 0] * (H - 1))), int(round(path[t, 1] * (W - 1))))
    frames += rng.normal(0.0, noise_sigma, size=frames.shape)
    return np.clip(frames, 0.0, 1.0).astype(np.float32)


def generate_synthetic(num_classes: int, clips_per_class: int, T: int, H: int, W: int,
                       seed: int, channels: int = 1, noise_sigma: float = 0.05) -> VideoDataset:
    if num_classes < 2:
        raise ConfigError("need at least 2 classes")
    if T < 8:
        raise ConfigError("need at least 8 frames per clip")
    if H < 8 or W < 8 or channels < 1:
        raise ConfigError(f"degenerate frame dims {(H, W, channels)}")
    layout = class_layout(num_classes)
    rng = np.random.default_rng(seed)
    clips = []
    for cls, (shape_id, motion_id) in enumerate(layout):
        for k in range(clips_per_class):
            frames = render_clip(shape_id, motion_id, T, H, W, channels, rng, noise_sigma)
            clips.append(VideoClip(frames=frames, label=cls, id=f"c{cls:03d}_{k:04d}"))
    class_names = [
        f"{_SHAPE_NAMES[s % len(_SHAPE_NAMES)]}_{_MOTION_NAMES[m % len(_MOTION_NAMES)]}"
        for s, m in layout
    ]
    manifest = DatasetManifest(
        class_names=class_names,
        clip_count=len(clips),
        dims=(T, H, W, channels),
        seed=seed,
        splits=_stratified_split(clips, seed),
        clip_ids=[c.id for c in clips],
    )
    return VideoDataset(clips=clips, manifest=manifest)


def _stratified_split(clips: list[VideoClip], seed: int, train_frac: float = 0.8) -> dict[str, str]:
    rng = np.random.default_rng([seed, 0x5B17])
    by_class: dict[int, list[str]] = {}
    for c in clips:
        by_class.setdefault(c.label, []).append(c.id)
    splits: dict[str, str] = {}
    for label in sorted(by_class):
        ids = sorted(by_class[label])
        order = rng.permutation(len(ids))
        n_train = int(round(train_frac * len(ids)))
        for rank, idx in enumerate(order):
            splits[ids[idx]] = "train" if rank < n_train else "val"
    return splits


# -- observation ratio -----------------------------------------------------


def observed_frame_count(T: int, rho: float) -> int:
    """ceil(rho * T) with the ratio treated as an exact decimal, so e.g.
    rho=0.1, T=30 gives 3 rather than tripping on float representation."""
    frac = Fraction(rho).limit_denominator(10**6)
    return -((-frac.numerator * T) // frac.denominator)


def clip_to_ratio(clip: VideoClip, rho: float) -> ObservedPrefix:
    if not (0.0 < rho < 1.0):
        raise ConfigError(f"observation ratio must lie in (0, 1), got {rho}")
    t_rho = observed_frame_count(clip.num_frames, rho)
    t_rho = max(1, min(t_rho, clip.num_frames))
    return ObservedPrefix(frames=clip.frames[:t_rho], rho=rho, T_rho=t_rho)


# -- TPRV binary format ----------------------------------------------------


def write_dataset(dataset: VideoDataset, path: str | Path) -> None:
    path = Path(path)
    T, H, W, Cch = dataset.manifest.dims
    with open(path, "wb") as f:
        f.write(TPRV_MAGIC)
        f.write(struct.pack("<IIIIII", TPRV_VERSION, len(dataset.clips), T, H, W, Cch))
        for clip in dataset.clips:
            if clip.frames.shape != (T, H, W, Cch):
                raise FormatError(f"clip {clip.id} dims {clip.frames.shape} != manifest {dataset.manifest.dims}")
            f.write(struct.pack("<H", clip.label))
            f.write(np.ascontiguousarray(clip.frames, dtype="<f4").tobytes())
    path.with_suffix(path.suffix + ".json").write_text(dataset.manifest.to_json())


def read_dataset(path: str | Path) -> VideoDataset:
    path = Path(path)
    raw = path.read_bytes()
    if raw[:4] != TPRV_MAGIC:
        raise FormatError(f"bad magic bytes {raw[:4]!r}")
    if len(raw) < 28:
        raise FormatError("truncated header")
    version, n, T, H, W, Cch = struct.unpack("<IIIIII", raw[4:28])
    if version != TPRV_VERSION:
        raise FormatError(f"unsupported TPRV version {version}")
    manifest_path = path.with_suffix(path.suffix + ".json")
    if manifest_path.exists():
        manifest = DatasetManifest.from_json(manifest_path.read_text())
        if manifest.clip_count != n or tuple(manifest.dims) != (T, H, W, Cch):
            raise FormatError("manifest disagrees with binary payload")
    else:
        manifest = DatasetManifest(class_names=[], clip_count=n, dims=(T, H, W, Cch), seed=0)
    frame_bytes = T * H * W * Cch * 4
    expected = 28 + n * (2 + frame_bytes)
    if len(raw) != expected:
        raise FormatError(f"payload length {len(raw)} != expected {expected}")
    clips = []
    off = 28
    for i in range(n):
        (label,) = struct.unpack_from("<H", raw, off)
        off += 2
        frames = np.frombuffer(raw, dtype="<f4", count=T * H * W * Cch, offset=off).reshape(T, H, W, Cch)
        off += frame_bytes
        clip_id = manifest.clip_ids[i] if i < len(manifest.clip_ids) else f"clip_{i:05d}"
        clips.append(VideoClip(frames=frames.copy(), label=label, id=clip_id))
    return VideoDataset(clips=clips, manifest=manifest)
