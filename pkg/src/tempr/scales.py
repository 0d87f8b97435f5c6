"""Progressive temporal scales over an observed prefix, and per-scale frame sampling.

Strategies:
  increasing  window_i = [0, ceil(i/n * T_rho))          fine-to-coarse prefixes
  decreasing  window_i = [T_rho - ceil(i/n * T_rho), T_rho)  suffixes of growing length
  equal       contiguous partition of [0, T_rho) into n near-even segments
  full        every window spans [0, T_rho)
  random      seeded uniform window length and start per scale
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataio import ObservedPrefix
from .errors import ConfigError

STRATEGIES = ("full", "equal", "random", "increasing", "decreasing")


@dataclass
class ScaleSet:
    strategy: str
    n: int
    windows: list[tuple[int, int]]  # per-scale [start, end) within [0, T_rho)
    sampled: list[list[int]]  # per-scale sorted frame indices, F each


def ceil_div(a: int, b: int) -> int:
    return -((-a) // b)


def build_scales(T_rho: int, n: int, strategy: str, seed: int = 0) -> ScaleSet:
    """Windows only; call sample_frames / attach_samples to fill in frame picks."""
    if T_rho < 1 or n < 1:
        raise ConfigError(f"need T_rho >= 1 and n >= 1, got {T_rho}, {n}")
    if strategy not in STRATEGIES:
        raise ConfigError(f"unknown scale strategy {strategy!r}")
    windows: list[tuple[int, int]] = []
    if strategy == "increasing":
        for i in range(1, n + 1):
            windows.append((0, ceil_div(i * T_rho, n)))
    elif strategy == "decreasing":
        for i in range(1, n + 1):
            length = ceil_div(i * T_rho, n)
            windows.append((T_rho - length, T_rho))
    elif strategy == "full":
        windows = [(0, T_rho)] * n
    elif strategy == "equal":
        # maximally even contiguous partition: first (T_rho mod n) segments get
        # the extra frame
        base, extra = divmod(T_rho, n)
        start = 0
        for i in range(n):
            length = base + (1 if i < extra else 0)
            windows.append((start, start + max(length, 0)))
            start += length
        # when n > T_rho some segments are empty; clamp to 1-frame windows
        windows = [(min(s, T_rho - 1), max(e, min(s, T_rho - 1) + 1)) for s, e in windows]
    else:  # random
        rng = np.random.default_rng(seed)
        for _ in range(n):
            length = int(rng.integers(1, T_rho + 1))
            start = int(rng.integers(0, T_rho - length + 1))
            windows.append((start, start + length))
    return ScaleSet(strategy=strategy, n=n, windows=windows, sampled=[])


def sample_frames(window: tuple[int, int], F: int, rng: np.random.Generator) -> list[int]:
    """F sorted indices from the window: without replacement when it is long
    enough, otherwise every index plus round-robin repeats."""
    start, end = window
    length = end - start
    if length < 1:
        raise ConfigError(f"empty window {window}")
    if F < 1:
        raise ConfigError("F must be >= 1")
    if length >= F:
        picks = rng.choice(length, size=F, replace=False) + start
        return sorted(int(i) for i in picks)
    picks = [start + (k % length) for k in range(F)]
    return sorted(picks)


def attach_samples(scaleset: ScaleSet, F: int, seed: int) -> ScaleSet:
    rng = np.random.default_rng(seed)
    scaleset.sampled = [sample_frames(w, F, rng) for w in scaleset.windows]
    return scaleset


def gather_inputs(prefix: ObservedPrefix, scaleset: ScaleSet) -> list[np.ndarray]:
    """Stack each scale's sampled frames into an (F, H, W, Cch) input volume."""
    volumes = []
    for indices in scaleset.sampled:
        if any(i < 0 or i >= prefix.T_rho for i in indices):
            raise AssertionError(f"sampled index outside observed prefix: {indices}")
        volumes.append(np.asarray(prefix.frames[indices], dtype=np.float64))
    return volumes
