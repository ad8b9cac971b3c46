"""Synthetic tabular data with planted deterministic rules.

The label follows a noisy threshold on ``a1`` except inside one region
carved out by a two-attribute interaction, where it is always positive.
Two correlated attribute pairs give the miner non-classification rules.
Attributes are small integers so the learned forests use few thresholds.
"""
from __future__ import annotations

import numpy as np

from .tabular import Dataset, Kind, dataset_from_arrays


def planted_dataset(n: int = 600, seed: int = 0, noise: float = 0.25) -> Dataset:
    rng = np.random.default_rng(seed)
    a1 = rng.integers(0, 10, n)
    a2 = rng.integers(0, 10, n)
    a3 = rng.integers(0, 10, n)
    a4 = rng.integers(0, 10, n)
    # a5 tracks a4, a6 tracks a2: bands that imply each other
    a5 = np.clip(a4 + rng.integers(-1, 2, n), 0, 9)
    a6 = np.clip(a2 // 2 + rng.integers(0, 2, n), 0, 5)
    kind = rng.choice(np.array(["p", "q", "r"]), n)
    base = (a1 >= 5).astype(int)
    flip = rng.random(n) < noise
    y = np.where(flip, 1 - base, base)
    planted = (a2 >= 8) & (a3 >= 8)
    y = np.where(planted, 1, y)
    # a second planted region that forces the negative class
    planted_neg = (a4 <= 1) & (kind == "r")
    y = np.where(planted_neg & ~planted, 0, y)
    cols = {"a1": a1, "a2": a2, "a3": a3, "a4": a4, "a5": a5, "a6": a6, "kind": kind.tolist()}
    kinds = {name: Kind.NUMERICAL for name in cols if name != "kind"}
    kinds["kind"] = Kind.CATEGORICAL
    return dataset_from_arrays({k: list(v) for k, v in cols.items()}, y.tolist(), kinds)
