"""Node masking: uniform, difficulty-ranked, and difficulty-weighted Bernoulli."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import tensorcore as tc
from ..tensorcore import Tensor

STRATEGIES = ("random", "diffi", "prob")

# sanity window for Bernoulli masking, as fractions of the budget M
PROB_LOW, PROB_HIGH, PROB_RETRIES = 0.5, 1.5, 10


def mask_budget(n: int, ratio: float) -> int:
    """floor(n * ratio), robust to binary rounding of products like 100 * 0.29."""
    return int(math.floor(n * ratio + 1e-9))


def _to_mask(n: int, idx) -> np.ndarray:
    m = np.zeros(n, bool)
    m[np.asarray(idx, dtype=np.int64)] = True
    return m


def mask_random(n: int, ratio: float, rng: np.random.Generator) -> np.ndarray:
    return _to_mask(n, rng.choice(n, mask_budget(n, ratio), replace=False))


def rank_by_difficulty(scores: np.ndarray) -> np.ndarray:
    """Node indices by decreasing score, ties broken by ascending index."""
    scores = np.asarray(scores, dtype=np.float64)
    return np.lexsort((np.arange(len(scores)), -scores))


def mask_diffi(scores: np.ndarray, ratio: float, exploit: float, rng: np.random.Generator) -> np.ndarray:
    """Top floor(M*exploit) hardest nodes plus uniform picks from the rest, M total."""
    n = len(scores)
    budget = mask_budget(n, ratio)
    m = mask_budget(budget, exploit)
    hard = rank_by_difficulty(scores)[:m]
    others = np.setdiff1d(np.arange(n), hard, assume_unique=True)
    picked = rng.choice(others, budget - m, replace=False)
    return _to_mask(n, np.concatenate([hard, picked]))


def mask_probabilities(scores: np.ndarray, ratio: float, exploit: float) -> np.ndarray:
    """Per-node Bernoulli rates (1 - r) R + (score / max score) r R."""
    scores = np.asarray(scores, dtype=np.float64)
    top = scores.max() if len(scores) else 0.0
    base = (1.0 - exploit) * ratio
    if top <= 0:
        return np.full(len(scores), base)
    return base + (scores / top) * exploit * ratio


def mask_prob(scores: np.ndarray, ratio: float, exploit: float, rng: np.random.Generator) -> np.ndarray:
    """Independent Bernoulli masking with difficulty-informed rates.

    A draw is accepted when its size lies in [ceil(0.5 M), floor(1.5 M)];
    after ten rejected draws the M nodes with the highest rate are masked.
    With no positive score there is nothing to exploit, so M nodes are
    sampled uniformly.
    """
    scores = np.asarray(scores, dtype=np.float64)
    n = len(scores)
    if n == 0 or scores.max() <= 0:
        return mask_random(n, ratio, rng)
    p = mask_probabilities(scores, ratio, exploit)
    budget = mask_budget(n, ratio)
    lo, hi = math.ceil(PROB_LOW * budget), math.floor(PROB_HIGH * budget)
    for _ in range(PROB_RETRIES):
        m = rng.random(n) < p
        if lo <= m.sum() <= hi:
            return m
    return _to_mask(n, rank_by_difficulty(p)[:budget])


def apply_mask(features: np.ndarray, mask: np.ndarray, mask_token) -> Tensor:
    """Masked rows take the shared learnable token; the edge set is untouched."""
    return tc.replace_rows(features, mask, mask_token)


@dataclass
class MaskState:
    strategy: str = "prob"
    ratio: float = 0.5
    exploit: float = 0.5
    warmup_epochs: int = 20
    token: Tensor | None = None
    mask: np.ndarray | None = None
    scores: np.ndarray | None = None

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown masking strategy {self.strategy!r}")
        if not 0.0 < self.ratio < 1.0:
            raise ValueError("mask ratio must lie in (0, 1)")
        if not 0.0 <= self.exploit <= 1.0:
            raise ValueError("exploitation ratio must lie in [0, 1]")

    def next_mask(self, epoch: int, n: int, rng: np.random.Generator) -> np.ndarray:
        if self.strategy == "random" or epoch < self.warmup_epochs or self.scores is None:
            m = mask_random(n, self.ratio, rng)
        elif self.strategy == "diffi":
            m = mask_diffi(self.scores, self.ratio, self.exploit, rng)
        else:
            m = mask_prob(self.scores, self.ratio, self.exploit, rng)
        self.mask = m
        return m
