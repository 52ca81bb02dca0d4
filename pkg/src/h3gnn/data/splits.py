from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..graph import Graph, Split
from ..tensorcore import StateError


@dataclass(frozen=True)
class SplitSpec:
    kind: str = "per-class-20"  # or "provided"
    seed: int = 0
    index: int = 0
    per_class: int = 20
    num_val: int = 500


def per_class_split(labels: np.ndarray, seed: int, per_class: int = 20, num_val: int = 500,
                    num_classes: int | None = None) -> Split:
    """``per_class`` random training nodes from every class, ``num_val`` validation, rest test."""
    labels = np.asarray(labels)
    n = len(labels)
    k = num_classes if num_classes is not None else int(labels.max()) + 1
    rng = np.random.default_rng(seed)
    train = np.zeros(n, bool)
    for c in range(k):
        idx = np.flatnonzero(labels == c)
        if len(idx) == 0:
            raise StateError(f"class {c} has no nodes")
        train[rng.permutation(idx)[:per_class]] = True
    rest = rng.permutation(np.flatnonzero(~train))
    val = np.zeros(n, bool)
    val[rest[:num_val]] = True
    test = ~(train | val)
    return Split(train, val, test)


def make_splits(g: Graph, spec: SplitSpec) -> Split:
    if g.labels is None:
        raise StateError("splits need labels")
    if spec.kind == "provided":
        if spec.index >= len(g.splits):
            raise StateError(f"graph {g.name!r} has {len(g.splits)} provided splits, asked for #{spec.index}")
        return g.splits[spec.index]
    if spec.kind == "per-class-20":
        return per_class_split(g.labels, spec.seed, spec.per_class, spec.num_val)
    raise ValueError(f"unknown split kind {spec.kind!r}")


def standard_splits(g: Graph, kind: str, count: int = 10, seed: int = 0) -> list[Split]:
    """The ten evaluation splits: provided files, or per-class-20 with seeds seed..seed+count-1."""
    return [make_splits(g, SplitSpec(kind, seed + i, i)) for i in range(count)]
