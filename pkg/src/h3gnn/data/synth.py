from __future__ import annotations

import numpy as np

from ..graph import Graph, Split


def synth_graph(
    n: int,
    classes: int,
    intra_p: float,
    inter_p: float,
    feature_noise: float = 1.0,
    seed: int = 0,
    feature_dim: int = 16,
) -> Graph:
    """Stochastic block model with class-conditioned Gaussian features.

    Labels are balanced (``i % classes``, then shuffled). Each class gets a
    standard-normal mean vector; node features are that mean plus
    ``feature_noise`` times white noise.
    """
    for p in (intra_p, inter_p):
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"edge probabilities must lie in [0, 1], got {p}")
    rng = np.random.default_rng(seed)
    labels = rng.permutation(np.arange(n) % classes)
    iu, ju = np.triu_indices(n, k=1)
    same = labels[iu] == labels[ju]
    prob = np.where(same, intra_p, inter_p)
    keep = rng.random(len(iu)) < prob
    edges = np.stack([iu[keep], ju[keep]], axis=1)
    means = rng.standard_normal((classes, feature_dim))
    features = means[labels] + feature_noise * rng.standard_normal((n, feature_dim))
    return Graph(n, edges, features, labels, name=f"sbm-{n}-{classes}")


def random_split(labels: np.ndarray, train_frac: float = 0.6, val_frac: float = 0.2, seed: int = 0) -> Split:
    """Uniform random train/val/test partition (used with synthetic graphs)."""
    n = len(labels)
    perm = np.random.default_rng(seed).permutation(n)
    n_tr, n_va = int(train_frac * n), int(val_frac * n)
    masks = [np.zeros(n, bool) for _ in range(3)]
    masks[0][perm[:n_tr]] = True
    masks[1][perm[n_tr:n_tr + n_va]] = True
    masks[2][perm[n_tr + n_va:]] = True
    return Split(*masks)
