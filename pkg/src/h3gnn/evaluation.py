"""Downstream evaluation of frozen node embeddings."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment
from sklearn.cluster import KMeans

from . import tensorcore as tc
from .graph import Graph, Split
from .tensorcore import StateError, Tensor


# classifier grids searched for the published results
PROBE_SEARCH_SPACE = {"lr": (0.01, 0.005, 0.001), "weight_decay": (0.0, 5e-4, 5e-5)}


@dataclass
class ProbeConfig:
    lr: float = 0.01
    weight_decay: float = 5e-4
    epochs: int = 300
    seed: int = 0
    standardize: bool = False

    def __post_init__(self):
        if self.epochs <= 0:
            raise ValueError("probe epochs must be positive")


@dataclass
class Metrics:
    """Per-split accuracies; ``std`` is the population standard deviation (ddof=0)."""

    accuracies: list
    seeds: list = field(default_factory=list)
    seconds: float = 0.0
    protocol: str = ""

    @property
    def mean(self) -> float:
        return float(np.mean(self.accuracies))

    @property
    def std(self) -> float:
        return float(np.std(self.accuracies))

    def summary(self) -> str:
        return f"{100 * self.mean:.2f} ± {100 * self.std:.2f}"

    def to_dict(self) -> dict:
        return {"protocol": self.protocol, "accuracies": list(map(float, self.accuracies)), "mean": self.mean,
                "std": self.std, "seeds": list(self.seeds), "seconds": self.seconds}


def _standardize(x: np.ndarray) -> np.ndarray:
    sd = x.std(axis=0)
    sd[sd == 0] = 1.0
    return (x - x.mean(axis=0)) / sd


def _fit_probe(x: np.ndarray, labels: np.ndarray, split: Split, cfg: ProbeConfig, num_classes: int | None):
    """Train the probe; return (best validation accuracy, weights, bias) with test nodes unseen."""
    tr, va = np.flatnonzero(split.train), np.flatnonzero(split.val)
    if len(tr) == 0:
        raise StateError("empty training mask")
    k = num_classes if num_classes is not None else int(labels[np.r_[tr, va]].max()) + 1
    rng = np.random.default_rng(cfg.seed)
    w = tc.glorot_init((x.shape[1], k), rng, name="probe.W")
    b = tc.zeros(k, "probe.b")
    opt = tc.Optimizer([w, b], "adam", cfg.lr, cfg.weight_decay)
    x_tr, y_tr = Tensor(x[tr]), labels[tr]
    eval_idx = va if len(va) else tr
    y_eval = labels[eval_idx]
    best_acc, best = -1.0, (w.data.copy(), b.data.copy())
    for _ in range(cfg.epochs):
        loss = tc.cross_entropy(tc.linear(x_tr, w, b), y_tr)
        tc.backward(loss)
        opt.step()
        acc = float(np.mean((x[eval_idx] @ w.data + b.data).argmax(axis=1) == y_eval))
        if acc > best_acc:
            best_acc, best = acc, (w.data.copy(), b.data.copy())
    return best_acc, best[0], best[1]


def _probe_inputs(embeddings, labels, cfg: ProbeConfig):
    if isinstance(embeddings, Tensor):
        embeddings = embeddings.data
    x = np.asarray(embeddings, dtype=np.float64)
    return (_standardize(x) if cfg.standardize else x), np.asarray(labels)


def linear_probe(embeddings: np.ndarray, labels: np.ndarray, split: Split, cfg: ProbeConfig | None = None,
                 num_classes: int | None = None, return_predictions: bool = False):
    """Test accuracy of a softmax-regression probe picked by validation accuracy.

    Full-batch Adam on the training nodes; the weights from the epoch with
    the best validation accuracy (earliest on ties) are scored on the test
    nodes once, at the end. With ``return_predictions`` the test-node
    predictions are returned alongside the accuracy.
    """
    cfg = cfg or ProbeConfig()
    x, labels = _probe_inputs(embeddings, labels, cfg)
    _, w, b = _fit_probe(x, labels, split, cfg, num_classes)
    te = np.flatnonzero(split.test)
    pred = (x[te] @ w + b).argmax(axis=1)
    acc = float(np.mean(pred == labels[te])) if len(te) else float("nan")
    return (acc, pred) if return_predictions else acc


def validation_accuracy(embeddings: np.ndarray, labels: np.ndarray, split: Split, cfg: ProbeConfig | None = None,
                        num_classes: int | None = None) -> float:
    """Best validation accuracy of the probe; used for model selection during training."""
    cfg = cfg or ProbeConfig()
    x, labels = _probe_inputs(embeddings, labels, cfg)
    return _fit_probe(x, labels, split, cfg, num_classes)[0]


def confusion(pred: np.ndarray, labels: np.ndarray, k: int | None = None) -> np.ndarray:
    k = k or int(max(pred.max(), labels.max())) + 1
    w = np.zeros((k, k), dtype=np.int64)
    np.add.at(w, (pred, labels), 1)
    return w


def hungarian_match(counts: np.ndarray) -> int:
    """Maximum total count over one-to-one cluster->class assignments."""
    rows, cols = linear_sum_assignment(counts, maximize=True)
    return int(counts[rows, cols].sum())


def matched_accuracy(pred: np.ndarray, labels: np.ndarray) -> float:
    pred, labels = np.asarray(pred), np.asarray(labels)
    return hungarian_match(confusion(pred, labels)) / len(labels)


def kmeans_accuracy(embeddings: np.ndarray, labels: np.ndarray, k: int, seed: int = 0,
                    normalize: bool = False, restarts: int = 10) -> float:
    """k-means (k-means++ seeding, best of ``restarts`` by inertia) scored by Hungarian-matched accuracy."""
    x = np.asarray(embeddings.data if isinstance(embeddings, Tensor) else embeddings, dtype=np.float64)
    if k > len(x):
        raise ValueError(f"k={k} exceeds the number of points {len(x)}")
    if normalize:
        norms = np.linalg.norm(x, axis=1, keepdims=True)
        norms[norms == 0] = 1.0
        x = x / norms
    km = KMeans(n_clusters=k, init="k-means++", n_init=restarts, random_state=seed)
    pred = km.fit_predict(x)
    return matched_accuracy(pred, labels)


def evaluate_embeddings(embeddings: np.ndarray, labels: np.ndarray, protocol: str, splits=(),
                        probe: ProbeConfig | None = None, seeds=None, num_classes: int | None = None,
                        normalize: bool = False) -> Metrics:
    """Run ``protocol`` ('probe' or 'cluster') once per split or seed and aggregate."""
    t0 = time.perf_counter()
    probe = probe or ProbeConfig()
    k = num_classes or int(np.max(labels)) + 1
    if protocol == "probe":
        seeds = list(seeds) if seeds is not None else [probe.seed] * len(splits)
        accs = [linear_probe(embeddings, labels, s, ProbeConfig(probe.lr, probe.weight_decay, probe.epochs, sd,
                                                                  probe.standardize), k)
                for s, sd in zip(splits, seeds)]
    elif protocol == "cluster":
        seeds = list(seeds) if seeds is not None else list(range(10))
        accs = [kmeans_accuracy(embeddings, labels, k, sd, normalize) for sd in seeds]
    else:
        raise ValueError(f"unknown protocol {protocol!r}")
    return Metrics(accs, seeds, time.perf_counter() - t0, protocol)


def evaluate_run(g: Graph, model, protocols=("probe",), splits=None, probe: ProbeConfig | None = None,
                 seeds=None, normalize: bool = False) -> dict[str, Metrics]:
    """Embed the full, unmasked graph once and run every requested protocol on it.

    ``model`` is an :class:`~h3gnn.encoder.Encoder` or a precomputed array.
    """
    emb = model if isinstance(model, np.ndarray) else model.embed(g.features)
    splits = list(g.splits) if splits is None else list(splits)
    return {p: evaluate_embeddings(emb, g.labels, p, splits, probe, seeds, g.num_classes, normalize)
            for p in protocols}
