"""Graph container, self-looped adjacency normalization and structural diagnostics."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .tensorcore import EdgePattern, StateError


@dataclass(frozen=True)
class Split:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray

    def __post_init__(self):
        for name in ("train", "val", "test"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=bool))
        if (self.train & self.val).any() or (self.train & self.test).any() or (self.val & self.test).any():
            raise ValueError("train/val/test masks overlap")


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected simple graph with node features and optional labels.

    ``edges`` is an (E, 2) int array holding each undirected edge once with
    ``u < v``. Construction canonicalizes whatever it is given: direction is
    dropped, duplicates merged and self-loops discarded.
    """

    num_nodes: int
    edges: np.ndarray
    features: np.ndarray
    labels: np.ndarray | None = None
    splits: tuple[Split, ...] = ()
    name: str = ""
    _adj: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        n = int(self.num_nodes)
        if n <= 0:
            raise ValueError("a graph needs at least one node")
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if edges.size and (edges.min() < 0 or edges.max() >= n):
            raise ValueError("edge endpoint out of range")
        edges = np.sort(edges, axis=1)
        edges = edges[edges[:, 0] != edges[:, 1]]
        edges = np.unique(edges, axis=0) if len(edges) else edges.reshape(0, 2)
        features = np.asarray(self.features, dtype=np.float64)
        if features.ndim != 2 or features.shape[0] != n:
            raise ValueError(f"features must be ({n}, d), got {features.shape}")
        labels = self.labels
        if labels is not None:
            labels = np.asarray(labels, dtype=np.int64)
            if labels.shape != (n,):
                raise ValueError(f"labels must have shape ({n},)")
        for s in self.splits:
            if s.train.shape != (n,):
                raise ValueError("split mask length does not match node count")
        edges.setflags(write=False)
        features.setflags(write=False)
        object.__setattr__(self, "num_nodes", n)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "splits", tuple(self.splits))

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def num_features(self) -> int:
        return self.features.shape[1]

    @property
    def num_classes(self) -> int:
        if self.labels is None:
            raise StateError("graph has no labels")
        return int(self.labels.max()) + 1

    def adjacency(self) -> sp.csr_matrix:
        """Symmetric 0/1 adjacency without self-loops."""
        if "A" not in self._adj:
            n = self.num_nodes
            u, v = self.edges[:, 0], self.edges[:, 1]
            data = np.ones(2 * len(u))
            a = sp.csr_matrix((data, (np.r_[u, v], np.r_[v, u])), shape=(n, n))
            a.sort_indices()
            self._adj["A"] = a
        return self._adj["A"]

    def degrees(self) -> np.ndarray:
        return np.asarray(self.adjacency().sum(axis=1)).ravel()

    def normalized_adjacency(self) -> "NormalizedAdjacency":
        if "norm" not in self._adj:
            self._adj["norm"] = normalize_adjacency(self)
        return self._adj["norm"]

    def with_features(self, features: np.ndarray) -> "Graph":
        return Graph(self.num_nodes, self.edges, features, self.labels, self.splits, self.name)

    def with_splits(self, splits) -> "Graph":
        return Graph(self.num_nodes, self.edges, self.features, self.labels, tuple(splits), self.name)

    def permuted(self, perm: np.ndarray) -> "Graph":
        """Relabel nodes so that new node ``i`` is old node ``perm[i]``."""
        perm = np.asarray(perm)
        inv = np.empty_like(perm)
        inv[perm] = np.arange(len(perm))
        labels = None if self.labels is None else self.labels[perm]
        splits = tuple(Split(s.train[perm], s.val[perm], s.test[perm]) for s in self.splits)
        return Graph(self.num_nodes, inv[self.edges], self.features[perm], labels, splits, self.name)


@dataclass(frozen=True, eq=False)
class NormalizedAdjacency:
    """D~^{-1/2} (A + I) D~^{-1/2} in CSR form plus the self-looped degrees."""

    matrix: sp.csr_matrix
    degrees: np.ndarray

    @property
    def pattern(self) -> EdgePattern:
        return EdgePattern(self.matrix.indptr, self.matrix.indices, self.matrix.shape[0])

    @property
    def values(self) -> np.ndarray:
        return self.matrix.data

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()


def normalize_adjacency(g: Graph) -> NormalizedAdjacency:
    n = g.num_nodes
    a_hat = (g.adjacency() + sp.identity(n, format="csr")).tocsr()
    a_hat.sort_indices()
    deg = np.asarray(a_hat.sum(axis=1)).ravel()
    inv_sqrt = 1.0 / np.sqrt(deg)
    rows = np.repeat(np.arange(n), np.diff(a_hat.indptr))
    cols = a_hat.indices
    # product ordered as (smaller index, larger index) so (u,v) and (v,u) agree bitwise
    lo, hi = np.minimum(rows, cols), np.maximum(rows, cols)
    vals = inv_sqrt[lo] * inv_sqrt[hi]
    mat = sp.csr_matrix((vals, a_hat.indices.copy(), a_hat.indptr.copy()), shape=(n, n))
    return NormalizedAdjacency(mat, deg)


def homophily_ratio(g: Graph) -> float:
    """Fraction of undirected edges whose endpoints share a label."""
    if g.labels is None:
        raise StateError("homophily ratio needs labels")
    if g.num_edges == 0:
        return float("nan")
    same = g.labels[g.edges[:, 0]] == g.labels[g.edges[:, 1]]
    return float(same.mean())


def node_homophily(g: Graph) -> float:
    """Mean over non-isolated nodes of the same-label fraction of their neighbours."""
    if g.labels is None:
        raise StateError("homophily needs labels")
    a = g.adjacency().tocoo()
    same = (g.labels[a.row] == g.labels[a.col]).astype(float)
    deg = np.bincount(a.row, minlength=g.num_nodes)
    hits = np.bincount(a.row, weights=same, minlength=g.num_nodes)
    ok = deg > 0
    return float((hits[ok] / deg[ok]).mean())


def laplacian_quadratic(g: Graph, signal: np.ndarray) -> float:
    """f^T L_sym f with L_sym = I - D^{-1/2} A D^{-1/2} (no self-loops).

    Isolated nodes contribute only through the identity term.
    """
    f = np.asarray(signal, dtype=np.float64)
    if f.shape != (g.num_nodes,):
        raise ValueError(f"signal must have length {g.num_nodes}")
    deg = g.degrees()
    inv_sqrt = np.zeros_like(deg)
    nz = deg > 0
    inv_sqrt[nz] = 1.0 / np.sqrt(deg[nz])
    s = inv_sqrt * f
    return float(f @ f - s @ (g.adjacency() @ s))
