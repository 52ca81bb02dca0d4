"""Readers for the benchmark graphs in their published plain-text layouts.

WebKB (Cornell, Texas, Wisconsin) and Actor use the Geom-GCN release:

    out1_node_feature_label.txt   header, then ``id<TAB>features<TAB>label``
    out1_graph_edges.txt          header, then ``u<TAB>v``
    <name>_split_0.6_0.2_<k>.npz  train_mask / val_mask / test_mask, k = 0..9

WebKB features are a dense comma-separated 0/1 vector; Actor lists the
indices of non-zero features. Files may sit in the dataset directory, or in
``raw/`` or ``splits/`` below it.

Planetoid graphs (Cora, CiteSeer, PubMed) are read from the plain-text
re-encoding written by :func:`h3gnn.data.convert.convert_planetoid`:

    features.txt   header, then ``id<TAB>idx:value,idx:value,...``
    labels.txt     header, then ``id<TAB>label``
    edges.txt      header, then ``u<TAB>v``
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from ..graph import Graph, Split


class ParseError(ValueError):
    """A data file line could not be parsed."""


class IntegrityError(RuntimeError):
    """Loaded data is missing or disagrees with its expected statistics."""


def _find(root: Path, filename: str) -> Path | None:
    for sub in ("", "raw", "splits"):
        p = root / sub / filename
        if p.is_file():
            return p
    return None


def _require(root: Path, filename: str) -> Path:
    p = _find(root, filename)
    if p is None:
        raise IntegrityError(f"missing required file {filename!r} under {root}")
    return p


def _data_lines(path: Path):
    with open(path, encoding="utf-8") as fh:
        header = fh.readline()
        if not header:
            raise ParseError(f"{path}:1: empty file")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if line:
                yield lineno, line


def read_edges(path: Path, num_nodes: int) -> tuple[np.ndarray, int]:
    """Return (edges, raw line count); every line must hold two node ids in range."""
    pairs = []
    for lineno, line in _data_lines(path):
        parts = line.split()
        if len(parts) != 2:
            raise ParseError(f"{path}:{lineno}: expected two node ids, got {line!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise ParseError(f"{path}:{lineno}: non-integer node id in {line!r}") from None
        if not (0 <= u < num_nodes and 0 <= v < num_nodes):
            raise ParseError(f"{path}:{lineno}: node id out of range [0, {num_nodes})")
        pairs.append((u, v))
    edges = np.array(pairs, dtype=np.int64).reshape(-1, 2)
    return edges, len(pairs)


def read_geom_nodes(path: Path, feature_format: str, feature_dim: int | None = None):
    """Parse a Geom-GCN node file into (features, labels)."""
    ids, rows, labels = [], [], []
    for lineno, line in _data_lines(path):
        parts = line.split("\t")
        if len(parts) != 3:
            raise ParseError(f"{path}:{lineno}: expected 'id<TAB>features<TAB>label'")
        try:
            ids.append(int(parts[0]))
            labels.append(int(parts[2]))
            vals = [int(x) for x in parts[1].split(",") if x != ""]
        except ValueError:
            raise ParseError(f"{path}:{lineno}: malformed field in {line[:60]!r}") from None
        if feature_format == "dense" and any(x not in (0, 1) for x in vals):
            raise ParseError(f"{path}:{lineno}: dense feature vector must be 0/1")
        rows.append((lineno, vals))
    n = len(ids)
    if sorted(ids) != list(range(n)):
        raise ParseError(f"{path}: node ids are not a permutation of 0..{n - 1}")
    if feature_format == "dense":
        dim = feature_dim or len(rows[0][1])
        feats = np.zeros((n, dim))
        for nid, (lineno, vals) in zip(ids, rows):
            if len(vals) != dim:
                raise ParseError(f"{path}:{lineno}: expected {dim} features, got {len(vals)}")
            feats[nid] = vals
    elif feature_format == "indices":
        dim = feature_dim or 1 + max((max(v) for _, v in rows if v), default=-1)
        feats = np.zeros((n, dim))
        for nid, (lineno, vals) in zip(ids, rows):
            if vals and (min(vals) < 0 or max(vals) >= dim):
                raise ParseError(f"{path}:{lineno}: feature index out of range [0, {dim})")
            feats[nid, vals] = 1.0
    else:
        raise ValueError(f"unknown feature format {feature_format!r}")
    lab = np.empty(n, dtype=np.int64)
    lab[ids] = labels
    return feats, lab


def read_npz_splits(root: Path, name: str, num_nodes: int, count: int = 10) -> tuple[Split, ...]:
    splits = []
    for k in range(count):
        p = _find(root, f"{name}_split_0.6_0.2_{k}.npz")
        if p is None:
            break
        with np.load(p) as z:
            try:
                masks = [np.asarray(z[key]).astype(bool) for key in ("train_mask", "val_mask", "test_mask")]
            except KeyError as e:
                raise IntegrityError(f"{p}: missing array {e}") from None
        if any(m.shape != (num_nodes,) for m in masks):
            raise IntegrityError(f"{p}: split masks do not have length {num_nodes}")
        splits.append(Split(*masks))
    return tuple(splits)


def _load_geom(root, name: str, feature_format: str, feature_dim: int | None) -> Graph:
    root = Path(root)
    feats, labels = read_geom_nodes(_require(root, "out1_node_feature_label.txt"), feature_format, feature_dim)
    n = len(labels)
    edges, _ = read_edges(_require(root, "out1_graph_edges.txt"), n)
    return Graph(n, edges, feats, labels, read_npz_splits(root, name, n), name=name)


def load_webkb(root, name: str | None = None, feature_dim: int | None = 1703) -> Graph:
    """Cornell, Texas or Wisconsin; ``name`` defaults to the directory name."""
    name = (name or Path(root).name).lower()
    return _load_geom(root, name, "dense", feature_dim)


def load_actor(root, name: str = "film", feature_dim: int | None = 932) -> Graph:
    return _load_geom(root, name, "indices", feature_dim)


def load_planetoid(root, name: str | None = None, feature_dim: int | None = None) -> Graph:
    root = Path(root)
    name = (name or root.name).lower()
    feat_path = _require(root, "features.txt")
    label_path = _require(root, "labels.txt")
    edge_path = _require(root, "edges.txt")

    labels_by_id = {}
    for lineno, line in _data_lines(label_path):
        parts = line.split()
        if len(parts) != 2:
            raise ParseError(f"{label_path}:{lineno}: expected 'id<TAB>label'")
        try:
            labels_by_id[int(parts[0])] = int(parts[1])
        except ValueError:
            raise ParseError(f"{label_path}:{lineno}: non-integer field") from None
    n = len(labels_by_id)
    if sorted(labels_by_id) != list(range(n)):
        raise ParseError(f"{label_path}: node ids are not a permutation of 0..{n - 1}")
    labels = np.array([labels_by_id[i] for i in range(n)], dtype=np.int64)

    entries = []
    seen = set()
    for lineno, line in _data_lines(feat_path):
        nid_s, _, rest = line.partition("\t")
        try:
            nid = int(nid_s)
            pairs = [(int(i), float(v)) for i, v in (tok.split(":") for tok in rest.split(",") if tok)]
        except ValueError:
            raise ParseError(f"{feat_path}:{lineno}: malformed feature entry") from None
        if not 0 <= nid < n:
            raise ParseError(f"{feat_path}:{lineno}: node id {nid} out of range")
        seen.add(nid)
        entries.append((lineno, nid, pairs))
    if len(seen) != n:
        raise IntegrityError(f"{feat_path}: features for {len(seen)} nodes, labels for {n}")
    dim = feature_dim or 1 + max((i for _, _, ps in entries for i, _ in ps), default=-1)
    feats = np.zeros((n, dim))
    for lineno, nid, pairs in entries:
        for i, v in pairs:
            if not 0 <= i < dim:
                raise ParseError(f"{feat_path}:{lineno}: feature index {i} out of range [0, {dim})")
            feats[nid, i] = v
    edges, _ = read_edges(edge_path, n)
    return Graph(n, edges, feats, labels, name=name)


def row_normalize(features: np.ndarray) -> np.ndarray:
    """Scale each row to sum to one; all-zero rows stay zero."""
    s = features.sum(axis=1, keepdims=True)
    s[s == 0] = 1.0
    return features / s
