"""One-time conversion of the pickled Planetoid release to plain text.

The original ``ind.<name>.{x,tx,allx,y,ty,ally,graph,test.index}`` files are
Python pickles. This module reassembles them the usual way (test rows moved
to their recorded indices; CiteSeer's missing test nodes padded with zero
features and label 0) and writes the text layout read by
:func:`h3gnn.data.loaders.load_planetoid`.
"""
from __future__ import annotations

import pickle
from pathlib import Path

import numpy as np
import scipy.sparse as sp


def _unpickle(path: Path):
    with open(path, "rb") as fh:
        return pickle.load(fh, encoding="latin1")


def read_planetoid_pickles(raw_dir, name: str):
    raw_dir = Path(raw_dir)
    objs = {k: _unpickle(raw_dir / f"ind.{name}.{k}") for k in ("x", "y", "tx", "ty", "allx", "ally", "graph")}
    test_index = np.array([int(line) for line in open(raw_dir / f"ind.{name}.test.index") if line.strip()])
    test_range = np.sort(test_index)
    tx, ty = sp.lil_matrix(objs["tx"]), np.asarray(objs["ty"])
    if name == "citeseer":
        full = np.arange(test_range.min(), test_range.max() + 1)
        tx_ext = sp.lil_matrix((len(full), tx.shape[1]))
        tx_ext[test_range - test_range.min(), :] = tx
        ty_ext = np.zeros((len(full), ty.shape[1]))
        ty_ext[test_range - test_range.min(), :] = ty
        tx, ty = tx_ext, ty_ext
    features = sp.vstack((sp.lil_matrix(objs["allx"]), tx)).tolil()
    features[test_index, :] = features[test_range, :]
    onehot = np.vstack((np.asarray(objs["ally"]), ty))
    onehot[test_index, :] = onehot[test_range, :]
    labels = onehot.argmax(axis=1)
    n = features.shape[0]
    edges = [(u, v) for u, nbrs in objs["graph"].items() for v in nbrs if u < n and v < n]
    return sp.csr_matrix(features), labels, np.array(edges, dtype=np.int64)


def write_plain_text(out_dir, features: sp.csr_matrix, labels: np.ndarray, edges: np.ndarray) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    features = sp.csr_matrix(features)
    with open(out / "features.txt", "w") as fh:
        fh.write("node_id\tfeatures\n")
        for i in range(features.shape[0]):
            lo, hi = features.indptr[i], features.indptr[i + 1]
            toks = ",".join(f"{j}:{v!r}" for j, v in zip(features.indices[lo:hi], features.data[lo:hi].tolist()))
            fh.write(f"{i}\t{toks}\n")
    with open(out / "labels.txt", "w") as fh:
        fh.write("node_id\tlabel\n")
        fh.writelines(f"{i}\t{int(c)}\n" for i, c in enumerate(labels))
    with open(out / "edges.txt", "w") as fh:
        fh.write("node_id\tnode_id\n")
        fh.writelines(f"{int(u)}\t{int(v)}\n" for u, v in edges)


def convert_planetoid(raw_dir, name: str, out_dir) -> None:
    write_plain_text(out_dir, *read_planetoid_pickles(raw_dir, name))
