import os

import numpy as np
import pytest

from h3gnn import tensorcore as tc

# one PASS/FAIL line per acceptance criterion, printed at the end of the run
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)


def numeric_grad(f, x: tc.Tensor, eps: float = 1e-5) -> np.ndarray:
    """Central differences of scalar f() w.r.t. every entry of x."""
    g = np.zeros_like(x.data)
    flat, gflat = x.data.reshape(-1), g.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + eps
        up = f().item()
        flat[i] = old - eps
        down = f().item()
        flat[i] = old
        gflat[i] = (up - down) / (2 * eps)
    return g


def rel_err(a: np.ndarray, b: np.ndarray) -> float:
    denom = max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)
    return float(np.linalg.norm(a - b) / denom)


def grad_errors(f, tensors, eps: float = 1e-5) -> list[float]:
    """Relative error between backprop and central differences for each tensor."""
    for t in tensors:
        t.grad = None
    tc.backward(f())
    analytic = [t.grad.copy() for t in tensors]
    with tc.no_grad():
        return [rel_err(a, numeric_grad(f, t, eps)) for a, t in zip(analytic, tensors)]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def data_root():
    return os.environ.get("H3GNN_DATA", os.path.normpath(os.path.join(os.path.dirname(__file__), "..", "data")))


def write_geom(root, g, name, dense=True, splits=10, seed=0):
    """Write ``g`` in the Geom-GCN text layout with ``splits`` random split files."""
    from h3gnn.data.synth import random_split

    root.mkdir(parents=True, exist_ok=True)
    with open(root / "out1_node_feature_label.txt", "w") as fh:
        fh.write("node_id\tfeature\tlabel\n")
        for i in range(g.num_nodes):
            row = g.features[i]
            feats = ",".join(str(int(x)) for x in row) if dense else ",".join(str(j) for j in np.flatnonzero(row))
            fh.write(f"{i}\t{feats}\t{g.labels[i]}\n")
    with open(root / "out1_graph_edges.txt", "w") as fh:
        fh.write("node_id\tnode_id\n")
        for u, v in g.edges:
            fh.write(f"{u}\t{v}\n")
            fh.write(f"{v}\t{u}\n")
    for k in range(splits):
        s = random_split(g.labels, 0.6, 0.2, seed + k)
        np.savez(root / f"{name}_split_0.6_0.2_{k}.npz", train_mask=s.train, val_mask=s.val, test_mask=s.test)
    return root


def binary_graph(n, classes, dim, seed=0, intra=0.05, inter=0.05):
    """SBM graph whose features are 0/1 bag-of-words style vectors."""
    from h3gnn import Graph
    from h3gnn.data.synth import synth_graph

    g = synth_graph(n, classes, intra, inter, 1.0, seed, dim)
    return Graph(n, g.edges, (g.features > 1.0).astype(float), g.labels, name=g.name)
