"""Dataset registry, integrity checks and the key-value manifest file."""
from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass
from pathlib import Path


from ..graph import Graph, homophily_ratio
from .loaders import IntegrityError, load_actor, load_planetoid, load_webkb

MANIFEST_NAME = "manifest.ini"
HOMOPHILY_TOL = 0.03


@dataclass(frozen=True)
class DatasetInfo:
    name: str
    kind: str  # webkb | actor | planetoid
    nodes: int
    edges: int  # as reported in the statistics table; informational only
    features: int
    classes: int
    homophily: float
    split_kind: str  # provided | per-class-20
    row_normalize: bool = False


DATASETS: dict[str, DatasetInfo] = {
    "cornell": DatasetInfo("cornell", "webkb", 183, 295, 1703, 5, 0.30, "provided"),
    "texas": DatasetInfo("texas", "webkb", 183, 309, 1703, 5, 0.11, "provided"),
    "wisconsin": DatasetInfo("wisconsin", "webkb", 251, 499, 1703, 5, 0.21, "provided"),
    "actor": DatasetInfo("actor", "actor", 7600, 29926, 932, 5, 0.22, "provided"),
    "cora": DatasetInfo("cora", "planetoid", 2708, 10556, 1433, 7, 0.81, "per-class-20"),
    "citeseer": DatasetInfo("citeseer", "planetoid", 3327, 9104, 3703, 6, 0.74, "per-class-20"),
    "pubmed": DatasetInfo("pubmed", "planetoid", 19717, 88648, 500, 3, 0.80, "per-class-20"),
}


def dataset_info(name: str) -> DatasetInfo:
    try:
        return DATASETS[name.lower()]
    except KeyError:
        raise KeyError(f"unknown dataset {name!r}; known: {', '.join(DATASETS)}") from None


def load_dataset(name: str, root) -> Graph:
    """Load ``name`` from ``root`` with no statistics check."""
    info = dataset_info(name)
    root = Path(root)
    if info.kind == "webkb":
        g = load_webkb(root, info.name, info.features)
    elif info.kind == "actor":
        g = load_actor(root, "film", info.features)
        g = Graph(g.num_nodes, g.edges, g.features, g.labels, g.splits, name="actor")
    else:
        g = load_planetoid(root, info.name, info.features)
    return g


def _raw_edge_lines(root: Path, kind: str) -> int:
    fname = "edges.txt" if kind == "planetoid" else "out1_graph_edges.txt"
    for sub in ("", "raw"):
        p = root / sub / fname
        if p.is_file():
            with open(p) as fh:
                return sum(1 for line in fh if line.strip()) - 1
    return -1


def data_files(root) -> list[Path]:
    root = Path(root)
    return sorted(p for p in root.rglob("*") if p.is_file() and p.name != MANIFEST_NAME)


def sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def check_stats(g: Graph, info: DatasetInfo) -> list[tuple[str, object, object, bool]]:
    """Rows of (field, observed, expected, ok) for every asserted statistic."""
    homo = homophily_ratio(g)
    rows = [
        ("nodes", g.num_nodes, info.nodes, g.num_nodes == info.nodes),
        ("features", g.num_features, info.features, g.num_features == info.features),
        ("classes", g.num_classes, info.classes, g.num_classes == info.classes),
        ("homophily", round(homo, 4), info.homophily, abs(homo - info.homophily) <= HOMOPHILY_TOL),
    ]
    if info.split_kind == "provided":
        rows.append(("splits", len(g.splits), 10, len(g.splits) == 10))
    return rows


def load_checked(name: str, root) -> Graph:
    """Load and raise :class:`IntegrityError` listing every failed statistic."""
    g = load_dataset(name, root)
    failed = [f"{f}: observed {o}, expected {e}" for f, o, e, ok in check_stats(g, dataset_info(name)) if not ok]
    if failed:
        raise IntegrityError(f"{name}: " + "; ".join(failed))
    return g


def build_manifest(name: str, root) -> tuple[configparser.ConfigParser, bool]:
    """Compute the manifest for a dataset directory; returns (manifest, all checks ok)."""
    info = dataset_info(name)
    root = Path(root)
    g = load_dataset(name, root)
    cp = configparser.ConfigParser()
    cp.optionxform = str
    cp["dataset"] = {"name": info.name, "kind": info.kind, "split_kind": info.split_kind,
                     "row_normalize": str(info.row_normalize).lower()}
    rows = check_stats(g, info)
    cp["checks"] = {f: f"observed={o} expected={e} {'OK' if ok else 'FAIL'}" for f, o, e, ok in rows}
    cp["edges"] = {
        "reported": str(info.edges),
        "raw_lines": str(_raw_edge_lines(root, info.kind)),
        "symmetrized_directed": str(2 * g.num_edges),
        "undirected_deduplicated": str(g.num_edges),
    }
    cp["files"] = {str(p.relative_to(root)): sha256(p) for p in data_files(root)}
    return cp, all(ok for *_, ok in rows)


def write_manifest(cp: configparser.ConfigParser, root) -> Path:
    path = Path(root) / MANIFEST_NAME
    with open(path, "w") as fh:
        cp.write(fh)
    return path


def read_manifest(root) -> configparser.ConfigParser:
    path = Path(root) / MANIFEST_NAME
    if not path.is_file():
        raise IntegrityError(f"no {MANIFEST_NAME} in {root}; run the prepare command first")
    cp = configparser.ConfigParser()
    cp.optionxform = str
    cp.read(path)
    return cp


def verify_checksums(root) -> list[str]:
    """Names of files whose checksum no longer matches the manifest."""
    root = Path(root)
    cp = read_manifest(root)
    bad = []
    for rel, digest in cp["files"].items():
        p = root / rel
        if not p.is_file() or sha256(p) != digest:
            bad.append(rel)
    return bad

