"""Download the raw benchmark files into <root>/<dataset>/.

WebKB (cornell, texas, wisconsin) and actor come from the Geom-GCN release
together with its ten 60/20/20 split files; cora, citeseer and pubmed come
from the Planetoid release and are converted to plain text. Afterwards run
``h3gnn prepare <dataset>`` for each one.

    python3 scripts/fetch_datasets.py --root data cornell texas
"""
import argparse
import sys
import tempfile
import urllib.request
from pathlib import Path

from h3gnn.data import DATASETS, convert_planetoid

GEOM = "https://raw.githubusercontent.com/graphdml-uiuc-jlu/geom-gcn/master"
PLANETOID = "https://raw.githubusercontent.com/kimiyoung/planetoid/master/data"
PLANETOID_PARTS = ("x", "y", "tx", "ty", "allx", "ally", "graph", "test.index")


def fetch(url: str, dest: Path) -> None:
    if dest.is_file():
        return
    dest.parent.mkdir(parents=True, exist_ok=True)
    print(f"  {url}")
    with urllib.request.urlopen(url, timeout=60) as resp, open(dest, "wb") as fh:
        fh.write(resp.read())


def fetch_geom(name: str, out: Path) -> None:
    remote = "film" if name == "actor" else name
    for fname in ("out1_node_feature_label.txt", "out1_graph_edges.txt"):
        fetch(f"{GEOM}/new_data/{remote}/{fname}", out / fname)
    for k in range(10):
        fname = f"{remote}_split_0.6_0.2_{k}.npz"
        fetch(f"{GEOM}/splits/{fname}", out / fname)


def fetch_planetoid(name: str, out: Path) -> None:
    with tempfile.TemporaryDirectory() as tmp:
        for part in PLANETOID_PARTS:
            fetch(f"{PLANETOID}/ind.{name}.{part}", Path(tmp) / f"ind.{name}.{part}")
        convert_planetoid(tmp, name, out)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("datasets", nargs="*", default=list(DATASETS), help="default: all seven")
    parser.add_argument("--root", type=Path, default=Path("data"))
    args = parser.parse_args(argv)
    failed = []
    for name in args.datasets:
        info = DATASETS[name]
        out = args.root / name
        print(f"{name} -> {out}")
        try:
            if info.kind == "planetoid":
                fetch_planetoid(name, out)
            else:
                fetch_geom(name, out)
        except OSError as e:
            print(f"  failed: {e}", file=sys.stderr)
            failed.append(name)
    if failed:
        print(f"could not fetch: {', '.join(failed)}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
