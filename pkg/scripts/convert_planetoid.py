"""Convert a local copy of the pickled Planetoid files to the plain-text layout.

    python3 scripts/convert_planetoid.py RAW_DIR cora data/cora
"""
import argparse

from h3gnn.data import convert_planetoid


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("raw_dir", help="directory holding ind.<name>.* files")
    parser.add_argument("name", choices=("cora", "citeseer", "pubmed"))
    parser.add_argument("out_dir")
    args = parser.parse_args(argv)
    convert_planetoid(args.raw_dir, args.name, args.out_dir)
    print(f"wrote {args.out_dir}")


if __name__ == "__main__":
    main()
