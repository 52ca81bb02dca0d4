"""Pick per-dataset defaults by validation accuracy and write src/h3gnn/configs/<name>.ini.

The joint training and probe grids have millions of points, so this samples
``--trials`` of them uniformly (seeded). Each trial trains once and probes
every standard split; the score is the mean best *validation* accuracy, so
test nodes never influence the choice. The probe grid is searched per trial
on the same embeddings.

    python3 scripts/grid_search.py texas --trials 40 --epochs 200
"""
import argparse
import itertools
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from h3gnn.cli import RunConfig, evaluation_splits, load_prepared, resolve_config
from h3gnn.evaluation import PROBE_SEARCH_SPACE, ProbeConfig, validation_accuracy
from h3gnn.ssl import SEARCH_SPACE, TrainConfig, train

CONFIG_DIR = Path(__file__).resolve().parents[1] / "src" / "h3gnn" / "configs"


def sample_trials(count: int, seed: int):
    rng = np.random.default_rng(seed)
    keys = sorted(SEARCH_SPACE)
    for _ in range(count):
        yield {k: SEARCH_SPACE[k][rng.integers(len(SEARCH_SPACE[k]))] for k in keys}


def score(emb, g, splits, probe: ProbeConfig) -> float:
    return float(np.mean([validation_accuracy(emb, g.labels, s, probe, g.num_classes) for s in splits]))


def search(name: str, data_root, trials: int, epochs: int, seed: int, log_path: Path):
    rc = resolve_config(name)
    g = load_prepared(name, data_root, rc.data["row_normalize"])
    splits = evaluation_splits(g, rc)
    best = (-1.0, None, None)
    with open(log_path, "w") as log:
        for i, params in enumerate(sample_trials(trials, seed)):
            cfg = TrainConfig(**{**rc.train.to_dict(), **params, "epochs": epochs, "seed": 0})
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                emb = train(g, cfg).embeddings(g)
            for lr, wd in itertools.product(PROBE_SEARCH_SPACE["lr"], PROBE_SEARCH_SPACE["weight_decay"]):
                probe = ProbeConfig(lr, wd, rc.probe.epochs)
                val = score(emb, g, splits, probe)
                log.write(json.dumps({"trial": i, **params, "probe_lr": lr, "probe_wd": wd, "val": val}) + "\n")
                if val > best[0]:
                    best = (val, cfg, probe)
            print(f"trial {i}: best validation so far {100 * best[0]:.2f}%", flush=True)
    return rc, best


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("dataset")
    parser.add_argument("--data-root", type=Path, default=Path("data"))
    parser.add_argument("--trials", type=int, default=40)
    parser.add_argument("--epochs", type=int, default=200)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--write", action="store_true", help="overwrite the shipped config with the winner")
    args = parser.parse_args(argv)
    log_path = Path(f"grid-{args.dataset}.jsonl")
    rc, (val, cfg, probe) = search(args.dataset, args.data_root, args.trials, args.epochs, args.seed, log_path)
    out = RunConfig(rc.dataset, rc.seeds, TrainConfig(**{**cfg.to_dict(), "seed": 0}), probe, rc.data, rc.eval)
    path = CONFIG_DIR / f"{args.dataset}.ini" if args.write else Path(f"{args.dataset}.ini")
    out.write(path)
    print(f"best mean validation accuracy {100 * val:.2f}%; config written to {path}; trials in {log_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
