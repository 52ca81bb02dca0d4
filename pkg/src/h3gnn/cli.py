"""Command-line entry point.

Subcommands: ``prepare``, ``train``, ``eval``, ``ablate``, ``compare-ed`` and
``bench``. Runs are configured by INI files with ``[run]``, ``[train]``,
``[probe]``, ``[data]`` and ``[eval]`` sections; values are resolved from the
built-in defaults, then the shipped per-dataset file, then ``--config``, then
``--set section.key=value`` overrides. Every run writes the resolved
configuration as ``config.ini`` next to its outputs, and that file alone is
enough to repeat the run (``h3gnn train --config out/config.ini``).

Exit codes: 0 success, 1 runtime failure, 2 usage error, 3 integrity or
validation failure.
"""
from __future__ import annotations

import argparse
import configparser
import json
import logging
import os
import resource
import sys
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .data import (IntegrityError, ParseError, build_manifest, dataset_info, load_dataset, read_manifest,
                   row_normalize, standard_splits, synth_graph, verify_checksums, write_manifest)
from .data.manifest import DATASETS
from .evaluation import Metrics, ProbeConfig, evaluate_embeddings, kmeans_accuracy, validation_accuracy
from .graph import Graph
from .ssl import (TrainConfig, epochs_to_fraction, load_checkpoint, save_checkpoint, train, trends_downward)

log = logging.getLogger("h3gnn")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, EXIT_INTEGRITY = 0, 1, 2, 3


class ConfigError(ValueError):
    """Bad configuration file or override."""


class OutputError(RuntimeError):
    """An output file is missing or does not parse back."""


# --- configuration -----------------------------------------------------------------

DATA_DEFAULTS = {"row_normalize": False, "num_splits": 10}
EVAL_DEFAULTS = {"protocols": "probe", "cluster_seeds": 10, "normalize": False}


def _parse_value(raw: str, default):
    raw = raw.strip()
    if isinstance(default, bool):
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"expected a boolean, got {raw!r}")
    try:
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError:
        raise ConfigError(f"expected {type(default).__name__}, got {raw!r}") from None
    return raw


def _parse_seeds(raw) -> list[int]:
    if isinstance(raw, (list, tuple)):
        return [int(s) for s in raw]
    out = []
    for tok in str(raw).replace(",", " ").split():
        if "-" in tok:
            lo, hi = tok.split("-")
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(tok))
    if not out:
        raise ConfigError("empty seed list")
    return out


@dataclass
class RunConfig:
    dataset: str = ""
    seeds: list = field(default_factory=lambda: [0])
    train: TrainConfig = field(default_factory=TrainConfig)
    probe: ProbeConfig = field(default_factory=ProbeConfig)
    data: dict = field(default_factory=lambda: dict(DATA_DEFAULTS))
    eval: dict = field(default_factory=lambda: dict(EVAL_DEFAULTS))

    def _sections(self) -> dict[str, dict]:
        return {
            "run": {"dataset": self.dataset, "seeds": " ".join(map(str, self.seeds))},
            "train": {f.name: getattr(self.train, f.name) for f in fields(TrainConfig)},
            "probe": {f.name: getattr(self.probe, f.name) for f in fields(ProbeConfig) if f.name != "seed"},
            "data": dict(self.data),
            "eval": dict(self.eval),
        }

    def set(self, section: str, key: str, raw: str) -> None:
        current = self._sections()
        if section not in current:
            raise ConfigError(f"unknown config section [{section}]")
        if key not in current[section]:
            raise ConfigError(f"unknown config key {section}.{key}")
        if section == "run":
            if key == "dataset":
                self.dataset = raw.strip().lower()
            else:
                self.seeds = _parse_seeds(raw)
            return
        value = _parse_value(raw, current[section][key])
        if section in ("train", "probe"):
            obj = getattr(self, section)
            kw = {f.name: getattr(obj, f.name) for f in fields(obj)}
            kw[key] = value
            try:
                setattr(self, section, type(obj)(**kw))
            except ValueError as e:
                raise ConfigError(f"{section}.{key}: {e}") from None
        else:
            getattr(self, section)[key] = value

    def update_from(self, cp: configparser.ConfigParser, source: str) -> None:
        for section in cp.sections():
            for key, raw in cp[section].items():
                try:
                    self.set(section, key, raw)
                except ConfigError as e:
                    raise ConfigError(f"{source}: {e}") from None

    def apply_override(self, text: str) -> None:
        if "=" not in text:
            raise ConfigError(f"override {text!r} is not of the form key=value")
        key, raw = text.split("=", 1)
        key = key.strip()
        if "." in key:
            section, key = key.split(".", 1)
        else:
            owners = [s for s, vals in self._sections().items() if key in vals]
            if not owners:
                raise ConfigError(f"unknown config key {key!r}")
            if len(owners) > 1:
                raise ConfigError(f"key {key!r} is ambiguous; write one of "
                                  + ", ".join(f"{s}.{key}" for s in owners))
            section = owners[0]
        self.set(section, key, raw)

    def to_parser(self) -> configparser.ConfigParser:
        cp = configparser.ConfigParser()
        cp.optionxform = str
        for section, vals in self._sections().items():
            cp[section] = {k: (str(v).lower() if isinstance(v, bool) else repr(v) if isinstance(v, float) else str(v))
                           for k, v in vals.items()}
        return cp

    def write(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as fh:
            fh.write(f"# resolved configuration written by h3gnn {__version__}\n")
            self.to_parser().write(fh)
        return path

    def to_dict(self) -> dict:
        return {s: dict(v) for s, v in self._sections().items()}


def _read_ini(path) -> configparser.ConfigParser:
    cp = configparser.ConfigParser()
    cp.optionxform = str
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file {path} does not exist") from None
    except configparser.Error as e:
        raise ConfigError(f"{path}: {e}") from None
    return cp


def shipped_config(name: str) -> Path | None:
    ref = resources.files("h3gnn") / "configs" / f"{name}.ini"
    return Path(str(ref)) if ref.is_file() else None


def resolve_config(dataset: str | None = None, config_path=None, overrides=()) -> RunConfig:
    """Defaults, then the shipped file for the dataset, then ``config_path``, then overrides."""
    rc = RunConfig()
    user = _read_ini(config_path) if config_path else None
    name = (dataset or "").lower()
    if not name and user is not None and user.has_option("run", "dataset"):
        name = user["run"]["dataset"].strip().lower()
    if name:
        rc.dataset = name
        shipped = shipped_config(name)
        if shipped is not None:
            rc.update_from(_read_ini(shipped), str(shipped))
    if user is not None:
        rc.update_from(user, str(config_path))
    if dataset:
        rc.dataset = dataset.lower()
    for text in overrides:
        rc.apply_override(text)
    return rc


# --- datasets ---------------------------------------------------------------------

def known_dataset(name: str):
    try:
        return dataset_info(name)
    except KeyError as e:
        raise ConfigError(e.args[0]) from None


def default_data_root() -> Path:
    return Path(os.environ.get("H3GNN_DATA", "data"))


def dataset_dir(root, name: str) -> Path:
    return Path(root) / name


def load_prepared(name: str, root, row_norm: bool = False) -> Graph:
    """Load a dataset that ``prepare`` has validated, re-checking its file checksums."""
    known_dataset(name)
    d = dataset_dir(root, name)
    if not d.is_dir():
        raise IntegrityError(f"dataset {name!r} not found at {d}; fetch it and run `h3gnn prepare {name}` first")
    try:
        read_manifest(d)
    except IntegrityError:
        raise IntegrityError(f"dataset {name!r} at {d} has no manifest; run `h3gnn prepare {name}` first") from None
    bad = verify_checksums(d)
    if bad:
        raise IntegrityError(f"{name}: files changed since `h3gnn prepare`: {', '.join(bad)}")
    g = load_dataset(name, d)
    return g.with_features(row_normalize(g.features)) if row_norm else g


def evaluation_splits(g: Graph, rc: RunConfig):
    kind = dataset_info(rc.dataset).split_kind
    return standard_splits(g, kind, int(rc.data["num_splits"]))


# --- output helpers ------------------------------------------------------------------

def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj


def write_jsonl(path, records) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(_jsonable(rec), sort_keys=True) + "\n")
    return path


def read_jsonl(path) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def validate_outputs(paths) -> None:
    """Every path must exist and be non-empty; JSON files must parse."""
    for p in map(Path, paths):
        if not p.is_file() or p.stat().st_size == 0:
            raise OutputError(f"expected output {p} was not written")
        try:
            if p.suffix == ".jsonl":
                read_jsonl(p)
            elif p.suffix == ".json":
                json.loads(p.read_text())
        except json.JSONDecodeError as e:
            raise OutputError(f"{p} is not valid JSON: {e}") from None


def peak_rss_mb() -> float:
    """Peak resident set size of this process (approximate; Linux reports KiB)."""
    return resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 1024.0


def _train_quietly(g: Graph, cfg: TrainConfig, callback=None):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return train(g, cfg, callback)


# --- prepare ---------------------------------------------------------------------------

def cmd_prepare(args) -> int:
    name = args.dataset.lower()
    known_dataset(name)
    d = Path(args.dir) if args.dir else dataset_dir(args.data_root, name)
    if not d.is_dir():
        raise IntegrityError(f"no raw files for {name!r} at {d}; see scripts/fetch_datasets.py")
    cp, ok = build_manifest(name, d)
    path = write_manifest(cp, d)
    for key, line in cp["checks"].items():
        print(f"{name}: {key} {line}")
    e = cp["edges"]
    print(f"{name}: edges reported={e['reported']} raw_lines={e['raw_lines']} "
          f"directed={e['symmetrized_directed']} undirected={e['undirected_deduplicated']}")
    print(f"manifest written to {path}")
    if not ok:
        failed = [k for k, line in cp["checks"].items() if line.endswith("FAIL")]
        print(f"{name}: integrity check failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_INTEGRITY
    return EXIT_OK


# --- train -------------------------------------------------------------------------------

def train_seed(rc: RunConfig, seed: int, data_root, out_dir) -> dict:
    """Train one seed and write its checkpoint and log; runs in a worker process with --jobs > 1."""
    g = load_prepared(rc.dataset, data_root, rc.data["row_normalize"])
    cfg = TrainConfig(**{**rc.train.to_dict(), "seed": seed})
    res = _train_quietly(g, cfg)
    seed_dir = Path(out_dir) / f"seed-{seed}"
    seed_dir.mkdir(parents=True, exist_ok=True)
    save_checkpoint(seed_dir / "checkpoint.npz", res, {"dataset": rc.dataset, "seed": seed})
    write_jsonl(seed_dir / "log.jsonl", res.log.records())
    summary = {"seed": seed, "dataset": rc.dataset, "epochs": len(res.log.losses),
               "final_loss": res.log.losses[-1] if res.log.losses else None,
               "seconds_per_epoch": float(np.mean(res.log.epoch_seconds)) if res.log.epoch_seconds else 0.0,
               "total_seconds": res.log.total_seconds}
    return summary


def _run_seeds(fn, rc: RunConfig, jobs: int, *extra) -> list:
    if jobs <= 1 or len(rc.seeds) == 1:
        return [fn(rc, s, *extra) for s in rc.seeds]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(fn, rc, s, *extra) for s in rc.seeds]
        return [f.result() for f in futures]


def _config_from_args(args) -> RunConfig:
    overrides = list(args.set or [])
    for flag, key in (("strategy", "train.strategy"), ("R", "train.mask_ratio"), ("r", "train.exploit_ratio"),
                      ("epochs", "train.epochs")):
        value = getattr(args, flag, None)
        if value is not None:
            overrides.append(f"{key}={value}")
    if getattr(args, "seeds", None):
        overrides.append("run.seeds=" + " ".join(args.seeds))
    rc = resolve_config(getattr(args, "dataset", None), args.config, overrides)
    if not rc.dataset:
        raise ConfigError("no dataset given on the command line or in [run] of the config file")
    known_dataset(rc.dataset)
    return rc


def cmd_train(args) -> int:
    rc = _config_from_args(args)
    out = Path(args.out or f"runs/{rc.dataset}")
    load_prepared(rc.dataset, args.data_root)  # fail fast before writing anything
    rc.write(out / "config.ini")
    summaries = _run_seeds(train_seed, rc, args.jobs, args.data_root, out)
    write_jsonl(out / "train.jsonl", summaries)
    for s in summaries:
        print(f"{rc.dataset} seed {s['seed']}: {s['epochs']} epochs, final loss {s['final_loss']:.6g}, "
              f"{s['seconds_per_epoch']:.4f} s/epoch, {s['total_seconds']:.2f} s total")
    expected = [out / "config.ini", out / "train.jsonl"]
    for s in rc.seeds:
        expected += [out / f"seed-{s}" / "checkpoint.npz", out / f"seed-{s}" / "log.jsonl"]
    validate_outputs(expected)
    return EXIT_OK


# --- eval ---------------------------------------------------------------------------------

def evaluate_embeddings_for(rc: RunConfig, g: Graph, emb: np.ndarray, protocols, seed: int = 0) -> dict[str, Metrics]:
    out = {}
    if "probe" in protocols:
        splits = evaluation_splits(g, rc)
        probe = ProbeConfig(rc.probe.lr, rc.probe.weight_decay, rc.probe.epochs, seed, rc.probe.standardize)
        out["probe"] = evaluate_embeddings(emb, g.labels, "probe", splits, probe, [seed] * len(splits),
                                           g.num_classes)
    if "cluster" in protocols:
        seeds = list(range(int(rc.eval["cluster_seeds"])))
        out["cluster"] = evaluate_embeddings(emb, g.labels, "cluster", (), None, seeds, g.num_classes,
                                             bool(rc.eval["normalize"]))
    return out


def _protocols(text: str) -> tuple[str, ...]:
    items = tuple(p.strip() for p in text.replace(",", " ").split() if p.strip())
    if "both" in items:
        return ("probe", "cluster")
    for p in items:
        if p not in ("probe", "cluster"):
            raise ConfigError(f"unknown protocol {p!r}")
    return items


def cmd_eval(args) -> int:
    run = Path(args.run)
    if not (run / "config.ini").is_file():
        raise IntegrityError(f"{run} has no config.ini; point eval at a directory written by `h3gnn train`")
    rc = resolve_config(None, run / "config.ini", args.set or [])
    protocols = _protocols(args.protocol or rc.eval["protocols"])
    g = load_prepared(rc.dataset, args.data_root, rc.data["row_normalize"])
    records, rows = [], []
    for seed in rc.seeds:
        ckpt = run / f"seed-{seed}" / "checkpoint.npz"
        if not ckpt.is_file():
            raise IntegrityError(f"missing checkpoint {ckpt}; run `h3gnn train` first")
        st, cfg, _ = load_checkpoint(ckpt, g)
        emb = st.embedding_model(cfg.embed_source).embed(g.features)
        for proto, m in evaluate_embeddings_for(rc, g, emb, protocols, seed).items():
            records.append({"dataset": rc.dataset, "seed": seed, **m.to_dict()})
            rows.append((seed, proto, m))
    out = Path(args.out) if args.out else run
    write_jsonl(out / "metrics.jsonl", records)
    lines = [f"{'seed':>4}  {'protocol':<8}  accuracy (%)"]
    lines += [f"{seed:>4}  {proto:<8}  {m.summary()}" for seed, proto, m in rows]
    for proto in protocols:
        accs = [a for _, p, m in rows if p == proto for a in m.accuracies]
        lines.append(f"{'all':>4}  {proto:<8}  {Metrics(accs).summary()}")
    (out / "summary.txt").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    validate_outputs([out / "metrics.jsonl", out / "summary.txt"])
    return EXIT_OK


# --- ablate ---------------------------------------------------------------------------------

COMPONENT_VARIANTS = (
    ("full", {}),
    ("w/o DynMsk", {"strategy": "random"}),
    ("w/o T-S & DynMsk", {"strategy": "random", "objective": "encoder_decoder", "embed_source": "student"}),
    ("w/o T-S & DynMsk & Attn", {"strategy": "random", "objective": "encoder_decoder", "embed_source": "student",
                                 "attention": False}),
)
R_SWEEP = (1.0, 0.8, 0.5, 0.2, 0.0)


def ablation_variants(rc: RunConfig, study: str) -> list[tuple[str, dict]]:
    out = []
    if study in ("components", "all"):
        out += list(COMPONENT_VARIANTS)
    if study in ("r-sweep", "all"):
        for r in sorted(R_SWEEP, reverse=True):
            # r = 0 leaves nothing to exploit, which is plain random masking
            out.append((f"r={r:g}", {"exploit_ratio": r} if r > 0 else {"exploit_ratio": 0.0, "strategy": "random"}))
    if not out:
        raise ConfigError(f"unknown ablation study {study!r}")
    return out


def run_variant(rc: RunConfig, g: Graph, changes: dict, seeds) -> Metrics:
    """Train one variant per seed and probe each seed's embeddings on every evaluation split."""
    accs, t0 = [], time.perf_counter()
    for seed in seeds:
        cfg = TrainConfig(**{**rc.train.to_dict(), **changes, "seed": seed})
        res = _train_quietly(g, cfg)
        emb = res.embeddings(g)
        accs += evaluate_embeddings_for(rc, g, emb, ("probe",), seed)["probe"].accuracies
    return Metrics(accs, list(seeds), time.perf_counter() - t0, "probe")


def cmd_ablate(args) -> int:
    rc = _config_from_args(args)
    g = load_prepared(rc.dataset, args.data_root, rc.data["row_normalize"])
    out = Path(args.out or f"runs/{rc.dataset}-ablate")
    rc.write(out / "config.ini")
    records, lines = [], [f"{'variant':<26} accuracy (%)"]
    for name, changes in ablation_variants(rc, args.study):
        m = run_variant(rc, g, changes, rc.seeds)
        records.append({"variant": name, "changes": changes, **m.to_dict()})
        lines.append(f"{name:<26} {m.summary()}")
        log.info("%s: %s", name, m.summary())
    write_jsonl(out / "ablation.jsonl", records)
    (out / "report.txt").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    validate_outputs([out / "config.ini", out / "ablation.jsonl", out / "report.txt"])
    return EXIT_OK


# --- compare-ed ---------------------------------------------------------------------------------

def comparison_report(g: Graph, cfg: TrainConfig, seeds, fraction: float = 0.1) -> dict:
    """Paired teacher-student and encoder-decoder runs with matched encoder, optimizer and seed."""
    runs = []
    for seed in seeds:
        base = {**cfg.to_dict(), "seed": seed}
        ts = _train_quietly(g, TrainConfig(**{**base, "objective": "teacher_student"}))
        ed = _train_quietly(g, TrainConfig(**{**base, "objective": "encoder_decoder", "embed_source": "student"}))
        runs.append({
            "seed": seed,
            "ts_epochs": epochs_to_fraction(ts.log.losses, fraction),
            "ed_epochs": epochs_to_fraction(ed.log.losses, fraction),
            "ts_downward": trends_downward(ts.log.losses),
            "ed_downward": trends_downward(ed.log.losses),
            "ts_normalized": ts.log.normalized().tolist(),
            "ed_normalized": ed.log.normalized().tolist(),
        })
    return {
        "graph": g.name, "nodes": g.num_nodes, "epochs": cfg.epochs, "fraction": fraction,
        "ts_mean_epochs": float(np.mean([r["ts_epochs"] for r in runs])),
        "ed_mean_epochs": float(np.mean([r["ed_epochs"] for r in runs])),
        "runs": runs,
    }


def cmd_compare_ed(args) -> int:
    if args.dataset:
        rc = _config_from_args(args)
        g = load_prepared(rc.dataset, args.data_root, rc.data["row_normalize"])
    else:
        overrides = list(args.set or [])
        if args.epochs is not None:
            overrides.append(f"train.epochs={args.epochs}")
        if args.seeds:
            overrides.append("run.seeds=" + " ".join(args.seeds))
        rc = resolve_config(None, args.config, overrides)
        if not args.seeds and rc.seeds == [0]:
            rc.seeds = list(range(5))
        g = synth_graph(args.sbm_nodes, args.sbm_classes, args.sbm_intra, args.sbm_inter, 1.0, args.sbm_seed,
                        args.sbm_dim)
    out = Path(args.out or "runs/compare-ed")
    rc.write(out / "config.ini")
    report = comparison_report(g, rc.train, rc.seeds, args.fraction)
    (out / "report.json").write_text(json.dumps(report, indent=1))
    lines = [f"threshold: {args.fraction:g} of the epoch-0 loss, {rc.train.epochs} epochs",
             f"{'seed':>4}  {'T-S epochs':>10}  {'E-D epochs':>10}  T-S down  E-D down"]
    lines += [f"{r['seed']:>4}  {r['ts_epochs']:>10}  {r['ed_epochs']:>10}  {str(r['ts_downward']):>8}  "
              f"{str(r['ed_downward']):>8}" for r in report["runs"]]
    lines.append(f"mean  {report['ts_mean_epochs']:>10.1f}  {report['ed_mean_epochs']:>10.1f}")
    (out / "report.txt").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    validate_outputs([out / "config.ini", out / "report.json", out / "report.txt"])
    return EXIT_OK


# --- bench ------------------------------------------------------------------------------------

def benchmark(g: Graph, rc: RunConfig, eval_every: int = 10, split_index: int = 0) -> dict:
    """Train once, probing validation accuracy every ``eval_every`` epochs.

    Time-to-best counts training time only, up to and including the epoch
    whose embeddings gave the best validation accuracy.
    """
    split = evaluation_splits(g, rc)[split_index]
    state = {"best": -1.0, "best_epoch": -1, "eval_seconds": 0.0}

    def on_epoch(epoch, result):
        if (epoch + 1) % eval_every and epoch + 1 != rc.train.epochs:
            return
        t0 = time.perf_counter()
        acc = validation_accuracy(result.embeddings(g), g.labels, split, rc.probe, g.num_classes)
        state["eval_seconds"] += time.perf_counter() - t0
        if acc > state["best"]:
            state["best"], state["best_epoch"] = acc, epoch

    res = _train_quietly(g, rc.train, on_epoch)
    secs = res.log.epoch_seconds
    return {
        "dataset": rc.dataset, "epochs": len(secs),
        "seconds_per_epoch": float(np.mean(secs)) if secs else 0.0,
        "total_seconds": float(np.sum(secs)),
        "best_epoch": state["best_epoch"], "best_val_accuracy": state["best"],
        "time_to_best_seconds": float(np.sum(secs[:state["best_epoch"] + 1])),
        "eval_seconds": state["eval_seconds"],
        "peak_rss_mb_approx": peak_rss_mb(),
    }


def cmd_bench(args) -> int:
    rc = _config_from_args(args)
    g = load_prepared(rc.dataset, args.data_root, rc.data["row_normalize"])
    out = Path(args.out or f"runs/{rc.dataset}-bench")
    rc.write(out / "config.ini")
    report = benchmark(g, rc, args.eval_every)
    (out / "bench.json").write_text(json.dumps(report, indent=1))
    print(f"{rc.dataset}: {report['epochs']} epochs, {report['seconds_per_epoch']:.4f} s/epoch, "
          f"total {report['total_seconds']:.2f} s, best validation {100 * report['best_val_accuracy']:.2f}% "
          f"at epoch {report['best_epoch']} after {report['time_to_best_seconds']:.2f} s, "
          f"peak RSS ~{report['peak_rss_mb_approx']:.0f} MB (approximate)")
    validate_outputs([out / "config.ini", out / "bench.json"])
    return EXIT_OK


# --- argument parsing ----------------------------------------------------------------------------

def _add_config_args(p, dataset_required=True):
    if dataset_required:
        p.add_argument("dataset", nargs="?", help=f"one of: {', '.join(DATASETS)} (or set [run] dataset)")
    p.add_argument("--config", help="INI file with [run]/[train]/[probe]/[data]/[eval] sections")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a config value, e.g. train.lr=0.01 (repeatable)")
    p.add_argument("--seeds", nargs="+", help="seed list, e.g. 0 1 2 or 0-4")
    p.add_argument("--epochs", type=int, help="training epochs (train.epochs)")
    p.add_argument("--out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="h3gnn", description="Self-supervised node representation learning.")
    parser.add_argument("--version", action="version", version=f"h3gnn {__version__}")
    parser.add_argument("--data-root", type=Path, default=default_data_root(),
                        help="directory holding one sub-directory per dataset (default: $H3GNN_DATA or ./data)")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="validate a raw dataset and write its manifest")
    p.add_argument("dataset")
    p.add_argument("--dir", help="dataset directory (default: <data-root>/<dataset>)")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", help="self-supervised training, one checkpoint per seed")
    _add_config_args(p)
    p.add_argument("--strategy", choices=("random", "diffi", "prob"))
    p.add_argument("--R", type=float, help="overall mask ratio")
    p.add_argument("--r", type=float, help="exploitation ratio")
    p.add_argument("--jobs", type=int, default=1, help="seeds trained in parallel processes")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="linear-probe and/or k-means evaluation of a training run")
    p.add_argument("run", help="directory written by `h3gnn train`")
    p.add_argument("--protocol", help="probe, cluster or both (default: [eval] protocols)")
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.add_argument("--out", help="output directory (default: the run directory)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="component ablations and the exploitation-ratio sweep")
    _add_config_args(p)
    p.add_argument("--study", default="all", choices=("components", "r-sweep", "all"))
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("compare-ed", help="teacher-student vs encoder-decoder convergence comparison")
    _add_config_args(p, dataset_required=False)
    p.add_argument("--dataset", help="prepared dataset to use instead of a synthetic graph")
    p.add_argument("--fraction", type=float, default=0.1, help="loss threshold relative to epoch 0")
    p.add_argument("--sbm-nodes", type=int, default=200)
    p.add_argument("--sbm-classes", type=int, default=4)
    p.add_argument("--sbm-intra", type=float, default=0.05)
    p.add_argument("--sbm-inter", type=float, default=0.01)
    p.add_argument("--sbm-dim", type=int, default=32)
    p.add_argument("--sbm-seed", type=int, default=0)
    p.set_defaults(func=cmd_compare_ed)

    p = sub.add_parser("bench", help="seconds per epoch, time to best validation, approximate memory")
    _add_config_args(p)
    p.add_argument("--eval-every", type=int, default=10)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"h3gnn: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (IntegrityError, ParseError, OutputError) as e:
        print(f"h3gnn: integrity error: {e}", file=sys.stderr)
        return EXIT_INTEGRITY
    except Exception as e:  # noqa: BLE001 - every other failure is a runtime failure
        log.debug("failure", exc_info=True)
        print(f"h3gnn: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
