import json

import numpy as np
import pytest

from h3gnn import cli, homophily_ratio
from h3gnn.data import manifest

from conftest import binary_graph, write_geom

FAST = ["--set", "train.token_dim=8", "--set", "train.heads=2", "--set", "train.wgcn_hidden=4",
        "--set", "probe.epochs=20", "--set", "data.num_splits=3"]


@pytest.fixture
def toy(tmp_path, monkeypatch):
    """A 40-node WebKB-layout dataset registered as ``toy`` under tmp_path/data."""
    g = binary_graph(40, 5, 30, seed=1)
    root = tmp_path / "data"
    write_geom(root / "toy", g, "toy")
    info = manifest.DatasetInfo("toy", "webkb", 40, 0, 30, 5, round(homophily_ratio(g), 2), "provided")
    monkeypatch.setitem(manifest.DATASETS, "toy", info)
    return root


def run(*argv):
    return cli.main([str(a) for a in argv])


# --- configuration -------------------------------------------------------------------------

def test_defaults_then_file_then_overrides(tmp_path):
    ini = tmp_path / "c.ini"
    ini.write_text("[run]\ndataset = texas\n[train]\nlr = 0.01\nepochs = 7\n")
    rc = cli.resolve_config(None, ini, ["train.epochs=3", "mask_ratio=0.3"])
    assert rc.dataset == "texas"
    assert rc.train.lr == 0.01 and rc.train.epochs == 3 and rc.train.mask_ratio == 0.3
    assert rc.train.momentum == 0.99


def test_unknown_key_rejected(tmp_path):
    ini = tmp_path / "c.ini"
    ini.write_text("[train]\nlearning_rate = 0.1\n")
    with pytest.raises(cli.ConfigError, match="learning_rate"):
        cli.resolve_config("texas", ini)
    with pytest.raises(cli.ConfigError):
        cli.resolve_config("texas", None, ["train.nope=1"])
    with pytest.raises(cli.ConfigError):
        cli.resolve_config("texas", None, ["bogus.lr=1"])


def test_ambiguous_bare_key_rejected():
    with pytest.raises(cli.ConfigError, match="ambiguous"):
        cli.resolve_config("texas", None, ["lr=0.1"])


def test_bad_value_type():
    with pytest.raises(cli.ConfigError):
        cli.resolve_config("texas", None, ["train.epochs=many"])
    with pytest.raises(cli.ConfigError):
        cli.resolve_config("texas", None, ["train.objective=other"])


def test_snapshot_roundtrip(tmp_path):
    rc = cli.resolve_config("wisconsin", None, ["train.lr=0.001", "run.seeds=0-2", "eval.normalize=true"])
    path = rc.write(tmp_path / "config.ini")
    again = cli.resolve_config(None, path)
    assert again.to_dict() == rc.to_dict()
    assert again.seeds == [0, 1, 2]


def test_every_shipped_config_parses():
    for name in manifest.DATASETS:
        rc = cli.resolve_config(name)
        assert rc.dataset == name
        assert rc.train.outside_search_space() == []


# --- exit codes ---------------------------------------------------------------------------

def test_unknown_key_exits_2(toy):
    assert run("--data-root", toy, "train", "toy", "--set", "train.nope=1") == cli.EXIT_USAGE


def test_bad_flag_exits_2():
    assert run("train", "--no-such-flag") == cli.EXIT_USAGE


def test_unknown_dataset_exits_2():
    assert run("train", "atlantis") == cli.EXIT_USAGE


def test_missing_dataset_names_prepare(tmp_path, capsys):
    assert run("--data-root", tmp_path, "train", "texas") == cli.EXIT_INTEGRITY
    assert "h3gnn prepare texas" in capsys.readouterr().err


def test_unprepared_dataset_names_prepare(toy, capsys):
    assert run("--data-root", toy, "train", "toy") == cli.EXIT_INTEGRITY
    assert "h3gnn prepare toy" in capsys.readouterr().err


# --- prepare ------------------------------------------------------------------------------------

def test_prepare_is_idempotent(toy, capsys):
    assert run("--data-root", toy, "prepare", "toy") == cli.EXIT_OK
    out = capsys.readouterr().out
    assert "toy: nodes observed=40 expected=40 OK" in out
    first = (toy / "toy" / "manifest.ini").read_text()
    assert run("--data-root", toy, "prepare", "toy") == cli.EXIT_OK
    assert (toy / "toy" / "manifest.ini").read_text() == first


def test_prepare_reports_failed_check(toy, monkeypatch, capsys):
    monkeypatch.setitem(manifest.DATASETS, "toy", manifest.DatasetInfo("toy", "webkb", 41, 0, 30, 5, 0.5, "provided"))
    assert run("--data-root", toy, "prepare", "toy") == cli.EXIT_INTEGRITY
    assert "nodes" in capsys.readouterr().err


def test_prepare_corrupted_file(toy):
    path = toy / "toy" / "out1_graph_edges.txt"
    path.write_text(path.read_text() + "3\n")
    assert run("--data-root", toy, "prepare", "toy") == cli.EXIT_INTEGRITY


def test_changed_file_after_prepare(toy, tmp_path):
    assert run("--data-root", toy, "prepare", "toy") == cli.EXIT_OK
    path = toy / "toy" / "out1_graph_edges.txt"
    path.write_text(path.read_text() + "0\t1\n")
    assert run("--data-root", toy, "train", "toy", "--out", tmp_path / "r") == cli.EXIT_INTEGRITY


# --- train / eval / ablate / bench --------------------------------------------------------------

def test_train_eval_roundtrip(toy, tmp_path):
    assert run("--data-root", toy, "prepare", "toy") == cli.EXIT_OK
    out = tmp_path / "run"
    assert run("--data-root", toy, "train", "toy", "--epochs", 4, "--seeds", 0, 1, "--out", out, *FAST) == 0
    for seed in (0, 1):
        assert (out / f"seed-{seed}" / "checkpoint.npz").is_file()
        assert len(cli.read_jsonl(out / f"seed-{seed}" / "log.jsonl")) == 4
    assert run("--data-root", toy, "eval", out, "--protocol", "both") == cli.EXIT_OK
    records = cli.read_jsonl(out / "metrics.jsonl")
    assert {(r["seed"], r["protocol"]) for r in records} == {(0, "probe"), (1, "probe"), (0, "cluster"),
                                                             (1, "cluster")}
    probe = [r for r in records if r["protocol"] == "probe"]
    assert all(len(r["accuracies"]) == 3 for r in probe)
    for r in records:
        assert r["mean"] == pytest.approx(np.mean(r["accuracies"]), abs=1e-12)
    summary = (out / "summary.txt").read_text()
    assert "probe" in summary and "±" in summary

    # evaluation is deterministic
    first = (out / "metrics.jsonl").read_text()
    assert run("--data-root", toy, "eval", out, "--protocol", "both") == cli.EXIT_OK
    strip = [{k: v for k, v in r.items() if k != "seconds"} for r in cli.read_jsonl(out / "metrics.jsonl")]
    assert strip == [{k: v for k, v in json.loads(line).items() if k != "seconds"} for line in first.splitlines()]


def test_snapshot_alone_reproduces_training(toy, tmp_path):
    assert run("--data-root", toy, "prepare", "toy") == cli.EXIT_OK
    a, b = tmp_path / "a", tmp_path / "b"
    assert run("--data-root", toy, "train", "toy", "--epochs", 3, "--strategy", "diffi", "--out", a, *FAST) == 0
    assert run("--data-root", toy, "train", "--config", a / "config.ini", "--out", b) == 0
    la = [r["loss"] for r in cli.read_jsonl(a / "seed-0" / "log.jsonl")]
    lb = [r["loss"] for r in cli.read_jsonl(b / "seed-0" / "log.jsonl")]
    assert la == lb
    assert (a / "config.ini").read_text() == (b / "config.ini").read_text()


def test_eval_without_run_dir(tmp_path):
    assert run("eval", tmp_path) == cli.EXIT_INTEGRITY


def test_ablation_variants_order():
    rc = cli.resolve_config("texas")
    rows = cli.ablation_variants(rc, "r-sweep")
    assert [name for name, _ in rows] == ["r=1", "r=0.8", "r=0.5", "r=0.2", "r=0"]
    assert rows[-1][1]["strategy"] == "random"
    comps = dict(cli.ablation_variants(rc, "components"))
    assert comps["w/o T-S & DynMsk & Attn"]["attention"] is False
    assert comps["w/o T-S & DynMsk"]["objective"] == "encoder_decoder"


def test_ablate_writes_report(toy, tmp_path):
    assert run("--data-root", toy, "prepare", "toy") == cli.EXIT_OK
    out = tmp_path / "abl"
    assert run("--data-root", toy, "ablate", "toy", "--study", "r-sweep", "--epochs", 2, "--out", out, *FAST) == 0
    lines = (out / "report.txt").read_text().splitlines()
    assert [ln.split()[0] for ln in lines[1:]] == ["r=1", "r=0.8", "r=0.5", "r=0.2", "r=0"]
    assert len(cli.read_jsonl(out / "ablation.jsonl")) == 5


def test_bench_report(toy, tmp_path):
    assert run("--data-root", toy, "prepare", "toy") == cli.EXIT_OK
    reports = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert run("--data-root", toy, "bench", "toy", "--epochs", 6, "--eval-every", 2, "--out", out, *FAST) == 0
        reports.append(json.loads((out / "bench.json").read_text()))
    a, b = reports
    assert a["epochs"] == b["epochs"] == 6
    assert a["best_epoch"] == b["best_epoch"]
    assert 0 < a["time_to_best_seconds"] <= a["total_seconds"]
    assert a["peak_rss_mb_approx"] > 0


def test_compare_ed_is_reproducible(tmp_path):
    args = ["compare-ed", "--epochs", 5, "--seeds", 0, 1, "--sbm-nodes", 30, "--sbm-dim", 6, *FAST]
    assert run(*args, "--out", tmp_path / "a") == cli.EXIT_OK
    assert run(*args, "--out", tmp_path / "b") == cli.EXIT_OK
    a = json.loads((tmp_path / "a" / "report.json").read_text())
    b = json.loads((tmp_path / "b" / "report.json").read_text())
    assert a == b
    assert len(a["runs"]) == 2 and len(a["runs"][0]["ts_normalized"]) == 5
    assert a["runs"][0]["ts_normalized"][0] == 1.0


def test_parallel_seeds_match_sequential(toy, tmp_path):
    assert run("--data-root", toy, "prepare", "toy") == cli.EXIT_OK
    for name, jobs in (("seq", 1), ("par", 2)):
        assert run("--data-root", toy, "train", "toy", "--epochs", 3, "--seeds", "0-1", "--jobs", jobs,
                   "--out", tmp_path / name, *FAST) == 0
    for seed in (0, 1):
        seq = [r["loss"] for r in cli.read_jsonl(tmp_path / "seq" / f"seed-{seed}" / "log.jsonl")]
        par = [r["loss"] for r in cli.read_jsonl(tmp_path / "par" / f"seed-{seed}" / "log.jsonl")]
        assert seq == par
