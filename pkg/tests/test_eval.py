import itertools
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from h3gnn import Encoder, EncoderConfig, Metrics, ProbeConfig, Split, evaluate_run, kmeans_accuracy, linear_probe
from h3gnn.data import random_split, synth_graph
from h3gnn.evaluation import confusion, evaluate_embeddings, hungarian_match, matched_accuracy
from h3gnn.tensorcore import StateError


def one_hot_setup(n=60, k=2, seed=0):
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, k, n)
    return np.eye(k)[labels], labels, random_split(labels, 0.6, 0.2, seed)


# --- linear probe --------------------------------------------------------------------

def test_separable_probe_is_perfect():
    x, y, split = one_hot_setup()
    assert linear_probe(x, y, split, ProbeConfig(epochs=100)) == 1.0


def test_shuffled_labels_near_chance():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((1000, 16))
    y = rng.integers(0, 5, 1000)
    acc = linear_probe(x, y, random_split(y, 0.6, 0.2, 1), ProbeConfig(epochs=100), num_classes=5)
    assert abs(acc - 0.2) < 0.1


def test_empty_train_mask():
    x, y, split = one_hot_setup()
    with pytest.raises(StateError):
        linear_probe(x, y, Split(np.zeros(60, bool), split.val, split.test))


def test_poisoned_test_labels_do_not_change_selection():
    rng = np.random.default_rng(3)
    y = rng.integers(0, 3, 200)
    x = np.eye(3)[y] + 1.5 * rng.standard_normal((200, 3))
    split = random_split(y, 0.5, 0.25, 0)
    poisoned = y.copy()
    poisoned[split.test] = (y[split.test] + 1) % 3
    cfg = ProbeConfig(epochs=150)
    clean_acc, clean_pred = linear_probe(x, y, split, cfg, 3, return_predictions=True)
    dirty_acc, dirty_pred = linear_probe(x, poisoned, split, cfg, 3, return_predictions=True)
    assert np.array_equal(clean_pred, dirty_pred)
    assert clean_acc == np.mean(clean_pred == y[split.test])
    assert dirty_acc == np.mean(dirty_pred == poisoned[split.test])


def test_probe_is_deterministic():
    x, y, split = one_hot_setup(seed=4)
    x = x + np.random.default_rng(0).standard_normal(x.shape)
    assert linear_probe(x, y, split) == linear_probe(x, y, split)


# --- clustering ----------------------------------------------------------------------------

def test_two_far_clusters():
    rng = np.random.default_rng(0)
    x = np.r_[rng.normal(0, 0.1, (20, 2)), rng.normal(100, 0.1, (20, 2))]
    y = np.r_[np.zeros(20, int), np.ones(20, int)]
    assert kmeans_accuracy(x, y, 2, seed=0) == 1.0


def test_identical_points_give_majority_fraction():
    y = np.array([0] * 7 + [1] * 3)
    with warnings.catch_warnings():  # sklearn warns about fewer distinct points than clusters
        warnings.simplefilter("ignore")
        acc = kmeans_accuracy(np.ones((10, 3)), y, 2)
    assert acc == pytest.approx(0.7)


def test_k_larger_than_n():
    with pytest.raises(ValueError):
        kmeans_accuracy(np.zeros((3, 2)), np.array([0, 1, 2]), 4)


def brute_force(counts):
    k = counts.shape[0]
    return max(sum(counts[i, p[i]] for i in range(k)) for p in itertools.permutations(range(k)))


@settings(max_examples=60, deadline=None)
@given(k=st.integers(1, 5), seed=st.integers(0, 2**31))
def test_hungarian_matches_brute_force(k, seed):
    counts = np.random.default_rng(seed).integers(0, 50, (k, k))
    assert hungarian_match(counts) == brute_force(counts)


def test_matched_accuracy_invariances():
    rng = np.random.default_rng(1)
    pred, y = rng.integers(0, 4, 50), rng.integers(0, 4, 50)
    base = matched_accuracy(pred, y)
    assert matched_accuracy(rng.permutation(4)[pred], y) == base
    assert matched_accuracy(pred, rng.permutation(4)[y]) == base


def test_kmeans_class_permutation_and_determinism():
    g = synth_graph(90, 3, 0.1, 0.01, 0.5, 2, 4)
    perm = np.array([2, 0, 1])
    a = kmeans_accuracy(g.features, g.labels, 3, seed=5)
    assert kmeans_accuracy(g.features, perm[g.labels], 3, seed=5) == a
    assert kmeans_accuracy(g.features, g.labels, 3, seed=5) == a


def test_confusion_counts():
    w = confusion(np.array([0, 1, 1]), np.array([1, 1, 0]))
    assert w.tolist() == [[0, 1], [1, 1]]


# --- aggregation ----------------------------------------------------------------------------

def test_identical_splits_have_zero_std():
    x, y, split = one_hot_setup()
    m = evaluate_embeddings(x, y, "probe", [split] * 10, ProbeConfig(epochs=50))
    assert m.std == 0.0 and len(m.accuracies) == 10


def test_metrics_mean_and_population_std():
    m = Metrics([0.5, 0.7, 0.9, 0.8])
    assert abs(m.mean - sum(m.accuracies) / 4) < 1e-12
    assert abs(m.std - np.sqrt(np.mean((np.array(m.accuracies) - m.mean) ** 2))) < 1e-12
    assert m.summary() == "72.50 ± 14.79"
    assert m.to_dict()["mean"] == m.mean


def test_unknown_protocol():
    x, y, split = one_hot_setup()
    with pytest.raises(ValueError):
        evaluate_embeddings(x, y, "nope", [split])


def test_evaluate_run_embeds_once():
    g = synth_graph(40, 2, 0.2, 0.02, 0.5, 0, 6)
    g = g.with_splits([random_split(g.labels, 0.6, 0.2, s) for s in range(3)])
    enc = Encoder.for_graph(g, EncoderConfig(6, 8, 2, 4))
    calls = []
    orig = enc.embed
    enc.embed = lambda f: calls.append(1) or orig(f)
    out = evaluate_run(g, enc, ("probe", "cluster"), probe=ProbeConfig(epochs=30), seeds=[0, 1, 2])
    assert calls == [1]
    assert set(out) == {"probe", "cluster"} and len(out["probe"].accuracies) == 3


# --- real data, when present ----------------------------------------------------------------

def test_raw_cornell_probe_matches_mlp_baseline():
    from pathlib import Path

    from h3gnn.data import load_dataset, standard_splits

    from conftest import data_root

    root = Path(data_root()) / "cornell"
    if not root.is_dir():
        pytest.skip("cornell dataset not available")
    g = load_dataset("cornell", root)
    m = evaluate_embeddings(g.features, g.labels, "probe", standard_splits(g, "provided"), ProbeConfig(),
                            num_classes=g.num_classes)
    assert abs(100 * m.mean - 81.08) <= 5
