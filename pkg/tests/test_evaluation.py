"""Confusion counting, metric ratios with explicit degenerate handling,
change-rate buckets, and report schemas."""

import random

import pytest

from commitrisk.evaluation import (
    Confusion,
    LengthMismatch,
    change_rate_buckets,
    confusion,
    fold_schedule,
    make_report,
    metrics,
    training_size_curve,
)
from commitrisk.neural import Prediction


# --- confusion counting ---

def test_confusion_counts_each_quadrant():
    preds = ["dangerous", "dangerous", "safe", "safe"]
    labels = ["dangerous", "safe", "dangerous", "safe"]
    c = confusion(preds, labels)
    assert (c.tp, c.fp, c.fn, c.tn) == (1, 1, 1, 1)
    assert c.total == 4


def test_confusion_accepts_predictions_ints_and_strings():
    preds = [Prediction(0.9, "dangerous", 2.0), 1, "safe", 0]
    labels = [1, "dangerous", 0, "safe"]
    c = confusion(preds, labels)
    assert (c.tp, c.fp, c.fn, c.tn) == (2, 0, 0, 2)


def test_confusion_rejects_unknown_label():
    with pytest.raises(ValueError, match="unknown label"):
        confusion(["maybe"], ["safe"])


def test_confusion_length_mismatch():
    with pytest.raises(LengthMismatch):
        confusion(["safe"], ["safe", "safe"])


# --- metrics ---

def test_metrics_balanced_golden_is_exact():
    m = metrics(Confusion(tp=90, fp=10, fn=10, tn=90))
    assert m["precision"] == 0.9
    assert m["recall"] == 0.9
    assert m["f1"] == 0.9
    assert m["accuracy"] == 0.9
    assert m["degenerate"] == []


def test_metrics_asymmetric_golden():
    m = metrics(Confusion(tp=6, fp=2, fn=4, tn=8))
    assert m["precision"] == 0.75
    assert m["recall"] == 0.6
    assert m["f1"] == pytest.approx(2 * 0.75 * 0.6 / 1.35, rel=1e-15)
    assert m["accuracy"] == 0.7


def test_metrics_degenerate_all_safe():
    m = metrics(Confusion(tp=0, fp=0, fn=0, tn=5))
    assert m["precision"] == 0.0 and m["recall"] == 0.0 and m["f1"] == 0.0
    assert m["accuracy"] == 1.0
    assert m["degenerate"] == ["precision", "recall", "f1"]


def test_metrics_degenerate_empty():
    m = metrics(Confusion())
    assert m["degenerate"] == ["precision", "recall", "f1", "accuracy"]
    assert m["precision"] == m["accuracy"] == 0.0


def test_metrics_perfect():
    m = metrics(Confusion(tp=3, tn=7))
    assert m == {"precision": 1.0, "recall": 1.0, "f1": 1.0,
                 "accuracy": 1.0, "degenerate": []}


def test_f1_is_harmonic_mean_and_bounded():
    rng = random.Random(5)
    for _ in range(50):
        c = Confusion(tp=rng.randrange(1, 20), fp=rng.randrange(0, 20),
                      fn=rng.randrange(0, 20), tn=rng.randrange(0, 20))
        m = metrics(c)
        p, r = m["precision"], m["recall"]
        assert m["f1"] == pytest.approx(2 * p * r / (p + r), rel=1e-12)
        assert min(p, r) - 1e-12 <= m["f1"] <= max(p, r) + 1e-12


# --- change-rate buckets ---

def test_buckets_group_by_decile_and_skip_empty():
    rates = [0.05, 0.15, 0.95, 1.0]
    preds = ["dangerous", "safe", "dangerous", "safe"]
    labels = ["dangerous", "safe", "safe", "dangerous"]
    out = change_rate_buckets(rates, preds, labels)
    assert [b["bucket"] for b in out] == ["[0.0,0.1)", "[0.1,0.2)", "[0.9,1.0)"]
    assert [b["count"] for b in out] == [1, 1, 2]
    top = out[-1]
    assert top["confusion"] == {"tp": 0, "fp": 1, "fn": 1, "tn": 0}
    assert top["metrics"]["accuracy"] == 0.0


def test_bucket_edge_values():
    out = change_rate_buckets([0.0, 0.1, 1.0], ["safe"] * 3, ["safe"] * 3)
    assert [b["bucket"] for b in out] == ["[0.0,0.1)", "[0.1,0.2)", "[0.9,1.0)"]


def test_buckets_counts_cover_all_rows():
    rng = random.Random(9)
    rates = [rng.random() for _ in range(40)]
    preds = [rng.choice(["safe", "dangerous"]) for _ in range(40)]
    labels = [rng.choice(["safe", "dangerous"]) for _ in range(40)]
    out = change_rate_buckets(rates, preds, labels)
    assert sum(b["count"] for b in out) == 40


def test_buckets_reject_bad_rates_and_lengths():
    with pytest.raises(ValueError, match="outside"):
        change_rate_buckets([1.5], ["safe"], ["safe"])
    with pytest.raises(LengthMismatch):
        change_rate_buckets([0.5], ["safe", "safe"], ["safe"])


# --- training-size folds ---

def test_fold_schedule_cumulative_even():
    schedule = fold_schedule(10, 5)
    assert [len(s) for s in schedule] == [2, 4, 6, 8, 10]
    for earlier, later in zip(schedule, schedule[1:]):
        assert later[:len(earlier)] == earlier  # strictly cumulative
    assert schedule[-1] == list(range(10))


def test_fold_schedule_uneven_and_small():
    schedule = fold_schedule(3, 5)
    assert len(schedule) == 5
    sizes = [len(s) for s in schedule]
    assert sizes == sorted(sizes)
    assert schedule[-1] == [0, 1, 2]
    assert fold_schedule(0, 5) == [[], [], [], [], []]


def test_fold_schedule_rejects_bad_arguments():
    with pytest.raises(ValueError):
        fold_schedule(10, 0)
    with pytest.raises(ValueError):
        fold_schedule(-1, 5)


def test_training_size_curve_schema():
    items = list(range(10))
    curve = training_size_curve(
        train_fn=lambda subset: {"trained_on": len(subset)},
        eval_fn=lambda model: {"accuracy": model["trained_on"] / 10},
        train_items=items, folds=5)
    assert [point["folds"] for point in curve] == [1, 2, 3, 4, 5]
    assert [point["train_size"] for point in curve] == [2, 4, 6, 8, 10]
    assert curve[-1]["metrics"] == {"accuracy": 1.0}
    assert all(set(p) == {"folds", "train_size", "metrics"} for p in curve)


# --- report ---

def test_make_report_schema():
    preds = ["dangerous", "safe", "safe"]
    labels = ["dangerous", "dangerous", "safe"]
    report = make_report("dev-process", preds, labels, rates=[0.2, 0.4, 0.6])
    assert set(report) == {"split", "count", "confusion", "metrics",
                           "change_rate_buckets"}
    assert report["split"] == "dev-process"
    assert report["count"] == 3
    assert report["confusion"] == {"tp": 1, "fp": 0, "fn": 1, "tn": 1}
    assert report["metrics"]["precision"] == 1.0
    assert report["metrics"]["recall"] == 0.5


def test_make_report_with_training_curve():
    curve = [{"folds": 1, "train_size": 2, "metrics": {"accuracy": 0.5}}]
    report = make_report("cross-project", ["safe"], ["safe"], [0.1],
                         training_curve=curve)
    assert report["training_size_curve"] == curve
    bare = make_report("cross-project", ["safe"], ["safe"], [0.1])
    assert "training_size_curve" not in bare
