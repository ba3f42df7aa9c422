"""Classification metrics and experiment reports.

The dangerous class is positive.  Undefined ratios (0/0) are reported as 0.0
and named in the "degenerate" list instead of producing NaNs.
"""
from __future__ import annotations

from dataclasses import dataclass


class LengthMismatch(ValueError):
    pass


@dataclass(frozen=True)
class Confusion:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


def _as_label(value) -> str:
    if isinstance(value, str):
        if value not in ("dangerous", "safe"):
            raise ValueError(f"unknown label {value!r}")
        return value
    return "dangerous" if int(value) == 1 else "safe"


def confusion(preds, labels) -> Confusion:
    """Count outcomes; preds may be Prediction objects or labels."""
    if len(preds) != len(labels):
        raise LengthMismatch(
            f"{len(preds)} predictions vs {len(labels)} labels")
    tp = fp = fn = tn = 0
    for pred, truth in zip(preds, labels):
        said = _as_label(getattr(pred, "label", pred))
        actual = _as_label(truth)
        if said == "dangerous":
            if actual == "dangerous":
                tp += 1
            else:
                fp += 1
        else:
            if actual == "dangerous":
                fn += 1
            else:
                tn += 1
    return Confusion(tp, fp, fn, tn)


def metrics(c: Confusion) -> dict:
    degenerate = []

    def ratio(name: str, num: int, denom: int) -> float:
        if denom == 0:
            degenerate.append(name)
            return 0.0
        return num / denom

    precision = ratio("precision", c.tp, c.tp + c.fp)
    recall = ratio("recall", c.tp, c.tp + c.fn)
    if precision + recall == 0.0:
        degenerate.append("f1")
        f1 = 0.0
    else:
        f1 = 2.0 * precision * recall / (precision + recall)
    accuracy = ratio("accuracy", c.tp + c.tn, c.total)
    return {"precision": precision, "recall": recall, "f1": f1,
            "accuracy": accuracy, "degenerate": degenerate}


def change_rate_buckets(rates, preds, labels) -> list[dict]:
    """Metrics grouped by change-rate decile ([0.0,0.1), ..., [0.9,1.0])."""
    if not (len(rates) == len(preds) == len(labels)):
        raise LengthMismatch("rates, predictions, and labels must align")
    grouped: dict[int, list[int]] = {}
    for i, rate in enumerate(rates):
        if not 0.0 <= rate <= 1.0:
            raise ValueError(f"change rate {rate} outside [0, 1]")
        grouped.setdefault(min(int(rate * 10), 9), []).append(i)
    out = []
    for bucket in range(10):
        rows = grouped.get(bucket, [])
        if not rows:
            continue
        c = confusion([preds[i] for i in rows], [labels[i] for i in rows])
        out.append({
            "bucket": f"[{bucket / 10:.1f},{(bucket + 1) / 10:.1f})",
            "count": len(rows),
            "confusion": {"tp": c.tp, "fp": c.fp, "fn": c.fn, "tn": c.tn},
            "metrics": metrics(c),
        })
    return out


def fold_schedule(n_items: int, folds: int = 5) -> list[list[int]]:
    """Cumulative fold index lists: schedule[k] holds the first k+1 folds."""
    if n_items < 0 or folds < 1:
        raise ValueError("need a non-negative size and at least one fold")
    bounds = [round(i * n_items / folds) for i in range(folds + 1)]
    return [list(range(bounds[i + 1])) for i in range(folds)]


def training_size_curve(train_fn, eval_fn, train_items, folds: int = 5) -> list[dict]:
    """Train on 1..folds cumulative folds of train_items; eval_fn maps each
    trained model to a metrics dict."""
    curve = []
    for indices in fold_schedule(len(train_items), folds):
        subset = [train_items[i] for i in indices]
        model = train_fn(subset)
        curve.append({
            "folds": len(curve) + 1,
            "train_size": len(subset),
            "metrics": eval_fn(model),
        })
    return curve


def make_report(split_name: str, preds, labels, rates,
                training_curve: list[dict] | None = None) -> dict:
    c = confusion(preds, labels)
    report = {
        "split": split_name,
        "count": c.total,
        "confusion": {"tp": c.tp, "fp": c.fp, "fn": c.fn, "tn": c.tn},
        "metrics": metrics(c),
        "change_rate_buckets": change_rate_buckets(rates, preds, labels),
    }
    if training_curve is not None:
        report["training_size_curve"] = training_curve
    return report
