"""Confusion matrix and macro-averaged classification metrics."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .classes import N_CLASSES, BehaviorClass


def confusion(true_labels, predicted_labels, n_classes: int = N_CLASSES) -> np.ndarray:
    """Counts with rows = true class, columns = predicted class."""
    y = np.asarray(true_labels)
    p = np.asarray(predicted_labels)
    if y.shape != p.shape or y.ndim != 1:
        raise ValueError(f"label arrays differ in shape: {y.shape} vs {p.shape}")
    if y.size == 0:
        raise ValueError("no labels to compare")
    for arr in (y, p):
        if not np.issubdtype(arr.dtype, np.integer) or arr.min() < 0 or arr.max() >= n_classes:
            raise ValueError(f"class codes must be integers in [0, {n_classes - 1}]")
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (y, p), 1)
    return cm


def per_class_counts(cm: np.ndarray) -> dict:
    cm = np.asarray(cm)
    tp = np.diag(cm)
    fp = cm.sum(axis=0) - tp
    fn = cm.sum(axis=1) - tp
    tn = cm.sum() - tp - fp - fn
    return {"tp": tp, "fp": fp, "fn": fn, "tn": tn}


def _ratio(num, den):
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    return np.divide(num, den, out=np.zeros_like(num), where=den != 0)


@dataclass
class EvalReport:
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    accuracy_ovr: np.ndarray
    macro_precision: float
    macro_recall: float
    macro_f1: float
    avg_accuracy_ovr: float
    accuracy_top1: float
    confusion: np.ndarray
    n_samples: int

    def to_dict(self) -> dict:
        return {
            "n_samples": self.n_samples,
            "avg_accuracy_ovr": self.avg_accuracy_ovr,
            "accuracy_top1": self.accuracy_top1,
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "macro_f1": self.macro_f1,
            "per_class": {
                BehaviorClass(i).label: {
                    "precision": float(self.precision[i]),
                    "recall": float(self.recall[i]),
                    "f1": float(self.f1[i]),
                    "accuracy_ovr": float(self.accuracy_ovr[i]),
                }
                for i in range(len(self.f1))
            },
            "confusion": self.confusion.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def render_table(self) -> str:
        rows = [
            ("Average Accuracy", self.avg_accuracy_ovr),
            ("Top-1 Accuracy", self.accuracy_top1),
            ("Macro Precision", self.macro_precision),
            ("Macro Recall", self.macro_recall),
            ("Macro F1-score", self.macro_f1),
        ]
        width = max(len(name) for name, _ in rows)
        lines = [f"{name:<{width}}  {100 * value:6.2f}%" for name, value in rows]
        lines.append("")
        names = [BehaviorClass(i).label[:5] for i in range(self.confusion.shape[0])]
        lines.append("true\\pred " + " ".join(f"{n:>6}" for n in names))
        for i, row in enumerate(self.confusion):
            lines.append(f"{names[i]:<9} " + " ".join(f"{v:>6d}" for v in row))
        lines.append(f"(n = {self.n_samples})")
        return "\n".join(lines)


def macro_metrics(cm, paper_literal_f1: bool = False) -> EvalReport:
    """Macro-averaged metrics over all classes of ``cm``; any 0/0 counts as 0.

    ``paper_literal_f1`` drops the factor 2 of the harmonic mean, giving
    P*R/(P+R) per class. It is kept only for comparison.
    """
    cm = np.asarray(cm)
    total = int(cm.sum())
    if cm.size == 0 or total <= 0:
        raise ValueError("confusion matrix is empty")
    c = per_class_counts(cm)
    precision = _ratio(c["tp"], c["tp"] + c["fp"])
    recall = _ratio(c["tp"], c["tp"] + c["fn"])
    scale = 1.0 if paper_literal_f1 else 2.0
    f1 = _ratio(scale * precision * recall, precision + recall)
    acc = (c["tp"] + c["tn"]) / total
    return EvalReport(
        precision=precision, recall=recall, f1=f1, accuracy_ovr=acc,
        macro_precision=float(precision.mean()),
        macro_recall=float(recall.mean()),
        macro_f1=float(f1.mean()),
        avg_accuracy_ovr=float(acc.mean()),
        accuracy_top1=float(np.trace(cm) / total),
        confusion=cm.copy(),
        n_samples=total,
    )


def evaluate(true_labels, predicted_labels) -> EvalReport:
    return macro_metrics(confusion(true_labels, predicted_labels))


def macro_f1(true_labels, predicted_labels) -> float:
    return evaluate(true_labels, predicted_labels).macro_f1
