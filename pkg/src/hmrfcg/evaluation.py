"""Dice overlap between a predicted and a ground-truth labeling."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .model import Labeling

__all__ = ["ConfusionCounts", "DiceReport", "confusion", "dice", "match_and_report", "EmptyClassWarning"]


class EmptyClassWarning(UserWarning):
    """Both the predicted and the true class are empty; Dice is taken as 1."""


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int


@dataclass
class DiceReport:
    """Per-truth-class Dice after matching predicted classes onto truth classes.

    ``matching`` maps predicted class -> truth class.
    """

    per_class: dict = field(default_factory=dict)
    mean: float = 0.0
    matching: dict = field(default_factory=dict)
    counts: dict = field(default_factory=dict)


def _labels(x) -> np.ndarray:
    if isinstance(x, Labeling):
        return x.labels
    return np.asarray(x).ravel()


def _check_shapes(predicted, truth):
    if isinstance(predicted, Labeling) and isinstance(truth, Labeling):
        if predicted.shape.dims != truth.shape.dims:
            raise ValueError(f"shape mismatch: {predicted.shape.dims} vs {truth.shape.dims}")
    elif np.shape(_labels(predicted)) != np.shape(_labels(truth)):
        raise ValueError("shape mismatch between predicted and truth labels")


def confusion(predicted, truth, class_pair: tuple[int, int]) -> ConfusionCounts:
    """TP/FP/FN counts of predicted class ``class_pair[0]`` against truth class ``class_pair[1]``."""
    _check_shapes(predicted, truth)
    p = _labels(predicted) == class_pair[0]
    t = _labels(truth) == class_pair[1]
    tp = int(np.count_nonzero(p & t))
    return ConfusionCounts(tp, int(np.count_nonzero(p)) - tp, int(np.count_nonzero(t)) - tp)


def dice(counts: ConfusionCounts) -> float:
    """2TP / (2TP + FP + FN); 1.0 (with a warning) when both sets are empty."""
    denom = 2 * counts.tp + counts.fp + counts.fn
    if denom == 0:
        warnings.warn("Dice of two empty sets taken as 1.0", EmptyClassWarning, stacklevel=2)
        return 1.0
    return 2 * counts.tp / denom


def match_and_report(predicted, truth) -> DiceReport:
    """Greedy Dice-maximizing assignment of predicted classes to truth classes.

    The highest-Dice (predicted, truth) pair is fixed first, then the best
    among the remaining classes, and so on; ties go to the smaller truth index,
    then the smaller predicted index.  The mean is taken over truth classes
    present in ``truth``; truth classes left without a partner score 0.
    """
    _check_shapes(predicted, truth)
    p = _labels(predicted)
    t = _labels(truth)
    pred_classes = np.unique(p).tolist()
    truth_classes = np.unique(t).tolist()

    table = {}
    for pc in pred_classes:
        for tc in truth_classes:
            c = confusion(p, t, (pc, tc))
            table[pc, tc] = (2 * c.tp / (2 * c.tp + c.fp + c.fn), c)

    order = sorted(table, key=lambda pt: (-table[pt][0], pt[1], pt[0]))
    matching, used_p, used_t = {}, set(), set()
    for pc, tc in order:
        if pc in used_p or tc in used_t:
            continue
        matching[pc] = tc
        used_p.add(pc)
        used_t.add(tc)

    report = DiceReport(matching=dict(sorted(matching.items())))
    inverse = {tc: pc for pc, tc in matching.items()}
    for tc in truth_classes:
        if tc in inverse:
            score, c = table[inverse[tc], tc]
        else:
            n = int(np.count_nonzero(t == tc))
            c = ConfusionCounts(0, 0, n)
            score = dice(c)
        report.per_class[tc] = score
        report.counts[tc] = c
    report.mean = float(np.mean(list(report.per_class.values()))) if report.per_class else 1.0
    return report
