"""Evaluation mathematics for the two detection channels.

Accuracy is the share of correct predictions among all predictions,
(TP + TN) / (TP + TN + FP + FN); the loss is mean absolute error. Detection
quality is summarized by a precision-recall trace over confidence cuts and
its all-point interpolated area (AP). The classifier's positive class is
"objects" throughout.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .detect import BoundingBox, CropLabel, Detection, iou
from .errors import UndefinedMetricError

__all__ = [
    "ConfusionCounts",
    "LossSample",
    "PrPoint",
    "EvaluationReport",
    "accuracy",
    "mae",
    "recognition_rate",
    "match_detections",
    "MatchResult",
    "pr_curve",
    "average_precision",
    "confusion_from_classifications",
    "confusion_table",
]


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(
            self.tp + other.tp, self.fp + other.fp, self.fn + other.fn, self.tn + other.tn
        )


@dataclass(frozen=True)
class LossSample:
    """Paired prediction/ground-truth vectors for the L1 loss."""

    predicted: tuple[float, ...]
    actual: tuple[float, ...]

    def __post_init__(self):
        if len(self.predicted) != len(self.actual):
            raise ValueError("predicted and actual must have equal length")


@dataclass(frozen=True)
class PrPoint:
    precision: float
    recall: float
    threshold: float


@dataclass(frozen=True)
class EvaluationReport:
    counts: ConfusionCounts
    accuracy: float
    mae: float | None = None
    pr: tuple[PrPoint, ...] = ()
    ap: float | None = None
    recognition_rate: float | None = None

    def to_json_dict(self) -> dict:
        return {
            "counts": {
                "tp": self.counts.tp,
                "fp": self.counts.fp,
                "fn": self.counts.fn,
                "tn": self.counts.tn,
            },
            "accuracy": self.accuracy,
            "mae": self.mae,
            "ap": self.ap,
            "recognition_rate": self.recognition_rate,
            "pr": [
                {"threshold": p.threshold, "precision": p.precision, "recall": p.recall}
                for p in self.pr
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True)


def accuracy(c: ConfusionCounts) -> float:
    """(TP + TN) / (TP + TN + FP + FN)."""
    if c.total == 0:
        raise UndefinedMetricError("accuracy undefined on zero predictions")
    return (c.tp + c.tn) / c.total


def mae(s: LossSample) -> float:
    """Mean absolute error between predicted and actual values."""
    if not s.predicted:
        raise UndefinedMetricError("MAE undefined on an empty sample")
    return sum(abs(a - p) for p, a in zip(s.predicted, s.actual)) / len(s.predicted)


def recognition_rate(detected: int, total: int) -> float:
    """Fraction of ground-truth instances that were detected."""
    if total <= 0:
        raise UndefinedMetricError(f"total must be positive, got {total}")
    if detected < 0 or detected > total:
        raise UndefinedMetricError(f"need 0 <= detected <= total, got {detected}/{total}")
    return detected / total


@dataclass(frozen=True)
class MatchResult:
    """Per-detection TP/FP flags in descending-confidence order, plus FN count."""

    flags: tuple[tuple[Detection, bool], ...]
    fn: int

    @property
    def tp(self) -> int:
        return sum(1 for _, is_tp in self.flags if is_tp)

    @property
    def fp(self) -> int:
        return len(self.flags) - self.tp


def match_detections(
    dets: list[Detection], truth: list[BoundingBox], iou_thresh: float = 0.5
) -> MatchResult:
    """Greedy one-to-one matching by descending confidence.

    A detection is a TP when its best-IoU still-unmatched truth box reaches
    iou_thresh (consuming that box), otherwise an FP; leftover truth boxes
    are FNs.
    """
    order = sorted(dets, key=lambda d: (-d.confidence, d.box.x, d.box.y))
    unmatched = list(range(len(truth)))
    flags = []
    for det in order:
        best_i, best_iou = None, 0.0
        for i in unmatched:
            v = iou(det.box, truth[i])
            if v > best_iou:
                best_i, best_iou = i, v
        if best_i is not None and best_iou >= iou_thresh:
            unmatched.remove(best_i)
            flags.append((det, True))
        else:
            flags.append((det, False))
    return MatchResult(flags=tuple(flags), fn=len(unmatched))


def pr_curve(match: MatchResult, total_truth: int) -> list[PrPoint]:
    """Cumulative precision/recall, one point per distinct confidence cut."""
    if total_truth < 0:
        raise UndefinedMetricError("total_truth must be non-negative")
    points = []
    tp = fp = 0
    flags = list(match.flags)
    for i, (det, is_tp) in enumerate(flags):
        tp += is_tp
        fp += not is_tp
        last_of_tie = i + 1 == len(flags) or flags[i + 1][0].confidence != det.confidence
        if not last_of_tie:
            continue
        precision = tp / (tp + fp)
        recall = tp / total_truth if total_truth > 0 else 0.0
        points.append(PrPoint(precision=precision, recall=recall, threshold=det.confidence))
    return points


def average_precision(pr: list[PrPoint]) -> float:
    """All-point interpolated area: sum of (R_i - R_{i-1}) * max precision at
    recall >= R_i, starting from R_0 = 0. Empty curves score 0."""
    if not pr:
        return 0.0
    ap = 0.0
    prev_recall = 0.0
    for i, point in enumerate(pr):
        dr = point.recall - prev_recall
        if dr > 0:
            p_interp = max(q.precision for q in pr[i:])
            ap += dr * p_interp
        prev_recall = point.recall
    return ap


def confusion_from_classifications(
    results: list[tuple[CropLabel, CropLabel]]
) -> ConfusionCounts:
    """Tally (predicted, actual) crop labels; positive class is OBJECTS."""
    tp = fp = fn = tn = 0
    for predicted, actual in results:
        if actual == CropLabel.OBJECTS:
            if predicted == CropLabel.OBJECTS:
                tp += 1
            else:
                fn += 1
        else:
            if predicted == CropLabel.OBJECTS:
                fp += 1
            else:
                tn += 1
    return ConfusionCounts(tp=tp, fp=fp, fn=fn, tn=tn)


def confusion_table(c: ConfusionCounts) -> str:
    """Plain-text 2x2 table in the forecast-vs-real layout."""
    rows = [
        ("", "Forecast positive", "Forecast negative"),
        ("Real positive", f"TP = {c.tp}", f"FN = {c.fn}"),
        ("Real negative", f"FP = {c.fp}", f"TN = {c.tn}"),
    ]
    widths = [max(len(r[i]) for r in rows) for i in range(3)]
    return "\n".join(
        "  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip()
        for row in rows
    )


def pr_to_csv(pr: list[PrPoint]) -> str:
    lines = ["threshold,precision,recall"]
    for p in pr:
        lines.append(f"{p.threshold},{p.precision},{p.recall}")
    return "\n".join(lines) + "\n"
