"""Instance-segmentation scoring: per-class precision/recall/F1 and the
channel-ablation comparison table.

Matching is greedy and deterministic: predictions below the score threshold
are dropped, the rest are visited in descending score order (ties broken by
instance index) and each takes the unmatched same-class ground-truth
instance with the highest IoU, provided IoU >= threshold. Matched pairs are
true positives; leftover predictions false positives; leftover ground truth
false negatives. Counts aggregate over all frames of a split before the
metric formulas are applied; the weighted average weighs each class by its
ground-truth instance count.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .dataset import AnnotationSet
from .errors import DimensionMismatch, InvariantViolation

DEFAULT_IOU_THRESHOLD = 0.5
DEFAULT_SCORE_THRESHOLD = 0.5


@dataclass
class Prediction:
    rle: list[int]
    label: str
    score: float

    def mask(self, height, width):
        from .dataset import rle_decode
        return rle_decode(self.rle, height, width)


@dataclass
class PredictionSet:
    frame_id: int
    height: int
    width: int
    instances: list[Prediction] = field(default_factory=list)

    def validate(self):
        for inst in self.instances:
            if not 0.0 <= inst.score <= 1.0:
                raise InvariantViolation("score",
                                         f"score {inst.score} outside [0, 1]")
            if sum(inst.rle) != self.height * self.width:
                raise InvariantViolation(
                    "mask", "prediction mask does not cover the frame")


def load_predictions(path, height, width) -> dict[int, PredictionSet]:
    """Read a JSON-lines prediction file, one instance per line."""
    sets: dict[int, PredictionSet] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            doc = json.loads(line)
            fid = int(doc["frame_id"])
            pset = sets.setdefault(
                fid, PredictionSet(frame_id=fid, height=height, width=width))
            pset.instances.append(Prediction(
                rle=[int(r) for r in doc["rle"]],
                label=str(doc["class"]),
                score=float(doc["score"])))
    for pset in sets.values():
        pset.validate()
    return sets


def save_predictions(sets, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for pset in sets:
            for inst in pset.instances:
                fh.write(json.dumps({"frame_id": pset.frame_id,
                                     "class": inst.label,
                                     "score": inst.score,
                                     "rle": inst.rle}) + "\n")


def mask_iou(a: np.ndarray, b: np.ndarray) -> float:
    inter = np.logical_and(a, b).sum()
    union = np.logical_or(a, b).sum()
    return float(inter) / float(union) if union else 0.0


def match_instances(gt: AnnotationSet, pred: PredictionSet,
                    iou_threshold: float = DEFAULT_IOU_THRESHOLD,
                    score_threshold: float = DEFAULT_SCORE_THRESHOLD,
                    ) -> dict[str, dict[str, int]]:
    """Per-class {TP, FP, FN} counts for one frame."""
    if (gt.height, gt.width) != (pred.height, pred.width):
        raise DimensionMismatch(
            f"ground truth {(gt.height, gt.width)} vs predictions "
            f"{(pred.height, pred.width)}")
    h, w = gt.height, gt.width
    gt_masks = [inst.mask(h, w) for inst in gt.instances]
    kept = [(k, inst) for k, inst in enumerate(pred.instances)
            if inst.score >= score_threshold]
    kept.sort(key=lambda item: (-item[1].score, item[0]))

    counts: dict[str, dict[str, int]] = {}

    def bucket(label):
        return counts.setdefault(label, {"TP": 0, "FP": 0, "FN": 0})

    matched_gt = set()
    for _, p in kept:
        pmask = p.mask(h, w)
        best_iou, best_g = 0.0, None
        for g, ginst in enumerate(gt.instances):
            if g in matched_gt or ginst.label != p.label:
                continue
            iou = mask_iou(pmask, gt_masks[g])
            if iou > best_iou:
                best_iou, best_g = iou, g
        if best_g is not None and best_iou >= iou_threshold:
            matched_gt.add(best_g)
            bucket(p.label)["TP"] += 1
        else:
            bucket(p.label)["FP"] += 1
    for g, ginst in enumerate(gt.instances):
        if g not in matched_gt:
            bucket(ginst.label)["FN"] += 1
    return counts


def merge_counts(into: dict, more: dict) -> dict:
    for label, c in more.items():
        tgt = into.setdefault(label, {"TP": 0, "FP": 0, "FN": 0})
        for key in ("TP", "FP", "FN"):
            tgt[key] += c[key]
    return into


def _safe_div(num, den):
    return num / den if den else 0.0


def precision_recall_f1(tp: int, fp: int, fn: int):
    precision = _safe_div(tp, tp + fp)
    recall = _safe_div(tp, tp + fn)
    f1 = _safe_div(2 * precision * recall, precision + recall)
    return precision, recall, f1


@dataclass
class ClassMetrics:
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float


@dataclass
class EvalReport:
    per_class: dict[str, ClassMetrics]
    weighted: ClassMetrics
    iou_threshold: float
    score_threshold: float

    def to_dict(self):
        def row(m: ClassMetrics):
            return {"TP": m.tp, "FP": m.fp, "FN": m.fn,
                    "precision": m.precision, "recall": m.recall, "f1": m.f1}
        return {
            "iou_threshold": self.iou_threshold,
            "score_threshold": self.score_threshold,
            "per_class": {k: row(m) for k, m in self.per_class.items()},
            "weighted_average": row(self.weighted),
        }

    def format_table(self) -> str:
        lines = [f"{'Class':<14}{'Precision':>10}{'Recall':>10}"
                 f"{'F1-score':>10}{'TP':>6}{'FP':>6}{'FN':>6}"]
        for label in sorted(self.per_class):
            m = self.per_class[label]
            lines.append(f"{label:<14}{m.precision:>10.2f}{m.recall:>10.2f}"
                         f"{m.f1:>10.2f}{m.tp:>6}{m.fp:>6}{m.fn:>6}")
        m = self.weighted
        lines.append(f"{'w. avg':<14}{m.precision:>10.2f}{m.recall:>10.2f}"
                     f"{m.f1:>10.2f}{m.tp:>6}{m.fp:>6}{m.fn:>6}")
        return "\n".join(lines)


def report(counts: dict[str, dict[str, int]],
           iou_threshold: float = DEFAULT_IOU_THRESHOLD,
           score_threshold: float = DEFAULT_SCORE_THRESHOLD) -> EvalReport:
    """Turn aggregated per-class counts into the final metric report."""
    per_class = {}
    for label, c in counts.items():
        p, r, f1 = precision_recall_f1(c["TP"], c["FP"], c["FN"])
        per_class[label] = ClassMetrics(c["TP"], c["FP"], c["FN"], p, r, f1)

    weights = {label: m.tp + m.fn for label, m in per_class.items()}
    total = sum(weights.values())

    def wavg(attr):
        if not total:
            return 0.0
        return sum(weights[k] * getattr(per_class[k], attr)
                   for k in per_class) / total

    weighted = ClassMetrics(
        tp=sum(m.tp for m in per_class.values()),
        fp=sum(m.fp for m in per_class.values()),
        fn=sum(m.fn for m in per_class.values()),
        precision=wavg("precision"), recall=wavg("recall"), f1=wavg("f1"))
    return EvalReport(per_class=per_class, weighted=weighted,
                      iou_threshold=iou_threshold,
                      score_threshold=score_threshold)


def evaluate(gt_by_frame: dict[int, AnnotationSet],
             pred_by_frame: dict[int, PredictionSet],
             iou_threshold: float = DEFAULT_IOU_THRESHOLD,
             score_threshold: float = DEFAULT_SCORE_THRESHOLD) -> EvalReport:
    """Match every frame and aggregate; frames without predictions count FN."""
    counts: dict[str, dict[str, int]] = {}
    for fid, gt in gt_by_frame.items():
        pred = pred_by_frame.get(
            fid, PredictionSet(frame_id=fid, height=gt.height, width=gt.width))
        merge_counts(counts, match_instances(gt, pred, iou_threshold,
                                             score_threshold))
    return report(counts, iou_threshold, score_threshold)


# --- ablation comparison table ---

ABLATION_ROW_ORDER = ("-", "nir", "reflectivity", "signal", "range")
_ABLATION_ROW_NAMES = {"-": "-", "nir": "NIR", "reflectivity": "Reflectivity",
                       "signal": "Signal", "range": "Range"}


def ablation_table(results: dict) -> str:
    """Render channel-ablation results in the fixed row order.

    `results` maps (excluded_channel, positional_encoding) to either an
    EvalReport or a (precision, recall, f1) triple; excluded_channel is one
    of '-', 'nir', 'reflectivity', 'signal', 'range'. Rows without pos-enc
    come first, mirroring the published layout.
    """
    if not results:
        raise InvariantViolation("results", "need at least one report")

    def triple(value):
        if isinstance(value, EvalReport):
            m = value.weighted
            return m.precision, m.recall, m.f1
        p, r, f1 = value
        return float(p), float(r), float(f1)

    lines = [f"{'Excluded channel':<18}{'Pos. enc.':>10}{'Precision':>11}"
             f"{'Recall':>9}{'F1-score':>10}"]
    for pos_enc in (False, True):
        for key in ABLATION_ROW_ORDER:
            if (key, pos_enc) not in results:
                continue
            p, r, f1 = triple(results[(key, pos_enc)])
            mark = "x" if pos_enc else "-"
            lines.append(f"{_ABLATION_ROW_NAMES[key]:<18}{mark:>10}"
                         f"{p:>11.2f}{r:>9.2f}{f1:>10.2f}")
    return "\n".join(lines)
