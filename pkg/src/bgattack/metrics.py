"""Detection-quality metrics: IoU matching, PR/AP/mAP, DR, ASR, and NMS.

Matching is greedy in score order and class-aware: each detection takes the
highest-IoU unconsumed ground-truth box of its class at or above the IoU
threshold.  AP is the literal Riemann sum over recall increments,

    AP = sum_r Precision(r) * (Recall(r) - Recall(r-1)),

with recall levels at each ranked detection and no interpolation smoothing.
The detection rate is recall from the same matching; for single-object
scenes it reduces to the fraction of scenes whose object is found.  The
attack success rate is the drop ratio 1 - attacked/clean.
"""

from dataclasses import dataclass

import numpy as np

from .detector import Detection, DetectionSet
from .errors import ConfigError, DataError
from .scene import GtBox, Scene


@dataclass(frozen=True)
class EvalConfig:
    conf_threshold: float = 0.25
    iou_threshold: float = 0.5
    nms_iou: float = 0.5

    def __post_init__(self):
        for name in ("conf_threshold", "iou_threshold", "nms_iou"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {v}")


@dataclass(frozen=True)
class PrCurve:
    recall: list[float]     # at each ranked detection
    precision: list[float]
    tp: int
    fp: int
    fn: int


def iou(a, b) -> float:
    """Intersection over union of two (x1, y1, x2, y2) boxes."""
    ax1, ay1, ax2, ay2 = _as_box(a)
    bx1, by1, bx2, by2 = _as_box(b)
    iw = min(ax2, bx2) - max(ax1, bx1)
    ih = min(ay2, by2) - max(ay1, by1)
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    inter = iw * ih
    union = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter
    return inter / union


def _as_box(b):
    if isinstance(b, GtBox):
        return float(b.x1), float(b.y1), float(b.x2), float(b.y2)
    if isinstance(b, Detection):
        return b.box
    return tuple(float(v) for v in b)


def _det_class(det: Detection) -> int:
    return int(np.argmax(det.class_probs))


def _ranked(detections: list[Detection]) -> list[Detection]:
    return sorted(detections, key=lambda d: (-d.objectness, d.cell_id))


def nms(ds: DetectionSet, cfg: EvalConfig) -> DetectionSet:
    """Confidence filter plus greedy per-class suppression.

    Detections below the confidence threshold are dropped; among the rest,
    the highest-scoring box of a class suppresses same-class boxes with IoU
    above the NMS threshold.  Ties break by (score desc, cell_id asc).
    """
    kept: list[Detection] = []
    candidates = [d for d in _ranked(ds.detections)
                  if d.objectness >= cfg.conf_threshold]
    suppressed = [False] * len(candidates)
    for i, det in enumerate(candidates):
        if suppressed[i]:
            continue
        kept.append(det)
        for j in range(i + 1, len(candidates)):
            if (not suppressed[j]
                    and _det_class(candidates[j]) == _det_class(det)
                    and iou(det.box, candidates[j].box) > cfg.nms_iou):
                suppressed[j] = True
    return DetectionSet(detections=kept, image_dims=ds.image_dims)


def match_detections(detections: list[Detection], gt: list[GtBox],
                     iou_threshold: float) -> list[bool]:
    """Greedy score-ordered matching; one flag per ranked detection.

    Each ground-truth box is consumed at most once; a detection matches the
    highest-IoU free box of its class with IoU >= threshold.
    """
    flags = []
    consumed = [False] * len(gt)
    for det in _ranked(detections):
        best, best_iou = -1, -1.0
        for k, g in enumerate(gt):
            if consumed[k] or g.class_id != _det_class(det):
                continue
            v = iou(det.box, g)
            if v > best_iou:
                best, best_iou = k, v
        if best >= 0 and best_iou >= iou_threshold:
            consumed[best] = True
            flags.append(True)
        else:
            flags.append(False)
    return flags


def pr_curve(match_flags: list[bool], num_gt: int) -> PrCurve:
    """Precision/recall at each ranked detection."""
    tp = fp = 0
    rec, prec = [], []
    for flag in match_flags:
        if flag:
            tp += 1
        else:
            fp += 1
        rec.append(tp / num_gt if num_gt > 0 else 0.0)
        prec.append(tp / (tp + fp))
    return PrCurve(recall=rec, precision=prec, tp=tp, fp=fp, fn=num_gt - tp)


def average_precision(match_flags: list[bool], num_gt: int) -> float:
    """Riemann sum of precision over recall increments, no interpolation.

    Zero ground truth with detections present is defined as 0.
    """
    if num_gt <= 0:
        return 0.0
    curve = pr_curve(match_flags, num_gt)
    ap = 0.0
    prev_recall = 0.0
    for r, p in zip(curve.recall, curve.precision):
        ap += p * (r - prev_recall)
        prev_recall = r
    return ap


def map_over_classes(per_class_ap: list[float]) -> float:
    if not per_class_ap:
        raise DataError("mAP needs at least one class AP")
    return float(np.mean(per_class_ap))


def per_class_average_precision(evals: list[tuple[Scene, DetectionSet]],
                                cfg: EvalConfig) -> dict[int, float]:
    """AP per ground-truth class, detections pooled across scenes but
    matched within their own scene."""
    classes = sorted({g.class_id for scn, _ in evals for g in scn.ground_truth})
    if not classes:
        raise DataError("no ground truth present")
    result = {}
    for cls in classes:
        flags_scored: list[tuple[float, int, int, bool]] = []
        num_gt = 0
        for scene_idx, (scn, ds) in enumerate(evals):
            gt = [g for g in scn.ground_truth if g.class_id == cls]
            num_gt += len(gt)
            dets = [d for d in ds.detections if _det_class(d) == cls]
            for det, flag in zip(_ranked(dets),
                                 match_detections(dets, gt, cfg.iou_threshold)):
                flags_scored.append((-det.objectness, scene_idx, det.cell_id, flag))
        flags_scored.sort(key=lambda e: e[:3])
        result[cls] = average_precision([e[3] for e in flags_scored], num_gt)
    return result


def mean_average_precision(evals: list[tuple[Scene, DetectionSet]],
                           cfg: EvalConfig) -> float:
    """Mean of the per-class APs over the classes present in the ground
    truth."""
    return map_over_classes(list(per_class_average_precision(evals, cfg).values()))


def detection_rate(evals: list[tuple[Scene, DetectionSet]],
                   iou_threshold: float = 0.5) -> float:
    """Recall over all scenes: matched ground truth / total ground truth."""
    tp = total = 0
    for scn, ds in evals:
        total += len(scn.ground_truth)
        tp += sum(match_detections(ds.detections, scn.ground_truth,
                                   iou_threshold))
    if total == 0:
        raise DataError("detection rate needs ground truth")
    return tp / total


def attack_success_rate(dp_clean: float, dp_attack: float) -> float:
    """Drop ratio of detection performance: 1 - attacked/clean."""
    if dp_clean <= 0.0:
        raise DataError("attack success rate undefined for zero clean performance")
    return 1.0 - dp_attack / dp_clean
