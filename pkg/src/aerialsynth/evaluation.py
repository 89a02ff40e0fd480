"""Single-class average precision at a fixed IoU, 101-point interpolation.

Detections below the confidence floor are discarded first.  Detections are
then ranked by descending confidence; equal confidences are ordered by
``(image_id, box coordinates)``, so AP does not depend on input order.  The
insertion index only separates exact duplicates, which are interchangeable.
"""
from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, UndefinedAPError
from .geometry import AABB, iou_matrix

RECALL_POINTS = np.arange(101) / 100.0


@dataclass(frozen=True)
class Detection:
    image_id: str
    aabb: AABB
    confidence: float
    class_id: int = 0

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise DataError(f"confidence {self.confidence} outside [0, 1]")
        if self.aabb.area <= 0:
            raise DataError("detection box has no area")


@dataclass
class APResult:
    ap: float
    precision: list[float]
    recall: list[float]
    tp: int
    fp: int
    fn: int
    n_gt: int
    interpolated: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"ap": self.ap, "tp": self.tp, "fp": self.fp, "fn": self.fn, "n_gt": self.n_gt,
                "precision": self.precision, "recall": self.recall,
                "recall_points": [float(r) for r in RECALL_POINTS],
                "interpolated_precision": self.interpolated}


def _ranked(dets) -> list[tuple[int, Detection]]:
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].confidence, str(dets[i].image_id),
                                                     tuple(dets[i].aabb.as_list()), i))
    return [(i, dets[i]) for i in order]


def _gt_by_image(gts) -> dict[str, list[AABB]]:
    if isinstance(gts, dict):
        return {str(k): [g if isinstance(g, AABB) else AABB(*g) for g in v] for k, v in gts.items()}
    out: dict[str, list[AABB]] = defaultdict(list)
    for image_id, box in gts:
        out[str(image_id)].append(box if isinstance(box, AABB) else AABB(*box))
    return dict(out)


def match_detections(dets, gts, iou_threshold: float = 0.5) -> list[bool]:
    """Greedy matching; returns a TP flag per detection in *input* order.

    ``gts`` is ``{image_id: [AABB, ...]}`` or a list of ``(image_id, AABB)``.
    Each detection, highest confidence first, takes the still-unmatched
    ground truth of its image with the largest IoU >= threshold (ties to the
    lower ground-truth index).
    """
    gt = _gt_by_image(gts)
    flags = [False] * len(dets)
    by_image: dict[str, list[tuple[int, Detection]]] = defaultdict(list)
    for i, d in _ranked(dets):
        by_image[str(d.image_id)].append((i, d))
    for image_id, ranked in by_image.items():
        boxes = gt.get(image_id, [])
        if not boxes:
            continue
        ious = iou_matrix([d.aabb.as_list() for _, d in ranked], [b.as_list() for b in boxes])
        taken = np.zeros(len(boxes), dtype=bool)
        for row, (i, _) in enumerate(ranked):
            cand = np.where(taken, -1.0, ious[row])
            j = int(np.argmax(cand))
            if cand[j] >= iou_threshold:
                taken[j] = True
                flags[i] = True
    return flags


def average_precision(dets, gts, iou_threshold: float = 0.5,
                      confidence_floor: float = 0.1) -> APResult:
    gt = _gt_by_image(gts)
    n_gt = sum(len(v) for v in gt.values())
    if n_gt == 0:
        raise UndefinedAPError("average precision is undefined without ground truth")
    kept = [d for d in dets if d.confidence >= confidence_floor]
    flags = match_detections(kept, gt, iou_threshold)
    ranked = _ranked(kept)
    tp = fp = 0
    precision, recall = [], []
    for i, _ in ranked:
        if flags[i]:
            tp += 1
        else:
            fp += 1
        precision.append(tp / (tp + fp))
        recall.append(tp / n_gt)
    # precision envelope: best precision at this recall or beyond
    envelope = list(precision)
    for k in range(len(envelope) - 2, -1, -1):
        envelope[k] = max(envelope[k], envelope[k + 1])
    interp = []
    k = 0
    for r in RECALL_POINTS:
        while k < len(recall) and recall[k] < r:
            k += 1
        interp.append(envelope[k] if k < len(recall) else 0.0)
    ap = math.fsum(interp) / len(RECALL_POINTS)
    return APResult(ap, precision, recall, tp, fp, n_gt - tp, n_gt, interp)


def load_detections(path) -> list[Detection]:
    """Read ``[{image_id, bbox: [x0, y0, x1, y1], score, class_id?}, ...]``."""
    raw = json.loads(Path(path).read_text())
    try:
        return [Detection(str(d["image_id"]), AABB(*d["bbox"]), float(d["score"]),
                          int(d.get("class_id", 0))) for d in raw]
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: malformed detections ({exc})") from exc


def ground_truth_from_manifest(manifest, class_id: int | None = None) -> dict[str, list[AABB]]:
    out: dict[str, list[AABB]] = {}
    for rec in manifest.images:
        out[rec.id] = [a.aabb for a in rec.annotations if class_id is None or a.class_id == class_id]
    return out
