"""Per-class average precision with all-point interpolation."""

import dataclasses
from typing import Dict
from typing import List
from typing import Sequence
from typing import Tuple

import numpy as np
from typeguard import check_argument_types

from oankit.detector.detection import Detection
from oankit.evaluation.box_ops import iou_matrix
from oankit.synth.scene import GroundTruthBox


@dataclasses.dataclass(frozen=True)
class PrCurvePoint:
    recall: float
    precision: float


@dataclasses.dataclass
class ApResult:
    per_class: Dict[int, float]
    curves: Dict[int, List[PrCurvePoint]]

    @property
    def mAP(self) -> float:
        """Mean over classes with ground truth; 0 when there are none."""
        if not self.per_class:
            return 0.0
        return float(np.mean(list(self.per_class.values())))

    def to_dict(self) -> dict:
        per_class = {str(c): v for c, v in self.per_class.items()}
        return dict(mAP=self.mAP, per_class=per_class)


def interpolated_ap(recall: np.ndarray, precision: np.ndarray) -> float:
    """Area under the precision envelope of a ranked PR curve.

    Examples:
        >>> interpolated_ap(np.array([0.5, 0.5, 1.0]), np.array([1.0, 0.5, 2 / 3]))
        0.8333333333333333
    """
    mrec = np.concatenate([[0.0], recall, [1.0]])
    mpre = np.concatenate([[0.0], precision, [0.0]])
    for i in range(len(mpre) - 2, -1, -1):
        mpre[i] = max(mpre[i], mpre[i + 1])
    steps = np.where(mrec[1:] != mrec[:-1])[0]
    return float(np.sum((mrec[steps + 1] - mrec[steps]) * mpre[steps + 1]))


def _class_ap(
    dets: Sequence[Tuple[int, Detection]],
    gts: Dict[int, List[GroundTruthBox]],
    iou_match: float,
) -> Tuple[float, List[PrCurvePoint]]:
    """AP of one class; ``dets`` are (scene index, detection) pairs."""
    num_gt = sum(len(v) for v in gts.values())
    ranked = sorted(dets, key=lambda sd: sd[1].sort_key() + (sd[0],))
    matched = {scene: np.zeros(len(boxes), dtype=bool) for scene, boxes in gts.items()}
    overlaps = {
        scene: iou_matrix([d for s, d in ranked if s == scene], boxes)
        for scene, boxes in gts.items()
    }
    row = {scene: 0 for scene in gts}

    tp = np.zeros(len(ranked))
    for k, (scene, _) in enumerate(ranked):
        if scene not in gts:
            continue
        ious = overlaps[scene][row[scene]]
        row[scene] += 1
        # best still-unmatched box above the match threshold
        candidates = np.where(~matched[scene] & (ious >= iou_match))[0]
        if candidates.size > 0:
            best = candidates[np.argmax(ious[candidates])]
            matched[scene][best] = True
            tp[k] = 1

    if len(ranked) == 0:
        return 0.0, []
    ctp = np.cumsum(tp)
    recall = ctp / num_gt
    precision = ctp / np.arange(1, len(ranked) + 1)
    curve = [PrCurvePoint(float(r), float(p)) for r, p in zip(recall, precision)]
    return interpolated_ap(recall, precision), curve


def average_precision_scenes(
    scenes: Sequence[Tuple[Sequence[Detection], Sequence[GroundTruthBox]]],
    iou_match: float = 0.5,
) -> ApResult:
    """AP pooled over several scenes; matches never cross scenes."""
    assert check_argument_types()
    gts_by_class: Dict[int, Dict[int, List[GroundTruthBox]]] = {}
    dets_by_class: Dict[int, List[Tuple[int, Detection]]] = {}
    for idx, (dets, gts) in enumerate(scenes):
        for gt in gts:
            gts_by_class.setdefault(gt.class_id, {}).setdefault(idx, []).append(gt)
        for det in dets:
            dets_by_class.setdefault(det.class_id, []).append((idx, det))

    per_class, curves = {}, {}
    for class_id in sorted(gts_by_class):
        ap, curve = _class_ap(
            dets_by_class.get(class_id, []), gts_by_class[class_id], iou_match
        )
        per_class[class_id] = ap
        curves[class_id] = curve
    return ApResult(per_class=per_class, curves=curves)


def average_precision(
    dets: Sequence[Detection],
    gts: Sequence[GroundTruthBox],
    iou_match: float = 0.5,
) -> ApResult:
    return average_precision_scenes([(dets, gts)], iou_match)
