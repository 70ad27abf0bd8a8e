from typing import Dict
from typing import List
from typing import Sequence

import numpy as np
from typeguard import check_argument_types

from oankit.detector.detection import Detection


def iou(a, b) -> float:
    """Intersection over union of two boxes with x_min/y_min/x_max/y_max.

    Examples:
        >>> iou(Detection(0, 0, 1, 1, 0, 0.5), Detection(0.5, 0, 1.5, 1, 0, 0.5))
        0.3333333333333333
    """
    iw = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    ih = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    area_a = (a.x_max - a.x_min) * (a.y_max - a.y_min)
    area_b = (b.x_max - b.x_min) * (b.y_max - b.y_min)
    return inter / (area_a + area_b - inter)


def _as_array(boxes: Sequence) -> np.ndarray:
    return np.array(
        [[b.x_min, b.y_min, b.x_max, b.y_max] for b in boxes], dtype=np.float64
    ).reshape(-1, 4)


def iou_matrix(boxes_a: Sequence, boxes_b: Sequence) -> np.ndarray:
    a, b = _as_array(boxes_a), _as_array(boxes_b)
    lo = np.maximum(a[:, None, :2], b[None, :, :2])
    hi = np.minimum(a[:, None, 2:], b[None, :, 2:])
    iw, ih = hi[..., 0] - lo[..., 0], hi[..., 1] - lo[..., 1]
    inter = np.clip(iw, 0, None) * np.clip(ih, 0, None)
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    union = area_a[:, None] + area_b[None, :] - inter
    return np.where(inter > 0, inter / np.where(union > 0, union, 1.0), 0.0)


def nms(dets: Sequence[Detection], iou_threshold: float) -> List[Detection]:
    """Greedy class-wise suppression.

    Within each class the best remaining detection (by ``sort_key``) is kept
    and every other one overlapping it with IoU > ``iou_threshold`` is
    dropped. The result is sorted by ``sort_key`` and does not depend on
    the input order.
    """
    assert check_argument_types()
    if not 0 <= iou_threshold <= 1:
        raise ValueError(f"iou_threshold must be in [0, 1], got {iou_threshold}")
    by_class: Dict[int, List[Detection]] = {}
    for det in dets:
        by_class.setdefault(det.class_id, []).append(det)

    keep = []
    for _, group in sorted(by_class.items()):
        group = sorted(group, key=Detection.sort_key)
        overlaps = iou_matrix(group, group)
        order = np.arange(len(group))
        while order.size > 0:
            i = order[0]
            keep.append(group[i])
            order = order[1:][overlaps[i, order[1:]] <= iou_threshold]
    keep.sort(key=Detection.sort_key)
    return keep
