from typing import List
from typing import Sequence
from typing import Tuple

from oankit.detector.detection import Detection
from oankit.evaluation.box_ops import nms
from oankit.tiling.tiler import to_global


def merge_scene(
    per_patch: Sequence[Tuple[Tuple[int, int], Sequence[Detection]]],
    iou_threshold: float = 0.1,
) -> List[Detection]:
    """Translate patch detections into the scene, concatenate, then NMS."""
    merged = [to_global(det, origin) for origin, dets in per_patch for det in dets]
    return nms(merged, iou_threshold)
