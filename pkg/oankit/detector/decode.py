from typing import List

import torch
from typeguard import check_argument_types

from oankit.detector.detection import Detection
from oankit.detector.head import DetOutputs
from oankit.detector.loss import decode_box


def decode(
    outputs: DetOutputs, keep_threshold: float, patch_size: int
) -> List[Detection]:
    """Scored boxes in patch coordinates for a single patch.

    Every (cell, class) whose sigmoid score exceeds ``keep_threshold``
    yields one detection; boxes are clipped to the patch and dropped when
    clipping leaves them empty.
    """
    assert check_argument_types()
    if not 0 <= keep_threshold < 1:
        raise ValueError(f"keep_threshold must be in [0, 1), got {keep_threshold}")
    logits = outputs.class_logits.detach()
    deltas = outputs.box_deltas.detach()
    if logits.dim() == 4:
        if logits.size(0) != 1:
            raise ValueError("decode takes the outputs of one patch")
        logits, deltas = logits[0], deltas[0]
    grid = int(logits.shape[-1])
    scores = torch.sigmoid(logits.double())

    dets = []
    for c, i, j in torch.nonzero(scores > keep_threshold).tolist():
        x1, y1, x2, y2 = decode_box((i, j), deltas[:, i, j].tolist(), patch_size, grid)
        x1, y1 = max(x1, 0.0), max(y1, 0.0)
        x2, y2 = min(x2, float(patch_size)), min(y2, float(patch_size))
        score = float(scores[c, i, j])
        if not (x1 < x2 and y1 < y2) or score <= 0:
            continue
        dets.append(Detection(x1, y1, x2, y2, class_id=c, score=score))
    dets.sort(key=Detection.sort_key)
    return dets
