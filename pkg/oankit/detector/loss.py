import math
from typing import Sequence
from typing import Tuple

import numpy as np
import torch

from oankit.detector.head import DetOutputs
from oankit.layers.functional import focal_loss_with_grad_fn
from oankit.layers.functional import sigmoid
from oankit.layers.functional import smooth_l1_sum
from oankit.synth.scene import GroundTruthBox
from oankit.utils.errors import NumericError
from oankit.utils.errors import ShapeError


def cell_of(box: GroundTruthBox, patch_size: int, grid_size: int) -> Tuple[int, int]:
    """(row, col) of the cell containing the box center."""
    cell = patch_size / grid_size
    cx, cy = box.center
    i = min(int(math.floor(cy / cell)), grid_size - 1)
    j = min(int(math.floor(cx / cell)), grid_size - 1)
    return i, j


def encode_box(
    box: GroundTruthBox, patch_size: int, grid_size: int
) -> Tuple[Tuple[int, int], Tuple[float, float, float, float]]:
    """Cell index and (dx, dy, log w, log h) regression target of ``box``.

    Examples:
        >>> encode_box(GroundTruthBox(0, 0, 16, 16, 0), 128, 8)
        ((0, 0), (0.5, 0.5, 0.0, 0.0))
    """
    cell = patch_size / grid_size
    i, j = cell_of(box, patch_size, grid_size)
    cx, cy = box.center
    w, h = box.x_max - box.x_min, box.y_max - box.y_min
    deltas = (cx / cell - j, cy / cell - i, math.log(w / cell), math.log(h / cell))
    return (i, j), deltas


def decode_box(
    cell_index: Tuple[int, int],
    deltas: Sequence[float],
    patch_size: int,
    grid_size: int,
) -> Tuple[float, float, float, float]:
    """Inverse of ``encode_box`` (before clipping); log sizes are clamped."""
    cell = patch_size / grid_size
    i, j = cell_index
    dx, dy, dw, dh = (float(d) for d in deltas)
    max_log = math.log(grid_size) + 1.0
    w = cell * math.exp(min(dw, max_log))
    h = cell * math.exp(min(dh, max_log))
    cx, cy = (j + dx) * cell, (i + dy) * cell
    return cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2


def build_targets(
    boxes: Sequence[GroundTruthBox], patch_size: int, grid_size: int, num_classes: int
):
    """Per-cell class targets and box targets for one patch.

    Every class with a box center in a cell marks that cell positive for
    the class; the largest such box provides the regression target.

    Returns:
        class_target: (C, S, S) float array
        box_target: (4, S, S) float array
        positive: (S, S) bool array
    """
    class_target = np.zeros((num_classes, grid_size, grid_size), dtype=np.float64)
    box_target = np.zeros((4, grid_size, grid_size), dtype=np.float64)
    positive = np.zeros((grid_size, grid_size), dtype=bool)
    best_area = np.zeros((grid_size, grid_size), dtype=np.float64)
    for box in boxes:
        if not 0 <= box.class_id < num_classes:
            raise ValueError(f"class_id {box.class_id} not in [0, {num_classes})")
        (i, j), deltas = encode_box(box, patch_size, grid_size)
        class_target[box.class_id, i, j] = 1.0
        if box.area > best_area[i, j]:
            best_area[i, j] = box.area
            box_target[:, i, j] = deltas
        positive[i, j] = True
    return class_target, box_target, positive


def det_loss(
    outputs: DetOutputs,
    boxes: Sequence[Sequence[GroundTruthBox]],
    patch_size: int,
    alpha: float = 0.25,
    gamma: float = 2.0,
    beta: float = 1.0,
) -> Tuple[torch.Tensor, torch.Tensor]:
    """(L_class, L_box) for a batch of patches.

    ``boxes[n]`` holds the patch-coordinate boxes of patch ``n``. L_class is
    the sigmoid focal loss summed over classes and averaged over cells;
    L_box is the smooth-L1 of the four deltas summed and averaged over
    positive cells (0 without positives).
    """
    n, c, s, _ = outputs.class_logits.shape
    if len(boxes) != n:
        raise ShapeError(f"{len(boxes)} box lists for a batch of {n} patches")
    dtype = outputs.class_logits.dtype
    targets = [build_targets(b, patch_size, s, c) for b in boxes]
    class_target = torch.from_numpy(np.stack([t[0] for t in targets])).to(dtype)
    box_target = torch.from_numpy(np.stack([t[1] for t in targets])).to(dtype)
    positive = torch.from_numpy(np.stack([t[2] for t in targets]))

    probs = sigmoid(outputs.class_logits)
    l_class = focal_loss_with_grad_fn(
        probs, class_target, None, alpha, gamma, float(n * s * s)
    )

    num_pos = int(positive.sum())
    if num_pos == 0:
        # keep the graph connected so backward still reaches the box branch
        l_box = (outputs.box_deltas * 0).sum()
    else:
        # (N, 4, S, S) -> (num_pos, 4)
        pred = outputs.box_deltas.permute(0, 2, 3, 1)[positive]
        tgt = box_target.permute(0, 2, 3, 1)[positive]
        l_box = smooth_l1_sum(pred - tgt, beta) / num_pos
    return l_class, l_box


def total_loss(
    l_class: torch.Tensor, l_box: torch.Tensor, l_oan: torch.Tensor, lam: float
) -> torch.Tensor:
    """L = L_box + L_class + lambda * L_OAN"""
    if lam < 0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    for name, term in (("L_class", l_class), ("L_box", l_box), ("L_OAN", l_oan)):
        if not bool(torch.isfinite(torch.as_tensor(term)).all()):
            raise NumericError(f"{name} is not finite: {term}")
    return l_box + l_class + lam * l_oan

