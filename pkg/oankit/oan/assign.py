"""Grid label assignment for the objectness activation head."""

import dataclasses
import math
from typing import Sequence

import numpy as np
from typeguard import check_argument_types

from oankit.synth.scene import GroundTruthBox


@dataclasses.dataclass
class GridLabels:
    target: np.ndarray  # (S, S) uint8, 1 = positive
    ignore: np.ndarray  # (S, S) uint8, 1 = excluded from the loss

    def __post_init__(self):
        assert self.target.shape == self.ignore.shape
        assert not np.any(self.target & self.ignore), "cell both positive and ignored"

    @property
    def grid_size(self) -> int:
        return int(self.target.shape[0])


def _check_grid(patch_size: int, grid_size: int):
    if grid_size < 1 or patch_size < 1:
        raise ValueError(
            f"patch_size={patch_size} and grid_size={grid_size} must be >= 1"
        )


def assign_center(
    boxes: Sequence[GroundTruthBox], patch_size: int, grid_size: int
) -> GridLabels:
    """A cell is positive iff it contains the center of some box.

    Class-agnostic; nothing is ignored.

    Examples:
        >>> labels = assign_center([GroundTruthBox(90, 190, 110, 210, 0)], 1024, 16)
        >>> tuple(int(v) for v in np.argwhere(labels.target)[0])
        (3, 1)
    """
    assert check_argument_types()
    _check_grid(patch_size, grid_size)
    cell = patch_size / grid_size
    target = np.zeros((grid_size, grid_size), dtype=np.uint8)
    for box in boxes:
        cx, cy = box.center
        if not (0 <= cx < patch_size and 0 <= cy < patch_size):
            raise ValueError(
                f"box center {(cx, cy)} outside the patch [0, {patch_size})^2: {box}"
            )
        i = min(int(math.floor(cy / cell)), grid_size - 1)
        j = min(int(math.floor(cx / cell)), grid_size - 1)
        target[i, j] = 1
    return GridLabels(target=target, ignore=np.zeros_like(target))


def iof_matrix(
    boxes: Sequence[GroundTruthBox], patch_size: int, grid_size: int
) -> np.ndarray:
    """(S, S, B) overlap of each cell with each box, divided by the cell area."""
    cell = patch_size / grid_size
    edges = np.arange(grid_size + 1, dtype=np.float64) * cell
    lo, hi = edges[:-1], edges[1:]
    if len(boxes) == 0:
        return np.zeros((grid_size, grid_size, 0))
    b = np.array(
        [[bx.x_min, bx.y_min, bx.x_max, bx.y_max] for bx in boxes], dtype=np.float64
    )
    # (S, B) overlaps along each axis
    ox = np.clip(
        np.minimum(hi[:, None], b[None, :, 2]) - np.maximum(lo[:, None], b[None, :, 0]),
        0,
        None,
    )
    oy = np.clip(
        np.minimum(hi[:, None], b[None, :, 3]) - np.maximum(lo[:, None], b[None, :, 1]),
        0,
        None,
    )
    return oy[:, None, :] * ox[None, :, :] / (cell * cell)


def assign_iof(
    boxes: Sequence[GroundTruthBox],
    patch_size: int,
    grid_size: int,
    hi: float = 0.5,
    lo: float = 0.1,
) -> GridLabels:
    """Intersection-over-foreground assignment, normalized by the cell area.

    max IoF >= hi -> positive; max IoF < lo -> negative; otherwise ignored.
    """
    assert check_argument_types()
    _check_grid(patch_size, grid_size)
    if not hi > lo:
        raise ValueError(f"iof thresholds need hi > lo, got hi={hi} lo={lo}")
    iof = iof_matrix(boxes, patch_size, grid_size)
    best = iof.max(axis=2) if iof.shape[2] > 0 else np.zeros((grid_size, grid_size))
    target = (best >= hi).astype(np.uint8)
    ignore = ((best >= lo) & (best < hi)).astype(np.uint8)
    return GridLabels(target=target, ignore=ignore)
