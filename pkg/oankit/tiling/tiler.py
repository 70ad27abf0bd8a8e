"""Sliding-window decomposition of large scenes into fixed-size patches."""

import dataclasses
import math
from typing import List
from typing import Tuple

import numpy as np
from typeguard import check_argument_types

from oankit.detector.detection import Detection
from oankit.synth.scene import AnnotatedScene
from oankit.synth.scene import GroundTruthBox


def plan_tiles(extent: int, patch_size: int, stride: int) -> List[int]:
    """Window origins along one axis.

    The last window is clamped to end at the border instead of padding.

    Examples:
        >>> len(plan_tiles(29200, 1024, 824)) * len(plan_tiles(27620, 1024, 824))
        1224
        >>> plan_tiles(4000, 1024, 824)
        [0, 824, 1648, 2472, 2976]
        >>> plan_tiles(1024, 1024, 824)
        [0]
    """
    if patch_size <= 0:
        raise ValueError(f"patch_size: must be positive, got {patch_size}")
    if stride <= 0 or stride > patch_size:
        raise ValueError(f"stride: must be in [1, {patch_size}], got {stride}")
    if extent < 1:
        raise ValueError(f"extent: must be positive, got {extent}")
    if extent <= patch_size:
        return [0]
    last = extent - patch_size
    origins = list(range(0, last + 1, stride))
    if origins[-1] != last:
        origins.append(last)
    assert len(origins) == math.ceil(last / stride) + 1, (extent, patch_size, stride)
    return origins


@dataclasses.dataclass(frozen=True)
class TilePlan:
    patch_size: int
    stride: int
    origins_x: Tuple[int, ...]
    origins_y: Tuple[int, ...]

    @classmethod
    def for_scene(cls, width: int, height: int, patch_size: int, stride: int):
        return cls(
            patch_size=patch_size,
            stride=stride,
            origins_x=tuple(plan_tiles(width, patch_size, stride)),
            origins_y=tuple(plan_tiles(height, patch_size, stride)),
        )

    @property
    def origins(self) -> List[Tuple[int, int]]:
        """Row-major (x0, y0) pairs."""
        return [(x0, y0) for y0 in self.origins_y for x0 in self.origins_x]

    def __len__(self) -> int:
        return len(self.origins_x) * len(self.origins_y)


@dataclasses.dataclass
class PatchSample:
    origin: Tuple[int, int]
    raster: np.ndarray  # (P, P) uint8
    boxes: List[GroundTruthBox]
    # indices of the assigned boxes in the source scene
    box_indices: List[int] = dataclasses.field(default_factory=list)

    @property
    def is_valid(self) -> bool:
        return len(self.boxes) > 0


def _contains(origin: int, patch_size: int, value: float) -> bool:
    return origin <= value < origin + patch_size


def crop_patches(scene: AnnotatedScene, plan: TilePlan) -> List[PatchSample]:
    """Cut ``scene`` into the windows of ``plan``.

    A box belongs to every patch whose half-open area contains its center;
    assigned boxes are translated into patch coordinates and clipped.
    Scenes smaller than the patch are zero padded on the right/bottom.
    """
    assert check_argument_types()
    p = plan.patch_size
    last_x, last_y = max(scene.width - p, 0), max(scene.height - p, 0)
    if plan.origins_x[-1] != last_x or plan.origins_y[-1] != last_y:
        raise ValueError(
            f"plan does not fit the scene ({scene.width}x{scene.height}): {plan}"
        )
    centers = [b.center for b in scene.boxes]

    patches = []
    for x0, y0 in plan.origins:
        crop = scene.raster[y0 : y0 + p, x0 : x0 + p]
        if crop.shape != (p, p):
            padded = np.zeros((p, p), dtype=scene.raster.dtype)
            padded[: crop.shape[0], : crop.shape[1]] = crop
            crop = padded
        else:
            crop = crop.copy()

        boxes, indices = [], []
        for idx, (box, (cx, cy)) in enumerate(zip(scene.boxes, centers)):
            if not (_contains(x0, p, cx) and _contains(y0, p, cy)):
                continue
            boxes.append(
                GroundTruthBox(
                    x_min=max(box.x_min - x0, 0),
                    y_min=max(box.y_min - y0, 0),
                    x_max=min(box.x_max - x0, p),
                    y_max=min(box.y_max - y0, p),
                    class_id=box.class_id,
                )
            )
            indices.append(idx)
        patches.append(
            PatchSample(origin=(x0, y0), raster=crop, boxes=boxes, box_indices=indices)
        )
    return patches


def to_global(det: Detection, origin: Tuple[int, int]) -> Detection:
    """Translate a patch-space detection into scene coordinates."""
    x0, y0 = origin
    return dataclasses.replace(
        det,
        x_min=det.x_min + x0,
        y_min=det.y_min + y0,
        x_max=det.x_max + x0,
        y_max=det.y_max + y0,
    )


@dataclasses.dataclass(frozen=True)
class TilingConfig:
    patch_size: int = 128
    # 104 keeps a 24 px overlap, about a fifth of the patch
    stride: int = 104

    def __post_init__(self):
        if self.patch_size < 1:
            raise ValueError(f"patch_size: must be >= 1, got {self.patch_size}")
        if not 1 <= self.stride <= self.patch_size:
            raise ValueError(
                f"stride: must be in [1, {self.patch_size}], got {self.stride}"
            )
