"""Synthetic large scenes with sparse, clustered objects.

Objects are bright filled shapes (rectangles and ellipses, alternating by
class) on a dark noisy background. Cluster centers are drawn uniformly over
the scene and objects scatter inside a disk around them, so most of a scene
is empty and the objects that exist sit close together.
"""

import dataclasses
import math
from typing import List
from typing import Optional
from typing import Tuple

import numpy as np
from PIL import Image
from PIL import ImageDraw
from typeguard import check_argument_types


@dataclasses.dataclass(frozen=True)
class GroundTruthBox:
    """Axis-aligned box, half-open pixel extent ``[x_min, x_max)``."""

    x_min: int
    y_min: int
    x_max: int
    y_max: int
    class_id: int

    @property
    def center(self) -> Tuple[float, float]:
        return (self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0

    @property
    def area(self) -> int:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)

    def is_valid(self, width: int, height: int, num_classes: int = None) -> bool:
        ok = (
            0 <= self.x_min < self.x_max <= width
            and 0 <= self.y_min < self.y_max <= height
        )
        if num_classes is not None:
            ok = ok and 0 <= self.class_id < num_classes
        return ok

    def to_dict(self) -> dict:
        return dict(
            x_min=self.x_min,
            y_min=self.y_min,
            x_max=self.x_max,
            y_max=self.y_max,
            class_id=self.class_id,
        )


@dataclasses.dataclass
class AnnotatedScene:
    raster: np.ndarray  # (H, W) uint8
    boxes: List[GroundTruthBox]

    @property
    def height(self) -> int:
        return int(self.raster.shape[0])

    @property
    def width(self) -> int:
        return int(self.raster.shape[1])

    def __eq__(self, other) -> bool:
        if not isinstance(other, AnnotatedScene):
            return NotImplemented
        return (
            self.raster.shape == other.raster.shape
            and bool(np.array_equal(self.raster, other.raster))
            and list(self.boxes) == list(other.boxes)
        )


@dataclasses.dataclass(frozen=True)
class SceneSpec:
    width: int = 512
    height: int = 512
    num_clusters: int = 2
    # inclusive [low, high]
    objects_per_cluster: Tuple[int, int] = (3, 6)
    cluster_radius: float = 32.0
    # one inclusive [low, high] side-length range per class
    object_sizes: Tuple[Tuple[int, int], ...] = ((6, 12), (10, 16), (14, 22))
    num_classes: int = 3
    background_level: int = 24
    background_noise_sigma: float = 8.0
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self, patch_size: Optional[int] = None):
        """Raise ValueError naming the first offending field."""
        if self.width < 1:
            raise ValueError(f"width: must be >= 1, got {self.width}")
        if self.height < 1:
            raise ValueError(f"height: must be >= 1, got {self.height}")
        if patch_size is not None:
            if self.width < patch_size:
                raise ValueError(
                    f"width: must be >= patch size {patch_size}, got {self.width}"
                )
            if self.height < patch_size:
                raise ValueError(
                    f"height: must be >= patch size {patch_size}, got {self.height}"
                )
        if self.num_clusters < 0:
            raise ValueError(f"num_clusters: must be >= 0, got {self.num_clusters}")
        lo, hi = self.objects_per_cluster
        if not 0 <= lo <= hi:
            raise ValueError(
                f"objects_per_cluster: empty or negative range {(lo, hi)}"
            )
        if self.cluster_radius < 0:
            raise ValueError(
                f"cluster_radius: must be >= 0, got {self.cluster_radius}"
            )
        if self.num_classes < 1:
            raise ValueError(f"num_classes: must be >= 1, got {self.num_classes}")
        if len(self.object_sizes) != self.num_classes:
            raise ValueError(
                f"object_sizes: need one range per class ({self.num_classes}), "
                f"got {len(self.object_sizes)}"
            )
        for c, (lo, hi) in enumerate(self.object_sizes):
            if lo < 4 or lo > hi:
                raise ValueError(
                    f"object_sizes: class {c} range {(lo, hi)} must satisfy "
                    "4 <= low <= high"
                )
        if not 0 <= self.background_level <= 255:
            raise ValueError(
                f"background_level: must be in [0, 255], got {self.background_level}"
            )
        if self.background_noise_sigma < 0:
            raise ValueError(
                "background_noise_sigma: must be >= 0, "
                f"got {self.background_noise_sigma}"
            )
        if not 0 <= self.seed < 2**64:
            raise ValueError(
                f"seed: must be an unsigned 64-bit integer, got {self.seed}"
            )


def class_intensity(class_id: int) -> int:
    """Gray level of the filled shape of each class."""
    return 255 - 30 * (class_id % 4)


def _draw_shape(class_id: int, w: int, h: int) -> np.ndarray:
    canvas = Image.new("L", (w, h), 0)
    draw = ImageDraw.Draw(canvas)
    if class_id % 2 == 0:
        draw.rectangle([0, 0, w - 1, h - 1], fill=255)
    else:
        draw.ellipse([0, 0, w - 1, h - 1], fill=255)
    return np.asarray(canvas) > 0


def generate_scene(spec: SceneSpec) -> AnnotatedScene:
    """Render one scene; a pure function of ``spec`` (seed included)."""
    assert check_argument_types()
    spec.validate()
    rng = np.random.default_rng(spec.seed)

    noise = rng.normal(0.0, spec.background_noise_sigma, size=(spec.height, spec.width))
    raster = np.clip(np.rint(spec.background_level + noise), 0, 255).astype(np.uint8)

    boxes = []
    for _ in range(spec.num_clusters):
        ccx = rng.uniform(0, spec.width)
        ccy = rng.uniform(0, spec.height)
        lo, hi = spec.objects_per_cluster
        for _ in range(int(rng.integers(lo, hi + 1))):
            class_id = int(rng.integers(spec.num_classes))
            slo, shi = spec.object_sizes[class_id]
            w = int(rng.integers(slo, shi + 1))
            h = int(rng.integers(slo, shi + 1))
            # uniform in the disk
            rho = spec.cluster_radius * math.sqrt(rng.uniform())
            theta = rng.uniform(0, 2 * math.pi)
            # NOTE: the object center stays inside the image so a clipped
            #   shape never vanishes; the shape itself may overlap the border.
            cx = min(max(ccx + rho * math.cos(theta), 0.0), spec.width - 1.0)
            cy = min(max(ccy + rho * math.sin(theta), 0.0), spec.height - 1.0)
            box = _paint(raster, class_id, cx, cy, w, h)
            if box is not None:
                boxes.append(box)
    return AnnotatedScene(raster=raster, boxes=boxes)


def _paint(
    raster: np.ndarray, class_id: int, cx: float, cy: float, w: int, h: int
) -> Optional[GroundTruthBox]:
    height, width = raster.shape
    mask = _draw_shape(class_id, w, h)
    x0 = int(math.floor(cx - w / 2.0))
    y0 = int(math.floor(cy - h / 2.0))

    # clip to the image
    sx0, sy0 = max(0, -x0), max(0, -y0)
    sx1, sy1 = min(w, width - x0), min(h, height - y0)
    if sx0 >= sx1 or sy0 >= sy1:
        return None
    visible = mask[sy0:sy1, sx0:sx1]
    ys, xs = np.nonzero(visible)
    if len(xs) == 0:
        return None
    region = raster[y0 + sy0 : y0 + sy1, x0 + sx0 : x0 + sx1]
    region[visible] = class_intensity(class_id)

    # box tight to the clipped shape
    return GroundTruthBox(
        x_min=int(x0 + sx0 + xs.min()),
        y_min=int(y0 + sy0 + ys.min()),
        x_max=int(x0 + sx0 + xs.max() + 1),
        y_max=int(y0 + sy0 + ys.max() + 1),
        class_id=class_id,
    )


def generate_scenes(spec: SceneSpec, count: int) -> List[AnnotatedScene]:
    """``count`` scenes with seeds ``spec.seed, spec.seed + 1, ...``"""
    assert check_argument_types()
    return [
        generate_scene(dataclasses.replace(spec, seed=(spec.seed + i) % 2**64))
        for i in range(count)
    ]
