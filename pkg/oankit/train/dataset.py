from typing import Dict
from typing import List
from typing import Sequence
from typing import Tuple

import torch
from torch.utils.data.dataset import Dataset
from typeguard import check_argument_types

from oankit.gated.oan_det_model import to_image_tensor
from oankit.synth.scene import AnnotatedScene
from oankit.tiling.tiler import PatchSample
from oankit.tiling.tiler import TilePlan
from oankit.tiling.tiler import crop_patches


class PatchDataset(Dataset):
    """Every patch of every scene, valid and invalid alike.

    Examples::

        dataset = PatchDataset(scenes, patch_size=128, stride=104)
        key, sample = dataset[0]
    """

    def __init__(
        self, scenes: Sequence[AnnotatedScene], patch_size: int, stride: int
    ):
        assert check_argument_types()
        self.patches: List[PatchSample] = []
        self.keys: List[str] = []
        for idx, scene in enumerate(scenes):
            plan = TilePlan.for_scene(scene.width, scene.height, patch_size, stride)
            for patch in crop_patches(scene, plan):
                self.patches.append(patch)
                x0, y0 = patch.origin
                self.keys.append(f"scene{idx:05d}_x{x0}_y{y0}")

    def __len__(self) -> int:
        return len(self.patches)

    def __getitem__(self, index: int) -> Tuple[str, PatchSample]:
        return self.keys[index], self.patches[index]

    @property
    def num_valid(self) -> int:
        return sum(p.is_valid for p in self.patches)


def patch_collate_fn(
    data: Sequence[Tuple[str, PatchSample]]
) -> Tuple[List[str], Dict[str, object]]:
    """-> (keys, {"image": (N, 1, P, P) tensor, "boxes": list of box lists})"""
    keys = [k for k, _ in data]
    batch = dict(
        image=to_image_tensor([p.raster for _, p in data]),
        boxes=[list(p.boxes) for _, p in data],
    )
    return keys, batch


def build_loader(
    dataset: PatchDataset, batch_size: int, seed: int, shuffle: bool = True
) -> torch.utils.data.DataLoader:
    generator = torch.Generator()
    generator.manual_seed(seed)
    return torch.utils.data.DataLoader(
        dataset,
        batch_size=batch_size,
        shuffle=shuffle,
        collate_fn=patch_collate_fn,
        generator=generator,
        num_workers=0,
    )
