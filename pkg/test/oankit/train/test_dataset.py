import torch

from oankit.synth.scene import SceneSpec
from oankit.synth.scene import generate_scenes
from oankit.train.dataset import PatchDataset
from oankit.train.dataset import build_loader
from oankit.train.dataset import patch_collate_fn


def _dataset():
    scenes = generate_scenes(SceneSpec(seed=5), 2)
    return scenes, PatchDataset(scenes, patch_size=128, stride=104)


def test_every_patch_is_kept():
    scenes, dataset = _dataset()
    assert len(dataset) == 50
    assert 0 < dataset.num_valid < 50
    boxes = sum(len(p.boxes) for _, p in dataset)
    assert boxes >= sum(len(s.boxes) for s in scenes)


def test_keys():
    _, dataset = _dataset()
    assert dataset[0][0] == "scene00000_x0_y0"
    assert dataset[6][0] == "scene00000_x104_y104"
    assert dataset[49][0] == "scene00001_x384_y384"
    assert len(set(dataset.keys)) == len(dataset)


def test_collate():
    _, dataset = _dataset()
    keys, batch = patch_collate_fn([dataset[i] for i in range(4)])
    assert keys == dataset.keys[:4]
    assert batch["image"].shape == (4, 1, 128, 128)
    assert batch["image"].dtype == torch.float32
    assert len(batch["boxes"]) == 4


def test_loader_order_follows_seed():
    _, dataset = _dataset()

    def order(seed):
        return [k for keys, _ in build_loader(dataset, 8, seed) for k in keys]

    assert order(1) == order(1)
    assert order(1) != order(2)
    assert sorted(order(1)) == sorted(dataset.keys)
    unshuffled = build_loader(dataset, 8, 1, shuffle=False)
    assert [k for keys, _ in unshuffled for k in keys] == dataset.keys
