import collections.abc
import json
import logging
from pathlib import Path
from typing import Dict
from typing import List
from typing import Optional
from typing import Sequence
from typing import Union

from typeguard import check_argument_types

from oankit.fileio.pgm import read_pgm
from oankit.fileio.pgm import write_pgm
from oankit.synth.scene import AnnotatedScene
from oankit.synth.scene import GroundTruthBox
from oankit.utils.errors import FileFormatError

MANIFEST_NAME = "manifest.json"


def write_annotation(path: Union[Path, str], scene: AnnotatedScene) -> None:
    doc = {
        "width": scene.width,
        "height": scene.height,
        "boxes": [b.to_dict() for b in scene.boxes],
    }
    with Path(path).open("w", encoding="utf-8") as f:
        json.dump(doc, f, indent=2)
        f.write("\n")


def read_annotation(path: Union[Path, str]) -> dict:
    path = Path(path)
    try:
        with path.open("r", encoding="utf-8") as f:
            doc = json.load(f)
        boxes = [
            GroundTruthBox(
                x_min=int(b["x_min"]),
                y_min=int(b["y_min"]),
                x_max=int(b["x_max"]),
                y_max=int(b["y_max"]),
                class_id=int(b["class_id"]),
            )
            for b in doc["boxes"]
        ]
        return dict(width=int(doc["width"]), height=int(doc["height"]), boxes=boxes)
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise FileFormatError(f"{path}: invalid annotation file: {e}")


def read_scene(
    image: Union[Path, str],
    annotation: Union[Path, str],
    num_classes: Optional[int] = None,
) -> AnnotatedScene:
    """Read one PGM + JSON pair; class ids are checked when ``num_classes`` is given."""
    raster = read_pgm(image)
    ann = read_annotation(annotation)
    if raster.shape != (ann["height"], ann["width"]):
        raise FileFormatError(
            f"{annotation}: size {ann['width']}x{ann['height']} does not match "
            f"{image} ({raster.shape[1]}x{raster.shape[0]})"
        )
    for b in ann["boxes"]:
        if not b.is_valid(ann["width"], ann["height"]):
            raise FileFormatError(f"{annotation}: box out of bounds: {b}")
        if num_classes is not None and not 0 <= b.class_id < num_classes:
            raise FileFormatError(
                f"{annotation}: class_id {b.class_id} not in [0, {num_classes})"
            )
    return AnnotatedScene(raster=raster, boxes=ann["boxes"])


def write_dataset(
    scenes: Sequence[AnnotatedScene], directory: Union[Path, str]
) -> List[Dict[str, str]]:
    """Write scenes as PGM + JSON pairs and a manifest listing them.

    Returns:
        The manifest: ``[{"image": ..., "annotation": ...}, ...]`` with paths
        relative to ``directory``.
    """
    assert check_argument_types()
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    manifest = []
    for idx, scene in enumerate(scenes):
        image = f"scene_{idx:05d}.pgm"
        annotation = f"scene_{idx:05d}.json"
        write_pgm(directory / image, scene.raster)
        write_annotation(directory / annotation, scene)
        manifest.append({"image": image, "annotation": annotation})

    with (directory / MANIFEST_NAME).open("w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2)
        f.write("\n")
    logging.info(f"Wrote {len(manifest)} scenes to {directory}")
    return manifest


class SceneDatasetReader(collections.abc.Mapping):
    """Reader class for a directory written by ``write_dataset``.

    Keys are the image stems of the manifest (``scene_00000``, ...), values
    are read on access::

        reader = SceneDatasetReader("dump/train", num_classes=3)
        scene = reader["scene_00000"]
    """

    def __init__(self, directory: Union[Path, str], num_classes: Optional[int] = None):
        assert check_argument_types()
        self.directory = Path(directory)
        self.num_classes = num_classes
        manifest_path = self.directory / MANIFEST_NAME
        with manifest_path.open("r", encoding="utf-8") as f:
            try:
                manifest = json.load(f)
            except json.JSONDecodeError as e:
                raise FileFormatError(f"{manifest_path}: invalid manifest: {e}")
        if not isinstance(manifest, list):
            raise FileFormatError(f"{manifest_path}: manifest must be a JSON array")

        self.data = {}
        for entry in manifest:
            try:
                key = Path(entry["image"]).stem
                self.data[key] = (entry["image"], entry["annotation"])
            except (KeyError, TypeError):
                raise FileFormatError(f"{manifest_path}: invalid entry {entry}")

    def get_path(self, key):
        image, annotation = self.data[key]
        return self.directory / image, self.directory / annotation

    def __getitem__(self, key) -> AnnotatedScene:
        return read_scene(*self.get_path(key), self.num_classes)

    def __len__(self):
        return len(self.data)

    def __iter__(self):
        return iter(self.data)


def read_dataset(
    directory: Union[Path, str], num_classes: Optional[int] = None
) -> List[AnnotatedScene]:
    return list(SceneDatasetReader(directory, num_classes).values())
