"""Gated inference over whole scenes, and the speed/accuracy sweep."""

from concurrent.futures import ThreadPoolExecutor
import csv
import dataclasses
import logging
from pathlib import Path
import time
from typing import List
from typing import Optional
from typing import Sequence
from typing import Tuple
from typing import Union

import numpy as np
import torch
from typeguard import check_argument_types

from oankit.detector.decode import decode
from oankit.detector.detection import Detection
from oankit.evaluation.average_precision import average_precision_scenes
from oankit.evaluation.gate_report import GateReport
from oankit.evaluation.gate_report import PatchTruth
from oankit.evaluation.gate_report import gate_report
from oankit.evaluation.merge import merge_scene
from oankit.gated.abs_gated_model import AbsGatedModel
from oankit.gated.oan_det_model import to_image_tensor
from oankit.oan.gate import GateDecision
from oankit.oan.gate import gate
from oankit.synth.scene import AnnotatedScene
from oankit.tiling.tiler import TilePlan
from oankit.tiling.tiler import crop_patches

CSV_HEADER = ("threshold", "skip_ratio", "gate_precision", "gate_recall", "mAP", "fps")


@dataclasses.dataclass(frozen=True)
class EvalConfig:
    num_scenes: int = 50
    nms_threshold: float = 0.1
    iou_match: float = 0.5
    # thresholds of the sweep; the calibrated one is added to the grid
    sweep_thresholds: Tuple[float, ...] = (0.0, 0.05, 0.1, 0.15, 0.2, 0.3, 0.5, 1.0)
    workers: int = 1

    def __post_init__(self):
        if self.num_scenes < 1:
            raise ValueError(f"num_scenes: must be >= 1, got {self.num_scenes}")
        if not 0 <= self.nms_threshold <= 1:
            raise ValueError(
                f"nms_threshold: must be in [0, 1], got {self.nms_threshold}"
            )
        if not 0 < self.iou_match <= 1:
            raise ValueError(f"iou_match: must be in (0, 1], got {self.iou_match}")
        if any(t < 0 for t in self.sweep_thresholds):
            raise ValueError(f"sweep_thresholds: must be >= 0, {self.sweep_thresholds}")
        if self.workers < 1:
            raise ValueError(f"workers: must be >= 1, got {self.workers}")


@dataclasses.dataclass
class PatchResult:
    origin: Tuple[int, int]
    decision: GateDecision
    # patch coordinates; empty when the gate filtered the patch
    detections: List[Detection]


@dataclasses.dataclass
class SceneResult:
    detections: List[Detection]
    patches: List[PatchResult]
    truths: List[PatchTruth]

    @property
    def report(self) -> GateReport:
        return gate_report(self.truths)

    @property
    def empty_patch_dets(self) -> int:
        """Detections emitted on patches without objects (false alarms)."""
        return sum(
            len(p.detections)
            for p, t in zip(self.patches, self.truths)
            if not t.has_objects
        )


@dataclasses.dataclass(frozen=True)
class SweepRow:
    threshold: float
    skip_ratio: float
    gate_precision: float
    gate_recall: float
    mAP: float
    fps: float
    empty_patch_dets: int = 0

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


class GatedPipeline:
    """tile -> backbone -> objectness gate -> detector if passed -> merge

    ``threshold=None`` runs the same path with the gate bypassed.
    """

    def __init__(
        self,
        model: AbsGatedModel,
        patch_size: int,
        stride: int,
        keep_threshold: float = 0.05,
        nms_threshold: float = 0.1,
        workers: int = 1,
    ):
        assert check_argument_types()
        self.model = model.eval()
        self.patch_size = patch_size
        self.stride = stride
        self.keep_threshold = keep_threshold
        self.nms_threshold = nms_threshold
        self.workers = workers

    @torch.no_grad()
    def infer_patches(
        self, rasters: Sequence[np.ndarray], threshold: Optional[float]
    ) -> List[Tuple[GateDecision, List[Detection]]]:
        if len(rasters) == 0:
            return []
        image = to_image_tensor(rasters)
        feats = self.model.features(image)
        amap = self.model.activation(feats)
        if threshold is None:
            decisions = [
                GateDecision(True, float(m.confidence), 0.0) for m in amap.unbind()
            ]
        else:
            decisions = [gate(m, threshold) for m in amap.unbind()]

        dets = [[] for _ in decisions]
        passed = [i for i, d in enumerate(decisions) if d.passed]
        if passed:
            index = torch.tensor(passed)
            outputs = self.model.detect(image[index], [f[index] for f in feats])
            for k, i in enumerate(passed):
                dets[i] = decode(outputs[k], self.keep_threshold, self.patch_size)
        return list(zip(decisions, dets))

    def _infer_parallel(self, rasters, threshold):
        if self.workers == 1 or len(rasters) < 2:
            return self.infer_patches(rasters, threshold)
        chunks = np.array_split(np.arange(len(rasters)), self.workers)
        with ThreadPoolExecutor(max_workers=self.workers) as pool:
            futures = [
                pool.submit(self.infer_patches, [rasters[i] for i in c], threshold)
                for c in chunks
                if len(c) > 0
            ]
            return [r for f in futures for r in f.result()]

    def run_scene(
        self, scene: AnnotatedScene, threshold: Optional[float]
    ) -> SceneResult:
        plan = TilePlan.for_scene(
            scene.width, scene.height, self.patch_size, self.stride
        )
        samples = crop_patches(scene, plan)
        results = self._infer_parallel([s.raster for s in samples], threshold)
        patches = [
            PatchResult(origin=s.origin, decision=d, detections=dets)
            for s, (d, dets) in zip(samples, results)
        ]
        truths = [
            PatchTruth(frozenset(s.box_indices), passed=p.decision.passed)
            for s, p in zip(samples, patches)
        ]
        merged = merge_scene(
            [(p.origin, p.detections) for p in patches], self.nms_threshold
        )
        return SceneResult(detections=merged, patches=patches, truths=truths)


def bench(
    pipeline: GatedPipeline,
    scenes: Sequence[AnnotatedScene],
    threshold: Optional[float],
    iou_match: float = 0.5,
) -> Tuple[SweepRow, List[SceneResult]]:
    """Run every scene through the pipeline and time it.

    FPS is the number of patches (passed or not) per second of wall clock.
    """
    assert check_argument_types()
    start = time.perf_counter()
    results = [pipeline.run_scene(s, threshold) for s in scenes]
    elapsed = time.perf_counter() - start

    num_patches = sum(len(r.patches) for r in results)
    report = sum((r.report for r in results), GateReport(0, 0, 0, 0, 0))
    ap = average_precision_scenes(
        [(r.detections, s.boxes) for r, s in zip(results, scenes)], iou_match
    )
    row = SweepRow(
        threshold=0.0 if threshold is None else float(threshold),
        skip_ratio=report.skip_ratio,
        gate_precision=report.precision,
        gate_recall=report.recall,
        mAP=ap.mAP,
        fps=num_patches / elapsed if elapsed > 0 else float("inf"),
        empty_patch_dets=sum(r.empty_patch_dets for r in results),
    )
    logging.info(
        f"T={row.threshold:.4f}: skip_ratio={row.skip_ratio:.3f} "
        f"gate_precision={row.gate_precision:.3f} gate_recall={row.gate_recall:.3f} "
        f"mAP={row.mAP:.4f} speed={row.fps:.1f} patches/sec"
    )
    return row, results


def sweep(
    pipeline: GatedPipeline,
    scenes: Sequence[AnnotatedScene],
    thresholds: Sequence[float],
    iou_match: float = 0.5,
) -> List[SweepRow]:
    if list(thresholds) != sorted(thresholds):
        raise ValueError(f"thresholds must be sorted: {list(thresholds)}")
    return [bench(pipeline, scenes, t, iou_match)[0] for t in thresholds]


def write_sweep_csv(rows: Sequence[SweepRow], path: Union[Path, str]):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in rows:
            writer.writerow([f"{getattr(row, k):.6f}" for k in CSV_HEADER])


def plot_sweep(rows: Sequence[SweepRow], path: Union[Path, str]):
    """FPS against mAP, each point labelled with its threshold."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot([r.fps for r in rows], [r.mAP for r in rows], marker="o")
    for r in rows:
        ax.annotate(f"T={r.threshold:.3g}", (r.fps, r.mAP), fontsize=8)
    ax.set_xlabel("patches / sec")
    ax.set_ylabel("mAP")
    ax.set_title("speed vs accuracy")
    ax.grid(True)
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path)
    plt.close(fig)


def read_sweep_csv(path: Union[Path, str]) -> List[SweepRow]:
    with Path(path).open(newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        if tuple(reader.fieldnames or ()) != CSV_HEADER:
            raise ValueError(f"{path}: header must be {CSV_HEADER}")
        return [SweepRow(**{k: float(r[k]) for k in CSV_HEADER}) for r in reader]


def find_operating_point(
    rows: Sequence[SweepRow],
    min_skip_ratio: float = 0.4,
    min_gate_recall: float = 0.95,
    max_map_drop: float = 0.01,
) -> Optional[SweepRow]:
    """Highest threshold meeting the trade-off targets, or None.

    The T=0 row is the reference: every patch passes there, so its mAP
    is the ungated one.

    >>> rows = [SweepRow(0.0, 0.0, 0.3, 1.0, 0.80, 10.0),
    ...         SweepRow(0.1, 0.6, 0.7, 0.97, 0.795, 20.0),
    ...         SweepRow(0.5, 0.9, 0.9, 0.60, 0.50, 40.0)]
    >>> find_operating_point(rows).threshold
    0.1
    """
    reference = [r for r in rows if r.threshold == 0.0]
    if not reference:
        raise ValueError("the sweep has no T=0 row")
    floor = reference[0].mAP - max_map_drop
    found = None
    for r in sorted(rows, key=lambda r: r.threshold):
        if (
            r.skip_ratio >= min_skip_ratio
            and r.gate_recall >= min_gate_recall
            and r.mAP >= floor
        ):
            found = r
    return found
