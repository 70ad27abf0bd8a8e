import csv
import time

import pytest
import torch

from oankit.detector.head import DetOutputs
from oankit.evaluation.bench import CSV_HEADER
from oankit.evaluation.bench import EvalConfig
from oankit.evaluation.bench import GatedPipeline
from oankit.evaluation.bench import SweepRow
from oankit.evaluation.bench import bench
from oankit.evaluation.bench import find_operating_point
from oankit.evaluation.bench import plot_sweep
from oankit.evaluation.bench import read_sweep_csv
from oankit.evaluation.bench import sweep
from oankit.evaluation.bench import write_sweep_csv
from oankit.gated.abs_gated_model import AbsGatedModel
from oankit.oan.head import ActivationMap
from oankit.synth.scene import SceneSpec
from oankit.synth.scene import generate_scene


class BrightnessModel(AbsGatedModel):
    """Objectness is the brightest pixel of each cell; detect sleeps per patch."""

    def __init__(self, grid_size: int = 8, delay: float = 0.0):
        super().__init__()
        self.grid_size = grid_size
        self.delay = delay
        self.detected = 0

    def forward(self, image, boxes):
        raise NotImplementedError

    def features(self, image):
        return [image]

    def _cells(self, image):
        return torch.nn.functional.adaptive_max_pool2d(image, self.grid_size)

    def activation(self, features):
        probs = self._cells(features[0])[:, 0]
        return ActivationMap(
            logits=torch.logit(probs, eps=1e-6),
            probs=probs,
            grid_size_px=features[0].shape[-1] / self.grid_size,
        )

    def detect(self, image, features):
        time.sleep(self.delay * len(image))
        self.detected += len(image)
        bright = self._cells(image) > 0.5
        logits = bright.float() * 40.0 - 20.0
        deltas = torch.zeros(len(image), 4, self.grid_size, self.grid_size)
        deltas[:, :2] = 0.5
        return DetOutputs(logits, deltas)


@pytest.fixture
def scene():
    return generate_scene(SceneSpec(seed=3))


def _pipeline(model, workers=1):
    return GatedPipeline(model, patch_size=128, stride=104, workers=workers)


def test_gate_bypass_and_full_filtering(scene):
    model = BrightnessModel()
    pipeline = _pipeline(model)
    row, (result,) = bench(pipeline, [scene], None)
    assert len(result.patches) == 25
    assert row.threshold == 0.0
    assert (row.skip_ratio, row.gate_precision, row.gate_recall) == (0.0, 1.0, 1.0)
    assert model.detected == 25

    row, (result,) = bench(pipeline, [scene], 1.0)
    assert row.skip_ratio == 1.0
    assert row.gate_recall == 0.0
    assert row.mAP == 0.0
    assert result.detections == []
    assert model.detected == 25


def test_bright_objects_are_never_lost(scene):
    row, (result,) = bench(_pipeline(BrightnessModel()), [scene], 0.5)
    assert 0.0 < row.skip_ratio < 1.0
    assert row.gate_recall == 1.0
    assert row.gate_precision == 1.0
    assert len(result.detections) > 0
    assert result.report.to_dict()["recall"] == 1.0


def test_passed_sets_are_nested(scene):
    pipeline = _pipeline(BrightnessModel())
    thresholds = [0.0, 0.1, 0.2, 0.3, 0.5, 0.8, 1.0]
    passed = []
    for t in thresholds:
        result = pipeline.run_scene(scene, t)
        passed.append({p.origin for p in result.patches if p.decision.passed})
    for low, high in zip(passed, passed[1:]):
        assert high <= low

    rows = sweep(pipeline, [scene], thresholds)
    skips = [r.skip_ratio for r in rows]
    assert skips == sorted(skips)
    recalls = [r.gate_recall for r in rows]
    assert recalls == sorted(recalls, reverse=True)


def test_sweep_rejects_unsorted_thresholds(scene):
    with pytest.raises(ValueError):
        sweep(_pipeline(BrightnessModel()), [scene], [0.5, 0.1])


def test_workers_do_not_change_results(scene):
    single = _pipeline(BrightnessModel()).run_scene(scene, 0.3)
    threaded = _pipeline(BrightnessModel(), workers=3).run_scene(scene, 0.3)
    assert threaded.detections == single.detections
    assert [p.decision for p in threaded.patches] == [
        p.decision for p in single.patches
    ]
    assert threaded.truths == single.truths


def test_time_is_linear_in_passed_patches(scene):
    pipeline = _pipeline(BrightnessModel(delay=0.02))
    bench(pipeline, [scene], None)
    full, _ = bench(pipeline, [scene], None)
    gate_only, _ = bench(pipeline, [scene], 1.0)
    partial, _ = bench(pipeline, [scene], 0.5)
    t_full, t_gate, t_partial = (25 / r.fps for r in (full, gate_only, partial))
    predicted = t_gate + (1 - partial.skip_ratio) * (t_full - t_gate)
    assert abs(t_partial - predicted) <= 0.2 * predicted


def test_sweep_csv(tmp_path):
    rows = [
        SweepRow(0.0, 0.0, 1.0, 1.0, 0.5, 100.0),
        SweepRow(0.25, 0.5, 0.9, 0.95, 0.45, 180.5),
    ]
    write_sweep_csv(rows, tmp_path / "sweep.csv")
    with (tmp_path / "sweep.csv").open() as f:
        lines = list(csv.reader(f))
    assert tuple(lines[0]) == CSV_HEADER
    assert lines[2] == [
        "0.250000",
        "0.500000",
        "0.900000",
        "0.950000",
        "0.450000",
        "180.500000",
    ]


def test_plot_sweep(tmp_path):
    rows = [
        SweepRow(0.0, 0.0, 1.0, 1.0, 0.5, 100.0),
        SweepRow(0.3, 0.5, 1.0, 1.0, 0.4, 150.0),
    ]
    plot_sweep(rows, tmp_path / "plots" / "sweep.png")
    assert (tmp_path / "plots" / "sweep.png").read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


@pytest.mark.parametrize(
    "kwargs",
    [
        {"num_scenes": 0},
        {"nms_threshold": 1.5},
        {"iou_match": 0.0},
        {"sweep_thresholds": (-0.1,)},
        {"workers": 0},
    ],
)
def test_eval_config_validation(kwargs):
    with pytest.raises(ValueError):
        EvalConfig(**kwargs)


def test_read_sweep_csv(tmp_path):
    rows = [
        SweepRow(0.0, 0.0, 0.4, 1.0, 0.5, 100.0),
        SweepRow(0.25, 0.5, 0.9, 0.95, 0.45, 180.5),
    ]
    write_sweep_csv(rows, tmp_path / "sweep.csv")
    assert read_sweep_csv(tmp_path / "sweep.csv") == rows

    (tmp_path / "bad.csv").write_text("threshold,mAP\n0.0,0.5\n")
    with pytest.raises(ValueError):
        read_sweep_csv(tmp_path / "bad.csv")


def _row(threshold, skip, recall, mAP):
    return SweepRow(threshold, skip, 0.5, recall, mAP, 100.0)


def test_operating_point_picks_highest_passing_threshold():
    rows = [
        _row(0.0, 0.0, 1.0, 0.800),
        _row(0.1, 0.45, 1.0, 0.800),
        _row(0.2, 0.60, 0.96, 0.792),
        _row(0.3, 0.70, 0.90, 0.790),
        _row(0.5, 0.90, 0.99, 0.700),
    ]
    assert find_operating_point(rows).threshold == 0.2


@pytest.mark.parametrize(
    "row",
    [
        _row(0.2, 0.39, 1.0, 0.80),
        _row(0.2, 0.60, 0.94, 0.80),
        _row(0.2, 0.60, 1.0, 0.785),
    ],
)
def test_operating_point_missing(row):
    assert find_operating_point([_row(0.0, 0.0, 1.0, 0.80), row]) is None


def test_operating_point_needs_reference():
    with pytest.raises(ValueError):
        find_operating_point([_row(0.2, 0.6, 1.0, 0.8)])
