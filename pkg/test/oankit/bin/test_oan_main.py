import csv
import json

import pytest
import yaml

from oankit.bin import oan_main
from oankit.bin.oan_main import get_parser
from oankit.bin.oan_main import main
from oankit.bin.oan_main import sweep_grid
from oankit.fileio.checkpoint import checkpoint_checksum
from oankit.oan.threshold import ThresholdStats
from oankit.oan.threshold import save_stats
from oankit.utils.errors import NumericError

TINY = {
    "scene": {
        "width": 64,
        "height": 64,
        "num_clusters": 1,
        "objects_per_cluster": [1, 2],
        "cluster_radius": 8.0,
        "object_sizes": [[4, 6], [4, 6]],
        "num_classes": 2,
    },
    "tiling": {"patch_size": 32, "stride": 26},
    "backbone": {"stage_channels": [4, 8]},
    "oan": {"grid_size": 4, "mid_channels": 8, "hidden_channels": 8},
    "detector": {"channels": 8},
    "train": {"num_scenes": 2, "batch_size": 8, "sgd": {"epochs": 1}},
    "eval": {"num_scenes": 1, "sweep_thresholds": [0.0, 1.0]},
}


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "tiny.yaml"
    with path.open("w") as f:
        yaml.safe_dump(TINY, f)
    return str(path)


def _summary(directory):
    with (directory / "summary.json").open() as f:
        return json.load(f)


def test_get_parser():
    assert isinstance(get_parser(), oan_main.argparse.ArgumentParser)


def test_main_help():
    with pytest.raises(SystemExit):
        main(["--help"])


def test_command_is_required():
    with pytest.raises(SystemExit):
        main([])


def test_sweep_grid():
    assert sweep_grid([1.0, 0.0, 0.5], 0.5) == [0.0, 0.5, 1.0]
    assert sweep_grid([0.2], None) == [0.2]


def test_synth(tmp_path, config_file):
    out = tmp_path / "train_data"
    assert main(["synth", "--config", config_file, "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert len(manifest) == 2
    assert (out / "scene_00001.pgm").exists()
    summary = _summary(out)
    assert summary["command"] == "synth"
    assert summary["results"]["split"] == "train"
    assert yaml.safe_load((out / "config.yaml").read_text())["tiling"]["stride"] == 26

    eval_out = tmp_path / "eval_data"
    cmd = ["synth", "--config", config_file, "--out", str(eval_out)]
    assert main(cmd + ["--split", "eval", "--num_scenes", "3"]) == 0
    assert len(json.loads((eval_out / "manifest.json").read_text())) == 3
    assert (eval_out / "scene_00000.pgm").read_bytes() != (
        out / "scene_00000.pgm"
    ).read_bytes()


def test_print_config(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["synth", "--out", str(out), "--print_config", "--set", "seed=3"]) == 0
    printed = yaml.safe_load(capsys.readouterr().out)
    assert printed["seed"] == 3
    assert printed["tiling"] == {"patch_size": 128, "stride": 104}
    assert not out.exists()


def test_end_to_end(tmp_path, config_file):
    data, run = tmp_path / "data", tmp_path / "run"
    assert main(["synth", "--config", config_file, "--out", str(data)]) == 0
    cmd = ["train", "--config", config_file, "--out", str(run), "--dataset", str(data)]
    assert main(cmd) == 0
    for name in ("model.oanckpt", "threshold_stats.json", "threshold.json"):
        assert (run / name).exists(), name
    results = _summary(run)["results"]
    assert results["num_patches"] == 18
    assert results["checkpoint_checksum"] == "{:016x}".format(
        checkpoint_checksum(run / "model.oanckpt")
    )
    calibrated = json.loads((run / "threshold.json").read_text())
    assert calibrated["window"] == 18
    assert 0 < calibrated["threshold"] < 0.5625

    calib = tmp_path / "calib"
    cmd = ["calibrate", "--out", str(calib), "--stats"]
    assert main(cmd + [str(run / "threshold_stats.json")]) == 0
    recalibrated = json.loads((calib / "threshold.json").read_text())
    assert recalibrated["threshold"] == pytest.approx(calibrated["threshold"], abs=1e-6)

    infer = tmp_path / "infer"
    cmd = [
        "infer",
        "--out",
        str(infer),
        "--train_dir",
        str(run),
        "--image",
        str(data / "scene_00000.pgm"),
        "--annotation",
        str(data / "scene_00000.json"),
    ]
    assert main(cmd) == 0
    assert isinstance(json.loads((infer / "detections.json").read_text()), list)
    results = _summary(infer)["results"]
    assert results["threshold"] == pytest.approx(calibrated["threshold"], abs=1e-6)
    assert results["gate_report"]["total_patches"] == 9

    bench_dir = tmp_path / "bench"
    cmd = ["bench", "--out", str(bench_dir), "--train_dir", str(run), "--no_gate"]
    assert main(cmd) == 0
    row = json.loads((bench_dir / "bench.json").read_text())
    assert row["skip_ratio"] == 0.0
    assert row["gate_recall"] == 1.0

    sweep_dir = tmp_path / "sweep"
    cmd = ["sweep", "--out", str(sweep_dir), "--train_dir", str(run), "--workers", "2"]
    assert main(cmd) == 0
    with (sweep_dir / "sweep.csv").open() as f:
        rows = list(csv.reader(f))
    assert rows[0] == [
        "threshold",
        "skip_ratio",
        "gate_precision",
        "gate_recall",
        "mAP",
        "fps",
    ]
    assert len(rows) == 4
    assert float(rows[3][0]) == 1.0 and float(rows[3][1]) == 1.0
    assert (sweep_dir / "sweep.png").exists()
    summary = _summary(sweep_dir)
    assert summary["results"]["calibrated_threshold"] == pytest.approx(
        calibrated["threshold"], abs=1e-6
    )


def test_training_is_reproducible(tmp_path, config_file):
    checksums = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["train", "--config", config_file, "--out", str(out)]) == 0
        checksums.append(_summary(out)["results"]["checkpoint_checksum"])
    assert checksums[0] == checksums[1]
    assert (tmp_path / "a" / "model.oanckpt").read_bytes() == (
        tmp_path / "b" / "model.oanckpt"
    ).read_bytes()


def test_calibrate_constant_maps(tmp_path):
    stats = ThresholdStats()
    for _ in range(10):
        stats.push(0.5, 0.0)
    save_stats(tmp_path / "stats.json", stats)
    out = tmp_path / "out"
    cmd = ["calibrate", "--out", str(out), "--stats", str(tmp_path / "stats.json")]
    assert main(cmd) == 0
    assert json.loads((out / "threshold.json").read_text())["threshold"] == 0.0625


def test_calibrate_empty_stats(tmp_path):
    save_stats(tmp_path / "stats.json", ThresholdStats())
    cmd = ["calibrate", "--out", str(tmp_path / "out"), "--stats"]
    assert main(cmd + [str(tmp_path / "stats.json")]) == 5


def test_missing_input_file(tmp_path):
    cmd = ["calibrate", "--out", str(tmp_path / "out"), "--stats"]
    assert main(cmd + [str(tmp_path / "missing.json")]) == 2
    cmd = ["infer", "--out", str(tmp_path / "out"), "--train_dir", str(tmp_path)]
    assert main(cmd + ["--image", "x.pgm"]) == 2


def test_config_violations(tmp_path):
    out = str(tmp_path / "out")
    assert main(["synth", "--out", out, "--set", "tiling.stride=0"]) == 3
    assert main(["synth", "--out", out, "--set", "oan.grid_size=3"]) == 3
    (tmp_path / "list.yaml").write_text("- 1\n")
    assert main(["synth", "--out", out, "--config", str(tmp_path / "list.yaml")]) == 3


def test_malformed_config_file(tmp_path):
    broken = tmp_path / "broken.yaml"
    broken.write_text("scene: {width: 64\n")
    out = str(tmp_path / "out")
    assert main(["synth", "--out", out, "--config", str(broken)]) == 3
    assert not (tmp_path / "out" / "summary.json").exists()


def test_train_rejects_unknown_class_id(tmp_path, config_file):
    data = tmp_path / "data"
    assert main(["synth", "--config", config_file, "--out", str(data)]) == 0
    box = {"x_min": 2, "y_min": 2, "x_max": 8, "y_max": 8, "class_id": 7}
    (data / "scene_00000.json").write_text(
        json.dumps({"width": 64, "height": 64, "boxes": [box]})
    )
    cmd = ["train", "--config", config_file, "--dataset", str(data)]
    assert main(cmd + ["--out", str(tmp_path / "exp")]) == 2
    assert not (tmp_path / "exp" / "model.oanckpt").exists()


def test_missing_config_file(tmp_path):
    with pytest.raises(SystemExit) as e:
        main(["synth", "--out", str(tmp_path), "--config", str(tmp_path / "x.yaml")])
    assert e.value.code == 2


def test_numeric_failure(tmp_path, monkeypatch):
    def diverge(args):
        raise NumericError("non-finite loss nan at epoch 1, iteration 1")

    monkeypatch.setitem(oan_main.COMMANDS, "train", diverge)
    assert main(["train", "--out", str(tmp_path)]) == 4
