#!/usr/bin/env python3
"""Gated detection on large synthetic scenes: synth | train | calibrate | infer |
bench | sweep."""

import argparse
import copy
import json
import logging
from pathlib import Path
import sys
from typing import List
from typing import Optional
from typing import Sequence

import yaml

from oankit.evaluation.bench import GatedPipeline
from oankit.evaluation.bench import bench
from oankit.evaluation.bench import plot_sweep
from oankit.evaluation.bench import sweep
from oankit.evaluation.bench import write_sweep_csv
from oankit.fileio.checkpoint import save_checkpoint
from oankit.fileio.pgm import read_pgm
from oankit.fileio.scene_dataset import read_dataset
from oankit.fileio.scene_dataset import read_scene
from oankit.fileio.scene_dataset import write_dataset
from oankit.oan.threshold import calibrate_threshold
from oankit.oan.threshold import load_stats
from oankit.oan.threshold import save_stats
from oankit.synth.scene import AnnotatedScene
from oankit.synth.scene import generate_scenes
from oankit.tasks.oan import OANTask
from oankit.tasks.oan import RunConfig
from oankit.torch_utils.model_summary import count_parameters_by_part
from oankit.torch_utils.model_summary import model_summary
from oankit.torch_utils.set_all_random_seed import set_all_random_seed
from oankit.train.dataset import PatchDataset
from oankit.train.trainer import Trainer
from oankit.utils import config_argparse
from oankit.utils.cli_utils import EXIT_OK
from oankit.utils.cli_utils import get_commandline_args
from oankit.utils.cli_utils import run_with_exit_code
from oankit.utils.errors import FileFormatError
from oankit.utils.nested_dict_action import deep_update
from oankit.utils.run_summary import dump_json
from oankit.utils.run_summary import write_summary
from oankit.utils.types import float_or_none
from oankit.utils.types import str2float_list
from oankit.utils.types import str_or_none
from oankit.utils.yaml_no_alias_safe_dump import yaml_no_alias_safe_dump

CONFIG_NAME = "config.yaml"
SUMMARY_NAME = "summary.json"
MODEL_NAME = "model.oanckpt"
STATS_NAME = "threshold_stats.json"
THRESHOLD_NAME = "threshold.json"


def _add_common(parser: argparse.ArgumentParser, workers: bool = False):
    # Note: Use "_" instead of "-" as separator, as in the yaml keys.
    parser.add_argument(
        "--log_level",
        type=lambda x: x.upper(),
        default="INFO",
        choices=("CRITICAL", "ERROR", "WARNING", "INFO", "DEBUG", "NOTSET"),
        help="The verbose level of logging",
    )
    parser.add_argument(
        "--seed", type=int, default=None, help="Override the seed of the run config"
    )
    parser.add_argument("--out", type=str, required=True, help="Output directory")
    parser.add_argument(
        "--print_config",
        action="store_true",
        help="Print the resolved config and exit",
    )
    if workers:
        parser.add_argument(
            "--workers",
            type=int,
            default=None,
            help="Threads for patch inference (1 gives the comparable numbers)",
        )


def _add_model_args(parser: argparse.ArgumentParser):
    parser.add_argument(
        "--train_dir",
        type=str,
        required=True,
        help=f"Output directory of the train command ({CONFIG_NAME}, {MODEL_NAME})",
    )
    parser.add_argument(
        "--threshold",
        type=float_or_none,
        default=None,
        help="Activation threshold T; defaults to the one in --threshold_file",
    )
    parser.add_argument(
        "--threshold_file",
        type=str_or_none,
        default=None,
        help=f"Calibration JSON; defaults to <train_dir>/{THRESHOLD_NAME}",
    )
    parser.add_argument(
        "--no_gate", action="store_true", help="Run every patch through the detector"
    )


def get_parser() -> argparse.ArgumentParser:
    """Get argument parser."""
    parser = argparse.ArgumentParser(
        description="Objectness-gated detection on large images",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    subparsers = parser.add_subparsers(
        dest="command", parser_class=config_argparse.ArgumentParser
    )
    subparsers.required = True

    p = subparsers.add_parser("synth", help="Write a synthetic scene dataset")
    _add_common(p)
    p.add_argument("--num_scenes", type=int, default=None)
    p.add_argument(
        "--split",
        choices=("train", "eval"),
        default="train",
        help="eval draws scenes from seeds disjoint from the training ones",
    )

    p = subparsers.add_parser("train", help="Train backbone, OAN and detector")
    _add_common(p)
    p.add_argument(
        "--dataset",
        type=str_or_none,
        default=None,
        help="Directory written by synth; generated on the fly if omitted",
    )

    p = subparsers.add_parser("calibrate", help="Activation threshold from stats")
    _add_common(p)
    p.add_argument("--stats", type=str, required=True, help=f"{STATS_NAME} of a run")
    p.add_argument("--k", type=float_or_none, default=None, help="Scaling factor k")
    p.add_argument(
        "--checkpoint", type=str_or_none, default=None, help="Recorded in the summary"
    )

    p = subparsers.add_parser("infer", help="Gated detection on one scene")
    _add_common(p)
    _add_model_args(p)
    p.add_argument("--image", type=str, required=True, help="PGM raster")
    p.add_argument(
        "--annotation",
        type=str_or_none,
        default=None,
        help="Ground truth JSON, enables the gate report",
    )

    for name, help in (
        ("bench", "Time the pipeline at one threshold"),
        ("sweep", "Time the pipeline over a threshold grid"),
    ):
        p = subparsers.add_parser(name, help=help)
        _add_common(p, workers=True)
        _add_model_args(p)
        p.add_argument(
            "--dataset",
            type=str_or_none,
            default=None,
            help="Directory written by synth; eval scenes generated if omitted",
        )
    p.add_argument(
        "--thresholds",
        type=str2float_list,
        default=None,
        help="Comma separated grid, e.g. 0,0.1,0.2",
    )
    return parser


def _resolve(args, base: Optional[dict] = None) -> RunConfig:
    if getattr(args, "config_error", None) is not None:
        raise args.config_error
    config_dict = args.config_dict
    if base is not None and isinstance(config_dict, dict):
        config_dict = deep_update(copy.deepcopy(base), config_dict)
    return OANTask.resolve_config(config_dict, args.set, args.seed)


def _prepare_out(args, config: RunConfig) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with (out / CONFIG_NAME).open("w", encoding="utf-8") as f:
        yaml_no_alias_safe_dump(OANTask.config_to_dict(config), f, sort_keys=False)
    return out


def _summary(args, out: Path, config: RunConfig, results: dict, checkpoint=None):
    write_summary(
        out / SUMMARY_NAME,
        command=args.command,
        config_dict=OANTask.config_to_dict(config),
        seed=config.seed,
        results=results,
        checkpoint=checkpoint,
    )


def cmd_synth(args) -> RunConfig:
    config = _resolve(args)
    if args.print_config:
        return config
    out = _prepare_out(args, config)
    if args.split == "train":
        spec, count = config.scene, config.train.num_scenes
    else:
        spec, count = OANTask.eval_scene_spec(config), config.eval.num_scenes
    if args.num_scenes is not None:
        count = args.num_scenes
    scenes = generate_scenes(spec, count)
    manifest = write_dataset(scenes, out)
    _summary(
        args,
        out,
        config,
        dict(
            split=args.split,
            num_scenes=len(manifest),
            num_objects=sum(len(s.boxes) for s in scenes),
        ),
    )
    return config


def cmd_train(args) -> RunConfig:
    config = _resolve(args)
    if args.print_config:
        return config
    out = _prepare_out(args, config)
    set_all_random_seed(config.seed, deterministic=True)

    if args.dataset is not None:
        scenes = read_dataset(args.dataset, config.scene.num_classes)
    else:
        scenes = generate_scenes(config.scene, config.train.num_scenes)
    dataset = PatchDataset(scenes, config.tiling.patch_size, config.tiling.stride)
    logging.info(
        f"{len(scenes)} scenes, {len(dataset)} patches, "
        f"{len(dataset) - dataset.num_valid} without objects"
    )

    model = OANTask.build_model(config)
    logging.info(model_summary(model))
    optimizer, scheduler = OANTask.build_optimizer(config, model)
    options = Trainer.build_options(
        config.train, config.seed, out, config.oan.window_maps
    )
    reporter, stats = Trainer.run(model, optimizer, scheduler, dataset, options)

    checksum = save_checkpoint(out / MODEL_NAME, model.state_dict())
    save_stats(out / STATS_NAME, stats)
    calibration = calibrate_threshold(stats, config.oan.k)
    dump_json(out / THRESHOLD_NAME, calibration.to_dict())
    logging.info(f"Calibrated activation threshold: {calibration.threshold:.6f}")

    last = {
        k: reporter.get_value("train", k)
        for k in ("loss", "l_class", "l_box", "l_oan")
    }
    _summary(
        args,
        out,
        config,
        dict(
            num_patches=len(dataset),
            num_valid_patches=dataset.num_valid,
            parameters=count_parameters_by_part(model),
            final_epoch=last,
            checkpoint_checksum=f"{checksum:016x}",
            calibration=calibration.to_dict(),
        ),
        checkpoint=out / MODEL_NAME,
    )
    return config


def cmd_calibrate(args) -> RunConfig:
    config = _resolve(args)
    if args.print_config:
        return config
    out = _prepare_out(args, config)
    stats = load_stats(args.stats)
    k = config.oan.k if args.k is None else args.k
    calibration = calibrate_threshold(stats, k)
    dump_json(out / THRESHOLD_NAME, calibration.to_dict())
    logging.info(f"T = (m + v)^2 / k = {calibration.threshold:.6f}")
    _summary(args, out, config, calibration.to_dict(), checkpoint=args.checkpoint)
    return config


def _load_threshold(args) -> Optional[float]:
    if args.no_gate:
        return None
    if args.threshold is not None:
        return args.threshold
    path = Path(args.threshold_file or Path(args.train_dir) / THRESHOLD_NAME)
    with path.open("r", encoding="utf-8") as f:
        try:
            return float(json.load(f)["threshold"])
        except (ValueError, KeyError, TypeError) as e:
            raise FileFormatError(f"{path}: invalid threshold file: {e}")


def _load_pipeline(args):
    train_dir = Path(args.train_dir)
    config_file = train_dir / CONFIG_NAME
    with config_file.open("r", encoding="utf-8") as f:
        try:
            base = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            raise FileFormatError(f"{config_file}: {e}")
    if not isinstance(base, dict):
        raise FileFormatError(f"{config_file}: expected a mapping")
    config = _resolve(args, base)
    if args.print_config:
        return config, None
    model = OANTask.build_model_from_checkpoint(config, train_dir / MODEL_NAME)
    workers = getattr(args, "workers", None) or config.eval.workers
    pipeline = GatedPipeline(
        model,
        patch_size=config.tiling.patch_size,
        stride=config.tiling.stride,
        keep_threshold=config.train.score_keep_threshold,
        nms_threshold=config.eval.nms_threshold,
        workers=workers,
    )
    return config, pipeline


def _eval_scenes(args, config: RunConfig) -> List[AnnotatedScene]:
    if args.dataset is not None:
        return read_dataset(args.dataset, config.scene.num_classes)
    return generate_scenes(OANTask.eval_scene_spec(config), config.eval.num_scenes)


def cmd_infer(args) -> RunConfig:
    config, pipeline = _load_pipeline(args)
    if pipeline is None:
        return config
    threshold = _load_threshold(args)
    out = _prepare_out(args, config)
    set_all_random_seed(config.seed, deterministic=True)
    if args.annotation is not None:
        scene = read_scene(args.image, args.annotation, config.scene.num_classes)
    else:
        scene = AnnotatedScene(raster=read_pgm(args.image), boxes=[])

    result = pipeline.run_scene(scene, threshold)
    dump_json(out / "detections.json", [d.to_dict() for d in result.detections])
    report = result.report
    logging.info(
        f"{len(result.detections)} detections, skip_ratio={report.skip_ratio:.3f}"
    )
    _summary(
        args,
        out,
        config,
        dict(
            threshold=threshold,
            num_detections=len(result.detections),
            gate_report=report.to_dict(),
            empty_patch_dets=result.empty_patch_dets,
        ),
        checkpoint=Path(args.train_dir) / MODEL_NAME,
    )
    return config


def cmd_bench(args) -> RunConfig:
    config, pipeline = _load_pipeline(args)
    if pipeline is None:
        return config
    threshold = _load_threshold(args)
    out = _prepare_out(args, config)
    set_all_random_seed(config.seed, deterministic=True)
    scenes = _eval_scenes(args, config)
    row, _ = bench(pipeline, scenes, threshold, config.eval.iou_match)
    dump_json(out / "bench.json", row.to_dict())
    _summary(
        args, out, config, row.to_dict(), checkpoint=Path(args.train_dir) / MODEL_NAME
    )
    return config


def sweep_grid(
    thresholds: Sequence[float], calibrated: Optional[float]
) -> List[float]:
    """Sorted, deduplicated grid with the calibrated threshold included.

    Examples:
        >>> sweep_grid([0.0, 1.0], 0.3)
        [0.0, 0.3, 1.0]
    """
    grid = set(float(t) for t in thresholds)
    if calibrated is not None:
        grid.add(float(calibrated))
    return sorted(grid)


def cmd_sweep(args) -> RunConfig:
    config, pipeline = _load_pipeline(args)
    if pipeline is None:
        return config
    args.no_gate = False
    try:
        calibrated = _load_threshold(args)
    except FileNotFoundError:
        logging.warning("No calibrated threshold found; sweeping the grid only")
        calibrated = None
    grid = config.eval.sweep_thresholds
    if args.thresholds is not None:
        grid = args.thresholds
    thresholds = sweep_grid(grid, calibrated)
    out = _prepare_out(args, config)
    set_all_random_seed(config.seed, deterministic=True)
    scenes = _eval_scenes(args, config)

    rows = sweep(pipeline, scenes, thresholds, config.eval.iou_match)
    write_sweep_csv(rows, out / "sweep.csv")
    plot_sweep(rows, out / "sweep.png")
    _summary(
        args,
        out,
        config,
        dict(calibrated_threshold=calibrated, rows=[r.to_dict() for r in rows]),
        checkpoint=Path(args.train_dir) / MODEL_NAME,
    )
    return config


COMMANDS = dict(
    synth=cmd_synth,
    train=cmd_train,
    calibrate=cmd_calibrate,
    infer=cmd_infer,
    bench=cmd_bench,
    sweep=cmd_sweep,
)


def run(args: argparse.Namespace) -> RunConfig:
    config = COMMANDS[args.command](args)
    if args.print_config:
        yaml_no_alias_safe_dump(
            OANTask.config_to_dict(config), sys.stdout, sort_keys=False
        )
    return config


def main(cmd=None) -> int:
    """Run a command and return its exit code."""
    print(get_commandline_args(), file=sys.stderr)
    parser = get_parser()
    args = parser.parse_args(cmd)
    logging.basicConfig(
        level=args.log_level,
        format="%(asctime)s (%(module)s:%(lineno)d) %(levelname)s: %(message)s",
    )
    code = run_with_exit_code(run, args)
    if code == EXIT_OK:
        logging.info(f"{args.command} finished")
    return code


if __name__ == "__main__":
    sys.exit(main())
