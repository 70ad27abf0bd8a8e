"""Builders that turn a validated RunConfig into models, optimizers and data."""

import copy
import dataclasses
import logging
from pathlib import Path
from typing import Any
from typing import Dict
from typing import Mapping
from typing import Optional
from typing import Tuple
from typing import Union

import torch
from typeguard import check_argument_types

from oankit.detector.head import DetectorConfig
from oankit.evaluation.bench import EvalConfig
from oankit.fileio.checkpoint import load_checkpoint
from oankit.gated.oan_det_model import OANDetModel
from oankit.layers.backbone import BackboneConfig
from oankit.oan.head import OANConfig
from oankit.oan.head import head_geometry
from oankit.optimizers.sgd import SGD
from oankit.optimizers.sgd import build_scheduler
from oankit.synth.scene import SceneSpec
from oankit.tiling.tiler import TilingConfig
from oankit.train.trainer import TrainConfig
from oankit.utils.build_dataclass import build_dataclass
from oankit.utils.errors import ConfigError
from oankit.utils.nested_dict_action import deep_update

# eval scenes are drawn from seeds far from the training ones
EVAL_SEED_OFFSET = 1_000_000


@dataclasses.dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    scene: SceneSpec = SceneSpec()
    tiling: TilingConfig = TilingConfig()
    backbone: BackboneConfig = BackboneConfig()
    oan: OANConfig = OANConfig()
    detector: DetectorConfig = DetectorConfig()
    train: TrainConfig = TrainConfig()
    eval: EvalConfig = EvalConfig()

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed: must be an unsigned 64-bit integer, {self.seed}")
        try:
            self.scene.validate(self.tiling.patch_size)
        except ValueError as e:
            raise ValueError(f"scene.{e}")
        p = self.tiling.patch_size
        det_grid = self.detector.grid_size or self.oan.grid_size
        for name, tap, grid in (
            ("backbone.oan_tap", self.backbone.oan_tap, self.oan.grid_size),
            ("backbone.det_tap", self.backbone.det_tap, det_grid),
        ):
            extent = self.backbone.stage_extent(p, tap)
            if extent * 2 ** (self.backbone.stage_index(tap) + 1) != p:
                raise ValueError(
                    f"tiling.patch_size: {p} is not divisible by the stride of "
                    f"the stage tapped by {name}"
                )
            try:
                head_geometry(extent, grid)
            except ValueError as e:
                raise ValueError(f"{name}: {e}")


class OANTask:
    @classmethod
    def resolve_config(
        cls,
        config_dict: Mapping[str, Any],
        overrides: Optional[Mapping[str, Any]] = None,
        seed: Optional[int] = None,
    ) -> RunConfig:
        """Merge file, ``--set`` overrides and ``--seed`` and validate once.

        Raises:
            ConfigError: listing every violation.
        """
        if not isinstance(config_dict, Mapping):
            raise ConfigError([f"<root>: must be a mapping, got {type(config_dict)}"])
        data = copy.deepcopy(dict(config_dict))
        deep_update(data, dict(overrides or {}))
        if seed is not None:
            data["seed"] = seed
        config, violations = build_dataclass(RunConfig, data)
        if violations:
            raise ConfigError(violations)
        return config

    @classmethod
    def config_to_dict(cls, config: RunConfig) -> Dict[str, Any]:
        return dataclasses.asdict(config)

    @classmethod
    def build_model(cls, config: RunConfig) -> OANDetModel:
        assert check_argument_types()
        model = OANDetModel(
            patch_size=config.tiling.patch_size,
            num_classes=config.scene.num_classes,
            backbone_conf=config.backbone,
            oan_conf=config.oan,
            det_conf=config.detector,
            lam=config.train.lam,
        )
        return model

    @classmethod
    def build_optimizer(
        cls, config: RunConfig, model: torch.nn.Module
    ) -> Tuple[SGD, torch.optim.lr_scheduler.MultiStepLR]:
        optimizer = SGD(model.parameters(), config.train.sgd)
        return optimizer, build_scheduler(optimizer)

    @classmethod
    def eval_scene_spec(cls, config: RunConfig) -> SceneSpec:
        seed = config.scene.seed + EVAL_SEED_OFFSET
        return dataclasses.replace(config.scene, seed=seed)

    @classmethod
    def build_model_from_checkpoint(
        cls, config: RunConfig, model_file: Union[Path, str]
    ) -> OANDetModel:
        """Rebuild a trained model in eval mode from its checkpoint."""
        assert check_argument_types()
        model = cls.build_model(config)
        logging.info(f"Load model state dict from: {model_file}")
        model.load_state_dict(load_checkpoint(model_file))
        model.eval()
        return model
