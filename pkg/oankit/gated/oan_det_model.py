from typing import Dict
from typing import List
from typing import Sequence

import numpy as np
import torch
from typeguard import check_argument_types

from oankit.detector.head import DetHead
from oankit.detector.head import DetOutputs
from oankit.detector.head import DetectorConfig
from oankit.detector.loss import det_loss
from oankit.detector.loss import total_loss
from oankit.gated.abs_gated_model import AbsGatedModel
from oankit.layers.backbone import BackboneConfig
from oankit.layers.backbone import ToyBackbone
from oankit.oan.assign import assign_center
from oankit.oan.assign import assign_iof
from oankit.oan.head import ActivationMap
from oankit.oan.head import OANConfig
from oankit.oan.head import OANHead
from oankit.oan.loss import oan_loss
from oankit.synth.scene import GroundTruthBox


def to_image_tensor(rasters: Sequence[np.ndarray]) -> torch.Tensor:
    """uint8 (P, P) rasters -> float32 (N, 1, P, P) in [0, 1]"""
    batch = np.stack([np.asarray(r, dtype=np.float32) for r in rasters])
    return torch.from_numpy(batch / 255.0).unsqueeze(1)


class OANDetModel(AbsGatedModel):
    """Toy backbone with an objectness head and a one-stage detection head.

    The loss is ``L_box + L_class + lam * L_OAN``.
    """

    def __init__(
        self,
        patch_size: int,
        num_classes: int,
        backbone_conf: BackboneConfig = BackboneConfig(),
        oan_conf: OANConfig = OANConfig(),
        det_conf: DetectorConfig = DetectorConfig(),
        lam: float = 4.0,
    ):
        assert check_argument_types()
        super().__init__()
        if lam < 0:
            raise ValueError(f"lam must be >= 0, got {lam}")
        self.patch_size = patch_size
        self.num_classes = num_classes
        self.backbone_conf = backbone_conf
        self.oan_conf = oan_conf
        self.det_conf = det_conf
        self.lam = lam
        self.oan_stage = backbone_conf.stage_index(backbone_conf.oan_tap)
        self.det_stage = backbone_conf.stage_index(backbone_conf.det_tap)
        det_grid = det_conf.grid_size or oan_conf.grid_size

        self.backbone = ToyBackbone(backbone_conf)
        self.oan = OANHead(
            in_channels=backbone_conf.stage_out_channels(self.oan_stage),
            tap_extent=backbone_conf.stage_extent(patch_size, self.oan_stage),
            grid_size=oan_conf.grid_size,
            patch_size=patch_size,
            mid_channels=oan_conf.mid_channels,
            hidden_channels=oan_conf.hidden_channels,
            bias_init=oan_conf.bias_init,
        )
        self.detector = DetHead(
            in_channels=backbone_conf.stage_out_channels(self.det_stage),
            tap_extent=backbone_conf.stage_extent(patch_size, self.det_stage),
            grid_size=det_grid,
            num_classes=num_classes,
            channels=det_conf.channels,
            prior_prob=det_conf.prior_prob,
        )

    def assign(self, boxes: Sequence[GroundTruthBox]):
        if self.oan_conf.assign == "iof":
            return assign_iof(
                boxes,
                self.patch_size,
                self.oan_conf.grid_size,
                self.oan_conf.iof_hi,
                self.oan_conf.iof_lo,
            )
        return assign_center(boxes, self.patch_size, self.oan_conf.grid_size)

    def features(self, image: torch.Tensor) -> List[torch.Tensor]:
        return self.backbone(image, upto=self.oan_stage)

    def activation(self, features: List[torch.Tensor]) -> ActivationMap:
        return self.oan(features[self.oan_stage])

    def detect(self, image: torch.Tensor, features: List[torch.Tensor]) -> DetOutputs:
        features = self.backbone.extend(image, features, upto=self.det_stage)
        return self.detector(features[self.det_stage])

    def forward(
        self, image: torch.Tensor, boxes: Sequence[Sequence[GroundTruthBox]]
    ) -> Dict[str, object]:
        """Joint loss of a batch of patches.

        Args:
            image: (N, 1, P, P) patches scaled to [0, 1]
            boxes: patch-coordinate boxes of each patch
        """
        feats = self.backbone(image, upto=max(self.oan_stage, self.det_stage))
        amap = self.activation(feats)
        outputs = self.detector(feats[self.det_stage])

        labels = [self.assign(b) for b in boxes]
        l_oan = oan_loss(amap, labels, self.oan_conf.alpha, self.oan_conf.gamma)
        l_class, l_box = det_loss(
            outputs,
            boxes,
            self.patch_size,
            self.det_conf.alpha,
            self.det_conf.gamma,
            self.det_conf.box_beta,
        )
        loss = total_loss(l_class, l_box, l_oan, self.lam)

        stats = dict(
            loss=loss.detach(),
            l_class=l_class.detach(),
            l_box=l_box.detach(),
            l_oan=l_oan.detach(),
            max_objectness=amap.probs.detach().max(),
        )
        weight = torch.tensor(float(image.size(0)))
        return dict(loss=loss, stats=stats, weight=weight, activation=amap)
