"""Toy convolutional backbone shared by the objectness and detection heads."""

import dataclasses
from typing import List
from typing import Tuple

import torch
from typeguard import check_argument_types

from oankit.layers.conv import ConvLayer
from oankit.layers.conv import ReLU


@dataclasses.dataclass(frozen=True)
class BackboneConfig:
    stage_channels: Tuple[int, ...] = (16, 32, 64, 128)
    in_channels: int = 1
    # stage indices (python style, -1 = last) feeding each head;
    # a skipped patch stops after the oan_tap stage
    oan_tap: int = -2
    det_tap: int = -1

    def __post_init__(self):
        if len(self.stage_channels) < 2:
            raise ValueError(
                f"stage_channels: need >= 2 stages, got {self.stage_channels}"
            )
        if any(c < 1 for c in self.stage_channels):
            raise ValueError(f"stage_channels: must be positive, {self.stage_channels}")
        n = len(self.stage_channels)
        for name in ("oan_tap", "det_tap"):
            tap = getattr(self, name)
            if not -n <= tap < n:
                raise ValueError(f"{name}: {tap} out of range for {n} stages")

    def stage_index(self, tap: int) -> int:
        return tap % len(self.stage_channels)

    def stage_extent(self, patch_size: int, tap: int) -> int:
        """Spatial extent of a stage output; every stage halves it."""
        return patch_size // 2 ** (self.stage_index(tap) + 1)

    def stage_out_channels(self, tap: int) -> int:
        return self.stage_channels[self.stage_index(tap)]


class ToyBackbone(torch.nn.Module):
    """Stages of (3x3 stride-2 conv, ReLU, 3x3 conv, ReLU).

    Examples:
        >>> net = ToyBackbone(BackboneConfig())
        >>> feats = net(torch.zeros(1, 1, 128, 128))
        >>> [tuple(f.shape[1:]) for f in feats]
        [(16, 64, 64), (32, 32, 32), (64, 16, 16), (128, 8, 8)]
    """

    def __init__(self, config: BackboneConfig):
        assert check_argument_types()
        super().__init__()
        self.config = config
        stages = []
        in_ch = config.in_channels
        for out_ch in config.stage_channels:
            stages.append(
                torch.nn.Sequential(
                    ConvLayer(in_ch, out_ch, 3, stride=2),
                    ReLU(),
                    ConvLayer(out_ch, out_ch, 3, stride=1),
                    ReLU(),
                )
            )
            in_ch = out_ch
        self.stages = torch.nn.ModuleList(stages)

    def forward(self, x: torch.Tensor, upto: int = None) -> List[torch.Tensor]:
        """Return the outputs of every stage (or of the first ``upto + 1``)."""
        return self.extend(x, [], upto)

    def extend(
        self, x: torch.Tensor, outs: List[torch.Tensor], upto: int = None
    ) -> List[torch.Tensor]:
        """Continue a partial forward: ``outs`` holds the stages already run.

        ``x`` is the network input; it is only used when ``outs`` is empty.
        """
        last = len(self.stages) - 1 if upto is None else upto % len(self.stages)
        outs = list(outs)
        if outs:
            x = outs[-1]
        for idx in range(len(outs), last + 1):
            x = self.stages[idx](x)
            outs.append(x)
        return outs
