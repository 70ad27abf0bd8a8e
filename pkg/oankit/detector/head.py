"""Toy one-stage detection head sharing the backbone with the OAN head."""

import dataclasses
import math
from typing import Optional

import torch
from typeguard import check_argument_types

from oankit.layers.conv import ConvLayer
from oankit.layers.conv import ReLU
from oankit.oan.head import head_geometry
from oankit.utils.errors import ShapeError


@dataclasses.dataclass
class DetOutputs:
    class_logits: torch.Tensor  # (N, C, S_d, S_d)
    box_deltas: torch.Tensor  # (N, 4, S_d, S_d): dx, dy in cell units, log w, log h

    @property
    def grid_size(self) -> int:
        return int(self.class_logits.shape[-1])

    @property
    def num_classes(self) -> int:
        return int(self.class_logits.shape[1])

    def __getitem__(self, idx) -> "DetOutputs":
        """Select patches along the batch axis (keeps the batch dimension)."""
        if isinstance(idx, int):
            idx = slice(idx, idx + 1)
        return DetOutputs(self.class_logits[idx], self.box_deltas[idx])


class DetHead(torch.nn.Module):
    """Classification and box branches, each a 3x3 conv then a 1x1 conv.

    The 3x3 conv runs at stride 1 when the tap is already S_d x S_d and at
    stride 2 (plus space-to-depth for earlier taps) otherwise, in the same
    way as the objectness head.
    """

    def __init__(
        self,
        in_channels: int,
        tap_extent: int,
        grid_size: int,
        num_classes: int,
        channels: int = 64,
        prior_prob: float = 0.01,
    ):
        assert check_argument_types()
        super().__init__()
        if num_classes < 1:
            raise ValueError(f"num_classes must be >= 1, got {num_classes}")
        self.in_channels = in_channels
        self.tap_extent = tap_extent
        self.grid_size = grid_size
        self.num_classes = num_classes
        stride, self.unshuffle = head_geometry(tap_extent, grid_size)
        unshuffled = channels * self.unshuffle**2

        self.cls_conv = ConvLayer(in_channels, channels, 3, stride=stride)
        self.cls_out = ConvLayer(unshuffled, num_classes, 1)
        self.box_conv = ConvLayer(in_channels, channels, 3, stride=stride)
        self.box_out = ConvLayer(unshuffled, 4, 1)
        self.relu = ReLU()
        with torch.no_grad():
            self.cls_out.bias.fill_(-math.log((1 - prior_prob) / prior_prob))

    def _branch(self, conv, out, features):
        x = self.relu(conv(features))
        if self.unshuffle > 1:
            x = torch.nn.functional.pixel_unshuffle(x, self.unshuffle)
        return out(x)

    def forward(self, features: torch.Tensor) -> DetOutputs:
        if features.dim() != 4 or tuple(features.shape[1:]) != (
            self.in_channels,
            self.tap_extent,
            self.tap_extent,
        ):
            raise ShapeError(
                f"features={tuple(features.shape)} but the detector expects "
                f"(N, {self.in_channels}, {self.tap_extent}, {self.tap_extent})"
            )
        return DetOutputs(
            class_logits=self._branch(self.cls_conv, self.cls_out, features),
            box_deltas=self._branch(self.box_conv, self.box_out, features),
        )


@dataclasses.dataclass(frozen=True)
class DetectorConfig:
    # None: same grid as the objectness head
    grid_size: Optional[int] = None
    channels: int = 128
    prior_prob: float = 0.01
    alpha: float = 0.25
    gamma: float = 2.0
    box_beta: float = 1.0

    def __post_init__(self):
        if self.grid_size is not None and self.grid_size < 1:
            raise ValueError(f"grid_size: must be >= 1, got {self.grid_size}")
        if self.channels < 1:
            raise ValueError(f"channels: must be >= 1, got {self.channels}")
        if not 0 < self.prior_prob < 1:
            raise ValueError(f"prior_prob: must be in (0, 1), got {self.prior_prob}")
        if self.box_beta <= 0:
            raise ValueError(f"box_beta: must be positive, got {self.box_beta}")
