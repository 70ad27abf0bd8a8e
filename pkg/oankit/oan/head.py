# Objectness activation head.
#
# On the tapped feature map the head applies a 3x3 conv (stride 2 by
# default) with ``mid_channels`` filters, a 1x1 conv with
# ``hidden_channels`` filters and a final 1x1 conv with one filter, giving
# one objectness logit per grid cell.

import dataclasses
from typing import Iterator

import torch
from typeguard import check_argument_types

from oankit.layers.conv import ConvLayer
from oankit.layers.conv import ReLU
from oankit.layers.functional import sigmoid
from oankit.utils.errors import ShapeError


@dataclasses.dataclass
class ActivationMap:
    """Objectness logits/probabilities shaped (..., S, S)."""

    logits: torch.Tensor
    probs: torch.Tensor
    grid_size_px: float

    @property
    def grid_size(self) -> int:
        return int(self.probs.shape[-1])

    @property
    def confidence(self) -> torch.Tensor:
        """max over the grid, one value per map"""
        return self.probs.flatten(start_dim=-2).max(dim=-1).values

    def unbind(self) -> Iterator["ActivationMap"]:
        logits = self.logits.reshape(-1, self.grid_size, self.grid_size)
        probs = self.probs.reshape(-1, self.grid_size, self.grid_size)
        for lg, pr in zip(logits, probs):
            yield ActivationMap(logits=lg, probs=pr, grid_size_px=self.grid_size_px)


def head_geometry(tap_extent: int, grid_size: int):
    """How the head turns a tap of extent E into an S x S map.

    Returns:
        (stride of the 3x3 conv, space-to-depth factor)

    Examples:
        >>> head_geometry(32, 16)  # C5 of a 1024 patch, 16 x 16 grid
        (2, 1)
        >>> head_geometry(8, 8)    # tap already at grid resolution
        (1, 1)
        >>> head_geometry(64, 16)  # earlier stage: conv then reshape
        (2, 2)
    """
    if tap_extent == grid_size:
        return 1, 1
    if tap_extent % (2 * grid_size) == 0:
        factor = tap_extent // (2 * grid_size)
        if factor & (factor - 1) == 0:
            return 2, factor
    raise ShapeError(
        f"cannot map a {tap_extent}x{tap_extent} feature map onto a "
        f"{grid_size}x{grid_size} grid"
    )


class OANHead(torch.nn.Module):
    """Objectness activation network head.

    Args:
        in_channels (int): Channels of the tapped backbone stage.
        tap_extent (int): Spatial extent of the tapped feature map.
        grid_size (int): S, the number of grid cells per side.
        patch_size (int): Patch side in pixels (for ``grid_size_px``).
        mid_channels (int): Filters of the 3x3 conv.
        hidden_channels (int): Filters of the first 1x1 conv.
        bias_init (float): Bias of the final conv; negative so that the
            initial objectness starts low.

    """

    def __init__(
        self,
        in_channels: int,
        tap_extent: int,
        grid_size: int,
        patch_size: int,
        mid_channels: int = 256,
        hidden_channels: int = 512,
        bias_init: float = -2.0,
    ):
        assert check_argument_types()
        super().__init__()
        self.in_channels = in_channels
        self.tap_extent = tap_extent
        self.grid_size = grid_size
        self.patch_size = patch_size
        stride, factor = head_geometry(tap_extent, grid_size)
        self.unshuffle = factor

        self.reduce = ConvLayer(in_channels, mid_channels, 3, stride=stride)
        self.hidden = ConvLayer(mid_channels * factor * factor, hidden_channels, 1)
        self.score = ConvLayer(hidden_channels, 1, 1)
        self.relu = ReLU()
        with torch.no_grad():
            self.score.bias.fill_(bias_init)

    def forward(self, features: torch.Tensor) -> ActivationMap:
        if features.dim() != 4 or tuple(features.shape[1:]) != (
            self.in_channels,
            self.tap_extent,
            self.tap_extent,
        ):
            raise ShapeError(
                f"features={tuple(features.shape)} but the head expects "
                f"(N, {self.in_channels}, {self.tap_extent}, {self.tap_extent})"
            )
        x = self.relu(self.reduce(features))
        if self.unshuffle > 1:
            # (N, C, 2S*f, ...) -> (N, C*f*f, S, S)
            x = torch.nn.functional.pixel_unshuffle(x, self.unshuffle)
        x = self.relu(self.hidden(x))
        logits = self.score(x).squeeze(1)
        return ActivationMap(
            logits=logits,
            probs=sigmoid(logits),
            grid_size_px=self.patch_size / self.grid_size,
        )


@dataclasses.dataclass(frozen=True)
class OANConfig:
    grid_size: int = 8
    mid_channels: int = 256
    hidden_channels: int = 512
    bias_init: float = -2.0
    # label assignment: "center" or "iof"
    assign: str = "center"
    iof_hi: float = 0.5
    iof_lo: float = 0.1
    alpha: float = 0.25
    gamma: float = 2.0
    # threshold calibration; the window counts activation maps (one per
    # training patch), not iterations
    k: float = 4.0
    window_maps: int = 2000

    def __post_init__(self):
        if self.grid_size < 1:
            raise ValueError(f"grid_size: must be >= 1, got {self.grid_size}")
        if self.assign not in ("center", "iof"):
            raise ValueError(f"assign: must be center or iof, got {self.assign}")
        if not self.iof_hi > self.iof_lo:
            raise ValueError(
                f"iof_hi: must exceed iof_lo, got {self.iof_hi} <= {self.iof_lo}"
            )
        if not 0 <= self.alpha <= 1:
            raise ValueError(f"alpha: must be in [0, 1], got {self.alpha}")
        if self.gamma < 0:
            raise ValueError(f"gamma: must be >= 0, got {self.gamma}")
        if not self.k > 0:
            raise ValueError(f"k: must be positive, got {self.k}")
        if self.window_maps < 1:
            raise ValueError(f"window_maps: must be >= 1, got {self.window_maps}")
