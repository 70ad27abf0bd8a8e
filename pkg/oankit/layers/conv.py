import math

import torch
from typeguard import check_argument_types

from oankit.layers.functional import conv2d
from oankit.layers.functional import relu


class ConvLayer(torch.nn.Module):
    """2-D convolution running on the hand-written conv kernels.

    Args:
        in_channels (int): Number of input channels.
        out_channels (int): Number of filters.
        kernel_size (int): 1 or 3.
        stride (int): 1 or 2.
        padding (int, optional): Defaults to ``kernel_size // 2``.

    """

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel_size: int = 3,
        stride: int = 1,
        padding: int = None,
    ):
        assert check_argument_types()
        super().__init__()
        if kernel_size not in (1, 3):
            raise ValueError(f"kernel_size must be 1 or 3, got {kernel_size}")
        if stride not in (1, 2):
            raise ValueError(f"stride must be 1 or 2, got {stride}")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.stride = stride
        self.padding = kernel_size // 2 if padding is None else padding
        self.weight = torch.nn.Parameter(
            torch.empty(out_channels, in_channels, kernel_size, kernel_size)
        )
        self.bias = torch.nn.Parameter(torch.empty(out_channels))
        self.reset_parameters()

    def reset_parameters(self):
        # He uniform by fan-in: U(-sqrt(6 / fan_in), sqrt(6 / fan_in))
        fan_in = self.in_channels * self.kernel_size * self.kernel_size
        bound = math.sqrt(6.0 / fan_in)
        with torch.no_grad():
            self.weight.uniform_(-bound, bound)
            self.bias.zero_()

    def output_size(self, extent: int) -> int:
        return (extent + 2 * self.padding - self.kernel_size) // self.stride + 1

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return conv2d(x, self.weight, self.bias, self.stride, self.padding)

    def extra_repr(self) -> str:
        return (
            f"{self.in_channels}, {self.out_channels}, "
            f"kernel_size={self.kernel_size}, stride={self.stride}, "
            f"padding={self.padding}"
        )


class ReLU(torch.nn.Module):
    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return relu(x)
