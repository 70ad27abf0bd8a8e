"""Hand-written forward/backward kernels and their autograd wrappers.

Each operator has an explicit ``*_forward`` and ``*_backward``; the
``torch.autograd.Function`` classes only route tensors between them, so
gradients of the composed networks are exactly the hand-written ones.
"""

from typing import Optional
from typing import Tuple

import torch
import torch.nn.functional as F

from oankit.utils.errors import NumericError
from oankit.utils.errors import ShapeError

PROB_EPS = 1e-6


def conv2d_output_size(extent: int, kernel: int, stride: int, padding: int) -> int:
    """floor((H + 2 * pad - k) / stride) + 1

    Examples:
        >>> conv2d_output_size(32, 3, 2, 1)
        16
        >>> conv2d_output_size(5, 1, 1, 0)
        5
    """
    return (extent + 2 * padding - kernel) // stride + 1


def _check_conv_shapes(input: torch.Tensor, weight: torch.Tensor, padding: int):
    if input.dim() != 4 or weight.dim() != 4:
        raise ShapeError(
            f"conv2d expects 4-D input and weight, got input={tuple(input.shape)} "
            f"weight={tuple(weight.shape)}"
        )
    if input.size(1) != weight.size(1):
        raise ShapeError(
            f"channel mismatch: input={tuple(input.shape)} weight={tuple(weight.shape)}"
        )
    kh, kw = weight.shape[2:]
    if input.size(2) + 2 * padding < kh or input.size(3) + 2 * padding < kw:
        raise ShapeError(
            f"input={tuple(input.shape)} smaller than kernel weight="
            f"{tuple(weight.shape)} with padding={padding}"
        )


def conv2d_forward(
    input: torch.Tensor,
    weight: torch.Tensor,
    bias: Optional[torch.Tensor],
    stride: int = 1,
    padding: int = 0,
) -> torch.Tensor:
    """im2col convolution: (N, C, H, W) x (O, C, kh, kw) -> (N, O, H', W')"""
    _check_conv_shapes(input, weight, padding)
    n = input.size(0)
    out_ch, _, kh, kw = weight.shape
    oh = conv2d_output_size(input.size(2), kh, stride, padding)
    ow = conv2d_output_size(input.size(3), kw, stride, padding)

    # cols: (N, C*kh*kw, oh*ow)
    cols = F.unfold(input, (kh, kw), padding=padding, stride=stride)
    out = weight.reshape(out_ch, -1).matmul(cols)
    if bias is not None:
        out = out + bias.reshape(1, out_ch, 1)
    return out.reshape(n, out_ch, oh, ow)


def conv2d_backward(
    input: torch.Tensor,
    weight: torch.Tensor,
    upstream_grad: torch.Tensor,
    stride: int = 1,
    padding: int = 0,
) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """Gradients of ``conv2d_forward`` w.r.t. input, weight and bias."""
    _check_conv_shapes(input, weight, padding)
    n = input.size(0)
    out_ch, _, kh, kw = weight.shape
    oh = conv2d_output_size(input.size(2), kh, stride, padding)
    ow = conv2d_output_size(input.size(3), kw, stride, padding)
    expected = (n, out_ch, oh, ow)
    if tuple(upstream_grad.shape) != expected:
        raise ShapeError(
            f"upstream_grad={tuple(upstream_grad.shape)} does not match "
            f"forward output {expected}"
        )

    cols = F.unfold(input, (kh, kw), padding=padding, stride=stride)
    g = upstream_grad.reshape(n, out_ch, oh * ow)
    # sum over batch of g @ cols^T
    weight_grad = torch.einsum("nol,nkl->ok", g, cols).reshape(weight.shape)
    bias_grad = g.sum(dim=(0, 2))
    cols_grad = weight.reshape(out_ch, -1).t().matmul(g)
    input_grad = F.fold(
        cols_grad,
        output_size=input.shape[2:],
        kernel_size=(kh, kw),
        padding=padding,
        stride=stride,
    )
    return input_grad, weight_grad, bias_grad


def relu_forward(x: torch.Tensor) -> torch.Tensor:
    return x.clamp(min=0)


def relu_backward(x: torch.Tensor, upstream_grad: torch.Tensor) -> torch.Tensor:
    return upstream_grad * (x > 0).to(upstream_grad.dtype)


def sigmoid_forward(x: torch.Tensor) -> torch.Tensor:
    return torch.sigmoid(x)


def sigmoid_backward(y: torch.Tensor, upstream_grad: torch.Tensor) -> torch.Tensor:
    """Takes the forward *output* ``y``: dy/dx = y (1 - y)."""
    return upstream_grad * y * (1 - y)


def focal_loss(
    prob: torch.Tensor,
    target: torch.Tensor,
    ignore_mask: Optional[torch.Tensor] = None,
    alpha: float = 0.25,
    gamma: float = 2.0,
    normalizer: Optional[float] = None,
) -> Tuple[torch.Tensor, torch.Tensor]:
    """Binary focal loss on probabilities, with its gradient w.r.t. ``prob``.

    Per element::

        target 1: -alpha * (1 - p)^gamma * log(p)
        target 0: -(1 - alpha) * p^gamma * log(1 - p)

    Ignored elements contribute nothing. The sum is divided by
    ``normalizer`` (default: the element count, i.e. S^2 for one map).

    Returns:
        Tuple of the scalar loss and the gradient tensor.
    """
    if prob.shape != target.shape or (
        ignore_mask is not None and ignore_mask.shape != prob.shape
    ):
        raise ShapeError(
            f"prob={tuple(prob.shape)} target={tuple(target.shape)} "
            f"ignore={None if ignore_mask is None else tuple(ignore_mask.shape)}"
        )
    p = prob.clamp(PROB_EPS, 1 - PROB_EPS)
    if not bool(torch.isfinite(p).all()) or bool(((p < 0) | (p > 1)).any()):
        raise NumericError("focal_loss: probability outside [0, 1] after clamping")
    if normalizer is None:
        normalizer = float(prob.numel())

    t = target.to(p.dtype)
    keep = torch.ones_like(p) if ignore_mask is None else 1 - ignore_mask.to(p.dtype)
    log_p, log_1mp = torch.log(p), torch.log1p(-p)

    pos = -alpha * (1 - p) ** gamma * log_p
    neg = -(1 - alpha) * p**gamma * log_1mp
    loss = ((t * pos + (1 - t) * neg) * keep).sum() / normalizer

    if gamma == 0:
        dpos = -alpha / p
        dneg = (1 - alpha) / (1 - p)
    else:
        dpos = alpha * (gamma * (1 - p) ** (gamma - 1) * log_p - (1 - p) ** gamma / p)
        dneg = -(1 - alpha) * (
            gamma * p ** (gamma - 1) * log_1mp - p**gamma / (1 - p)
        )
    # clamped elements are flat
    inside = ((prob > PROB_EPS) & (prob < 1 - PROB_EPS)).to(p.dtype)
    grad = (t * dpos + (1 - t) * dneg) * keep * inside / normalizer
    return loss, grad


def smooth_l1_forward(diff: torch.Tensor, beta: float = 1.0) -> torch.Tensor:
    """Elementwise Huber-style loss of ``diff = prediction - target``."""
    absd = diff.abs()
    return torch.where(absd < beta, 0.5 * diff**2 / beta, absd - 0.5 * beta)


def smooth_l1_backward(
    diff: torch.Tensor, upstream_grad: torch.Tensor, beta: float = 1.0
) -> torch.Tensor:
    return upstream_grad * torch.where(
        diff.abs() < beta, diff / beta, torch.sign(diff)
    )


class Conv2dFunction(torch.autograd.Function):
    @staticmethod
    def forward(ctx, input, weight, bias, stride, padding):
        ctx.save_for_backward(input, weight)
        ctx.stride, ctx.padding = stride, padding
        return conv2d_forward(input, weight, bias, stride, padding)

    @staticmethod
    def backward(ctx, grad_output):
        input, weight = ctx.saved_tensors
        input_grad, weight_grad, bias_grad = conv2d_backward(
            input, weight, grad_output.contiguous(), ctx.stride, ctx.padding
        )
        if not ctx.needs_input_grad[2]:
            bias_grad = None
        return input_grad, weight_grad, bias_grad, None, None


class ReLUFunction(torch.autograd.Function):
    @staticmethod
    def forward(ctx, x):
        ctx.save_for_backward(x)
        return relu_forward(x)

    @staticmethod
    def backward(ctx, grad_output):
        (x,) = ctx.saved_tensors
        return relu_backward(x, grad_output)


class SigmoidFunction(torch.autograd.Function):
    @staticmethod
    def forward(ctx, x):
        y = sigmoid_forward(x)
        ctx.save_for_backward(y)
        return y

    @staticmethod
    def backward(ctx, grad_output):
        (y,) = ctx.saved_tensors
        return sigmoid_backward(y, grad_output)


class FocalLossFunction(torch.autograd.Function):
    @staticmethod
    def forward(ctx, prob, target, ignore_mask, alpha, gamma, normalizer):
        loss, grad = focal_loss(prob, target, ignore_mask, alpha, gamma, normalizer)
        ctx.grad = grad
        return loss

    @staticmethod
    def backward(ctx, grad_output):
        return ctx.grad * grad_output, None, None, None, None, None


class SmoothL1Function(torch.autograd.Function):
    """Sum of elementwise smooth-L1 over ``diff``."""

    @staticmethod
    def forward(ctx, diff, beta):
        ctx.save_for_backward(diff)
        ctx.beta = beta
        return smooth_l1_forward(diff, beta).sum()

    @staticmethod
    def backward(ctx, grad_output):
        (diff,) = ctx.saved_tensors
        return smooth_l1_backward(diff, grad_output, ctx.beta), None


def conv2d(input, weight, bias=None, stride: int = 1, padding: int = 0):
    return Conv2dFunction.apply(input, weight, bias, stride, padding)


def relu(x):
    return ReLUFunction.apply(x)


def sigmoid(x):
    return SigmoidFunction.apply(x)


def focal_loss_with_grad_fn(
    prob, target, ignore_mask=None, alpha=0.25, gamma=2.0, normalizer=None
):
    """Differentiable scalar focal loss (backward is the analytic gradient)."""
    return FocalLossFunction.apply(prob, target, ignore_mask, alpha, gamma, normalizer)


def smooth_l1_sum(diff, beta: float = 1.0):
    return SmoothL1Function.apply(diff, beta)
