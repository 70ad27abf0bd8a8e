"""Central finite-difference checks for the hand-written backward passes."""

from typing import Callable
from typing import Sequence

import torch


def numerical_gradient(
    func: Callable[..., torch.Tensor],
    inputs: Sequence[torch.Tensor],
    index: int,
    eps: float = 1e-6,
) -> torch.Tensor:
    """d sum(func(*inputs)) / d inputs[index] by central differences."""
    x = inputs[index]
    grad = torch.zeros_like(x)
    flat, gflat = x.data.view(-1), grad.view(-1)
    with torch.no_grad():
        for i in range(flat.numel()):
            orig = flat[i].item()
            flat[i] = orig + eps
            plus = func(*inputs).sum().item()
            flat[i] = orig - eps
            minus = func(*inputs).sum().item()
            flat[i] = orig
            gflat[i] = (plus - minus) / (2 * eps)
    return grad


def max_relative_error(
    func: Callable[..., torch.Tensor],
    inputs: Sequence[torch.Tensor],
    eps: float = 1e-6,
    floor: float = 1e-3,
) -> float:
    """Largest |analytic - numeric| / max(|analytic|, |numeric|, floor).

    Inputs must be float64 leaf tensors; only those with ``requires_grad``
    are checked. ``floor`` keeps near-zero gradients from dominating.
    """
    inputs = [
        x.detach().clone().requires_grad_(x.requires_grad)
        if isinstance(x, torch.Tensor)
        else x
        for x in inputs
    ]
    for x in inputs:
        if isinstance(x, torch.Tensor) and x.requires_grad:
            assert x.dtype == torch.float64, "gradient checks run in 64-bit mode"
    out = func(*inputs).sum()
    checked = [
        i
        for i, x in enumerate(inputs)
        if isinstance(x, torch.Tensor) and x.requires_grad
    ]
    analytic = torch.autograd.grad(out, [inputs[i] for i in checked], allow_unused=True)

    worst = 0.0
    for i, a in zip(checked, analytic):
        if a is None:
            a = torch.zeros_like(inputs[i])
        n = numerical_gradient(func, inputs, i, eps)
        denom = torch.clamp(torch.maximum(a.abs(), n.abs()), min=floor)
        worst = max(worst, float(((a - n).abs() / denom).max()))
    return worst
