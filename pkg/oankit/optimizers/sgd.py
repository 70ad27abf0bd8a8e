import dataclasses
from typing import List
from typing import Optional
from typing import Sequence
from typing import Tuple

import torch
from typeguard import check_argument_types


@dataclasses.dataclass(frozen=True)
class SgdConfig:
    learning_rate: float = 0.01
    momentum: float = 0.9
    weight_decay: float = 0.0
    decay_epochs: Tuple[int, ...] = (8, 11)
    decay_factor: float = 0.1
    epochs: int = 12

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate: must be > 0, got {self.learning_rate}")
        if not 0 < self.decay_factor < 1:
            raise ValueError(
                f"decay_factor: must be in (0, 1), got {self.decay_factor}"
            )
        if not 0 <= self.momentum < 1:
            raise ValueError(f"momentum: must be in [0, 1), got {self.momentum}")
        if self.epochs < 1:
            raise ValueError(f"epochs: must be >= 1, got {self.epochs}")
        if list(self.decay_epochs) != sorted(self.decay_epochs):
            raise ValueError(f"decay_epochs: must be sorted, got {self.decay_epochs}")


def effective_lr(config: SgdConfig, epoch: int) -> float:
    """Step schedule; ``epoch`` counts completed epochs (0-based).

    Examples:
        >>> effective_lr(SgdConfig(), 0)
        0.01
        >>> round(effective_lr(SgdConfig(), 11), 12)
        0.0001
    """
    passed = sum(1 for e in config.decay_epochs if epoch >= e)
    return config.learning_rate * config.decay_factor**passed


def _momentum_update(
    params: Sequence[torch.Tensor],
    grads: Sequence[torch.Tensor],
    lr: float,
    momentum: float,
    weight_decay: float,
    momentum_buffers: Sequence[Optional[torch.Tensor]],
) -> List[Optional[torch.Tensor]]:
    # buf = momentum * buf + grad; param -= lr * buf
    new_buffers = []
    for p, g, buf in zip(params, grads, momentum_buffers):
        if p.shape != g.shape:
            raise ValueError(
                f"shape mismatch: param={tuple(p.shape)} grad={tuple(g.shape)}"
            )
        if weight_decay != 0:
            g = g + weight_decay * p
        if momentum != 0:
            if buf is None:
                buf = g.clone()
            else:
                buf.mul_(momentum).add_(g)
            g = buf
        p.add_(g, alpha=-lr)
        new_buffers.append(buf)
    return new_buffers


@torch.no_grad()
def sgd_step(
    params: Sequence[torch.Tensor],
    grads: Sequence[torch.Tensor],
    config: SgdConfig,
    epoch: int,
    momentum_buffers: Optional[List[Optional[torch.Tensor]]] = None,
) -> List[Optional[torch.Tensor]]:
    """One SGD update at the scheduled learning rate, in place on ``params``.

    Returns:
        The updated momentum buffers, to be passed to the next call.
    """
    if len(params) != len(grads):
        raise ValueError(f"{len(params)} params but {len(grads)} grads")
    if momentum_buffers is None:
        momentum_buffers = [None] * len(params)
    return _momentum_update(
        params,
        grads,
        effective_lr(config, epoch),
        config.momentum,
        config.weight_decay,
        momentum_buffers,
    )


class SGD(torch.optim.Optimizer):
    """Momentum SGD bound to an SgdConfig.

    ``step`` applies the same update as ``sgd_step`` at the learning rate
    of each param group, which ``build_scheduler`` decays on schedule.
    """

    def __init__(self, params, config: SgdConfig):
        assert check_argument_types()
        defaults = dict(
            lr=config.learning_rate,
            momentum=config.momentum,
            weight_decay=config.weight_decay,
        )
        super().__init__(params, defaults)
        self.config = config

    @torch.no_grad()
    def step(self, closure=None):
        loss = None
        if closure is not None:
            with torch.enable_grad():
                loss = closure()
        for group in self.param_groups:
            params = [p for p in group["params"] if p.grad is not None]
            buffers = [self.state[p].get("momentum_buffer") for p in params]
            buffers = _momentum_update(
                params,
                [p.grad for p in params],
                group["lr"],
                group["momentum"],
                group["weight_decay"],
                buffers,
            )
            for p, buf in zip(params, buffers):
                self.state[p]["momentum_buffer"] = buf
        return loss


def build_scheduler(optimizer: SGD) -> torch.optim.lr_scheduler.MultiStepLR:
    config = optimizer.config
    return torch.optim.lr_scheduler.MultiStepLR(
        optimizer, milestones=list(config.decay_epochs), gamma=config.decay_factor
    )
