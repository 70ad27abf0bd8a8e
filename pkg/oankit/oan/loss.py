from typing import Sequence
from typing import Union

import numpy as np
import torch

from oankit.layers.functional import focal_loss_with_grad_fn
from oankit.oan.assign import GridLabels
from oankit.oan.head import ActivationMap
from oankit.utils.errors import ShapeError


def stack_labels(
    labels: Union[GridLabels, Sequence[GridLabels]], like: torch.Tensor
):
    if isinstance(labels, GridLabels):
        labels = [labels]
    target = np.stack([lb.target for lb in labels])
    ignore = np.stack([lb.ignore for lb in labels])
    target = torch.from_numpy(target).to(like.dtype).reshape(like.shape)
    ignore = torch.from_numpy(ignore).to(like.dtype).reshape(like.shape)
    return target, ignore


def oan_loss(
    amap: ActivationMap,
    labels: Union[GridLabels, Sequence[GridLabels]],
    alpha: float = 0.25,
    gamma: float = 2.0,
) -> torch.Tensor:
    """Focal loss over the non-ignored cells, averaged over the S^2 cells.

    A batch of N maps is averaged over N * S^2, so each map contributes
    its own per-map loss divided by N.

    Examples:
        >>> probs = torch.full((2, 2), 0.5)
        >>> labels = GridLabels(
        ...     target=np.array([[1, 0], [0, 0]], dtype=np.uint8),
        ...     ignore=np.zeros((2, 2), dtype=np.uint8),
        ... )
        >>> amap = ActivationMap(logits=torch.zeros(2, 2), probs=probs, grid_size_px=1.)
        >>> round(float(oan_loss(amap, labels)), 6)
        0.108304
    """
    n_maps = 1 if isinstance(labels, GridLabels) else len(labels)
    if amap.probs.numel() != n_maps * labels_cells(labels):
        raise ShapeError(
            f"activation map {tuple(amap.probs.shape)} does not match "
            f"{n_maps} label grid(s) of {labels_cells(labels)} cells"
        )
    target, ignore = stack_labels(labels, amap.probs)
    return focal_loss_with_grad_fn(
        amap.probs, target, ignore, alpha, gamma, float(amap.probs.numel())
    )


def labels_cells(labels: Union[GridLabels, Sequence[GridLabels]]) -> int:
    first = labels if isinstance(labels, GridLabels) else labels[0]
    return first.grid_size**2
