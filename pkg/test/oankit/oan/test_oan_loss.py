import math

import numpy as np
import pytest
import torch

from oankit.layers.functional import sigmoid
from oankit.oan.assign import GridLabels
from oankit.oan.head import ActivationMap
from oankit.oan.loss import oan_loss
from oankit.torch_utils.gradient_check import max_relative_error
from oankit.utils.errors import ShapeError


def _labels(target, ignore=None):
    target = np.asarray(target, dtype=np.uint8)
    if ignore is None:
        ignore = np.zeros_like(target)
    return GridLabels(target=target, ignore=np.asarray(ignore, dtype=np.uint8))


def _amap(probs):
    probs = torch.as_tensor(probs)
    return ActivationMap(logits=torch.zeros_like(probs), probs=probs, grid_size_px=1.0)


def test_one_positive_of_four():
    loss = oan_loss(_amap(torch.full((2, 2), 0.5)), _labels([[1, 0], [0, 0]]))
    positive = 0.25 * 0.25 * math.log(2)
    negative = 0.75 * 0.5**2 * math.log(2)
    assert float(loss) == pytest.approx((positive + 3 * negative) / 4, rel=1e-6)


def test_perfect_prediction():
    target = np.array([[1, 0, 0], [0, 1, 0], [0, 0, 0]])
    probs = torch.where(torch.from_numpy(target) > 0, 1 - 1e-6, 1e-6).double()
    assert float(oan_loss(_amap(probs), _labels(target))) < 1e-5


def test_mean_over_cells():
    small = oan_loss(_amap(torch.full((2, 2), 0.3)), _labels(np.zeros((2, 2))))
    large = oan_loss(_amap(torch.full((4, 4), 0.3)), _labels(np.zeros((4, 4))))
    assert float(small) == pytest.approx(float(large), rel=1e-6)


def test_ignored_cells_do_not_count():
    probs = torch.tensor([[0.5, 0.9], [0.1, 0.2]])
    ignore = [[0, 1], [0, 0]]
    with_ignore = oan_loss(_amap(probs), _labels([[1, 0], [0, 0]], ignore))
    swapped = probs.clone()
    swapped[0, 1] = 0.01
    assert float(with_ignore) == pytest.approx(
        float(oan_loss(_amap(swapped), _labels([[1, 0], [0, 0]], ignore)))
    )


def test_batch_is_mean_of_maps():
    a = torch.rand(3, 3) * 0.8 + 0.1
    b = torch.rand(3, 3) * 0.8 + 0.1
    la, lb = _labels(np.eye(3)), _labels(np.zeros((3, 3)))
    batched = oan_loss(_amap(torch.stack([a, b])), [la, lb])
    single = (oan_loss(_amap(a), la) + oan_loss(_amap(b), lb)) / 2
    assert float(batched) == pytest.approx(float(single), rel=1e-6)


def test_shape_mismatch():
    with pytest.raises(ShapeError):
        oan_loss(_amap(torch.full((4, 4), 0.5)), _labels(np.zeros((2, 2))))


def test_gradient_through_sigmoid():
    torch.manual_seed(0)
    labels = [_labels([[1, 0], [0, 0]], [[0, 0], [1, 0]]), _labels(np.zeros((2, 2)))]
    for _ in range(20):
        logits = torch.randn(2, 2, 2, dtype=torch.float64, requires_grad=True)

        def func(lg):
            return oan_loss(
                ActivationMap(logits=lg, probs=sigmoid(lg), grid_size_px=1.0), labels
            )

        assert max_relative_error(func, [logits]) < 1e-5
