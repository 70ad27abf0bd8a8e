import pytest
import torch

from oankit.optimizers.sgd import SGD
from oankit.optimizers.sgd import SgdConfig
from oankit.optimizers.sgd import build_scheduler
from oankit.optimizers.sgd import effective_lr
from oankit.optimizers.sgd import sgd_step


def test_plain_step():
    p = torch.tensor([1.0, -2.0])
    g = torch.tensor([0.5, 4.0])
    sgd_step([p], [g], SgdConfig(learning_rate=0.1, momentum=0.0), epoch=0)
    torch.testing.assert_close(p, torch.tensor([0.95, -2.4]))


def test_momentum_accumulates():
    config = SgdConfig(learning_rate=0.1, momentum=0.9)
    p = torch.zeros(1)
    g = torch.ones(1)
    buffers = sgd_step([p], [g], config, epoch=0)
    buffers = sgd_step([p], [g], config, epoch=0, momentum_buffers=buffers)
    torch.testing.assert_close(p, torch.tensor([-0.1 - 0.19]))
    torch.testing.assert_close(buffers[0], torch.tensor([1.9]))


@pytest.mark.parametrize(
    "epoch, lr", [(0, 0.01), (7, 0.01), (8, 0.001), (10, 0.001), (11, 1e-4)]
)
def test_step_schedule(epoch, lr):
    assert effective_lr(SgdConfig(), epoch) == pytest.approx(lr, rel=1e-12)


def test_scheduled_step_uses_effective_lr():
    p = torch.zeros(1)
    sgd_step([p], [torch.ones(1)], SgdConfig(momentum=0.0), epoch=11)
    assert float(p) == pytest.approx(-1e-4, rel=1e-6)


def test_optimizer_follows_schedule():
    config = SgdConfig()
    param = torch.nn.Parameter(torch.zeros(3))
    optimizer = SGD([param], config)
    scheduler = build_scheduler(optimizer)
    for epoch in range(config.epochs):
        lr = optimizer.param_groups[0]["lr"]
        assert lr == pytest.approx(effective_lr(config, epoch), rel=1e-9)
        scheduler.step()


def test_optimizer_matches_functional_step():
    torch.manual_seed(0)
    config = SgdConfig(learning_rate=0.05, momentum=0.9)
    param = torch.nn.Parameter(torch.randn(4))
    reference = param.detach().clone()
    optimizer = SGD([param], config)
    buffers = None
    for _ in range(5):
        grad = torch.randn(4)
        param.grad = grad.clone()
        optimizer.step()
        buffers = sgd_step([reference], [grad], config, 0, buffers)
    torch.testing.assert_close(param.detach(), reference)


def test_same_seed_bitwise_identical():
    def run():
        torch.manual_seed(123)
        model = torch.nn.Linear(5, 2)
        optimizer = SGD(model.parameters(), SgdConfig(learning_rate=0.05))
        data = torch.randn(100, 8, 5)
        for x in data:
            optimizer.zero_grad()
            model(x).pow(2).mean().backward()
            optimizer.step()
        return [p.detach().clone() for p in model.parameters()]

    for a, b in zip(run(), run()):
        assert torch.equal(a, b)


def test_weight_decay():
    p = torch.ones(1)
    sgd_step(
        [p], [torch.zeros(1)], SgdConfig(momentum=0.0, weight_decay=0.5), epoch=0
    )
    assert float(p) == pytest.approx(1 - 0.01 * 0.5)


def test_shape_mismatch():
    with pytest.raises(ValueError):
        sgd_step([torch.zeros(2)], [torch.zeros(3)], SgdConfig(), 0)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(learning_rate=0.0),
        dict(decay_factor=1.0),
        dict(decay_factor=0.0),
        dict(momentum=1.0),
        dict(epochs=0),
        dict(decay_epochs=(11, 8)),
    ],
)
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        SgdConfig(**kwargs)
