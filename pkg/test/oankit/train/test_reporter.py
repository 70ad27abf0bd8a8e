import logging
import uuid

import numpy as np
import pytest
import torch

from oankit.train.reporter import Average
from oankit.train.reporter import Reporter
from oankit.train.reporter import WeightedAverage
from oankit.train.reporter import aggregate
from oankit.train.reporter import format_value


@pytest.mark.parametrize("weight1,weight2", [(None, None), (19, np.array(9))])
def test_register(weight1, weight2):
    reporter = Reporter()
    with reporter.observe("train", 1) as sub:
        stats1 = {
            "float": 0.6,
            "int": 6,
            "np": np.random.random(),
            "torch": torch.rand(1),
        }
        sub.register(stats1, weight1)
        stats2 = {
            "float": 0.3,
            "int": 100,
            "np": np.random.random(),
            "torch": torch.rand(1),
        }
        sub.register(stats2, weight2)
        assert sub.log_message() != ""

    for key in stats1:
        values = [stats1[key], stats2[key]]
        values = [float(v) for v in values]
        if weight1 is None:
            desired = np.mean(values)
        else:
            weights = np.array([19.0, 9.0])
            desired = (np.array(values) * weights).sum() / weights.sum()
        np.testing.assert_allclose(reporter.get_value("train", key), desired)


def test_nan_is_skipped():
    reporter = Reporter()
    with reporter.observe("train", 1) as sub:
        sub.register({"loss": 1.0})
        sub.register({"loss": float("nan")})
        sub.register({"loss": 3.0})
    assert reporter.get_value("train", "loss") == 2.0


def test_late_keys_are_padded():
    reporter = Reporter()
    with reporter.observe("train", 1) as sub:
        sub.register({"a": 1.0})
        sub.register({"a": 1.0, "b": 4.0})
        assert len(sub.stats["b"]) == 2
    assert reporter.get_value("train", "b") == 4.0


def test_total_count_accumulates():
    reporter = Reporter()
    for epoch in (1, 2):
        with reporter.observe("train", epoch) as sub:
            for _ in range(3):
                sub.register({"loss": 1.0})
    assert reporter.get_value("train", "total_count", epoch=2) == 6
    assert reporter.get_keys2("train") == ("loss",)


def test_reserved_key():
    reporter = Reporter()
    with pytest.raises(RuntimeError):
        with reporter.observe("train", 1) as sub:
            sub.register({"time": 0.1})


def test_register_after_finish():
    reporter = Reporter()
    with reporter.observe("train", 1) as sub:
        sub.register({"loss": 1.0})
    with pytest.raises(RuntimeError):
        sub.register({"loss": 1.0})


def test_change_epoch_during_observation():
    reporter = Reporter()
    with pytest.raises(RuntimeError):
        with reporter.observe("train", 1):
            reporter.epoch = 2


def test_negative_epoch():
    with pytest.raises(ValueError):
        Reporter(-1)
    with pytest.raises(ValueError):
        Reporter().start_epoch("train", -1)


def test_missing_value():
    with pytest.raises(KeyError):
        Reporter().get_value("train", "loss")


def test_aggregate():
    assert aggregate([Average(1.0), Average(2.0)]) == 1.5
    assert aggregate([WeightedAverage(1.0, 1), WeightedAverage(4.0, 2)]) == 3.0
    with pytest.raises(ValueError):
        aggregate([Average(1.0), WeightedAverage(1.0, 1)])
    with pytest.warns(UserWarning):
        assert np.isnan(aggregate([]))


def test_format_value():
    assert format_value("loss", 0.5) == "loss=0.500"
    assert format_value("lr", 1e-4) == "lr=1.000e-04"
    assert format_value("count", 3) == "count=3"


def test_log_message_and_plot(tmp_path, caplog):
    reporter = Reporter()
    for epoch in (1, 2):
        with reporter.observe("train", epoch) as sub:
            sub.register({"loss": 1.0 / epoch})
    with caplog.at_level(logging.INFO):
        logging.info(reporter.log_message())
    assert "2epoch results" in caplog.text
    assert "loss=0.500" in caplog.text
    reporter.matplotlib_plot(tmp_path)
    assert (tmp_path / "loss.png").exists()


def test_tensorboard_add_scalar(tmp_path):
    from torch.utils.tensorboard import SummaryWriter

    writer = SummaryWriter(str(tmp_path / uuid.uuid4().hex))
    reporter = Reporter()
    with reporter.observe("train", 1) as sub:
        sub.register({"loss": 1.0})
        sub.tensorboard_add_scalar(writer)
    reporter.tensorboard_add_scalar(writer)
    writer.close()
