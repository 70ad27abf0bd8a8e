"""Aggregation of per-iteration training statistics into epoch summaries."""

from collections import defaultdict
from contextlib import contextmanager
import dataclasses
import datetime
from pathlib import Path
import time
from typing import ContextManager
from typing import Dict
from typing import Optional
from typing import Sequence
from typing import Tuple
from typing import Union
import warnings

import humanfriendly
import numpy as np
import torch
from typeguard import check_argument_types

Num = Union[float, int, torch.Tensor, np.ndarray]

_reserved = {"time", "total_count"}


@dataclasses.dataclass(frozen=True)
class Average:
    value: float


@dataclasses.dataclass(frozen=True)
class WeightedAverage:
    value: float
    weight: float


ReportedValue = Union[Average, WeightedAverage]


def _scalar(v: Num, name: str) -> float:
    if isinstance(v, (torch.Tensor, np.ndarray)):
        if int(np.prod(v.shape)) != 1:
            raise ValueError(f"{name} must be 0 or 1 dimension: {tuple(v.shape)}")
        v = v.item()
    return float(v)


def to_reported_value(v: Num, weight: Num = None) -> ReportedValue:
    assert check_argument_types()
    if weight is None:
        return Average(_scalar(v, "v"))
    return WeightedAverage(_scalar(v, "v"), _scalar(weight, "weight"))


def aggregate(values: Sequence[ReportedValue]) -> float:
    """Mean of ``values``, weighted when they carry weights.

    Non-finite entries are skipped; nan when nothing valid remains.
    """
    if len(values) == 0:
        warnings.warn("No stats found")
        return float("nan")
    if any(type(v) is not type(values[0]) for v in values):
        raise ValueError("Can't use Average and WeightedAverage together")

    if isinstance(values[0], Average):
        finite = [v.value for v in values if np.isfinite(v.value)]
        return float(np.mean(finite)) if finite else float("nan")

    valid = [v for v in values if np.isfinite(v.value) and np.isfinite(v.weight)]
    sum_weights = sum(v.weight for v in valid)
    if sum_weights == 0:
        warnings.warn("No valid weighted stats found")
        return float("nan")
    return sum(v.value * v.weight for v in valid) / sum_weights


def format_value(key: str, v) -> str:
    if isinstance(v, datetime.timedelta):
        return f"{key}={humanfriendly.format_timespan(v)}"
    if isinstance(v, float):
        if abs(v) > 1.0e3 or (v != 0 and abs(v) <= 1.0e-3):
            return f"{key}={v:.3e}"
        return f"{key}={v:.3f}"
    return f"{key}={v}"


class SubReporter:
    """Collects the stats of one epoch for one key (e.g. "train")."""

    def __init__(self, key: str, epoch: int, total_count: int):
        assert check_argument_types()
        self.key = key
        self.epoch = epoch
        self.start_time = time.perf_counter()
        self.stats = defaultdict(list)
        self.total_count = total_count
        self.count = 0
        self._finished = False

    def register(self, stats: Dict[str, Optional[Num]], weight: Num = None) -> None:
        """Register the stats of one iteration."""
        assert check_argument_types()
        if self._finished:
            raise RuntimeError("Already finished")
        self.total_count += 1
        self.count += 1
        for key2, v in stats.items():
            if key2 in _reserved:
                raise RuntimeError(f"{key2} is reserved.")
            r = to_reported_value(np.nan if v is None else v, weight)
            # pad keys that first appear late so every list has ``count`` entries
            missing = self.count - 1 - len(self.stats[key2])
            nan = to_reported_value(np.nan, None if weight is None else 0)
            self.stats[key2].extend([nan] * missing)
            self.stats[key2].append(r)

    def log_message(self, start: int = None, end: int = None) -> str:
        if start is None:
            start = 0
        if start < 0:
            start = max(self.count + start, 0)
        if end is None:
            end = self.count
        if self.count == 0 or start >= end:
            return ""
        parts = [
            format_value(key2, aggregate(values[start:end]))
            for key2, values in self.stats.items()
        ]
        return f"{self.epoch}epoch:{self.key}:{start + 1}-{end}iter: " + ", ".join(
            parts
        )

    def tensorboard_add_scalar(self, summary_writer, start: int = None):
        if start is None:
            start = 0
        if start < 0:
            start = max(self.count + start, 0)
        for key2, values in self.stats.items():
            summary_writer.add_scalar(
                f"{self.key}/{key2}", aggregate(values[start:]), self.total_count
            )

    def finished(self) -> None:
        self._finished = True


class Reporter:
    """Epoch-level statistics.

    Examples:
        >>> reporter = Reporter()
        >>> with reporter.observe("train", 1) as sub_reporter:
        ...     sub_reporter.register(dict(loss=0.2))
        >>> reporter.get_value("train", "loss")
        0.2
    """

    def __init__(self, epoch: int = 0):
        assert check_argument_types()
        if epoch < 0:
            raise ValueError(f"epoch must be 0 or more: {epoch}")
        self.epoch = epoch
        # e.g. self.stats[epoch]["train"]["loss"]
        self.stats = {}

    def get_epoch(self) -> int:
        return self.epoch

    @contextmanager
    def observe(self, key: str, epoch: int = None) -> ContextManager[SubReporter]:
        sub_reporter = self.start_epoch(key, epoch)
        yield sub_reporter
        self.finish_epoch(sub_reporter)

    def start_epoch(self, key: str, epoch: int = None) -> SubReporter:
        if epoch is not None:
            if epoch < 0:
                raise ValueError(f"epoch must be 0 or more: {epoch}")
            self.epoch = epoch
        prev = self.stats.get(self.epoch - 1, {}).get(key)
        total_count = 0 if prev is None else prev["total_count"]
        self.stats.pop(self.epoch, None)
        return SubReporter(key, self.epoch, total_count)

    def finish_epoch(self, sub_reporter: SubReporter) -> None:
        if self.epoch != sub_reporter.epoch:
            raise RuntimeError(
                f"Don't change epoch during observation: "
                f"{self.epoch} != {sub_reporter.epoch}"
            )
        stats = {k: aggregate(v) for k, v in sub_reporter.stats.items()}
        stats["time"] = datetime.timedelta(
            seconds=time.perf_counter() - sub_reporter.start_time
        )
        stats["total_count"] = sub_reporter.total_count
        self.stats.setdefault(self.epoch, {})[sub_reporter.key] = stats
        sub_reporter.finished()

    def has(self, key: str, key2: str, epoch: int = None) -> bool:
        if epoch is None:
            epoch = self.get_epoch()
        return key2 in self.stats.get(epoch, {}).get(key, {})

    def get_value(self, key: str, key2: str, epoch: int = None):
        if epoch is None:
            epoch = self.get_epoch()
        if not self.has(key, key2, epoch):
            raise KeyError(f"{key}.{key2} is not found at epoch {epoch}")
        return self.stats[epoch][key][key2]

    def get_keys(self, epoch: int = None) -> Tuple[str, ...]:
        if epoch is None:
            epoch = self.get_epoch()
        return tuple(self.stats.get(epoch, {}))

    def get_keys2(self, key: str, epoch: int = None) -> Tuple[str, ...]:
        if epoch is None:
            epoch = self.get_epoch()
        return tuple(k for k in self.stats[epoch][key] if k not in _reserved)

    def log_message(self, epoch: int = None) -> str:
        if epoch is None:
            epoch = self.get_epoch()
        message = f"{epoch}epoch results: "
        for key, d in self.stats.get(epoch, {}).items():
            message += f"\n[{key}] " + ", ".join(
                format_value(k, v) for k, v in d.items() if v is not None
            )
        return message

    def matplotlib_plot(self, output_dir: Union[str, Path]):
        """Plot every stat against the epoch, one png per stat."""
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
        import matplotlib.ticker as ticker

        output_dir = Path(output_dir)
        output_dir.mkdir(parents=True, exist_ok=True)
        epochs = sorted(self.stats)
        keys2 = sorted({k2 for k in self.get_keys() for k2 in self.get_keys2(k)})
        for key2 in keys2:
            plt.clf()
            for key in self.get_keys():
                y = [self.stats[e].get(key, {}).get(key2, np.nan) for e in epochs]
                plt.plot(epochs, y, label=key, marker="x")
            plt.legend()
            plt.title(f"epoch vs {key2}")
            plt.gca().get_xaxis().set_major_locator(ticker.MaxNLocator(integer=True))
            plt.xlabel("epoch")
            plt.ylabel(key2)
            plt.grid()
            plt.savefig(output_dir / f"{key2}.png")

    def tensorboard_add_scalar(self, summary_writer, epoch: int = None):
        if epoch is None:
            epoch = self.get_epoch()
        for key1 in self.get_keys(epoch):
            for key2 in self.get_keys2(key1, epoch):
                summary_writer.add_scalar(
                    f"{key1}_{key2}_epoch", self.stats[epoch][key1][key2], epoch
                )
