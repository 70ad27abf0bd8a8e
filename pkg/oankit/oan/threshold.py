"""Activation threshold calibration from training-time map statistics.

During training every activation map contributes one (max, std) pair to a
bounded window; after training the threshold is

    T = (m + v)^2 / k

with ``m`` the mean of the recorded maxima and ``v`` the mean of the
recorded standard deviations.
"""

import collections
import dataclasses
import json
from pathlib import Path
from typing import Deque
from typing import Tuple
from typing import Union

import torch
from typeguard import check_argument_types

from oankit.oan.head import ActivationMap
from oankit.utils.errors import CalibrationError
from oankit.utils.errors import FileFormatError

DEFAULT_WINDOW = 2000


class ThresholdStats:
    """Ring buffer of per-map (max, population std) pairs."""

    def __init__(self, capacity: int = DEFAULT_WINDOW):
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self.window: Deque[Tuple[float, float]] = collections.deque(maxlen=capacity)

    def __len__(self) -> int:
        return len(self.window)

    def push(self, max_value: float, std_value: float):
        self.window.append((float(max_value), float(std_value)))

    def state_dict(self) -> dict:
        return {
            "capacity": self.capacity,
            "window": [[m, s] for m, s in self.window],
        }

    @classmethod
    def from_state_dict(cls, state: dict) -> "ThresholdStats":
        stats = cls(int(state["capacity"]))
        for m, s in state["window"]:
            stats.push(m, s)
        return stats


def map_statistics(probs: torch.Tensor) -> Tuple[float, float]:
    """(max, population std) of one S x S probability map."""
    flat = probs.detach().double().flatten()
    return float(flat.max()), float(flat.std(unbiased=False))


def record_stats(stats: ThresholdStats, amap: ActivationMap) -> ThresholdStats:
    """Push one entry per map in ``amap`` (batched maps are split)."""
    for single in amap.unbind():
        stats.push(*map_statistics(single.probs))
    return stats


@dataclasses.dataclass(frozen=True)
class Calibration:
    threshold: float
    k: float
    window: int
    m: float
    v: float

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def calibrate_threshold(stats: ThresholdStats, k: float = 4.0) -> Calibration:
    """T = (m + v)^2 / k over the recorded window.

    Examples:
        >>> stats = ThresholdStats()
        >>> stats.push(0.8, 0.1)
        >>> stats.push(0.6, 0.3)
        >>> round(calibrate_threshold(stats, 4.0).threshold, 12)
        0.2025
    """
    assert check_argument_types()
    if len(stats) == 0:
        raise CalibrationError("no activation statistics were recorded")
    if not k > 0:
        raise ValueError(f"k must be positive, got {k}")
    n = len(stats)
    m = sum(mx for mx, _ in stats.window) / n
    v = sum(sd for _, sd in stats.window) / n
    return Calibration(threshold=(m + v) ** 2 / k, k=k, window=n, m=m, v=v)


def save_stats(path: Union[Path, str], stats: ThresholdStats):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as f:
        json.dump(stats.state_dict(), f)


def load_stats(path: Union[Path, str]) -> ThresholdStats:
    path = Path(path)
    with path.open("r", encoding="utf-8") as f:
        try:
            state = json.load(f)
            return ThresholdStats.from_state_dict(state)
        except (ValueError, KeyError, TypeError) as e:
            raise FileFormatError(f"{path}: malformed threshold stats: {e}") from e
