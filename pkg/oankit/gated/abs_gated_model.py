from abc import ABC
from abc import abstractmethod
from typing import Dict
from typing import List
from typing import Sequence

import torch

from oankit.detector.head import DetOutputs
from oankit.oan.head import ActivationMap
from oankit.synth.scene import GroundTruthBox


class AbsGatedModel(torch.nn.Module, ABC):
    """The common abstract class of models gated by an objectness map.

    Training goes through ``forward``, which returns a dict holding
    "loss", "stats", "weight" and the "activation" maps of the batch.
    Inference is split into the cheap part that decides whether a patch is
    worth detecting (``features`` up to the objectness tap, then
    ``activation``) and the part that only runs on passed patches
    (``detect``), so a pipeline can skip the latter entirely.

    Example:
        >>> class YourGatedModel(AbsGatedModel):
        ...     def forward(self, image, boxes):
        ...         ...
        ...         return dict(loss=loss, stats=stats, weight=weight,
        ...                     activation=amap)
    """

    @abstractmethod
    def forward(
        self, image: torch.Tensor, boxes: Sequence[Sequence[GroundTruthBox]]
    ) -> Dict[str, object]:
        raise NotImplementedError

    @abstractmethod
    def features(self, image: torch.Tensor) -> List[torch.Tensor]:
        """Backbone outputs needed by the objectness head."""
        raise NotImplementedError

    @abstractmethod
    def activation(self, features: List[torch.Tensor]) -> ActivationMap:
        raise NotImplementedError

    @abstractmethod
    def detect(
        self, image: torch.Tensor, features: List[torch.Tensor]
    ) -> DetOutputs:
        """Detector outputs, reusing (and extending) ``features``."""
        raise NotImplementedError
