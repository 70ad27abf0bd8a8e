import dataclasses
from typing import FrozenSet
from typing import Sequence


@dataclasses.dataclass(frozen=True)
class PatchTruth:
    # indices (within the scene) of the ground-truth objects the patch holds
    object_ids: FrozenSet[int]
    passed: bool

    @property
    def has_objects(self) -> bool:
        return len(self.object_ids) > 0

    @property
    def object_count(self) -> int:
        return len(self.object_ids)


@dataclasses.dataclass(frozen=True)
class GateReport:
    filtered_patches: int
    correctly_filtered: int
    objects_lost: int
    total_objects: int
    total_patches: int

    @property
    def precision(self) -> float:
        if self.filtered_patches == 0:
            return 1.0
        return self.correctly_filtered / self.filtered_patches

    @property
    def recall(self) -> float:
        if self.total_objects == 0:
            return 1.0
        return 1.0 - self.objects_lost / self.total_objects

    @property
    def skip_ratio(self) -> float:
        if self.total_patches == 0:
            return 0.0
        return self.filtered_patches / self.total_patches

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d.update(
            precision=self.precision, recall=self.recall, skip_ratio=self.skip_ratio
        )
        return d

    def __add__(self, other: "GateReport") -> "GateReport":
        """Pool the counts of two disjoint sets of scenes."""
        return GateReport(
            *(
                a + b
                for a, b in zip(dataclasses.astuple(self), dataclasses.astuple(other))
            )
        )


def gate_report(patch_truths: Sequence[PatchTruth]) -> GateReport:
    """Gate precision/recall over the patches of one scene.

    An object is lost only when every patch holding it was filtered.

    Examples:
        >>> empty = PatchTruth(frozenset(), passed=False)
        >>> r = gate_report([empty, PatchTruth(frozenset({0}), passed=True)])
        >>> r.precision, r.recall, r.skip_ratio
        (1.0, 1.0, 0.5)
    """
    filtered = [t for t in patch_truths if not t.passed]
    objects = set().union(*(t.object_ids for t in patch_truths))
    surviving = set().union(*(t.object_ids for t in patch_truths if t.passed))
    return GateReport(
        filtered_patches=len(filtered),
        correctly_filtered=sum(not t.has_objects for t in filtered),
        objects_lost=len(objects - surviving),
        total_objects=len(objects),
        total_patches=len(patch_truths),
    )
