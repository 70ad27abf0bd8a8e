import dataclasses
import math


@dataclasses.dataclass(frozen=True)
class Detection:
    """Scored axis-aligned box in patch or scene coordinates."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float
    class_id: int
    score: float

    def __post_init__(self):
        coords = (self.x_min, self.y_min, self.x_max, self.y_max)
        if not all(math.isfinite(v) for v in coords):
            raise ValueError(f"non-finite box: {coords}")
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(f"box must be ordered: {coords}")
        if not self.score > 0:
            raise ValueError(f"score must be positive: {self.score}")

    @property
    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)

    def sort_key(self):
        """Deterministic ranking: score desc, then geometry and class asc."""
        return (
            -self.score,
            self.x_min,
            self.y_min,
            self.class_id,
            self.x_max,
            self.y_max,
        )

    def to_dict(self) -> dict:
        return dict(
            x_min=self.x_min,
            y_min=self.y_min,
            x_max=self.x_max,
            y_max=self.y_max,
            class_id=self.class_id,
            score=self.score,
        )
