import dataclasses

from oankit.oan.head import ActivationMap


@dataclasses.dataclass(frozen=True)
class GateDecision:
    passed: bool
    confidence: float
    threshold_used: float


def gate(amap: ActivationMap, threshold: float) -> GateDecision:
    """Pass the patch to the detector iff max(probs) > threshold."""
    if not threshold >= 0:
        raise ValueError(f"threshold must be in [0, inf), got {threshold}")
    if amap.probs.dim() != 2:
        raise ValueError(
            f"gate takes a single S x S map, got {tuple(amap.probs.shape)}"
        )
    confidence = float(amap.confidence)
    return GateDecision(
        passed=confidence > threshold,
        confidence=confidence,
        threshold_used=float(threshold),
    )
