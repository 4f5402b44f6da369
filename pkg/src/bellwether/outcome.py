from __future__ import annotations

from dataclasses import dataclass, field

from .metrics import NarScore


@dataclass(frozen=True)
class TransferOutcome:
    """What any optimizer returns for one target: its pick with the pick's NAR and cost.

    ``measurements`` maps environment name to the number of configurations
    that had to be measured there.
    """

    method: str
    target: str
    config: tuple
    predicted: float
    nar: NarScore
    measurements: dict = field(default_factory=dict)

    @property
    def cost(self) -> int:
        return int(sum(self.measurements.values()))

    @property
    def target_cost(self) -> int:
        return int(self.measurements.get(self.target, 0))
