"""How good a chosen configuration is (NAR), plus the error measures it replaces."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
from scipy.stats import rankdata

from .dataset import MINIMIZE, MeasurementTable


class UndefinedMetricError(ArithmeticError):
    pass


class NarScore(NamedTuple):
    value: float
    degenerate: bool = False


def nar_at(target: MeasurementTable, row: int) -> NarScore:
    """NAR of the configuration measured at ``row`` of ``target``."""
    perf = target.perf
    lo, hi = float(perf.min()), float(perf.max())
    if hi == lo:
        return NarScore(0.0, True)
    best = lo if target.objective == MINIMIZE else hi
    return NarScore(100.0 * abs(best - float(perf[row])) / (hi - lo), False)


def nar(target: MeasurementTable, chosen) -> NarScore:
    """Normalized absolute residual (percent) of picking ``chosen`` in ``target``.

    The chosen configuration's *measured* performance is compared with the
    target's true optimum, scaled by the target's performance range. Raises
    KeyError if ``chosen`` was never measured in ``target``.
    """
    return nar_at(target, target.index_of(chosen))


def mmre(predicted: float, actual: float) -> float:
    """Magnitude of relative error, in percent."""
    if actual == 0:
        raise UndefinedMetricError("MMRE is undefined when the actual value is 0")
    return abs(predicted - actual) / abs(actual) * 100.0


def rank_difference(predicted_rank: int, actual_rank: int) -> int:
    if predicted_rank < 1 or actual_rank < 1:
        raise ValueError("ranks start at 1")
    return abs(int(predicted_rank) - int(actual_rank))


def dense_ranks(values) -> np.ndarray:
    """Dense ranks starting at 1 (ties share a rank, no gaps)."""
    return rankdata(np.asarray(values, dtype=float), method="dense").astype(int)
