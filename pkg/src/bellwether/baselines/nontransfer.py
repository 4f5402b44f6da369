"""Non-transfer baseline: learn only from a sample of the target itself."""

from __future__ import annotations

from ..dataset import MeasurementTable, sample_indices
from ..metrics import nar_at
from ..outcome import TransferOutcome
from ..tree import RegressionTree, predict_best


def non_transfer(
    target: MeasurementTable,
    fraction: float,
    rng_seed=0,
    min_samples_leaf: int = 2,
    max_depth: int | None = None,
) -> TransferOutcome:
    """Measure ``fraction`` of the target, fit a tree, pick its predicted best configuration."""
    if target.degenerate:
        raise ValueError(f"target {target.name!r} has constant performance")
    rows = sample_indices(target.n_rows, fraction, rng_seed)
    model = RegressionTree(min_samples_leaf, max_depth).fit(target.X[rows], target.perf[rows])
    best = predict_best(model, target.X, target.objective)
    return TransferOutcome(
        "nontransfer", target.name, best.config, best.predicted, nar_at(target, best.index), {target.name: int(rows.size)}
    )
