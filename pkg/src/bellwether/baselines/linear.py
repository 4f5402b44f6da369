"""Linear-transfer baseline: a source tree corrected by a line fitted on paired measurements."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .._seeding import derive_rng
from ..dataset import MeasurementTable
from ..metrics import nar_at
from ..outcome import TransferOutcome
from ..tree import RegressionTree, predict_best
from .sobol import sobol_rows


class DegenerateRegressionError(ArithmeticError):
    """The paired source predictions have zero variance, so no slope exists."""


class PairingError(ValueError):
    pass


def fit_line(x, y) -> tuple[float, float]:
    """Ordinary least squares ``y ~ slope * x + intercept``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2 or x.size != y.size:
        raise ValueError("need at least two paired points of equal length")
    xc = x - x.mean()
    sxx = float(xc @ xc)
    if sxx <= 0.0:
        raise DegenerateRegressionError("paired source predictions are constant")
    slope = float(xc @ (y - y.mean())) / sxx
    return slope, float(y.mean() - slope * x.mean())


class LinearTransferModel(RegressorMixin, BaseEstimator):
    """Predicts target performance as ``slope * source_model(x) + intercept``.

    ``fit`` trains the source tree on ``(X_source, y_source)`` and the line on
    configurations ``X_pairs`` measured in the target as ``y_pairs``.
    """

    def __init__(self, min_samples_leaf: int = 2, max_depth: int | None = None):
        self.min_samples_leaf = min_samples_leaf
        self.max_depth = max_depth

    def fit(self, X_source, y_source, X_pairs, y_pairs):
        self.source_model_ = RegressionTree(self.min_samples_leaf, self.max_depth).fit(X_source, y_source)
        X_pairs = check_array(X_pairs, dtype=float)
        self.slope_, self.intercept_ = fit_line(self.source_model_.predict(X_pairs), y_pairs)
        self.n_features_in_ = self.source_model_.n_features_in_
        return self

    def predict(self, X):
        check_is_fitted(self, "source_model_")
        return self.slope_ * self.source_model_.predict(X) + self.intercept_


def _pair_rows(source: MeasurementTable, target: MeasurementTable, n_pairs: int, rng) -> tuple[np.ndarray, np.ndarray]:
    common_t = [i for i in range(target.n_rows) if source.has(target.config(i))]
    if len(common_t) < n_pairs:
        raise PairingError(
            f"only {len(common_t)} configurations are measured in both {source.name!r} and {target.name!r}; "
            f"{n_pairs} pairs requested"
        )
    t_rows = np.sort(rng.choice(np.array(common_t), size=n_pairs, replace=False))
    s_rows = np.array([source.index_of(target.config(int(i))) for i in t_rows], dtype=int)
    return s_rows, t_rows


@dataclass(frozen=True)
class LinearDetail:
    outcome: TransferOutcome
    model: LinearTransferModel
    source_rows: np.ndarray
    pair_rows: np.ndarray


def linear_fit(
    source: MeasurementTable,
    target: MeasurementTable,
    training_coefficient: int = 3,
    n_pairs: int | None = None,
    rng_seed=0,
    min_samples_leaf: int = 2,
    max_depth: int | None = None,
    source_rows=None,
    charge: dict | None = None,
) -> LinearDetail:
    """Fit the linear transfer from ``source`` to ``target`` and score its pick.

    The source tree trains on ``T * N`` Sobol-chosen rows (N = option count),
    or on ``source_rows`` when given. ``n_pairs`` (default ``T * N``)
    configurations measured in both environments fit the line. ``charge``
    overrides the source side of the cost ledger, e.g. to bill all the data a
    method needs access to.
    """
    if training_coefficient < 1:
        raise ValueError("training coefficient must be >= 1")
    width = len(source.schema)
    n_pairs = training_coefficient * width if n_pairs is None else int(n_pairs)
    if n_pairs < 2:
        raise ValueError("n_pairs must be >= 2")
    rng = derive_rng(rng_seed, 12)
    if source_rows is None:
        need = training_coefficient * width
        if source.n_rows < need:
            raise PairingError(f"source {source.name!r} has {source.n_rows} rows; {need} needed")
        source_rows = sobol_rows(source, need, rng_seed)
    source_rows = np.asarray(source_rows, dtype=int)
    s_pairs, t_pairs = _pair_rows(source, target, n_pairs, rng)
    model = LinearTransferModel(min_samples_leaf, max_depth).fit(
        source.X[source_rows], source.perf[source_rows], source.X[s_pairs], target.perf[t_pairs]
    )
    pred = model.predict(target.X)
    best = predict_best(model, target.X, target.objective)
    ledger = dict(charge) if charge is not None else {source.name: int(np.unique(source_rows).size)}
    ledger[target.name] = ledger.get(target.name, 0) + int(t_pairs.size)
    outcome = TransferOutcome("linear", target.name, best.config, float(pred[best.index]), nar_at(target, best.index), ledger)
    return LinearDetail(outcome, model, source_rows, t_pairs)


def linear_transfer(source: MeasurementTable, target: MeasurementTable, training_coefficient: int = 3, n_pairs: int | None = None, rng_seed=0, **kw) -> TransferOutcome:
    """Like :func:`linear_fit` but returns only the shared result record."""
    return linear_fit(source, target, training_coefficient, n_pairs, rng_seed, **kw).outcome
