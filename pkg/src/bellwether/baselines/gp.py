"""Two-task Gaussian-process transfer with a correlation-scaled product kernel.

The covariance between performance at configuration ``x`` in task ``s`` and
``x'`` in task ``t`` is ``B[s, t] * k_xx(x, x')`` with ``B = [[1, k_t], [k_t, 1]]``
and ``k_xx`` a squared-exponential kernel on min-max normalized options.
Each task's performance is centred and scaled by its own standard deviation,
so a unit signal variance in those units equals the source's sample variance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.spatial.distance import cdist
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .._seeding import derive_rng
from ..dataset import MeasurementTable
from ..metrics import nar_at
from ..outcome import TransferOutcome
from ..tree import predict_best


class GpNumericalError(ArithmeticError):
    pass


def pearson(x, y) -> float:
    """Pearson correlation clipped to [-1, 1]; 0 when either side is constant."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size != y.size or x.size < 2:
        raise ValueError("need at least two paired values")
    xc, yc = x - x.mean(), y - y.mean()
    den = np.sqrt(float(xc @ xc) * float(yc @ yc))
    if den == 0.0:
        return 0.0
    return float(np.clip((xc @ yc) / den, -1.0, 1.0))


def se_kernel(A, B, length_scale: float = 1.0) -> np.ndarray:
    return np.exp(-0.5 * cdist(A, B, "sqeuclidean") / length_scale**2)


def _standardize(y):
    mu = float(np.mean(y))
    sd = float(np.std(y))
    return mu, (sd if sd > 0 else 1.0)


class GpTransferModel(RegressorMixin, BaseEstimator):
    """Posterior mean of the target task given source and target observations.

    Inputs must already be on a common normalized scale. ``k_t`` defaults to
    the Pearson correlation of the two tasks on configurations they share.
    """

    def __init__(self, length_scale: float = 1.0, noise_ratio: float = 1e-6, k_t: float | None = None, max_jitter_steps: int = 8):
        self.length_scale = length_scale
        self.noise_ratio = noise_ratio
        self.k_t = k_t
        self.max_jitter_steps = max_jitter_steps

    def fit(self, Z_source, y_source, Z_target, y_target, shared=None):
        Zs = check_array(Z_source, dtype=float)
        Zt = check_array(Z_target, dtype=float)
        ys = np.asarray(y_source, dtype=float)
        yt = np.asarray(y_target, dtype=float)
        if self.length_scale <= 0:
            raise ValueError("length_scale must be > 0")
        if self.noise_ratio < 0:
            raise ValueError("noise_ratio must be >= 0")
        if self.k_t is not None:
            k_t = float(self.k_t)
        elif shared is not None:
            k_t = pearson(*shared)
        else:
            raise ValueError("k_t must be given or estimated from shared configurations")
        if not -1.0 <= k_t <= 1.0:
            raise ValueError("k_t must lie in [-1, 1]")
        self.k_t_ = k_t
        self.source_scale_ = _standardize(ys)
        self.target_scale_ = _standardize(yt)
        r = np.concatenate([(ys - self.source_scale_[0]) / self.source_scale_[1], (yt - self.target_scale_[0]) / self.target_scale_[1]])
        ns = Zs.shape[0]
        Z = np.vstack([Zs, Zt])
        K = se_kernel(Z, Z, self.length_scale)
        K[:ns, ns:] *= k_t
        K[ns:, :ns] *= k_t
        noise = self.noise_ratio
        eye = np.eye(K.shape[0])
        for step in range(self.max_jitter_steps + 1):
            try:
                factor = cho_factor(K + noise * eye, lower=True, check_finite=False)
                break
            except LinAlgError:
                noise = max(noise * 10.0, 1e-10)
        else:
            raise GpNumericalError(f"kernel matrix not positive definite after jitter up to {noise:g}")
        self.noise_ = noise
        self.alpha_ = cho_solve(factor, r, check_finite=False)
        self.Z_ = Z
        self.n_source_ = ns
        self.n_features_in_ = Z.shape[1]
        return self

    def predict(self, Z):
        check_is_fitted(self, "alpha_")
        Z = check_array(Z, dtype=float)
        k = se_kernel(Z, self.Z_, self.length_scale)
        k[:, : self.n_source_] *= self.k_t_
        mu, sd = self.target_scale_
        return mu + sd * (k @ self.alpha_)


@dataclass(frozen=True)
class GpDetail:
    outcome: TransferOutcome
    model: GpTransferModel


def gp_fit(
    source: MeasurementTable,
    target: MeasurementTable,
    target_rows,
    length_scale: float = 1.0,
    noise_ratio: float = 1e-6,
    source_rows=None,
    charge: dict | None = None,
) -> GpDetail:
    """Fit on ``source`` (all rows, or ``source_rows``) plus ``target_rows`` of the target; score the pick."""
    target_rows = np.asarray(target_rows, dtype=int)
    if target_rows.size < 2:
        raise ValueError("need at least two target measurements")
    s_rows = np.arange(source.n_rows) if source_rows is None else np.asarray(source_rows, dtype=int)
    schema = source.schema
    shared_t = [int(i) for i in target_rows if source.has(target.config(int(i)))]
    if len(shared_t) < 2:
        raise ValueError("need at least two configurations measured in both environments to estimate k_t")
    shared = (
        np.array([source.perf_of(target.config(i)) for i in shared_t]),
        target.perf[shared_t],
    )
    model = GpTransferModel(length_scale, noise_ratio).fit(
        schema.normalize(source.X[s_rows]), source.perf[s_rows],
        schema.normalize(target.X[target_rows]), target.perf[target_rows], shared=shared,
    )
    Zc = schema.normalize(target.X)
    pred = model.predict(Zc)
    best = predict_best(_Fixed(pred), Zc, target.objective)
    ledger = dict(charge) if charge is not None else {source.name: int(np.unique(s_rows).size)}
    ledger[target.name] = ledger.get(target.name, 0) + int(target_rows.size)
    outcome = TransferOutcome("gp", target.name, target.config(best.index), best.predicted, nar_at(target, best.index), ledger)
    return GpDetail(outcome, model)


class _Fixed:
    """Adapter so precomputed predictions reuse :func:`predict_best`'s tie rule."""

    def __init__(self, pred):
        self._pred = pred

    def predict(self, X):
        return self._pred


def gp_transfer(
    source: MeasurementTable,
    target: MeasurementTable,
    n_target: int | None = None,
    rng_seed=0,
    length_scale: float = 1.0,
    noise_ratio: float = 1e-6,
    source_rows=None,
    charge: dict | None = None,
) -> TransferOutcome:
    """GP transfer using ``n_target`` random target measurements (default ``3 * N``)."""
    n_target = 3 * len(target.schema) if n_target is None else int(n_target)
    n_target = min(n_target, target.n_rows)
    rows = derive_rng(rng_seed, 13).choice(target.n_rows, size=n_target, replace=False)
    return gp_fit(source, target, np.sort(rows), length_scale, noise_ratio, source_rows, charge).outcome
