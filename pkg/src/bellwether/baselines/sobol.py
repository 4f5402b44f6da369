"""Low-discrepancy sampling over a finite table of measured configurations."""

from __future__ import annotations

import warnings

import numpy as np
from scipy.spatial import cKDTree
from scipy.stats import qmc

from .._seeding import derive_rng
from ..dataset import MeasurementTable

MAX_DIMENSION = 21201


class SobolSampler:
    """Unscrambled Sobol sequence (Joe-Kuo direction numbers) with a point counter.

    The first point is the zero vector. ``draw(n)`` continues from ``index``.
    """

    def __init__(self, dimension: int):
        if not 1 <= dimension <= MAX_DIMENSION:
            raise ValueError(f"dimension must be in [1, {MAX_DIMENSION}]")
        self.dimension = int(dimension)
        self._engine = qmc.Sobol(self.dimension, scramble=False)

    @property
    def index(self) -> int:
        return int(self._engine.num_generated)

    def draw(self, n: int) -> np.ndarray:
        if n < 0:
            raise ValueError("n must be >= 0")
        with warnings.catch_warnings():
            # balance warnings for non power-of-two draws are irrelevant here
            warnings.simplefilter("ignore", UserWarning)
            return self._engine.random(n)

    def reset(self) -> "SobolSampler":
        self._engine.reset()
        return self


def sobol_rows(table: MeasurementTable, count: int, rng_seed=0, max_points: int = 1 << 16) -> np.ndarray:
    """Row indices of ``table`` picked by mapping Sobol points to their nearest measured configuration.

    Points are mapped in sequence order and the first ``count`` distinct rows
    are kept. If the sequence cannot reach ``count``
    distinct rows within ``max_points`` draws, the rest are filled at random.
    """
    count = min(int(count), table.n_rows)
    if count < 1:
        raise ValueError("count must be >= 1")
    Z = table.schema.normalize(table.X)
    tree = cKDTree(Z)
    sampler = SobolSampler(Z.shape[1])
    chosen: list[int] = []
    seen: set[int] = set()
    batch = 64
    while len(chosen) < count and sampler.index < max_points:
        _, idx = tree.query(sampler.draw(batch))
        for i in np.atleast_1d(idx):
            i = int(i)
            if i not in seen:
                seen.add(i)
                chosen.append(i)
                if len(chosen) == count:
                    break
        batch = min(batch * 2, max_points - sampler.index) or 1
    if len(chosen) < count:
        rest = np.setdiff1d(np.arange(table.n_rows), chosen)
        fill = derive_rng(rng_seed, 11).choice(rest, size=count - len(chosen), replace=False)
        chosen.extend(int(i) for i in fill)
    return np.array(chosen, dtype=int)
