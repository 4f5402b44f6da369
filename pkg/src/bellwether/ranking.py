"""Scott-Knott ranking gated by a bootstrap test and the A12 effect size."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._seeding import derive_rng, label_key


@dataclass(frozen=True)
class Treatment:
    label: str
    samples: tuple

    def __post_init__(self):
        samples = tuple(float(v) for v in self.samples)
        if not samples:
            raise ValueError(f"treatment {self.label!r} has no samples")
        object.__setattr__(self, "samples", samples)

    @property
    def mean(self) -> float:
        return float(np.mean(self.samples))

    @property
    def median(self) -> float:
        return float(np.median(self.samples))

    @property
    def iqr(self) -> float:
        q75, q25 = np.percentile(self.samples, [75, 25])
        return float(q75 - q25)


@dataclass(frozen=True)
class MemberSummary:
    label: str
    median: float
    iqr: float
    mean: float


@dataclass(frozen=True)
class RankGroup:
    rank: int
    members: tuple

    @property
    def labels(self) -> list[str]:
        return [m.label for m in self.members]


@dataclass(frozen=True)
class RankedGroups:
    groups: tuple
    _lookup: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "groups", tuple(self.groups))
        object.__setattr__(self, "_lookup", {m.label: g.rank for g in self.groups for m in g.members})

    def rank_of(self, label: str) -> int:
        return self._lookup[label]

    @property
    def labels(self) -> list[str]:
        return [m.label for g in self.groups for m in g.members]

    @property
    def best(self) -> list[str]:
        return self.groups[0].labels

    @property
    def worst(self) -> list[str]:
        return self.groups[-1].labels

    def partition(self) -> frozenset:
        """Grouping as a set of sets, ignoring order inside and across groups."""
        return frozenset(frozenset(g.labels) for g in self.groups)

    def rows(self) -> list[tuple]:
        return [(g.rank, m.label, m.median, m.iqr) for g in self.groups for m in g.members]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["rank", "label", "median", "iqr"])
        for rank, label, med, iqr in self.rows():
            w.writerow([rank, label, f"{med:.6g}", f"{iqr:.6g}"])
        return buf.getvalue()

    def to_text(self) -> str:
        rows = [("Rank", "Label", "Median", "IQR")] + [
            (str(r), lab, f"{med:.2f}", f"{iqr:.2f}") for r, lab, med, iqr in self.rows()
        ]
        return align(rows, right=(False, False, True, True))


def align(rows: Sequence[Sequence[str]], right: Sequence[bool] | None = None) -> str:
    widths = [max(len(r[j]) for r in rows) for j in range(len(rows[0]))]
    right = right or [False] * len(widths)
    out = []
    for r in rows:
        cells = [c.rjust(w) if rj else c.ljust(w) for c, w, rj in zip(r, widths, right)]
        out.append("  ".join(cells).rstrip())
    return "\n".join(out) + "\n"


def bootstrap_differs(a, b, n_boot: int = 1000, confidence: float = 0.95, rng_seed=0) -> bool:
    """Efron-style bootstrap test on the difference of means.

    Both samples are recentred on the pooled mean to form the null, each is
    resampled with replacement, and the test rejects when fewer than
    ``1 - confidence`` of the resampled differences are at least as extreme
    as the observed one.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    observed = abs(a.mean() - b.mean())
    pooled = np.concatenate([a, b]).mean()
    a0 = a - a.mean() + pooled
    b0 = b - b.mean() + pooled
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else derive_rng(rng_seed)
    ma = a0[rng.integers(0, a0.size, size=(n_boot, a0.size))].mean(axis=1)
    mb = b0[rng.integers(0, b0.size, size=(n_boot, b0.size))].mean(axis=1)
    extreme = np.count_nonzero(np.abs(ma - mb) >= observed)
    return extreme / n_boot < 1.0 - confidence


def a12(a, b) -> float:
    """Vargha-Delaney A12: P(x > y) + 0.5 * P(x == y) for x in a, y in b."""
    a = np.asarray(a, dtype=float)
    b = np.sort(np.asarray(b, dtype=float))
    below = np.searchsorted(b, a, side="left")
    at_or_below = np.searchsorted(b, a, side="right")
    more = int(below.sum())
    ties = int((at_or_below - below).sum())
    return (more + 0.5 * ties) / (a.size * b.size)


def small_effect(a, b, threshold: float = 0.6) -> bool:
    x = a12(a, b)
    return max(x, 1.0 - x) < threshold


@dataclass(frozen=True)
class TestConfig:
    n_boot: int = 1000
    confidence: float = 0.95
    a12_threshold: float = 0.6
    seed: int = 0


def _split_stat(cum_n, cum_s, k):
    """Expected squared deviation of the two halves' means from the grand mean."""
    n, s = cum_n[-1], cum_s[-1]
    mu = s / n
    best, best_k = -np.inf, None
    for cut in range(1, k):
        nl, sl = cum_n[cut - 1], cum_s[cut - 1]
        nr, sr = n - nl, s - sl
        delta = nl / n * (sl / nl - mu) ** 2 + nr / n * (sr / nr - mu) ** 2
        if delta > best:
            best, best_k = delta, cut
    return best_k


def scott_knott(treatments: Sequence[Treatment], config: TestConfig | None = None) -> RankedGroups:
    """Partition treatments into ranked groups of indistinguishable members.

    Lower values rank better. Treatments are sorted by mean (label breaks
    ties, so input order never matters), the cut maximizing the between-group
    spread is tested, and both halves are recursed into only when the
    bootstrap test finds a difference and the A12 effect is not small.
    """
    config = config or TestConfig()
    if not treatments:
        raise ValueError("scott_knott needs at least one treatment")
    labels = [t.label for t in treatments]
    if len(set(labels)) != len(labels):
        raise ValueError("treatment labels must be unique")
    ordered = sorted(treatments, key=lambda t: (t.mean, t.label))

    def accept(left, right) -> bool:
        lv = np.concatenate([t.samples for t in left])
        rv = np.concatenate([t.samples for t in right])
        if small_effect(lv, rv, config.a12_threshold):
            return False
        key = sorted(label_key(t.label) for t in left + right)
        rng = derive_rng(config.seed, len(left), *key[:8])
        return bootstrap_differs(lv, rv, config.n_boot, config.confidence, rng)

    def divide(part: list) -> list[list]:
        if len(part) < 2:
            return [part]
        sizes = np.array([len(t.samples) for t in part], dtype=float)
        sums = np.array([float(np.sum(t.samples)) for t in part])
        cut = _split_stat(np.cumsum(sizes), np.cumsum(sums), len(part))
        left, right = part[:cut], part[cut:]
        if not accept(left, right):
            return [part]
        return divide(left) + divide(right)

    parts = divide(ordered)

    def pooled_median(part):
        return float(np.median(np.concatenate([t.samples for t in part])))

    parts = sorted(enumerate(parts), key=lambda p: (pooled_median(p[1]), p[0]))
    groups = []
    for rank, (_, part) in enumerate(parts, start=1):
        members = sorted(part, key=lambda t: (t.median, t.mean, t.label))
        groups.append(RankGroup(rank, tuple(MemberSummary(t.label, t.median, t.iqr, t.mean) for t in members)))
    return RankedGroups(tuple(groups))
