"""Bellwether discovery by racing, and transfer from the discovered bellwether.

Discovery grows a per-environment pool of measured rows a fraction at a time.
Each round every surviving source trains a tree on its pool and is scored by
the NAR it achieves on every other source (or only on the other survivors,
with ``score_against="survivors"``); the scores are then Scott-Knott ranked.
A round that yields a single group, or repeats the previous grouping, costs a
life. Any other round eliminates the last-ranked group. Racing stops once a
single source is left or lives run out. It also stops before a round that the
measurement budget cannot pay for.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, clone
from sklearn.utils.validation import check_is_fitted

from ._seeding import derive_rng, label_key
from .dataset import MINIMIZE, EnvironmentCommunity, EnvironmentId, MeasurementTable, sample_size
from .metrics import NarScore, nar_at
from .outcome import TransferOutcome
from .ranking import RankedGroups, TestConfig, Treatment, align, scott_knott
from .tree import RegressionTree, predict_best

LIVES_EXHAUSTED = "lives_exhausted"
BUDGET_EXHAUSTED = "budget_exhausted"
NO_MORE_ELIMINATIONS = "no_more_eliminations"


class RacingConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RacingConfig:
    initial_fraction: float = 0.10
    fraction_step: float = 0.10
    budget: int | None = None
    lives: int = 5
    repeats: int = 5
    min_samples_leaf: int = 2
    max_depth: int | None = None
    n_boot: int = 1000
    confidence: float = 0.95
    a12_threshold: float = 0.6
    score_against: str = "all"

    def __post_init__(self):
        if not (0 < self.initial_fraction <= 1 and 0 < self.fraction_step <= 1):
            raise RacingConfigError("fractions must lie in (0, 1]")
        if self.lives < 1:
            raise RacingConfigError("lives must be >= 1")
        if self.budget is not None and self.budget < 1:
            raise RacingConfigError("budget must be >= 1")
        if self.repeats < 1:
            raise RacingConfigError("repeats must be >= 1")
        if self.score_against not in ("all", "survivors"):
            raise RacingConfigError("score_against must be 'all' or 'survivors'")

    @classmethod
    def fine_grained(cls, **kw) -> "RacingConfig":
        """1% start, 1% steps."""
        return cls(initial_fraction=0.01, fraction_step=0.01, **kw)

    def fraction_at(self, round_index: int) -> float:
        return min(1.0, self.initial_fraction + self.fraction_step * round_index)


@dataclass(frozen=True)
class RoundRecord:
    index: int
    fraction: float
    survivors: tuple
    ranking: RankedGroups
    eliminated: tuple
    cost_so_far: int
    lives_left: int


@dataclass(frozen=True)
class DiscoveryResult:
    bellwethers: tuple
    rounds: tuple
    cost: int
    termination: str
    pools: dict = field(default_factory=dict)

    @property
    def names(self) -> list[str]:
        return [e.name for e in self.bellwethers]

    @property
    def n_rounds(self) -> int:
        return len(self.rounds)

    @property
    def final_fraction(self) -> float:
        return self.rounds[-1].fraction if self.rounds else 0.0

    @property
    def eliminated(self) -> list[str]:
        return [name for r in self.rounds for name in r.eliminated]

    def to_text(self) -> str:
        buf = io.StringIO()
        for r in self.rounds:
            buf.write(
                f"round {r.index}: fraction={r.fraction:.2f} cost={r.cost_so_far} "
                f"lives={r.lives_left} eliminated={','.join(r.eliminated) or '-'}\n"
            )
            rows = [("Rank", "Environment", "Median", "IQR")] + [
                (str(k), lab, f"{med:.2f}", f"{iqr:.2f}") for k, lab, med, iqr in r.ranking.rows()
            ]
            buf.write(align(rows, right=(False, False, True, True)))
        buf.write(f"termination: {self.termination}\n")
        buf.write(f"cost: {self.cost}\n")
        buf.write(f"bellwethers: {', '.join(self.names)}\n")
        return buf.getvalue()


def _pick_rows(pred: np.ndarray, objective: str, rng, repeats: int) -> np.ndarray:
    """Rows chosen by ``repeats`` draws; ties between equal predictions broken by ``rng``.

    Without an rng the lowest index wins, as in :func:`predict_best`.
    """
    best = pred.min() if objective == MINIMIZE else pred.max()
    ties = np.flatnonzero(pred == best)
    if rng is None:
        return np.repeat(ties[:1], repeats)
    return rng.choice(ties, size=repeats)


def score_model(model, others: Sequence[MeasurementTable], rng=None, repeats: int = 1) -> list[NarScore]:
    """NAR of ``model``'s predicted-best configuration on each of ``others``.

    Scores are ordered target-major: ``repeats`` consecutive entries per target.
    """
    scores = []
    for k, target in enumerate(others):
        pred = model.predict(target.X)
        sub = None if rng is None else derive_rng(rng, k)
        for row in _pick_rows(pred, target.objective, sub, repeats):
            scores.append(nar_at(target, int(row)))
    return scores


def score_source(
    source_sample: MeasurementTable,
    others: Sequence[MeasurementTable],
    min_samples_leaf: int = 2,
    max_depth: int | None = None,
    rng=None,
    repeats: int = 1,
) -> list[NarScore]:
    """Train on ``source_sample`` and score its pick on every other environment."""
    if not others:
        raise ValueError("need at least one environment to score against")
    model = RegressionTree(min_samples_leaf, max_depth).fit(source_sample.X, source_sample.perf)
    return score_model(model, others, rng, repeats)


def _rank(tables, targets, pools: dict, seed, round_key: int, cfg: RacingConfig) -> RankedGroups:
    treatments = []
    for s in tables:
        others = [t for t in targets if t.name != s.name]
        pool = pools[s.name]
        model = RegressionTree(cfg.min_samples_leaf, cfg.max_depth).fit(s.X[pool], s.perf[pool])
        rng = derive_rng(seed, 2, round_key, label_key(s.name))
        scores = score_model(model, others, rng, cfg.repeats)
        treatments.append(Treatment(s.name, [x.value for x in scores]))
    sk_seed = int(derive_rng(seed, 3, round_key).integers(0, 2**31 - 1))
    test = TestConfig(cfg.n_boot, cfg.confidence, cfg.a12_threshold, sk_seed)
    return scott_knott(treatments, test)


def _restrict(partition: frozenset | None, keep: set) -> frozenset | None:
    if partition is None:
        return None
    return frozenset(g & keep for g in partition if g & keep)


def find_bellwether(community: EnvironmentCommunity, cfg: RacingConfig | None = None, rng_seed: int = 0) -> DiscoveryResult:
    """Race the community's source environments down to the bellwether group."""
    cfg = cfg or RacingConfig()
    sources = list(community.sources)
    if len(sources) < 2:
        raise RacingConfigError("bellwether discovery needs at least two source environments")
    budget = cfg.budget if cfg.budget is not None else sum(t.n_rows for t in sources)
    first = sum(sample_size(t.n_rows, cfg.initial_fraction) for t in sources)
    if first > budget:
        raise RacingConfigError(f"budget {budget} cannot pay for the first round ({first} measurements)")

    order = {t.name: derive_rng(rng_seed, 1, k).permutation(t.n_rows) for k, t in enumerate(sources)}
    have = {t.name: 0 for t in sources}
    survivors = list(sources)
    lives = cfg.lives
    cost = 0
    prev = None
    rounds = []
    termination = None
    ranking = None
    step = 0
    while True:
        fraction = cfg.fraction_at(step)
        want = {t.name: sample_size(t.n_rows, fraction) for t in survivors}
        new = sum(want[t.name] - have[t.name] for t in survivors)
        if cost + new > budget:
            termination = BUDGET_EXHAUSTED
            break
        cost += new
        have.update(want)
        pools = {t.name: order[t.name][: have[t.name]] for t in survivors}
        targets = sources if cfg.score_against == "all" else survivors
        ranking = _rank(survivors, targets, pools, rng_seed, step, cfg)
        partition = ranking.partition()
        names = {t.name for t in survivors}
        if len(ranking.groups) == 1 or partition == _restrict(prev, names):
            lives -= 1
            eliminated = ()
        else:
            eliminated = tuple(ranking.worst)
        prev = partition
        survivors = [t for t in survivors if t.name not in eliminated]
        rounds.append(
            RoundRecord(step + 1, fraction, tuple(sorted(names)), ranking, eliminated, cost, lives)
        )
        step += 1
        if len(survivors) == 1:
            termination = NO_MORE_ELIMINATIONS
            break
        if lives == 0:
            termination = LIVES_EXHAUSTED
            break

    best = set(ranking.best)
    bellwethers = tuple(t.env for t in sources if t.name in best)
    pools = {t.name: np.sort(order[t.name][: have[t.name]]) for t in sources}
    return DiscoveryResult(bellwethers, tuple(rounds), cost, termination, pools)


def round_robin(
    tables: Sequence[MeasurementTable],
    repeats: int = 30,
    rng_seed: int = 0,
    min_samples_leaf: int = 2,
    max_depth: int | None = None,
    test: TestConfig | None = None,
) -> tuple[RankedGroups, list[Treatment]]:
    """Exhaustive discovery: every table, fully measured, is a source for all the others."""
    if len(tables) < 2:
        raise ValueError("round robin needs at least two environments")
    treatments = []
    for s in tables:
        model = RegressionTree(min_samples_leaf, max_depth).fit(s.X, s.perf)
        others = [t for t in tables if t.name != s.name]
        rng = derive_rng(rng_seed, 4, label_key(s.name))
        treatments.append(Treatment(s.name, [x.value for x in score_model(model, others, rng, repeats)]))
    test = test or TestConfig(seed=int(derive_rng(rng_seed, 5).integers(0, 2**31 - 1)))
    return scott_knott(treatments, test), treatments


@dataclass(frozen=True)
class TransferChoice:
    source: EnvironmentId
    config: tuple
    predicted: float
    index: int


def transfer(
    bellwethers: Sequence[EnvironmentId],
    community: EnvironmentCommunity,
    target_candidates,
    objective: str = MINIMIZE,
    rng_seed: int = 0,
    min_samples_leaf: int = 2,
    max_depth: int | None = None,
    train_rows: dict | None = None,
) -> TransferChoice:
    """Pick one bellwether at random, train on it, return the best candidate.

    No target measurements are used. ``train_rows`` optionally restricts the
    bellwether's training data to given row indices (e.g. its racing pool).
    """
    if not bellwethers:
        raise ValueError("no bellwether to transfer from")
    rng = derive_rng(rng_seed, 6)
    env = bellwethers[int(rng.integers(0, len(bellwethers)))]
    table = community.table(env.name)
    if train_rows is not None and env.name in train_rows:
        table = table.subset(train_rows[env.name])
    model = RegressionTree(min_samples_leaf, max_depth).fit(table.X, table.perf)
    best = predict_best(model, target_candidates, objective)
    return TransferChoice(env, best.config, best.predicted, best.index)


def beetle_outcome(
    discovery: DiscoveryResult,
    community: EnvironmentCommunity,
    target: MeasurementTable,
    rng_seed: int = 0,
    min_samples_leaf: int = 2,
    max_depth: int | None = None,
    train_rows: dict | None = None,
    charge_discovery: bool = True,
) -> TransferOutcome:
    """Transfer onto ``target`` and score it; the ledger holds the racing cost."""
    choice = transfer(
        list(discovery.bellwethers), community, target.X, target.objective, rng_seed,
        min_samples_leaf, max_depth, train_rows,
    )
    ledger = {}
    if charge_discovery:
        ledger = {name: int(len(rows)) for name, rows in discovery.pools.items() if len(rows)}
    return TransferOutcome("beetle", target.name, choice.config, choice.predicted, nar_at(target, choice.index), ledger)


class BellwetherFinder(BaseEstimator):
    """Estimator wrapper around :func:`find_bellwether`.

    ``fit`` takes an :class:`EnvironmentCommunity`; afterwards
    ``bellwethers_`` names the rank-1 sources and ``result_`` holds the full
    per-round history.
    """

    def __init__(
        self,
        initial_fraction: float = 0.10,
        fraction_step: float = 0.10,
        budget: int | None = None,
        lives: int = 5,
        repeats: int = 5,
        min_samples_leaf: int = 2,
        max_depth: int | None = None,
        n_boot: int = 1000,
        confidence: float = 0.95,
        random_state: int = 0,
    ):
        self.initial_fraction = initial_fraction
        self.fraction_step = fraction_step
        self.budget = budget
        self.lives = lives
        self.repeats = repeats
        self.min_samples_leaf = min_samples_leaf
        self.max_depth = max_depth
        self.n_boot = n_boot
        self.confidence = confidence
        self.random_state = random_state

    def racing_config(self) -> RacingConfig:
        return RacingConfig(
            self.initial_fraction, self.fraction_step, self.budget, self.lives, self.repeats,
            self.min_samples_leaf, self.max_depth, self.n_boot, self.confidence,
        )

    def fit(self, community: EnvironmentCommunity, y=None):
        self.result_ = find_bellwether(community, self.racing_config(), self.random_state)
        self.bellwethers_ = self.result_.names
        return self


class BeetleTransfer(BaseEstimator):
    """Discover bellwethers, then act as a regressor trained on one of them.

    After ``fit(community)``, ``predict(X)`` gives predicted performance and
    ``best_configuration(candidates)`` the predicted optimum.
    """

    def __init__(self, finder: BellwetherFinder | None = None, min_samples_leaf: int = 2, max_depth: int | None = None, random_state: int = 0):
        self.finder = finder
        self.min_samples_leaf = min_samples_leaf
        self.max_depth = max_depth
        self.random_state = random_state

    def fit(self, community: EnvironmentCommunity, y=None):
        finder = self.finder if self.finder is not None else BellwetherFinder(random_state=self.random_state)
        self.finder_ = clone(finder).fit(community)
        rng = derive_rng(self.random_state, 6)
        names = self.finder_.bellwethers_
        self.source_ = names[int(rng.integers(0, len(names)))]
        table = community.table(self.source_)
        self.objective_ = table.objective
        self.model_ = RegressionTree(self.min_samples_leaf, self.max_depth).fit(table.X, table.perf)
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        return self.model_.predict(X)

    def best_configuration(self, candidates):
        check_is_fitted(self, "model_")
        return predict_best(self.model_, candidates, self.objective_)
