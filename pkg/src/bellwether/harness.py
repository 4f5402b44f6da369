"""Experiment protocols for the four research questions, with CSV and text reports.

Every repeat is a pure function of (plan, repeat index), so repeats may run in
worker processes while the assembled output stays byte-identical.
"""

from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from ._seeding import derive_rng, label_key
from .baselines import gp_transfer, linear_transfer, non_transfer
from .beetle import DiscoveryResult, RacingConfig, beetle_outcome, find_bellwether, round_robin
from .dataset import EnvironmentCommunity, load_community, sample_indices
from .outcome import TransferOutcome
from .ranking import RankedGroups, TestConfig, Treatment, align, scott_knott
from .synthetic import generate, planted_spec

METHODS = ("beetle", "nontransfer", "linear", "gp", "exhaustive_rq1")
DEFAULT_FRACTIONS = tuple(round(0.1 * k, 1) for k in range(1, 11))


def repeat_seed(seed: int, r: int) -> int:
    return int(derive_rng(seed, 20, r).integers(0, 2**31 - 1))


def _test_seed(seed: int, tag: int) -> TestConfig:
    return TestConfig(seed=int(derive_rng(seed, 21, tag).integers(0, 2**31 - 1)))


def _map(fn: Callable, items: Sequence, jobs: int) -> list:
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))


def evaluation_targets(community: EnvironmentCommunity) -> tuple:
    """Designated targets, or the sources themselves when none are designated."""
    return community.targets or community.sources


def _quartiles(values) -> tuple[float, float]:
    v = np.asarray(values, dtype=float)
    q75, q25 = np.percentile(v, [75, 25])
    return float(np.median(v)), float(q75 - q25)


# --- plans and headers -------------------------------------------------------


@dataclass(frozen=True)
class ExperimentPlan:
    """What to run and where to write it.

    ``community`` is a manifest path or ``planted:SEED`` for the reference
    synthetic community.
    """

    community: str
    methods: tuple = ("beetle", "nontransfer", "linear", "gp", "exhaustive_rq1")
    repeats: int = 30
    seed: int = 0
    fractions: tuple = DEFAULT_FRACTIONS
    out_dir: str = "results"
    racing: RacingConfig = field(default_factory=RacingConfig)
    jobs: int = 1

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "fractions", tuple(float(f) for f in self.fractions))
        if not self.methods:
            raise ValueError("a plan needs at least one method")
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ValueError(f"unknown methods: {', '.join(unknown)}")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        if any(not 0 < f <= 1 for f in self.fractions):
            raise ValueError("fractions must lie in (0, 1]")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")

    def load(self) -> EnvironmentCommunity:
        return resolve_community(self.community)

    def header(self, experiment: str) -> str:
        r = self.racing
        parts = [
            f"experiment={experiment}",
            f"community={self.community}",
            f"seed={self.seed}",
            f"repeats={self.repeats}",
            f"fractions={','.join(f'{f:g}' for f in self.fractions)}",
            f"frac_start={r.initial_fraction:g}",
            f"frac_step={r.fraction_step:g}",
            f"budget={r.budget if r.budget is not None else 'all'}",
            f"lives={r.lives}",
            f"racing_repeats={r.repeats}",
            f"min_samples_leaf={r.min_samples_leaf}",
            f"max_depth={r.max_depth if r.max_depth is not None else 'none'}",
        ]
        return "# " + " ".join(parts)


def resolve_community(spec: str) -> EnvironmentCommunity:
    if spec.startswith("planted:"):
        try:
            seed = int(spec.split(":", 1)[1])
        except ValueError:
            raise ValueError(f"bad synthetic community spec {spec!r}; expected planted:SEED") from None
        return generate(planted_spec(seed))
    return load_community(spec)


def write_csv(path: Path, header: str, columns: Sequence[str], rows: Sequence[Sequence]) -> Path:
    buf = io.StringIO()
    buf.write(header + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(buf.getvalue(), encoding="utf-8")
    return path


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.6g}"
    return str(v)


def render_csv(text: str) -> str:
    """Aligned-text rendering of a result CSV; ``#`` header lines pass through."""
    lines = text.splitlines()
    comments = [ln for ln in lines if ln.startswith("#")]
    rows = list(csv.reader([ln for ln in lines if ln and not ln.startswith("#")]))
    if not rows:
        return "\n".join(comments) + ("\n" if comments else "")
    width = max(len(r) for r in rows)
    rows = [r + [""] * (width - len(r)) for r in rows]
    numeric = [all(_is_number(r[j]) for r in rows[1:]) and len(rows) > 1 for j in range(width)]
    out = "\n".join(comments) + ("\n" if comments else "")
    return out + align(rows, right=numeric)


def _is_number(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


# --- RQ1 -----------------------------------------------------------------


def run_rq1(community: EnvironmentCommunity, repeats: int = 30, seed: int = 0) -> tuple[RankedGroups, list[Treatment]]:
    """Exhaustive round-robin over the sources at full sampling."""
    if len(community.sources) < 2:
        raise ValueError("RQ1 needs at least two source environments")
    return round_robin(community.sources, repeats=repeats, rng_seed=seed, test=_test_seed(seed, 1))


def write_rq1(plan: ExperimentPlan, ranking: RankedGroups, out: Path) -> list[Path]:
    rows = ranking.rows()
    p = write_csv(out / "rq1_ranks.csv", plan.header("rq1"), ["rank", "environment", "median_nar", "iqr_nar"], rows)
    return [p]


# --- RQ2 -----------------------------------------------------------------


@dataclass(frozen=True)
class DeltaRow:
    target: str
    median_full: float
    iqr_full: float
    median_racing: float
    iqr_racing: float

    @property
    def delta(self) -> float:
        return abs(self.median_full - self.median_racing)


@dataclass(frozen=True)
class DeltaReport:
    rows: tuple
    fractions: tuple
    costs: tuple
    exhaustive_best: tuple

    def csv_rows(self) -> list[tuple]:
        return [(r.target, r.median_full, r.iqr_full, r.median_racing, r.iqr_racing, r.delta) for r in self.rows]


def _rq2_repeat(args):
    community, cfg, best, seed, r = args
    s = repeat_seed(seed, r)
    disc = find_bellwether(community, cfg, s)
    full_best = [community.table(n).env for n in best]
    per_target = []
    for t in evaluation_targets(community):
        racing = beetle_outcome(disc, community, t, s, cfg.min_samples_leaf, cfg.max_depth, train_rows=disc.pools)
        full = _transfer_full(full_best, community, t, s, cfg)
        per_target.append((t.name, full.nar.value, racing.nar.value))
    return disc.final_fraction, disc.cost, disc.names, per_target


def _transfer_full(envs, community, target, seed, cfg) -> TransferOutcome:
    disc = DiscoveryResult(tuple(envs), (), 0, "exhaustive")
    return beetle_outcome(disc, community, target, seed, cfg.min_samples_leaf, cfg.max_depth, charge_discovery=False)


def run_rq2(
    community: EnvironmentCommunity,
    cfg: RacingConfig | None = None,
    repeats: int = 30,
    seed: int = 0,
    jobs: int = 1,
) -> tuple[DiscoveryResult, DeltaReport]:
    """Racing at the fine schedule versus the exhaustive bellwether at full sampling.

    Returns the first repeat's discovery (for the round-by-round report) and
    the per-target median/IQR table with the difference column.
    """
    cfg = cfg or RacingConfig.fine_grained()
    ranking, _ = run_rq1(community, repeats, seed)
    best = tuple(ranking.best)
    results = _map(_rq2_repeat, [(community, cfg, best, seed, r) for r in range(repeats)], jobs)
    first = find_bellwether(community, cfg, repeat_seed(seed, 0))
    names = [n for n, _, _ in results[0][3]]
    rows = []
    for k, name in enumerate(names):
        full = [res[3][k][1] for res in results]
        racing = [res[3][k][2] for res in results]
        rows.append(DeltaRow(name, *_quartiles(full), *_quartiles(racing)))
    full_all = [v[1] for res in results for v in res[3]]
    racing_all = [v[2] for res in results for v in res[3]]
    rows.append(DeltaRow("all", *_quartiles(full_all), *_quartiles(racing_all)))
    report = DeltaReport(tuple(rows), tuple(res[0] for res in results), tuple(res[1] for res in results), best)
    return first, report


def write_rq2(plan: ExperimentPlan, first: DiscoveryResult, report: DeltaReport, out: Path) -> list[Path]:
    header = plan.header("rq2")
    p1 = write_csv(
        out / "rq2_delta.csv", header,
        ["target", "median_nar_100", "iqr_nar_100", "median_nar_racing", "iqr_nar_racing", "delta"],
        report.csv_rows(),
    )
    p2 = write_csv(
        out / "rq2_runs.csv", header, ["repeat", "final_fraction", "cost"],
        [(r, f, c) for r, (f, c) in enumerate(zip(report.fractions, report.costs))],
    )
    p3 = out / "rq2_rounds.txt"
    p3.write_text(header + "\n" + first.to_text(), encoding="utf-8")
    return [p1, p2, p3]


# --- RQ3 -----------------------------------------------------------------


@dataclass(frozen=True)
class WinLossSummary:
    """Win/loss tallies keyed by (fraction, target); a tie counts as a win."""

    cells: dict

    def __post_init__(self):
        for (w, l) in self.cells.values():
            if w < 0 or l < 0:
                raise ValueError("counts must be non-negative")

    @property
    def fractions(self) -> list[float]:
        return sorted({f for f, _ in self.cells})

    @property
    def targets(self) -> list[str]:
        return sorted({t for _, t in self.cells})

    def pooled(self, fraction: float) -> tuple[int, int]:
        w = sum(v[0] for (f, _), v in self.cells.items() if f == fraction)
        l = sum(v[1] for (f, _), v in self.cells.items() if f == fraction)
        return w, l

    @property
    def wins(self) -> int:
        return sum(v[0] for v in self.cells.values())

    @property
    def losses(self) -> int:
        return sum(v[1] for v in self.cells.values())

    def per_target_rows(self) -> list[tuple]:
        return [(f, t, *self.cells[(f, t)]) for f in self.fractions for t in self.targets if (f, t) in self.cells]

    def pooled_rows(self) -> list[tuple]:
        return [(f, *self.pooled(f)) for f in self.fractions]


def _rq3_repeat(args):
    community, cfg, fractions, seed, r, level = args
    s = repeat_seed(seed, r)
    disc = find_bellwether(community, cfg, s)
    cells = []
    for ti, t in enumerate(evaluation_targets(community)):
        fixed = None
        if level == "discovered":
            fixed = beetle_outcome(disc, community, t, s, cfg.min_samples_leaf, cfg.max_depth, train_rows=disc.pools)
        for fi, f in enumerate(fractions):
            if fixed is None:
                rows = {
                    e.name: sample_indices(community.table(e.name).n_rows, f, derive_rng(s, 31, fi, label_key(e.name)))
                    for e in disc.bellwethers
                }
                beetle = beetle_outcome(disc, community, t, s, cfg.min_samples_leaf, cfg.max_depth, train_rows=rows)
            else:
                beetle = fixed
            base = non_transfer(t, f, derive_rng(s, 30, fi, label_key(t.name)), cfg.min_samples_leaf, cfg.max_depth)
            cells.append((f, t.name, beetle.nar.value <= base.nar.value))
    return cells


def run_rq3(
    community: EnvironmentCommunity,
    fractions: Sequence[float] = DEFAULT_FRACTIONS,
    repeats: int = 30,
    seed: int = 0,
    cfg: RacingConfig | None = None,
    jobs: int = 1,
    beetle_level: str = "fraction",
) -> WinLossSummary:
    """BEETLE against non-transfer at each sampling fraction; ties count as BEETLE wins.

    With ``beetle_level="fraction"`` the discovered bellwether is trained on
    the same fraction of its own rows that the non-transfer learner gets of
    the target. With ``"discovered"`` it keeps the rows paid for during racing.
    """
    if beetle_level not in ("fraction", "discovered"):
        raise ValueError("beetle_level must be 'fraction' or 'discovered'")
    cfg = cfg or RacingConfig()
    fractions = tuple(float(f) for f in fractions)
    results = _map(_rq3_repeat, [(community, cfg, fractions, seed, r, beetle_level) for r in range(repeats)], jobs)
    cells: dict = {}
    for res in results:
        for f, name, win in res:
            w, l = cells.get((f, name), (0, 0))
            cells[(f, name)] = (w + int(win), l + int(not win))
    return WinLossSummary(cells)


def write_rq3(plan: ExperimentPlan, summary: WinLossSummary, out: Path) -> list[Path]:
    header = plan.header("rq3")
    p1 = write_csv(out / "rq3_per_target.csv", header, ["fraction", "target", "wins", "losses"], summary.per_target_rows())
    p2 = write_csv(out / "rq3_pooled.csv", header, ["fraction", "wins", "losses"], summary.pooled_rows())
    return [p1, p2]


# --- RQ4 -----------------------------------------------------------------


@dataclass(frozen=True)
class CostRow:
    method: str
    runs: int
    total: int
    mean: float

    @property
    def log10_mean(self) -> float:
        return float(np.log10(self.mean)) if self.mean > 0 else float("-inf")


def full_data_charge(community: EnvironmentCommunity) -> dict:
    """Ledger for methods that need every source fully measured."""
    return {t.name: t.n_rows for t in community.sources}


def _rq4_repeat(args):
    community, cfg, seed, r = args
    s = repeat_seed(seed, r)
    disc = find_bellwether(community, cfg, s)
    charge = full_data_charge(community)
    out = []
    for t in evaluation_targets(community):
        pick = derive_rng(s, 40, label_key(t.name))
        candidates = [x for x in community.sources if x.name != t.name]
        src = candidates[int(pick.integers(0, len(candidates)))]
        out.append(beetle_outcome(disc, community, t, s, cfg.min_samples_leaf, cfg.max_depth, train_rows=disc.pools))
        out.append(
            linear_transfer(
                src, t, 3, None, s, min_samples_leaf=cfg.min_samples_leaf, max_depth=cfg.max_depth,
                source_rows=np.arange(src.n_rows), charge=charge,
            )
        )
        out.append(gp_transfer(src, t, None, s, charge=charge))
    return out


def run_rq4(
    community: EnvironmentCommunity,
    repeats: int = 30,
    seed: int = 0,
    cfg: RacingConfig | None = None,
    jobs: int = 1,
) -> tuple[RankedGroups, list[CostRow], list[TransferOutcome]]:
    """BEETLE against both transfer baselines as Scott-Knott treatments, plus a cost table.

    The two baselines train on a full source table (picked at random each
    repeat) and are charged for every source table, since without discovery
    they need all available data.
    """
    cfg = cfg or RacingConfig()
    results = _map(_rq4_repeat, [(community, cfg, seed, r) for r in range(repeats)], jobs)
    outcomes = [o for res in results for o in res]
    labels = ("beetle", "linear", "gp")
    treatments = [Treatment(m, [o.nar.value for o in outcomes if o.method == m]) for m in labels]
    ranking = scott_knott(treatments, _test_seed(seed, 4))
    costs = []
    for m in labels:
        mine = [o.cost for o in outcomes if o.method == m]
        costs.append(CostRow(m, len(mine), int(sum(mine)), float(np.mean(mine))))
    return ranking, costs, outcomes


def write_rq4(plan: ExperimentPlan, ranking: RankedGroups, costs: list[CostRow], out: Path) -> list[Path]:
    header = plan.header("rq4")
    p1 = write_csv(out / "rq4_ranks.csv", header, ["rank", "method", "median_nar", "iqr_nar"], ranking.rows())
    p2 = write_csv(
        out / "rq4_cost.csv", header, ["method", "runs", "total_measurements", "mean_measurements", "log10_mean"],
        [(c.method, c.runs, c.total, c.mean, c.log10_mean) for c in costs],
    )
    return [p1, p2]


def plan_dict(plan: ExperimentPlan) -> dict:
    d = asdict(plan)
    d["racing"] = asdict(plan.racing)
    return d
