"""Acceptance criteria, one test each, at pinned tolerances.

Every test appends a ``PASS``/``FAIL`` line that is echoed at the end of the
pytest run. ``python tests/test_acceptance.py`` runs them without pytest.
"""

import io
import shutil
import sys
import time
from pathlib import Path

import numpy as np
from scipy.stats import norm

from bellwether.baselines import gp_fit, linear_fit
from bellwether.beetle import RacingConfig, find_bellwether
from bellwether.cli import main as cli_main
from bellwether.dataset import load_community, save_community, table_to_csv
from bellwether.harness import run_rq1, run_rq3, run_rq4
from bellwether.metrics import mmre, nar, nar_at, rank_difference
from bellwether.ranking import Treatment, a12, bootstrap_differs, scott_knott
from bellwether.synthetic import PLANTED, CommunitySpec, EnvSpec, generate, planted_spec
from bellwether.tree import RegressionTree, _best_split

sys.path.insert(0, str(Path(__file__).parent))
from conftest import ACCEPTANCE_LINES, binary_grid, make_table  # noqa: E402

SEEDS = range(30)

# pinned tolerances and thresholds
EXACT_TOL = 1e-9
BOOT_MAX_FALSE_REJECT = 0.075
PLANTED_RANK1_MIN = 27
RACING_SUBSET_MIN = 0.90
RACING_COST_MAX = 0.50
RQ3_SEED_SHARE_MIN = 0.80
RUNTIME = {1: 1, 2: 5, 3: 60, 4: 30, 5: 600, 6: 120, 7: 600, 8: 600, 9: 120}


def record(n: int, title: str, ok: bool, detail: str, elapsed: float) -> bool:
    ok = ok and elapsed < RUNTIME[n]
    line = f"{'PASS' if ok else 'FAIL'}  criterion {n}: {title} | {detail} | {elapsed:.1f}s (limit {RUNTIME[n]}s)"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def sse(y):
    return float(((y - y.mean()) ** 2).sum()) if y.size else 0.0


# --- 1 -------------------------------------------------------------------

def test_criterion_1_metric_worked_example():
    t0 = time.perf_counter()
    table = make_table("ex", binary_grid(1), [0.09, 0.11])
    n = nar(table, (1.0,)).value
    m = mmre(0.11, 0.09)
    r = rank_difference(10, 100)
    ok = abs(n - 100.0) <= EXACT_TOL and abs(m - 200.0 / 9.0) <= EXACT_TOL and r == 90
    assert record(1, "metric worked example", ok, f"NAR={n:.12g} MMRE={m:.12g} R={r}", time.perf_counter() - t0)


# --- 2 -------------------------------------------------------------------

def test_criterion_2_nar_affine_invariance():
    t0 = time.perf_counter()
    X = binary_grid(6)
    worst = 0.0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        y = rng.normal(0, rng.uniform(0.1, 100), size=64)
        a, b = rng.uniform(0.01, 50), rng.uniform(-100, 100)
        t, u = make_table("t", X, y), make_table("u", X, a * y + b)
        worst = max(worst, max(abs(nar_at(t, i).value - nar_at(u, i).value) for i in range(64)))
    # perfs 10 (optimum), 12, 30: the lower-MMRE prediction picks the worse configuration
    t = make_table("e", binary_grid(2)[:3], [10.0, 12.0, 30.0])
    mmre_prefers_second = mmre(27.0, 30.0) < mmre(6.0, 12.0)
    nar_prefers_first = nar_at(t, 1).value < nar_at(t, 2).value
    ok = worst <= EXACT_TOL and mmre_prefers_second and nar_prefers_first
    assert record(2, "NAR affine invariance", ok,
                  f"max |dNAR|={worst:.2e} over 100 tables; MMRE/NAR disagree={mmre_prefers_second and nar_prefers_first}",
                  time.perf_counter() - t0)


# --- 3 -------------------------------------------------------------------

def test_criterion_3_statistical_stack():
    t0 = time.perf_counter()
    a12_ok = True
    for seed in range(200):
        rng = np.random.default_rng(seed)
        a = rng.integers(0, 8, size=rng.integers(1, 25)).astype(float)
        b = rng.integers(0, 8, size=rng.integers(1, 25)).astype(float)
        more = sum(1 for x in a for y in b if x > y)
        ties = sum(1 for x in a for y in b if x == y)
        a12_ok &= a12(a, b) == (more + 0.5 * ties) / (a.size * b.size)
    rejections = 0
    for seed in range(1000):
        rng = np.random.default_rng(10_000 + seed)
        rejections += bootstrap_differs(rng.normal(size=30), rng.normal(size=30), rng_seed=seed)
    rate = rejections / 1000
    q = norm.ppf((np.arange(30) + 0.5) / 30)
    ranked = scott_knott([Treatment(k, m + q) for k, m in (("a", 0.0), ("b", 0.1), ("c", 50.0), ("d", 50.2))])
    groups = [set(g.labels) for g in ranked.groups]
    ok = a12_ok and rate <= BOOT_MAX_FALSE_REJECT and groups == [{"a", "b"}, {"c", "d"}]
    assert record(3, "statistical stack calibration", ok,
                  f"A12 exact on 200 pairs={a12_ok}; bootstrap false rejections={rate:.3f}; SK groups={len(groups)}",
                  time.perf_counter() - t0)


# --- 4 -------------------------------------------------------------------

def test_criterion_4_tree_soundness():
    t0 = time.perf_counter()
    m = RegressionTree(min_samples_leaf=2).fit([[0.0], [0.0], [1.0], [1.0]], [0.0, 0.0, 10.0, 10.0])
    separable = (m.feature_[0] == 0 and m.threshold_[0] == 0.5 and m.n_leaves_ == 2
                 and m.predict([[0.0], [1.0]]).tolist() == [0.0, 10.0])
    sse_ok, gain_ok = True, True
    for seed in range(100):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(10, 80))
        X = rng.integers(0, 4, size=(n, 3)).astype(float)
        y = rng.normal(size=n) * 10 ** rng.uniform(-2, 3)
        tree = RegressionTree(min_samples_leaf=int(rng.integers(1, 4))).fit(X, y)
        for node in range(len(tree.feature_)):
            if tree.feature_[node] >= 0:
                l, r = tree.children_left_[node], tree.children_right_[node]
                sse_ok &= tree.node_sse_[l] + tree.node_sse_[r] <= tree.node_sse_[node] * (1 + 1e-12) + 1e-12
        best = (None, None, 0.0)
        for j in range(3):
            vals = np.unique(X[:, j])
            for lo, hi in zip(vals[:-1], vals[1:]):
                left = X[:, j] <= 0.5 * (lo + hi)
                if left.sum() < 2 or (~left).sum() < 2:
                    continue
                g = sse(y) - sse(y[left]) - sse(y[~left])
                if g > best[2] + 1e-9 * max(sse(y), 1.0):
                    best = (j, 0.5 * (lo + hi), g)
        found = _best_split(X, y, 2)
        if best[0] is None:
            gain_ok &= found is None
        else:
            gain_ok &= found is not None and found[0] == best[0] and found[1] == best[1] and abs(found[2] - best[2]) <= 1e-9 * max(1.0, best[2])
    ok = separable and sse_ok and gain_ok
    assert record(4, "regression tree soundness", ok,
                  f"separable split={separable}; SSE monotone on 100 tables={sse_ok}; gains match enumeration={gain_ok}",
                  time.perf_counter() - t0)


# --- 5 and 6 share the planted runs ----------------------------------------

_planted_runs: dict = {}


def planted_runs():
    if not _planted_runs:
        t0 = time.perf_counter()
        for seed in SEEDS:
            spec = planted_spec(seed)
            com = generate(spec)
            ranking, _ = run_rq1(com, 30, seed)
            race = find_bellwether(com, RacingConfig(), seed)
            _planted_runs[seed] = (spec, com, ranking, race)
        _planted_runs["elapsed"] = time.perf_counter() - t0
    return _planted_runs


def test_criterion_5_bellwether_recovery():
    runs = planted_runs()
    rank1 = subset = 0
    ratios = []
    for seed in SEEDS:
        spec, com, ranking, race = runs[seed]
        rank1 += spec.planted_name in ranking.best
        subset += set(race.names) <= set(ranking.best)
        ratios.append(race.cost / sum(t.n_rows for t in com.sources))
    ok = rank1 >= PLANTED_RANK1_MIN and subset / 30 >= RACING_SUBSET_MIN and max(ratios) < RACING_COST_MAX
    assert record(5, "bellwether existence and recovery", ok,
                  f"(a) planted in group 1: {rank1}/30; (b) racing subset of rank 1: {subset}/30; "
                  f"(c) racing/exhaustive cost mean={np.mean(ratios):.3f} max={max(ratios):.3f}",
                  runs["elapsed"])


def graded(seed):
    envs = (PLANTED, EnvSpec("affine", 1.1, 2.0, 0.3), EnvSpec("affine", 0.9, 0.0, 1.0),
            EnvSpec("warp", 1.0, 0.0, 2.5), EnvSpec("shuffled"), EnvSpec("noise"))
    return generate(CommunitySpec(envs=envs, rows_per_env=300, n_binary=9, seed=seed))


def test_criterion_6_racing_round_bounds():
    t0 = time.perf_counter()
    worst_slack = None
    n_runs = 0
    # planted racing runs from criterion 5 plus varied configurations
    for seed in SEEDS:
        _, com, _, race = planted_runs()[seed]
        slack = (len(com.sources) - 1) + RacingConfig().lives - race.n_rounds
        worst_slack = slack if worst_slack is None else min(worst_slack, slack)
        n_runs += 1
    for seed in range(10):
        com = graded(seed)
        for cfg in (RacingConfig(lives=1), RacingConfig(lives=3, repeats=2), RacingConfig(budget=900), RacingConfig.fine_grained()):
            race = find_bellwether(com, cfg, seed)
            slack = (len(com.sources) - 1) + cfg.lives - race.n_rounds
            worst_slack = min(worst_slack, slack)
            n_runs += 1
    distinct = graded(100)
    cfg = RacingConfig(budget=10 * sum(t.n_rows for t in distinct.sources))
    race = find_bellwether(distinct, cfg, 100)
    bound = (len(distinct.sources) - 1) + cfg.lives
    strict = race.n_rounds < bound and len(race.eliminated) > 0
    ok = worst_slack >= 0 and strict
    assert record(6, "racing round bounds", ok,
                  f"R <= M-1+lives in {n_runs} runs (min slack {worst_slack}); distinct-quality community R={race.n_rounds} "
                  f"< {bound} with {len(race.eliminated)} eliminations",
                  time.perf_counter() - t0)


# --- 7 -------------------------------------------------------------------

def test_criterion_7_rq3_win_loss():
    t0 = time.perf_counter()
    good = 0
    totals = [0, 0]
    for seed in SEEDS:
        s = run_rq3(generate(planted_spec(seed)), repeats=1, seed=seed)
        good += s.wins >= s.losses
        totals[0] += s.wins
        totals[1] += s.losses
    ok = good / 30 >= RQ3_SEED_SHARE_MIN
    assert record(7, "win/loss against non-transfer", ok,
                  f"wins >= losses in {good}/30 seeds; overall {totals[0]} wins, {totals[1]} losses",
                  time.perf_counter() - t0)


# --- 8 -------------------------------------------------------------------

def test_criterion_8_transfer_comparison():
    t0 = time.perf_counter()
    _, costs, _ = run_rq4(generate(planted_spec(0)), repeats=30, seed=0)
    by = {c.method: c.total for c in costs}
    cheaper = by["beetle"] < by["linear"] and by["beetle"] < by["gp"]
    X = binary_grid(6)
    y = 100.0 * X[:, 0] + 10.0 * X[:, 1] + 3.0 * X[:, 2] + np.arange(64) * 0.5
    src = make_table("s", X, y)
    d = linear_fit(src, make_table("t", X, 2 * y + 5), source_rows=np.arange(64), min_samples_leaf=1)
    slope_err, icpt_err = abs(d.model.slope_ - 2.0), abs(d.model.intercept_ - 5.0)
    k_t = gp_fit(src, make_table("t", X, y), np.arange(0, 64, 4)).model.k_t_
    ok = cheaper and slope_err <= EXACT_TOL and icpt_err <= EXACT_TOL and abs(k_t - 1.0) <= EXACT_TOL
    assert record(8, "transfer baselines comparison", ok,
                  f"measurements beetle={by['beetle']} linear={by['linear']} gp={by['gp']}; "
                  f"linear slope err={slope_err:.1e} intercept err={icpt_err:.1e}; gp k_t={k_t:.12g}",
                  time.perf_counter() - t0)


# --- 9 -------------------------------------------------------------------

def _cli(*argv):
    out, err = io.StringIO(), io.StringIO()
    return cli_main(list(argv), out, err), out.getvalue()


def _snapshot(root: Path) -> dict:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_criterion_9_determinism(tmp_path):
    t0 = time.perf_counter()
    small = ("--sources", "4", "--targets", "2", "--rows", "200", "--options", "8")
    commands = [
        ("generate", "--seed", "7", *small),
        ("discover", "{m}", "--seed", "3"),
        ("transfer", "{m}", "--seed", "3", "--target", "env_05"),
        ("rq1", "{m}", "--seed", "3", "--repeats", "5"),
        ("rq2", "{m}", "--seed", "3", "--repeats", "3", "--frac-start", "0.05", "--frac-step", "0.05"),
        ("rq3", "{m}", "--seed", "3", "--repeats", "3", "--fractions", "0.2,0.6,1.0"),
        ("rq4", "{m}", "--seed", "3", "--repeats", "3"),
        ("report", "{d}/rq1/rq1_ranks.csv", "{d}/rq4/rq4_cost.csv"),
    ]
    snaps = []
    base = tmp_path / "run"
    for _ in range(2):
        # identical flags means identical paths: clear and redo in place
        if base.exists():
            shutil.rmtree(base)
        manifest = base / "gen" / "manifest.yaml"
        outputs = {}
        for cmd in commands:
            argv = [a.format(m=manifest, d=base) for a in cmd]
            target = base / cmd[0]
            extra = ["--out", str(target if cmd[0] not in ("discover", "transfer", "report") else base / f"{cmd[0]}.txt")]
            if cmd[0] == "generate":
                extra = ["--out", str(base / "gen")]
            code, text = _cli(*argv, *extra)
            outputs[cmd[0]] = (code, text)
        snaps.append((outputs, {k: v for k, v in _snapshot(base).items()}))
    identical = snaps[0] == snaps[1]
    all_ok = all(code == 0 for code, _ in snaps[0][0].values())
    com = load_community(base / "gen" / "manifest.yaml")
    again = load_community(save_community(com, tmp_path / "resaved"))
    round_trip = all(a.same_rows(b) and table_to_csv(a) == table_to_csv(b) for a, b in zip(com.tables, again.tables))
    round_trip &= (tmp_path / "resaved" / "manifest.yaml").read_bytes() == (base / "gen" / "manifest.yaml").read_bytes()
    ok = identical and all_ok and round_trip
    assert record(9, "determinism and reproducibility", ok,
                  f"{len(commands)} subcommands exit 0={all_ok}, byte-identical re-run={identical}; manifest round-trip={round_trip}",
                  time.perf_counter() - t0)


if __name__ == "__main__":
    import tempfile

    failed = 0
    tests = [v for k, v in sorted(globals().items()) if k.startswith("test_criterion_")]
    for fn in tests:
        try:
            if fn.__code__.co_argcount:
                with tempfile.TemporaryDirectory() as d:
                    fn(Path(d))
            else:
                fn()
        except AssertionError:
            failed += 1
    sys.exit(1 if failed else 0)
